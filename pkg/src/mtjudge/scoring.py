"""Absolute segment scores from the pairwise judge.

The trained model only compares two translations, so an absolute score for
a single translation t is obtained by comparing it against an "empty"
translation slot: score(t) = p(t, empty, ref) - p(empty, t, ref). The empty
slot is either all zeros (the scale's midpoint after min-max normalization)
or the per-coordinate mean of the normalized training inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .network import Batch, forward_batch

EMPTY_STRATEGIES = ("zero", "mean")
AGGREGATIONS = ("mean", "sign")


@dataclass(frozen=True)
class EmptyVectorSpec:
    """Stand-in content for the vacant translation slot."""

    strategy: str
    trans: np.ndarray
    skip: np.ndarray


def zero_empty(x_dim, skip_dim):
    return EmptyVectorSpec("zero", np.zeros(int(x_dim)), np.zeros(int(skip_dim)))


def build_mean_empty(trans_rows, skip_rows):
    """Column means of normalized training inputs, both slots pooled."""
    trans_rows = np.asarray(trans_rows, dtype=float)
    skip_rows = np.asarray(skip_rows, dtype=float)
    if trans_rows.ndim != 2 or skip_rows.ndim != 2 or trans_rows.shape[0] == 0:
        raise DataError("build_mean_empty expects non-empty 2-d inputs")
    return EmptyVectorSpec("mean", trans_rows.mean(axis=0), skip_rows.mean(axis=0))


def empty_spec_for(artifact, strategy):
    """Resolve an empty-slot spec against a trained model."""
    if strategy == "zero":
        return zero_empty(artifact.x_dim, artifact.skip_dim)
    if strategy == "mean":
        if artifact.empty_trans is None or artifact.empty_skip is None:
            raise DataError("model artifact has no stored mean-empty vectors")
        return EmptyVectorSpec("mean",
                               np.asarray(artifact.empty_trans, dtype=float),
                               np.asarray(artifact.empty_skip, dtype=float))
    raise ValueError(f"unknown empty strategy {strategy!r}")


def score_batch(values, trans_rows, skip_rows, ref_rows, empty):
    """Absolute scores for n already-normalized translations.

    Each translation is played against the empty slot in both orders and the
    two preference probabilities are subtracted, so the score is positive
    when the model prefers the translation over emptiness.
    """
    trans_rows = np.atleast_2d(np.asarray(trans_rows, dtype=float))
    skip_rows = np.atleast_2d(np.asarray(skip_rows, dtype=float))
    ref_rows = np.atleast_2d(np.asarray(ref_rows, dtype=float))
    n = trans_rows.shape[0]
    if trans_rows.shape[1] != empty.trans.shape[0]:
        raise DataError("translation vector width does not match the empty slot")
    if skip_rows.shape[1] != empty.skip.shape[0]:
        raise DataError("skip feature width does not match the empty slot")
    empty_trans = np.tile(empty.trans, (n, 1))
    empty_skip = np.tile(empty.skip, (n, 1))
    fore, _ = forward_batch(values, Batch(trans_rows, empty_trans, ref_rows,
                                          skip_rows, empty_skip))
    back, _ = forward_batch(values, Batch(empty_trans, trans_rows, ref_rows,
                                          empty_skip, skip_rows))
    return fore - back


def absolute_score(x_t, skip_t, x_r, values, empty):
    """Score one normalized translation vector against its reference."""
    scores = score_batch(values, np.atleast_2d(x_t), np.atleast_2d(skip_t),
                         np.atleast_2d(x_r), empty)
    return float(scores[0])


def prefer(score_a, score_b):
    """Pairwise preference induced by absolute scores: 1 if a wins, -1 if b
    wins, 0 on an exact tie (surfaced, never silently broken)."""
    if score_a > score_b:
        return 1
    if score_a < score_b:
        return -1
    return 0


def system_score(segment_scores, method="mean"):
    """Aggregate a system's segment scores: plain mean, or the fraction of
    segments scored strictly positive ("sign")."""
    scores = np.asarray(list(segment_scores), dtype=float)
    if scores.size == 0:
        raise DataError("system_score: no segment scores")
    if method == "mean":
        return float(scores.mean())
    if method == "sign":
        return float(np.count_nonzero(scores > 0.0) / scores.size)
    raise ValueError(f"unknown aggregation {method!r}")
