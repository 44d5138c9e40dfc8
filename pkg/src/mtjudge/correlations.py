"""Agreement statistics between metric scores and human judgments.

Segment-level quality is measured as a Kendall-style tau over pairwise
human judgments under one of three tie policies; system-level quality uses
Spearman's rho over rankings or Pearson's r over raw scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import DataError

TIE_POLICIES = ("wmt12_strict", "ties_ignored", "wmt14")


@dataclass(frozen=True)
class PairJudgment:
    """One human preference: on this segment, winner beat loser."""

    langpair: str
    segment: str
    winner: str
    loser: str


def classify_judgments(judgments, scores):
    """Count metric agreement over judgments: (concordant, discordant, ties).

    scores maps (segment, system) to a real number, higher is better. A
    judgment is concordant when the winner outscores the loser, discordant
    when the loser outscores the winner, and a metric tie otherwise.
    """
    con = dis = tie = 0
    for j in judgments:
        try:
            winner_score = scores[(j.segment, j.winner)]
            loser_score = scores[(j.segment, j.loser)]
        except KeyError as exc:
            raise DataError(f"no score for segment/system {exc.args[0]!r}") from None
        if winner_score > loser_score:
            con += 1
        elif winner_score < loser_score:
            dis += 1
        else:
            tie += 1
    return con, dis, tie


def tau_from_counts(con, dis, tie, policy):
    """Tau value for given concordant/discordant/metric-tie counts.

    wmt12_strict counts metric ties against the metric:
        (con - dis - tie) / (con + dis + tie)
    ties_ignored drops tied pairs altogether:
        (con - dis) / (con + dis)
    wmt14 keeps tied pairs in the denominator only:
        (con - dis) / (con + dis + tie)
    """
    if policy not in TIE_POLICIES:
        raise ValueError(f"unknown tie policy {policy!r}")
    if policy == "ties_ignored":
        denom = con + dis
        numer = con - dis
    elif policy == "wmt12_strict":
        denom = con + dis + tie
        numer = con - dis - tie
    else:
        denom = con + dis + tie
        numer = con - dis
    if denom == 0:
        raise DataError(f"tau ({policy}) undefined: no usable judgments")
    return numer / denom


def kendall_tau(judgments: Iterable[PairJudgment],
                scores: Mapping[tuple, float],
                policy: str = "wmt12_strict"):
    judgments = list(judgments)
    if not judgments:
        raise DataError("kendall_tau: no judgments")
    con, dis, tie = classify_judgments(judgments, scores)
    return tau_from_counts(con, dis, tie, policy)


def _as_float_vector(values, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr


def pearson_r(x, y):
    """Pearson correlation coefficient of two equal-length samples.

    Constant arrays have no defined correlation and raise DataError.
    """
    xv = _as_float_vector(x, "x")
    yv = _as_float_vector(y, "y")
    if xv.shape != yv.shape:
        raise ValueError("pearson_r: length mismatch")
    if xv.size < 2:
        raise DataError("pearson_r: need at least two points")
    xc = xv - xv.mean()
    yc = yv - yv.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        raise DataError("pearson_r: constant input has no correlation")
    return float(xc @ yc) / denom


def _check_permutation(ranks, name):
    if sorted(int(r) for r in ranks) != list(range(1, len(ranks) + 1)):
        raise DataError(f"{name} must be a permutation of 1..n (no ties)")


def spearman_rho(human_ranks, metric_ranks, allow_ties=False):
    """Rank correlation 1 - 6 sum(d^2) / (n (n^2 - 1)).

    Without allow_ties both arguments must be tie-free permutations of
    1..n. With allow_ties, average ranks are accepted and the coefficient
    falls back to the Pearson correlation of the rank vectors, which equals
    the closed formula whenever ranks are distinct.
    """
    hv = _as_float_vector(human_ranks, "human_ranks")
    mv = _as_float_vector(metric_ranks, "metric_ranks")
    if hv.shape != mv.shape:
        raise ValueError("spearman_rho: length mismatch")
    n = hv.size
    if n < 2:
        raise DataError("spearman_rho: need at least two systems")
    if allow_ties:
        return pearson_r(hv, mv)
    _check_permutation(hv, "human_ranks")
    _check_permutation(mv, "metric_ranks")
    d = hv - mv
    return 1.0 - 6.0 * float(d @ d) / (n * (n * n - 1.0))


def ranks_from_scores(scores: Mapping[str, float], average_ties=False):
    """Turn {system: score} into {system: rank} with rank 1 for the best.

    Tied scores are an error unless average_ties is set, in which case each
    tied group shares the mean of the ranks it occupies.
    """
    if not scores:
        raise DataError("ranks_from_scores: empty score map")
    items = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    ranks = {}
    i = 0
    while i < len(items):
        j = i
        while j < len(items) and items[j][1] == items[i][1]:
            j += 1
        if j - i > 1 and not average_ties:
            tied = ", ".join(name for name, _ in items[i:j])
            raise DataError(f"tied scores for systems: {tied}")
        shared = (i + 1 + j) / 2.0  # mean of the occupied ranks i+1 .. j
        for name, _ in items[i:j]:
            ranks[name] = shared
        i = j
    return ranks
