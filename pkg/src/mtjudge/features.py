"""Pairwise surface features and input scaling.

Built-in skip features are an add-one smoothed sentence BLEU and a
lightweight TER (plain word edit distance over reference length, no block
shifts). External metric columns come in through tab-separated tables.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import DataError

BUILTIN_FEATURES = ("sent_bleu", "ter_lite")

_BLEU_MAX_ORDER = 4


def tokenize(text):
    """NFC-normalize, lowercase, split on whitespace."""
    return unicodedata.normalize("NFC", text).lower().split()


def _ngram_counts(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def sentence_bleu(hyp_tokens, ref_tokens):
    """Smoothed sentence BLEU against a single reference.

    Modified n-gram precisions for n = 1..4 with add-one smoothing
    (hits + 1) / (total + 1), combined by geometric mean and multiplied by
    the brevity penalty exp(min(0, 1 - |ref| / |hyp|)). An empty hypothesis
    scores 0; an empty reference is a data error.
    """
    if not ref_tokens:
        raise DataError("sentence_bleu: empty reference")
    if not hyp_tokens:
        return 0.0
    log_precisions = 0.0
    for n in range(1, _BLEU_MAX_ORDER + 1):
        hyp_counts = _ngram_counts(hyp_tokens, n)
        ref_counts = _ngram_counts(ref_tokens, n)
        total = sum(hyp_counts.values())
        hits = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        log_precisions += math.log((hits + 1.0) / (total + 1.0))
    brevity = math.exp(min(0.0, 1.0 - len(ref_tokens) / len(hyp_tokens)))
    return brevity * math.exp(log_precisions / _BLEU_MAX_ORDER)


def ter_lite(hyp_tokens, ref_tokens):
    """Word-level Levenshtein distance divided by reference length.

    No block-shift moves: this is strictly insertions, deletions and
    substitutions, so scores are comparable to TER only loosely. Values can
    exceed 1 for long hypotheses.
    """
    if not ref_tokens:
        raise DataError("ter_lite: empty reference")
    previous = list(range(len(ref_tokens) + 1))
    for i, hyp_tok in enumerate(hyp_tokens, start=1):
        current = [i]
        for j, ref_tok in enumerate(ref_tokens, start=1):
            cost = 0 if hyp_tok == ref_tok else 1
            current.append(min(previous[j] + 1,
                               current[j - 1] + 1,
                               previous[j - 1] + cost))
        previous = current
    return previous[-1] / len(ref_tokens)


def fit_minmax(rows):
    """Per-column minima and maxima of a 2-d sample matrix."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        raise ValueError("fit_minmax expects a 2-d array")
    if rows.shape[0] == 0:
        raise DataError("fit_minmax: no rows to fit")
    if not np.all(np.isfinite(rows)):
        raise DataError("fit_minmax: non-finite inputs")
    return rows.min(axis=0), rows.max(axis=0)


def apply_minmax(rows, mins, maxs):
    """Scale columns to [-1, 1] via x' = 2 (x - min) / (max - min) - 1.

    Degenerate columns (max == min) map to 0. Values outside the fitted
    range are not clamped, so unseen data may leave [-1, 1].
    """
    rows = np.asarray(rows, dtype=float)
    mins = np.asarray(mins, dtype=float)
    maxs = np.asarray(maxs, dtype=float)
    span = maxs - mins
    safe = np.where(span == 0.0, 1.0, span)
    scaled = 2.0 * (rows - mins) / safe - 1.0
    return np.where(span == 0.0, 0.0, scaled)


@dataclass
class MinMaxParams:
    """Column ranges fitted on training data, grouped by input role.

    Translation coordinates pool both hypothesis slots, reference
    coordinates are fitted separately, and each skip feature pools both
    skip slots.
    """

    trans_min: np.ndarray
    trans_max: np.ndarray
    ref_min: np.ndarray
    ref_max: np.ndarray
    skip_min: np.ndarray
    skip_max: np.ndarray

    @classmethod
    def fit(cls, trans_rows, ref_rows, skip_rows):
        tmin, tmax = fit_minmax(trans_rows)
        rmin, rmax = fit_minmax(ref_rows)
        smin, smax = fit_minmax(skip_rows)
        return cls(tmin, tmax, rmin, rmax, smin, smax)

    def scale_trans(self, rows):
        return apply_minmax(rows, self.trans_min, self.trans_max)

    def scale_ref(self, rows):
        return apply_minmax(rows, self.ref_min, self.ref_max)

    def scale_skip(self, rows):
        return apply_minmax(rows, self.skip_min, self.skip_max)

    def to_dict(self):
        return {
            "trans_min": self.trans_min.tolist(),
            "trans_max": self.trans_max.tolist(),
            "ref_min": self.ref_min.tolist(),
            "ref_max": self.ref_max.tolist(),
            "skip_min": self.skip_min.tolist(),
            "skip_max": self.skip_max.tolist(),
        }

    @classmethod
    def from_dict(cls, payload):
        try:
            return cls(**{key: np.asarray(payload[key], dtype=float)
                          for key in ("trans_min", "trans_max", "ref_min",
                                      "ref_max", "skip_min", "skip_max")})
        except KeyError as exc:
            raise DataError(f"minmax block missing field {exc}") from exc


@dataclass
class FeatureTable:
    """External per-(segment, system) feature columns."""

    names: list[str]
    rows: dict[tuple[str, str], np.ndarray]

    def get(self, segid, sysid):
        return self.rows.get((segid, sysid))

    def select(self, segid, sysid, names):
        """Feature values in the requested order; None when the row is absent."""
        row = self.rows.get((segid, sysid))
        if row is None:
            return None
        picked = []
        for name in names:
            try:
                picked.append(row[self.names.index(name)])
            except ValueError:
                raise DataError(f"unknown feature column {name!r}") from None
        return np.asarray(picked, dtype=float)


def load_feature_table(path):
    """Read a feature TSV: header segid, sysid, then one column per feature.

    Duplicate (segment, system) keys, non-numeric cells, and short rows are
    rejected with the offending line number.
    """
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise DataError(f"{path}: empty feature table")
    header = lines[0].split("\t")
    if len(header) < 3 or header[0] != "segid" or header[1] != "sysid":
        raise DataError(f"{path}: header must start with segid<TAB>sysid")
    names = header[2:]
    if len(set(names)) != len(names):
        raise DataError(f"{path}: duplicate feature column names")
    rows = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = line.split("\t")
        if len(cells) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} columns, got {len(cells)}")
        key = (cells[0], cells[1])
        if key in rows:
            raise DataError(f"{path}:{lineno}: duplicate entry for segment "
                            f"{key[0]!r} system {key[1]!r}")
        try:
            values = np.asarray([float(cell) for cell in cells[2:]], dtype=float)
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-numeric feature value") from None
        if not np.all(np.isfinite(values)):
            raise DataError(f"{path}:{lineno}: non-finite feature value")
        rows[key] = values
    return FeatureTable(names=names, rows=rows)
