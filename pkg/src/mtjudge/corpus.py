"""Corpus ingestion, instance assembly, and model persistence.

File formats:
  rankings CSV     header langpair,segid,sysid,rank; one judged system per
                   row, rows grouped into records by (langpair, segid)
  segments TSV     segid<TAB>sysid<TAB>text, reserved sysid REF marks the
                   reference translation of a segment
  sentence vectors sentence-id<TAB>whitespace-separated reals, ids formed
                   as segid/sysid (segid/REF for references)
  feature TSV      header segid, sysid, then one named column per feature
  segment scores   segid<TAB>sysid<TAB>score, scores printed with 9
                   decimals
  system scores    langpair<TAB>sysid<TAB>score (gold system quality)
  model artifact   versioned JSON document, written atomically
"""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from .correlations import PairJudgment
from .errors import DataError
from .features import (BUILTIN_FEATURES, MinMaxParams, sentence_bleu,
                       ter_lite, tokenize)
from .network import ModelArtifact, PairwiseInput

log = logging.getLogger(__name__)

REF_LABEL = "REF"
RANK_RANGE = (1, 5)

FORMAT_NAME = "mtjudge-model"
FORMAT_VERSION = 1


@dataclass
class RankingRecord:
    """One ranking task: systems ranked 1 (best) to 5 on one segment."""

    langpair: str
    segid: str
    entries: list  # (sysid, rank) in file order


def load_rankings_csv(path):
    """Parse a rankings CSV into records grouped by (langpair, segid)."""
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty rankings file") from None
        if header != ["langpair", "segid", "sysid", "rank"]:
            raise DataError(f"{path}: header must be langpair,segid,sysid,rank")
        records = {}
        seen = set()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            langpair, segid, sysid, rank_text = row
            try:
                rank = int(rank_text)
            except ValueError:
                raise DataError(f"{path}:{lineno}: rank {rank_text!r} is not an integer") from None
            if not RANK_RANGE[0] <= rank <= RANK_RANGE[1]:
                raise DataError(f"{path}:{lineno}: rank {rank} outside "
                                f"{RANK_RANGE[0]}..{RANK_RANGE[1]}")
            key = (langpair, segid)
            if (langpair, segid, sysid) in seen:
                raise DataError(f"{path}:{lineno}: duplicate system {sysid!r} "
                                f"in ranking for {langpair}/{segid}")
            seen.add((langpair, segid, sysid))
            if key not in records:
                records[key] = RankingRecord(langpair, segid, [])
            records[key].entries.append((sysid, rank))
    if not records:
        raise DataError(f"{path}: no ranking rows")
    return list(records.values())


def expand_rankings(records):
    """All pairwise judgments implied by the rankings.

    Every unordered pair of systems with unequal ranks yields one judgment
    (lower rank number wins); tied pairs are dropped and counted. Records
    with a single entry produce nothing.
    """
    judgments = []
    ties_dropped = 0
    for record in records:
        entries = record.entries
        for i in range(len(entries)):
            for j in range(i + 1, len(entries)):
                sys_a, rank_a = entries[i]
                sys_b, rank_b = entries[j]
                if rank_a == rank_b:
                    ties_dropped += 1
                elif rank_a < rank_b:
                    judgments.append(PairJudgment(record.langpair, record.segid,
                                                  sys_a, sys_b))
                else:
                    judgments.append(PairJudgment(record.langpair, record.segid,
                                                  sys_b, sys_a))
    return judgments, ties_dropped


def split_judgments(judgments, dev_fraction, seed):
    """Seeded shuffle split into (train, dev); both sides stay non-empty."""
    judgments = list(judgments)
    if not 0.0 < dev_fraction < 1.0:
        raise ValueError("dev_fraction must lie strictly between 0 and 1")
    if len(judgments) < 2:
        raise DataError("need at least two judgments to split off a dev set")
    order = np.random.default_rng([int(seed), 7919]).permutation(len(judgments))
    n_dev = min(max(1, int(round(dev_fraction * len(judgments)))), len(judgments) - 1)
    dev_set = set(int(i) for i in order[:n_dev])
    train = [j for i, j in enumerate(judgments) if i not in dev_set]
    dev = [j for i, j in enumerate(judgments) if i in dev_set]
    return train, dev


@dataclass
class SegmentBundle:
    """Reference tokens plus all system translations of one segment."""

    segid: str
    ref_tokens: list
    systems: dict  # sysid -> token list


def load_segments_tsv(path):
    refs = {}
    systems = {}
    order = []
    seen = set()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t", 2)
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected segid<TAB>sysid<TAB>text")
            segid, sysid, text = parts
            if (segid, sysid) in seen:
                raise DataError(f"{path}:{lineno}: duplicate sentence for "
                                f"segment {segid!r} system {sysid!r}")
            seen.add((segid, sysid))
            tokens = tokenize(text)
            if segid not in systems:
                systems[segid] = {}
                order.append(segid)
            if sysid == REF_LABEL:
                if not tokens:
                    raise DataError(f"{path}:{lineno}: empty reference for segment {segid!r}")
                refs[segid] = tokens
            else:
                systems[segid][sysid] = tokens
    bundles = {}
    for segid in order:
        if segid not in refs:
            raise DataError(f"{path}: segment {segid!r} has no {REF_LABEL} line")
        bundles[segid] = SegmentBundle(segid, refs[segid], systems[segid])
    if not bundles:
        raise DataError(f"{path}: no segments")
    return bundles


def load_sentence_vectors(path):
    """Read per-sentence vectors keyed by sentence id (segid/sysid)."""
    vectors = {}
    dim = None
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected id<TAB>values")
            sent_id, payload = parts
            if sent_id in vectors:
                raise DataError(f"{path}:{lineno}: duplicate sentence id {sent_id!r}")
            try:
                values = np.asarray([float(v) for v in payload.split()], dtype=float)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric vector value") from None
            if values.size == 0:
                raise DataError(f"{path}:{lineno}: empty vector")
            if dim is None:
                dim = values.size
            elif values.size != dim:
                raise DataError(f"{path}:{lineno}: expected {dim} values, got {values.size}")
            if not np.all(np.isfinite(values)):
                raise DataError(f"{path}:{lineno}: non-finite vector value")
            vectors[sent_id] = values
    if not vectors:
        raise DataError(f"{path}: no sentence vectors")
    return vectors


def feature_names(tables):
    """Built-in feature names followed by each table's columns, in order."""
    names = list(BUILTIN_FEATURES)
    for table in tables:
        for name in table.names:
            if name in names:
                raise DataError(f"duplicate feature column {name!r}")
            names.append(name)
    return names


def _sentence_vector(segid, label, tokens, synvecs, static_encoder):
    parts = []
    if synvecs is not None:
        vec = synvecs.get(f"{segid}/{label}")
        if vec is None:
            return None
        parts.append(vec)
    if static_encoder is not None:
        out, _ = static_encoder.encode(tokens)
        parts.append(out)
    if parts:
        return np.concatenate(parts)
    return np.zeros(0)


def _skip_vector(segid, sysid, hyp_tokens, ref_tokens, tables):
    values = [sentence_bleu(hyp_tokens, ref_tokens),
              ter_lite(hyp_tokens, ref_tokens)]
    for table in tables:
        row = table.get(segid, sysid)
        if row is None:
            return None
        values.extend(float(v) for v in row)
    return np.asarray(values, dtype=float)


def _bundle_tokens(bundles, segid, sysid):
    bundle = bundles.get(segid)
    if bundle is None:
        raise DataError(f"unknown segment {segid!r}")
    if sysid not in bundle.systems:
        raise DataError(f"unknown system {sysid!r} for segment {segid!r}")
    return bundle, bundle.systems[sysid]


def assemble_instances(judgments, bundles, *, synvecs=None, tables=(),
                       static_encoder=None, attach_tokens=False):
    """Build one PairwiseInput per judgment, winner in slot 1, label 1.

    Judgments naming unknown segments or systems are data errors. A
    judgment whose sentence vector or feature row is simply absent is
    dropped with a warning. Returns (instances, kept_judgments, dropped)
    with instances[i] built from kept_judgments[i].
    """
    instances = []
    kept = []
    dropped = 0
    for j in judgments:
        bundle, win_tokens = _bundle_tokens(bundles, j.segment, j.winner)
        _, lose_tokens = _bundle_tokens(bundles, j.segment, j.loser)
        ref_vec = _sentence_vector(j.segment, REF_LABEL, bundle.ref_tokens,
                                   synvecs, static_encoder)
        win_vec = _sentence_vector(j.segment, j.winner, win_tokens,
                                   synvecs, static_encoder)
        lose_vec = _sentence_vector(j.segment, j.loser, lose_tokens,
                                    synvecs, static_encoder)
        win_skip = _skip_vector(j.segment, j.winner, win_tokens,
                                bundle.ref_tokens, tables)
        lose_skip = _skip_vector(j.segment, j.loser, lose_tokens,
                                 bundle.ref_tokens, tables)
        pieces = (ref_vec, win_vec, lose_vec, win_skip, lose_skip)
        if any(piece is None for piece in pieces):
            dropped += 1
            log.warning("dropping judgment %s/%s vs %s on segment %s: missing input",
                        j.langpair, j.winner, j.loser, j.segment)
            continue
        instances.append(PairwiseInput(
            win_vec, lose_vec, ref_vec, win_skip, lose_skip, 1.0,
            win_tokens if attach_tokens else None,
            lose_tokens if attach_tokens else None,
            bundle.ref_tokens if attach_tokens else None))
        kept.append(j)
    return instances, kept, dropped


@dataclass
class ScoringItem:
    segid: str
    sysid: str
    trans: np.ndarray
    skip: np.ndarray
    ref: np.ndarray
    hyp_tokens: list
    ref_tokens: list


def assemble_scoring_items(bundles, *, synvecs=None, tables=(),
                           static_encoder=None):
    """One ScoringItem per (segment, system) found in the bundles."""
    items = []
    dropped = 0
    for bundle in bundles.values():
        ref_vec = _sentence_vector(bundle.segid, REF_LABEL, bundle.ref_tokens,
                                   synvecs, static_encoder)
        for sysid, tokens in bundle.systems.items():
            trans_vec = _sentence_vector(bundle.segid, sysid, tokens,
                                         synvecs, static_encoder)
            skip_vec = _skip_vector(bundle.segid, sysid, tokens,
                                    bundle.ref_tokens, tables)
            if ref_vec is None or trans_vec is None or skip_vec is None:
                dropped += 1
                log.warning("not scoring segment %s system %s: missing input",
                            bundle.segid, sysid)
                continue
            items.append(ScoringItem(bundle.segid, sysid, trans_vec, skip_vec,
                                     ref_vec, tokens, bundle.ref_tokens))
    return items, dropped


def write_segment_scores(path, rows):
    """Write segid<TAB>sysid<TAB>score lines, scores with 9 decimals."""
    with open(path, "w", encoding="utf-8") as handle:
        for segid, sysid, score in rows:
            handle.write(f"{segid}\t{sysid}\t{score:.9f}\n")


def load_segment_scores(path):
    scores = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected segid<TAB>sysid<TAB>score")
            key = (parts[0], parts[1])
            if key in scores:
                raise DataError(f"{path}:{lineno}: duplicate score for {key}")
            try:
                value = float(parts[2])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric score") from None
            if not np.isfinite(value):
                raise DataError(f"{path}:{lineno}: non-finite score")
            scores[key] = value
    if not scores:
        raise DataError(f"{path}: no segment scores")
    return scores


def load_system_scores(path):
    """Gold system quality: {langpair: {sysid: score}}."""
    table = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected langpair<TAB>sysid<TAB>score")
            langpair, sysid, score_text = parts
            per_lang = table.setdefault(langpair, {})
            if sysid in per_lang:
                raise DataError(f"{path}:{lineno}: duplicate system {sysid!r} "
                                f"for {langpair}")
            try:
                per_lang[sysid] = float(score_text)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric score") from None
    if not table:
        raise DataError(f"{path}: no system scores")
    return table


def save_model(artifact, path):
    """Serialize a ModelArtifact to versioned JSON, atomically.

    Floats go through repr-exact JSON so loading reproduces every value bit
    for bit; the document is written to a temp file in the same directory
    and renamed over the target.
    """
    doc = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "config": artifact.config,
        "minmax": artifact.minmax.to_dict(),
        "empty_trans": None if artifact.empty_trans is None
        else np.asarray(artifact.empty_trans, dtype=float).tolist(),
        "empty_skip": None if artifact.empty_skip is None
        else np.asarray(artifact.empty_skip, dtype=float).tolist(),
        "vocab": artifact.vocab,
        "params": {
            name: {"shape": list(np.asarray(arr).shape),
                   "values": np.asarray(arr, dtype=float).ravel().tolist()}
            for name, arr in artifact.values.items()
        },
    }
    tmp_path = f"{path}.tmp"
    try:
        with open(tmp_path, "w", encoding="utf-8") as handle:
            json.dump(doc, handle, indent=1)
            handle.write("\n")
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def load_model(path):
    """Load a model artifact, rejecting corrupted or unsupported files."""
    try:
        with open(path, encoding="utf-8") as handle:
            doc = json.load(handle)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: corrupted model file ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise DataError(f"{path}: not a {FORMAT_NAME} document")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported model format version {version!r}")
    try:
        config = doc["config"]
        minmax = MinMaxParams.from_dict(doc["minmax"])
        params_block = doc["params"]
    except KeyError as exc:
        raise DataError(f"{path}: model document missing {exc}") from None
    values = {}
    for name, block in params_block.items():
        try:
            shape = tuple(int(s) for s in block["shape"])
            flat = np.asarray(block["values"], dtype=float)
        except (KeyError, TypeError, ValueError):
            raise DataError(f"{path}: malformed parameter block {name!r}") from None
        expected = int(np.prod(shape)) if shape else 1
        if flat.size != expected:
            raise DataError(f"{path}: parameter {name!r} shape/value mismatch")
        if not np.all(np.isfinite(flat)):
            raise DataError(f"{path}: non-finite values in parameter {name!r}")
        values[name] = flat.reshape(shape)
    empty_trans = doc.get("empty_trans")
    empty_skip = doc.get("empty_skip")
    return ModelArtifact(
        config=config,
        values=values,
        minmax=minmax,
        empty_trans=None if empty_trans is None else np.asarray(empty_trans, dtype=float),
        empty_skip=None if empty_skip is None else np.asarray(empty_skip, dtype=float),
        vocab=doc.get("vocab"),
    )
