"""Acceptance suite: nine end-to-end properties of the toolkit.

Every test prints exactly one PASS/FAIL line with the measured numbers, so
`pytest -v -s tests/test_acceptance.py` doubles as the acceptance report.
The planted-quality model shared by criteria 3-5 is trained once per module.
"""

import contextlib
import io
import itertools
import math
import time

import numpy as np
import pytest

from mtjudge import (DataError, EmbeddingTable, FineTune, OptimizerConfig,
                     PairJudgment, PairwiseInput, empty_spec_for, gradcheck,
                     kendall_tau, load_model, make_encoder, pearson_r, prefer,
                     save_model, score_batch, spearman_rho, tau_from_counts,
                     ter_lite, train)
from mtjudge import cli
from mtjudge.network import (Batch, BestEpochTracker, batch_loss_and_grads,
                             init_network_params, prediction_batch)
from mtjudge.numeric import ParamStore

from conftest import random_instances, write_text_corpus


def _report(num, title, ok, detail):
    print(f"acceptance {num} — {title}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"acceptance {num} ({title}) failed: {detail}"


# --------------------------------------------------------------------------
# criterion 1: analytic gradients agree with finite differences


def _network_loss(store, batch):
    def loss_fn():
        return batch_loss_and_grads(store, batch)

    return loss_fn


def _corpus_loss(store, encoder, sequences, readouts):
    """Sum of linear readouts over encoded sequences plus the fine-tune
    penalty, with gradients accumulated exactly as training does."""

    def loss_fn():
        total = 0.0
        grads = store.zero_grads()
        for tokens, readout in zip(sequences, readouts):
            out, cache = encoder.encode(tokens)
            total += float(readout @ out)
            encoder.backward(cache, readout.copy(), grads)
        pen_value, pen_grads = encoder.penalty()
        for name, grad in pen_grads.items():
            grads[name] = grads[name] + grad
        return total + pen_value, grads

    return loss_fn


def _encoder_gradcheck(rng, kind, finetune, **kwargs):
    vocab = ["the", "cat", "sat", "mat", "dog"]
    table = EmbeddingTable(vocab, rng.normal(size=(len(vocab), 3)))
    encoder = make_encoder(kind, table, finetune=FineTune(finetune), **kwargs)
    store = ParamStore()
    encoder.register(store, rng)
    sequences = [list(rng.choice(vocab, size=rng.integers(1, 7)))
                 for _ in range(20)]
    readouts = [rng.normal(size=encoder.out_dim) for _ in range(20)]
    return gradcheck(_corpus_loss(store, encoder, sequences, readouts), store)


def test_1_gradients_match_finite_differences():
    rng = np.random.default_rng(20250814)
    started = time.time()

    store = init_network_params(3, 2, 4, rng)
    batch = Batch.stack(random_instances(rng, 20))
    errors = {"network": gradcheck(_network_loss(store, batch), store)}
    errors["cnn"] = _encoder_gradcheck(rng, "cnn", "frozen",
                                       n_filters=4, window=2, pool=2)
    errors["bilstm"] = _encoder_gradcheck(rng, "bilstm", "frozen", hidden=3)
    errors["emb_moderate"] = _encoder_gradcheck(rng, "bow", "moderate")
    errors["emb_full"] = _encoder_gradcheck(rng, "cnn", "full",
                                            n_filters=3, window=2, pool=2)
    elapsed = time.time() - started

    worst = max(errors.values())
    detail = ", ".join(f"{name} {err:.2e}" for name, err in errors.items())
    _report(1, "gradient correctness",
            worst < 1e-4 and elapsed < 60.0,
            f"max rel err {worst:.2e} [{detail}], {elapsed:.1f}s")


# --------------------------------------------------------------------------
# criterion 2: skip-features-only mode is a well-behaved convex problem


def test_2_full_batch_loss_is_monotone_for_logistic_mode():
    gen = np.random.default_rng(4242)
    instances = []
    while len(instances) < 100:
        a, b = gen.uniform(0.0, 1.0, 2)
        if abs(a - b) <= 0.1:
            continue
        instances.append(PairwiseInput(
            np.zeros(0), np.zeros(0), np.zeros(0),
            np.array([a, gen.uniform(-1, 1)]),
            np.array([b, gen.uniform(-1, 1)]),
            1.0 if a > b else 0.0))
    store = init_network_params(0, 2, 0, gen)
    batch = Batch.stack(instances)

    losses = []
    for _ in range(500):
        value, grads = batch_loss_and_grads(store, batch)
        losses.append(value)
        for name in store.names():           # plain full-batch descent
            live = store[name]
            live -= 0.005 * grads[name]
    losses.append(batch_loss_and_grads(store, batch)[0])

    diffs = np.diff(losses)
    _report(2, "convex sub-case sanity",
            bool(np.all(diffs <= 0.0)) and losses[-1] < losses[0],
            f"loss {losses[0]:.2f} -> {losses[-1]:.2f} over 500 full-batch "
            f"steps, max increase {diffs.max():.2e}")


# --------------------------------------------------------------------------
# criteria 3-5: one planted-quality model, probed three ways


@pytest.fixture(scope="module")
def planted_model(planted):
    started = time.time()
    artifact = train(planted.train, planted.dev,
                     OptimizerConfig(seed=7, max_epochs=800), hidden=4)
    return artifact, time.time() - started


@pytest.fixture(scope="module")
def planted_scores(planted, planted_model):
    artifact, _ = planted_model
    trans_raw, skips_raw, refs_raw = planted.scoring_arrays()
    trans = artifact.minmax.scale_trans(trans_raw)
    skips = artifact.minmax.scale_skip(skips_raw)
    refs = artifact.minmax.scale_ref(refs_raw)
    return {strategy: score_batch(artifact.values, trans, skips, refs,
                                  empty_spec_for(artifact, strategy))
            for strategy in ("zero", "mean")}


def test_3_planted_judgments_reach_95_percent_dev_accuracy(planted,
                                                           planted_model):
    artifact, elapsed = planted_model
    probs = prediction_batch(artifact.values, planted.dev, artifact.minmax)
    labels = np.array([inst.label for inst in planted.dev])
    accuracy = float(np.mean((probs > 0.5) == (labels == 1.0)))
    _report(3, "end-to-end learnability",
            accuracy >= 0.95 and elapsed < 120.0,
            f"held-out accuracy {accuracy:.3f} after 800 epochs "
            f"in {elapsed:.1f}s")


def test_4_absolute_scores_are_acyclic_and_match_planted_order(
        planted, planted_scores):
    n_seg, n_sys = planted.N_SEGMENTS, planted.N_SYSTEMS
    scores = planted_scores["zero"].reshape(n_seg, n_sys)

    cycles = 0
    for seg in range(n_seg):
        row = scores[seg]
        for a, b, c in itertools.combinations(range(n_sys), 3):
            p_ab = prefer(row[a], row[b])
            p_bc = prefer(row[b], row[c])
            p_ca = prefer(row[c], row[a])
            if p_ab == p_bc == p_ca != 0:
                cycles += 1

    con = dis = 0
    for seg in range(n_seg):
        for a, b in itertools.combinations(range(n_sys), 2):
            gold_diff = planted.f[seg, a] - planted.f[seg, b]
            metric_diff = scores[seg, a] - scores[seg, b]
            if gold_diff == 0.0 or metric_diff == 0.0:
                continue
            if (gold_diff > 0) == (metric_diff > 0):
                con += 1
            else:
                dis += 1
    tau = (con - dis) / (con + dis)

    _report(4, "absolute-vs-pairwise consistency",
            cycles == 0 and tau >= 0.9,
            f"{cycles} preference cycles over all system triples, "
            f"tau {tau:.4f} against the planted ordering")


def test_5_mean_empty_is_small_and_agrees_with_zero_empty(planted_model,
                                                          planted_scores):
    artifact, _ = planted_model
    worst_trans = float(np.max(np.abs(artifact.empty_trans)))
    worst_skip = float(np.max(np.abs(artifact.empty_skip)))

    zero, mean = planted_scores["zero"], planted_scores["mean"]
    sign_zero = np.sign(zero[:, None] - zero[None, :])
    sign_mean = np.sign(mean[:, None] - mean[None, :])
    upper = np.triu_indices(len(zero), k=1)
    product = sign_zero[upper] * sign_mean[upper]
    agree = int(np.sum(product > 0))
    disagree = int(np.sum(product < 0))
    tau = (agree - disagree) / (agree + disagree)

    _report(5, "empty-vector equivalence",
            worst_trans <= 0.1 and worst_skip <= 0.1 and tau >= 0.9,
            f"max |mean-empty| coords {worst_trans:.4f} (vectors) / "
            f"{worst_skip:.4f} (skips), zero-vs-mean ranking tau {tau:.4f}")


# --------------------------------------------------------------------------
# criterion 6: correlation statistics against independent oracles


def _random_classifier_fixture(gen):
    n_sys = int(gen.integers(3, 7))
    systems = [f"sys{i}" for i in range(n_sys)]
    scores, judgments = {}, []
    for seg in range(int(gen.integers(2, 5))):
        segid = f"s{seg}"
        for sysid in systems:
            scores[(segid, sysid)] = float(gen.integers(0, 4)) / 3.0
        for a, b in itertools.combinations(range(n_sys), 2):
            if gen.random() < 0.5:
                continue
            winner, loser = ((systems[a], systems[b])
                             if gen.random() < 0.5
                             else (systems[b], systems[a]))
            judgments.append(PairJudgment("xx-yy", segid, winner, loser))
    return scores, judgments


def test_6_correlation_statistics_match_oracles():
    gen = np.random.default_rng(606)

    tau_fixtures = 0
    while tau_fixtures < 100:
        scores, judgments = _random_classifier_fixture(gen)
        if not judgments:
            continue
        con = dis = tie = 0
        for j in judgments:
            delta = scores[(j.segment, j.winner)] - scores[(j.segment, j.loser)]
            if delta > 0:
                con += 1
            elif delta < 0:
                dis += 1
            else:
                tie += 1
        expected = {"wmt12_strict": (con - dis - tie) / (con + dis + tie),
                    "wmt14": (con - dis) / (con + dis + tie)}
        if con + dis:
            expected["ties_ignored"] = (con - dis) / (con + dis)
        for policy, want in expected.items():
            assert kendall_tau(judgments, scores, policy) == want
        tau_fixtures += 1

    worst_gap = 0.0
    for _ in range(100):
        n = int(gen.integers(3, 21))
        ranks_a = [int(v) for v in gen.permutation(n) + 1]
        ranks_b = [int(v) for v in gen.permutation(n) + 1]
        gap = abs(spearman_rho(ranks_a, ranks_b)
                  - pearson_r([float(v) for v in ranks_a],
                              [float(v) for v in ranks_b]))
        worst_gap = max(worst_gap, gap)

    triple = tuple(tau_from_counts(6, 2, 2, policy)
                   for policy in ("wmt12_strict", "ties_ignored", "wmt14"))
    rho = spearman_rho([1, 2, 3, 4, 5], [1, 3, 2, 5, 4])
    r = pearson_r([1.0, 2.0, 3.0], [1.0, 2.0, 4.0])
    examples_exact = (triple == (0.2, 0.5, 0.4) and rho == 0.8
                      and abs(r - 3.0 / math.sqrt(28.0 / 3.0)) <= 1e-12)

    _report(6, "correlation oracles",
            examples_exact and worst_gap <= 1e-12,
            f"100 classifier fixtures exact, spearman-vs-pearson gap "
            f"{worst_gap:.1e}, worked examples {triple} / {rho} / {r:.5f}")


# --------------------------------------------------------------------------
# criterion 7: edit distance against a recursive oracle, exhaustively


def test_7_edit_distance_matches_recursive_oracle_exhaustively():
    started = time.time()
    alphabet = ("a", "b", "c")
    by_len = {0: [()]}
    for length in range(1, 7):
        by_len[length] = [s + (tok,) for s in by_len[length - 1]
                          for tok in alphabet]
    strings = [s for length in range(7) for s in by_len[length]]

    # suffix recursion memoized bottom-up: shorter suffixes always come first
    dist = {}
    for hyp in strings:
        for ref in strings:
            if not hyp:
                dist[(hyp, ref)] = len(ref)
            elif not ref:
                dist[(hyp, ref)] = len(hyp)
            elif hyp[0] == ref[0]:
                dist[(hyp, ref)] = dist[(hyp[1:], ref[1:])]
            else:
                dist[(hyp, ref)] = 1 + min(dist[(hyp[1:], ref)],
                                           dist[(hyp, ref[1:])],
                                           dist[(hyp[1:], ref[1:])])

    mismatches = pairs = 0
    for hyp in strings:
        for ref in strings[1:]:            # empty reference is rejected below
            if ter_lite(hyp, ref) != dist[(hyp, ref)] / len(ref):
                mismatches += 1
            pairs += 1
    with pytest.raises(DataError):
        ter_lite(("a",), ())
    elapsed = time.time() - started

    _report(7, "edit-distance oracle",
            mismatches == 0,
            f"{pairs} exhaustive pairs over a 3-token alphabet, "
            f"{mismatches} mismatches, {elapsed:.0f}s")


# --------------------------------------------------------------------------
# criterion 8: determinism and persistence


def test_8_seeded_runs_are_byte_identical_and_roundtrip_exactly(
        tmp_path, planted, planted_model):
    outputs = []
    for run in ("one", "two"):
        root = tmp_path / run
        root.mkdir()
        paths = write_text_corpus(root)
        model = root / "model.json"
        with contextlib.redirect_stdout(io.StringIO()):
            rc = cli.main(["train",
                           "--rankings", str(paths["rankings"]),
                           "--segments", str(paths["segments"]),
                           "--embeddings", str(paths["embeddings"]),
                           "--epochs", "8", "--seed", "11",
                           "--out", str(model)])
        assert rc == 0
        outputs.append(model.read_bytes()
                       + (root / "model.json.log.tsv").read_bytes())
    identical = outputs[0] == outputs[1]

    artifact, _ = planted_model
    saved = tmp_path / "planted.json"
    save_model(artifact, saved)
    loaded = load_model(saved)
    before = prediction_batch(artifact.values, planted.dev, artifact.minmax)
    after = prediction_batch(loaded.values, planted.dev, loaded.minmax)
    gap = float(np.max(np.abs(before - after)))

    _report(8, "determinism and persistence",
            identical and gap <= 1e-12,
            f"two seeded runs byte-identical: {identical}, "
            f"round-trip forward gap {gap:.1e}")


# --------------------------------------------------------------------------
# criterion 9: early stopping keeps the latest of the best epochs


def test_9_early_stopping_picks_latest_of_the_best(rng):
    outcomes = []
    for trajectory, want in (([0.1, 0.3, 0.3, 0.2], 3),
                             ([0.5, 0.5, 0.5], 3),
                             ([0.4, 0.2, 0.1], 1)):
        tracker = BestEpochTracker()
        for epoch, tau in enumerate(trajectory, start=1):
            tracker.offer(epoch, tau)
        outcomes.append((trajectory, tracker.best_epoch, want))

    instances = random_instances(rng, 40)
    taus = []
    artifact = train(instances[:30], instances[30:],
                     OptimizerConfig(seed=5, max_epochs=15), hidden=2,
                     epoch_hook=lambda epoch, loss, tau: taus.append(tau))
    best = max(taus)
    latest_best = max(i + 1 for i, tau in enumerate(taus) if tau == best)
    selected_ok = artifact.config["selected_epoch"] == latest_best

    ok = all(got == want for _, got, want in outcomes) and selected_ok
    detail = ("; ".join(f"{traj} -> epoch {got} (want {want})"
                        for traj, got, want in outcomes)
              + f"; live run selected {artifact.config['selected_epoch']}"
              f" == latest best {latest_best}")
    _report(9, "early-stopping rule", ok, detail)
