"""Pairwise preference network: forward pass, gradients, training loop.

The judge scores which of two translations better matches a reference. Each
translation pairs with the reference in its own tanh block, a third block
compares the translations to each other, and the output sigmoid combines
all three blocks with the raw skip features of both translations. With
hidden=0 the blocks disappear and the model degenerates to logistic
regression on skip features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correlations import tau_from_counts
from .errors import DataError, NumericError
from .features import MinMaxParams
from .numeric import (OptimizerConfig, ParamStore, adagrad_step, sigmoid,
                      xavier_init)

# Probabilities are clamped this far away from {0, 1} before any log.
PROB_FLOOR = 1e-12


@dataclass
class PairwiseInput:
    """One comparison: two translation vectors, a reference vector, and the
    skip features of each translation against the reference.

    When training drives an encoder, the vector fields hold only the
    precomputed (normalizable) part, possibly empty, and the token fields
    supply the text for on-the-fly encoding.
    """

    hyp1: np.ndarray
    hyp2: np.ndarray
    ref: np.ndarray
    skip1: np.ndarray
    skip2: np.ndarray
    label: float | None = None
    hyp1_tokens: list | None = None
    hyp2_tokens: list | None = None
    ref_tokens: list | None = None

    def mirrored(self):
        """Slot-swapped copy; a label y becomes 1 - y."""
        label = None if self.label is None else 1.0 - self.label
        return PairwiseInput(self.hyp2, self.hyp1, self.ref,
                             self.skip2, self.skip1, label,
                             self.hyp2_tokens, self.hyp1_tokens, self.ref_tokens)


def symmetric_expand(instances):
    """Each labeled instance followed by its mirrored copy (exact doubling)."""
    out = []
    for inst in instances:
        if inst.label is None:
            raise DataError("symmetric expansion requires labeled instances")
        out.append(inst)
        out.append(inst.mirrored())
    return out


class Batch:
    """Row-stacked instances for vectorized forward/backward passes."""

    def __init__(self, hyp1, hyp2, ref, skip1, skip2, labels=None):
        self.hyp1 = np.atleast_2d(np.asarray(hyp1, dtype=float))
        self.hyp2 = np.atleast_2d(np.asarray(hyp2, dtype=float))
        self.ref = np.atleast_2d(np.asarray(ref, dtype=float))
        self.skip1 = np.atleast_2d(np.asarray(skip1, dtype=float))
        self.skip2 = np.atleast_2d(np.asarray(skip2, dtype=float))
        self.labels = None if labels is None else np.asarray(labels, dtype=float)

    @classmethod
    def stack(cls, instances):
        if not instances:
            raise DataError("cannot stack an empty instance list")
        labels = [inst.label for inst in instances]
        return cls(np.vstack([i.hyp1 for i in instances]),
                   np.vstack([i.hyp2 for i in instances]),
                   np.vstack([i.ref for i in instances]),
                   np.vstack([i.skip1 for i in instances]),
                   np.vstack([i.skip2 for i in instances]),
                   None if any(l is None for l in labels) else labels)

    def take(self, idx):
        labels = None if self.labels is None else self.labels[idx]
        return Batch(self.hyp1[idx], self.hyp2[idx], self.ref[idx],
                     self.skip1[idx], self.skip2[idx], labels)

    def __len__(self):
        return self.hyp1.shape[0]


def init_network_params(x_dim, skip_dim, hidden, rng, store=None):
    """Xavier-initialized weights and zero biases in a ParamStore.

    hidden=0 omits the hidden blocks entirely (skip-features-only model).
    """
    if x_dim < 0 or skip_dim < 0 or hidden < 0:
        raise ValueError("dimensions must be non-negative")
    if hidden > 0 and x_dim == 0:
        raise ValueError("hidden blocks need sentence vectors; "
                         "use hidden=0 for a skip-features-only model")
    out_len = 3 * hidden + 2 * skip_dim
    if out_len == 0:
        raise ValueError("model would have no inputs at all")
    if store is None:
        store = ParamStore()
    if hidden > 0:
        for name in ("cmp1", "cmp2", "sim"):
            store.add(f"{name}_w", xavier_init((hidden, 2 * x_dim), rng), decay=True)
            store.add(f"{name}_b", np.zeros(hidden))
    store.add("out_w", xavier_init((out_len,), rng), decay=True)
    store.add("out_b", np.zeros(1))
    return store


def forward_batch(values, batch):
    """Preference probabilities p(slot-1 translation is better), one per row.

    Output is clamped to [PROB_FLOOR, 1 - PROB_FLOOR] so downstream logs
    stay finite. Also returns the cache consumed by backward_batch.
    """
    with_hidden = "cmp1_w" in values
    if with_hidden:
        x1r = np.hstack([batch.hyp1, batch.ref])
        x2r = np.hstack([batch.hyp2, batch.ref])
        x12 = np.hstack([batch.hyp1, batch.hyp2])
        h1 = np.tanh(x1r @ values["cmp1_w"].T + values["cmp1_b"])
        h2 = np.tanh(x2r @ values["cmp2_w"].T + values["cmp2_b"])
        h12 = np.tanh(x12 @ values["sim_w"].T + values["sim_b"])
        feats = np.hstack([h12, h1, h2, batch.skip1, batch.skip2])
        cache = (x1r, x2r, x12, h1, h2, h12, feats)
    else:
        feats = np.hstack([batch.skip1, batch.skip2])
        cache = (None, None, None, None, None, None, feats)
    z = feats @ values["out_w"] + values["out_b"][0]
    probs = np.clip(sigmoid(z), PROB_FLOOR, 1.0 - PROB_FLOOR)
    return probs, cache


def forward(values, instance):
    probs, _ = forward_batch(values, Batch.stack([instance]))
    return float(probs[0])


def backward_batch(values, batch, cache, d_z, want_input_grads=False):
    """Parameter gradients given dL/dz per row; optionally also gradients
    with respect to the three input vector groups (for encoder training)."""
    x1r, x2r, x12, h1, h2, h12, feats = cache
    grads = {"out_w": feats.T @ d_z, "out_b": np.array([d_z.sum()])}
    input_grads = None
    if "cmp1_w" in values:
        hidden = h1.shape[1]
        w_out = values["out_w"]
        d_h12 = np.outer(d_z, w_out[:hidden])
        d_h1 = np.outer(d_z, w_out[hidden:2 * hidden])
        d_h2 = np.outer(d_z, w_out[2 * hidden:3 * hidden])
        d_a1 = d_h1 * (1.0 - h1 * h1)
        d_a2 = d_h2 * (1.0 - h2 * h2)
        d_a12 = d_h12 * (1.0 - h12 * h12)
        grads["cmp1_w"] = d_a1.T @ x1r
        grads["cmp1_b"] = d_a1.sum(axis=0)
        grads["cmp2_w"] = d_a2.T @ x2r
        grads["cmp2_b"] = d_a2.sum(axis=0)
        grads["sim_w"] = d_a12.T @ x12
        grads["sim_b"] = d_a12.sum(axis=0)
        if want_input_grads:
            x_dim = batch.hyp1.shape[1]
            d_hyp1 = d_a1 @ values["cmp1_w"][:, :x_dim] + d_a12 @ values["sim_w"][:, :x_dim]
            d_hyp2 = d_a2 @ values["cmp2_w"][:, :x_dim] + d_a12 @ values["sim_w"][:, x_dim:]
            d_ref = d_a1 @ values["cmp1_w"][:, x_dim:] + d_a2 @ values["cmp2_w"][:, x_dim:]
            input_grads = {"hyp1": d_hyp1, "hyp2": d_hyp2, "ref": d_ref}
    elif want_input_grads:
        n, x_dim = batch.hyp1.shape
        zero = np.zeros((n, x_dim))
        input_grads = {"hyp1": zero, "hyp2": zero.copy(), "ref": zero.copy()}
    if want_input_grads:
        return grads, input_grads
    return grads


def cross_entropy(probs, labels):
    """Summed binary cross-entropy; probs must already be clamped."""
    labels = np.asarray(labels, dtype=float)
    return float(-(labels * np.log(probs) + (1.0 - labels) * np.log(1.0 - probs)).sum())


def batch_loss_and_grads(values, batch, want_input_grads=False):
    if batch.labels is None:
        raise DataError("loss needs labeled instances")
    probs, cache = forward_batch(values, batch)
    loss_value = cross_entropy(probs, batch.labels)
    d_z = probs - batch.labels
    result = backward_batch(values, batch, cache, d_z, want_input_grads)
    if want_input_grads:
        grads, input_grads = result
        return loss_value, grads, input_grads
    return loss_value, result


def loss(instances, values):
    """Summed cross-entropy of a labeled instance list under fixed weights."""
    batch = Batch.stack(instances)
    if batch.labels is None:
        raise DataError("loss needs labeled instances")
    probs, _ = forward_batch(values, batch)
    return cross_entropy(probs, batch.labels)


class BestEpochTracker:
    """Dev-score early stopping: keeps the highest score, ties going to the
    latest epoch that reached it."""

    def __init__(self):
        self.best_epoch = None
        self.best_score = -np.inf

    def offer(self, epoch, score):
        if score >= self.best_score:
            self.best_score = score
            self.best_epoch = epoch
            return True
        return False


@dataclass
class ModelArtifact:
    """A trained judge: weights, input scaling, empty-slot means, config.

    values may carry encoder weights (enc_*) and an embedding matrix (emb)
    beyond the network's own parameters; vocab lists the embedding rows.
    """

    config: dict
    values: dict
    minmax: MinMaxParams
    empty_trans: np.ndarray | None = None
    empty_skip: np.ndarray | None = None
    vocab: list | None = None

    @property
    def x_dim(self):
        return int(self.config["x_dim"])

    @property
    def skip_dim(self):
        return int(self.config["skip_dim"])

    def predict_batch(self, batch):
        probs, _ = forward_batch(self.values, batch)
        return probs

    def predict(self, instance):
        return forward(self.values, instance)


def _normalize_instance(inst, minmax):
    return PairwiseInput(minmax.scale_trans(np.asarray(inst.hyp1, dtype=float)),
                         minmax.scale_trans(np.asarray(inst.hyp2, dtype=float)),
                         minmax.scale_ref(np.asarray(inst.ref, dtype=float)),
                         minmax.scale_skip(np.asarray(inst.skip1, dtype=float)),
                         minmax.scale_skip(np.asarray(inst.skip2, dtype=float)),
                         inst.label, inst.hyp1_tokens, inst.hyp2_tokens,
                         inst.ref_tokens)


def fit_normalization(instances):
    """MinMaxParams fitted on raw instances: hypothesis slots pooled for the
    translation coordinates, reference fitted separately, skip slots pooled."""
    trans_rows = np.vstack([np.asarray(i.hyp1, dtype=float) for i in instances]
                           + [np.asarray(i.hyp2, dtype=float) for i in instances])
    ref_rows = np.vstack([np.asarray(i.ref, dtype=float) for i in instances])
    skip_rows = np.vstack([np.asarray(i.skip1, dtype=float) for i in instances]
                          + [np.asarray(i.skip2, dtype=float) for i in instances])
    return MinMaxParams.fit(trans_rows, ref_rows, skip_rows)


def _encode_batch(instances, sel, encoder, rate, rng, train):
    """Assemble full input vectors by appending encoder outputs to the
    precomputed parts; returns the batch plus per-row encoder caches."""
    rows1, rows2, rowsr, sk1, sk2, labels, caches = [], [], [], [], [], [], []
    for i in sel:
        inst = instances[i]
        if inst.hyp1_tokens is None or inst.hyp2_tokens is None or inst.ref_tokens is None:
            raise DataError("encoder training requires token sequences on every instance")
        v1, c1 = encoder.encode(inst.hyp1_tokens, rate, rng, train)
        v2, c2 = encoder.encode(inst.hyp2_tokens, rate, rng, train)
        vr, cr = encoder.encode(inst.ref_tokens, rate, rng, train)
        rows1.append(np.concatenate([inst.hyp1, v1]))
        rows2.append(np.concatenate([inst.hyp2, v2]))
        rowsr.append(np.concatenate([inst.ref, vr]))
        sk1.append(inst.skip1)
        sk2.append(inst.skip2)
        labels.append(inst.label)
        caches.append((c1, c2, cr))
    batch = Batch(np.vstack(rows1), np.vstack(rows2), np.vstack(rowsr),
                  np.vstack(sk1), np.vstack(sk2),
                  None if any(l is None for l in labels) else labels)
    return batch, caches


def _dev_counts(store, encoder, dev_instances):
    if encoder is None:
        batch = Batch.stack(dev_instances)
    else:
        batch, _ = _encode_batch(dev_instances, range(len(dev_instances)),
                                 encoder, 0.0, None, False)
    probs, _ = forward_batch(store, batch)
    labels = batch.labels
    if labels is None:
        raise DataError("dev instances must be labeled")
    predicted_first = probs > 0.5
    tie = probs == 0.5
    correct = (predicted_first & (labels == 1.0)) | (~predicted_first & ~tie & (labels == 0.0))
    con = int(np.count_nonzero(correct))
    n_tie = int(np.count_nonzero(tie))
    dis = len(dev_instances) - con - n_tie
    return con, dis, n_tie


def prediction_batch(values, instances, minmax, encoder=None):
    """Preference probabilities for raw (unnormalized) instances.

    Inputs are scaled with the model's fitted minmax; when an encoder is
    given, instance tokens are encoded and appended exactly as in training.
    """
    normalized = [_normalize_instance(i, minmax) for i in instances]
    if encoder is None:
        batch = Batch.stack(normalized)
    else:
        batch, _ = _encode_batch(normalized, range(len(normalized)),
                                 encoder, 0.0, None, False)
    probs, _ = forward_batch(values, batch)
    return probs


def train(train_instances, dev_instances, cfg: OptimizerConfig, *, hidden=4,
          tau_policy="wmt12_strict", encoder=None, dropout_rate=0.0,
          extra_config=None, epoch_hook=None):
    """Fit the judge on labeled comparisons with adagrad mini-batches.

    The raw training instances are min-max normalized (parameters fitted
    here, on the training slots) and symmetric-expanded; dev instances are
    normalized with the same parameters but not expanded. After every epoch
    the pairwise tau on the dev set is computed under tau_policy and the
    weights of the best epoch are kept, ties resolved toward the latest
    epoch. Mini-batch order is reshuffled each epoch from (seed, epoch), so
    a fixed seed reproduces the whole trajectory bit for bit.

    With an encoder, instance vector fields hold only the precomputed part
    and tokens must be present; encoder outputs are appended unnormalized
    and encoder weights (plus embeddings, per its fine-tune mode) train
    jointly. epoch_hook(epoch, mean_loss, dev_tau) is called per epoch.
    """
    train_instances = list(train_instances)
    dev_instances = list(dev_instances)
    if not train_instances:
        raise DataError("no training instances")
    if not dev_instances:
        raise DataError("no dev instances for early stopping")
    for inst in train_instances:
        if inst.label is None or not 0.0 <= float(inst.label) <= 1.0:
            raise DataError("training labels must lie in [0, 1]")

    minmax = fit_normalization(train_instances)
    norm_train = [_normalize_instance(i, minmax) for i in train_instances]
    norm_dev = [_normalize_instance(i, minmax) for i in dev_instances]
    expanded = symmetric_expand(norm_train)

    fixed_dim = len(np.atleast_1d(train_instances[0].hyp1))
    skip_dim = len(np.atleast_1d(train_instances[0].skip1))
    x_dim = fixed_dim + (encoder.out_dim if encoder is not None else 0)

    master = np.random.default_rng(cfg.seed)
    store = init_network_params(x_dim, skip_dim, hidden, master)
    if encoder is not None:
        encoder.register(store, master)

    stacked = Batch.stack(expanded) if encoder is None else None
    tracker = BestEpochTracker()
    best_values = store.snapshot()
    n = len(expanded)

    for epoch in range(1, cfg.max_epochs + 1):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            sel = order[start:start + cfg.batch_size]
            if encoder is None:
                batch = stacked.take(sel)
                batch_loss, grads = batch_loss_and_grads(store, batch)
            else:
                batch, caches = _encode_batch(expanded, sel, encoder,
                                              dropout_rate, master, True)
                batch_loss, grads, input_grads = batch_loss_and_grads(
                    store, batch, want_input_grads=True)
                for name in store.names():
                    if name not in grads:
                        grads[name] = np.zeros_like(store[name])
                for row, (c1, c2, cr) in enumerate(caches):
                    encoder.backward(c1, input_grads["hyp1"][row, fixed_dim:], grads)
                    encoder.backward(c2, input_grads["hyp2"][row, fixed_dim:], grads)
                    encoder.backward(cr, input_grads["ref"][row, fixed_dim:], grads)
                pen_value, pen_grads = encoder.penalty()
                batch_loss += pen_value
                for name, g in pen_grads.items():
                    grads[name] += g
            if not np.isfinite(batch_loss):
                raise NumericError(f"non-finite loss in epoch {epoch}")
            total += batch_loss
            adagrad_step(store, grads, cfg)
        con, dis, n_tie = _dev_counts(store, encoder, norm_dev)
        dev_tau = tau_from_counts(con, dis, n_tie, tau_policy)
        if tracker.offer(epoch, dev_tau):
            best_values = store.snapshot()
        if epoch_hook is not None:
            epoch_hook(epoch, total / n, dev_tau)

    store.load_values(best_values)
    if encoder is None:
        assembled = stacked
    else:
        assembled, _ = _encode_batch(expanded, range(n), encoder, 0.0, None, False)
    empty_trans = np.vstack([assembled.hyp1, assembled.hyp2]).mean(axis=0)
    empty_skip = np.vstack([assembled.skip1, assembled.skip2]).mean(axis=0)

    values = store.snapshot()
    vocab = None
    if encoder is not None:
        if "emb" not in values:
            values["emb"] = encoder.table.matrix.copy()
        vocab = list(encoder.table.tokens)
    config = {
        "hidden": int(hidden),
        "x_dim": int(x_dim),
        "fixed_dim": int(fixed_dim),
        "skip_dim": int(skip_dim),
        "tau_policy": tau_policy,
        "dropout": float(dropout_rate),
        "optimizer": {"lr": cfg.lr, "l2": cfg.l2, "eps": cfg.eps,
                      "batch_size": cfg.batch_size, "max_epochs": cfg.max_epochs,
                      "seed": cfg.seed},
        "selected_epoch": tracker.best_epoch,
        "best_dev_tau": float(tracker.best_score),
        "encoder": encoder.config() if encoder is not None else None,
    }
    if extra_config:
        config.update(extra_config)
    return ModelArtifact(config=config, values=values, minmax=minmax,
                         empty_trans=empty_trans, empty_skip=empty_skip,
                         vocab=vocab)
