"""Sentence encoders over word embeddings: averaging, convolutional, LSTM.

Each encoder turns a token sequence into a fixed-width vector and can
backpropagate a gradient on that vector into its own weights and, when
fine-tuning is enabled, into the embedding matrix. Weights live in a shared
ParamStore during training (register) or come from a saved model (adopt).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .numeric import ParamStore, dropout_mask, hard_sigmoid, xavier_init

OOV_POLICIES = ("zero", "mean", "error")
FINETUNE_MODES = ("frozen", "moderate", "full")

MODERATE_DEFAULT = 1e-3
FULL_DEFAULT = 1e-4


class EmbeddingTable:
    """Token -> row lookup over a dense embedding matrix.

    The out-of-vocabulary fallback vector (zeros or the row mean) is fixed
    at construction and never receives gradient.
    """

    def __init__(self, tokens, matrix, oov="zero"):
        if oov not in OOV_POLICIES:
            raise ValueError(f"unknown OOV policy {oov!r}")
        matrix = np.ascontiguousarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] == 0 or matrix.shape[1] == 0:
            raise DataError("embedding matrix must be a non-empty 2-d array")
        if len(tokens) != matrix.shape[0]:
            raise DataError("token list and embedding matrix disagree on size")
        if not np.all(np.isfinite(matrix)):
            raise DataError("embedding matrix contains non-finite values")
        self.tokens = list(tokens)
        self.vocab = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.vocab) != len(self.tokens):
            raise DataError("duplicate tokens in embedding vocabulary")
        self.matrix = matrix
        self.dim = matrix.shape[1]
        self.oov = oov
        if oov == "mean":
            self._fallback = matrix.mean(axis=0)
        else:
            self._fallback = np.zeros(self.dim)

    @classmethod
    def load(cls, path, oov="zero"):
        """Read whitespace-separated text lines: token then D reals."""
        tokens, vectors = [], []
        dim = None
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) < 2:
                    raise DataError(f"{path}:{lineno}: token without vector")
                tok, values = parts[0], parts[1:]
                if dim is None:
                    dim = len(values)
                elif len(values) != dim:
                    raise DataError(f"{path}:{lineno}: expected {dim} values, "
                                    f"got {len(values)}")
                try:
                    vectors.append([float(v) for v in values])
                except ValueError:
                    raise DataError(f"{path}:{lineno}: non-numeric embedding value") from None
                tokens.append(tok)
        if not tokens:
            raise DataError(f"{path}: empty embedding file")
        return cls(tokens, np.asarray(vectors, dtype=float), oov=oov)

    def row_indices(self, tokens):
        """Row index per token, -1 for OOV under zero/mean fallback."""
        indices = []
        for tok in tokens:
            row = self.vocab.get(tok)
            if row is None:
                if self.oov == "error":
                    raise DataError(f"out-of-vocabulary token {tok!r}")
                indices.append(-1)
            else:
                indices.append(row)
        return indices

    def rows(self, indices):
        out = np.empty((len(indices), self.dim))
        for t, row in enumerate(indices):
            out[t] = self._fallback if row < 0 else self.matrix[row]
        return out


@dataclass(frozen=True)
class FineTune:
    """Embedding fine-tuning regime.

    frozen: embeddings fixed. moderate: trained with a penalty
    mu * sum((E - E0)^2) against the initial matrix. full: trained with
    plain L2, lambda * sum(E^2). strength overrides the mode's default
    coefficient (1e-3 moderate, 1e-4 full).
    """

    mode: str = "frozen"
    strength: float | None = None

    def __post_init__(self):
        if self.mode not in FINETUNE_MODES:
            raise ValueError(f"unknown fine-tune mode {self.mode!r}")
        if self.strength is not None and self.strength < 0:
            raise ValueError("fine-tune strength must be non-negative")

    @property
    def trainable(self):
        return self.mode != "frozen"

    def coefficient(self):
        if self.strength is not None:
            return self.strength
        if self.mode == "moderate":
            return MODERATE_DEFAULT
        if self.mode == "full":
            return FULL_DEFAULT
        return 0.0


def finetune_penalty(matrix, initial, finetune):
    """Regularization (value, gradient) for an embedding matrix.

    frozen contributes nothing; moderate penalizes squared deviation from
    the initial matrix (which must be supplied); full is plain L2 on the
    current matrix.
    """
    if finetune.mode == "frozen":
        return 0.0, None
    coeff = finetune.coefficient()
    if finetune.mode == "moderate":
        if initial is None:
            raise ValueError("moderate fine-tuning requires the initial matrix")
        delta = matrix - initial
        return coeff * float(np.sum(delta * delta)), 2.0 * coeff * delta
    return coeff * float(np.sum(matrix * matrix)), 2.0 * coeff * matrix


class _EncoderBase:
    kind = ""

    def __init__(self, table, finetune):
        self.table = table
        self.finetune = finetune
        self.emb = table.matrix
        self.emb_init = None

    @property
    def trainable_emb(self):
        return self.finetune.trainable

    def _register_emb(self, store):
        if self.trainable_emb:
            self.emb = store.add("emb", self.table.matrix)
            self.table.matrix = self.emb
            if self.finetune.mode == "moderate":
                self.emb_init = self.emb.copy()

    def _adopt_emb(self, values):
        if "emb" in values:
            emb = np.ascontiguousarray(values["emb"], dtype=float)
            if emb.shape != self.table.matrix.shape:
                raise DataError("embedding matrix shape mismatch in model values")
            self.table.matrix = emb
            self.emb = emb

    def penalty(self):
        """Fine-tune regularization (loss, grads-by-name) for this encoder."""
        if not self.trainable_emb:
            return 0.0, {}
        value, grad = finetune_penalty(self.emb, self.emb_init, self.finetune)
        return value, {"emb": grad}

    def _token_inputs(self, tokens, rate, rng, train):
        if not tokens:
            raise DataError("cannot encode an empty token sequence")
        indices = self.table.row_indices(tokens)
        rows = self.table.rows(indices)
        mask = dropout_mask(rows.shape, rate, rng, train)
        return indices, rows * mask, mask

    def _emb_backward(self, grads, indices, d_rows):
        if not self.trainable_emb or "emb" not in grads:
            return
        target = grads["emb"]
        for t, row in enumerate(indices):
            if row >= 0:
                target[row] += d_rows[t]


class BowEncoder(_EncoderBase):
    """Mean of the token embedding vectors; order-insensitive."""

    kind = "bow"

    def __init__(self, table, finetune=FineTune()):
        super().__init__(table, finetune)
        self.out_dim = table.dim

    def register(self, store, rng):
        self._register_emb(store)

    def adopt(self, values):
        self._adopt_emb(values)

    def config(self):
        return {"kind": self.kind, "finetune": self.finetune.mode,
                "strength": self.finetune.coefficient(), "oov": self.table.oov}

    def encode(self, tokens, rate=0.0, rng=None, train=False):
        indices, rows, mask = self._token_inputs(tokens, rate, rng, train)
        cache = (indices, mask, len(tokens))
        return rows.mean(axis=0), cache

    def backward(self, cache, d_out, grads):
        indices, mask, count = cache
        d_rows = (np.tile(d_out, (count, 1)) / count) * mask
        self._emb_backward(grads, indices, d_rows)


class CnnEncoder(_EncoderBase):
    """Wide convolution, stride-1 max pooling, global max over time.

    Filters span `window` consecutive token vectors with zero padding on
    both sides, so a sentence of T tokens yields a feature map of length
    T + window - 1 per filter. Pooling slides a window of `pool` positions
    with stride 1, padded with zeros at the end to preserve length; a final
    max over time gives one value per filter.
    """

    kind = "cnn"

    def __init__(self, table, n_filters=50, window=3, pool=2, finetune=FineTune()):
        super().__init__(table, finetune)
        if n_filters < 1 or window < 1 or pool < 1:
            raise ValueError("n_filters, window and pool must be positive")
        self.n_filters = n_filters
        self.window = window
        self.pool = pool
        self.out_dim = n_filters
        self.filters = None
        self.filter_bias = None

    def register(self, store, rng):
        shape = (self.n_filters, self.window * self.table.dim)
        self.filters = store.add("enc_filters", xavier_init(shape, rng), decay=True)
        self.filter_bias = store.add("enc_filter_bias", np.zeros(self.n_filters))
        self._register_emb(store)

    def adopt(self, values):
        self._adopt_emb(values)
        try:
            self.filters = np.asarray(values["enc_filters"], dtype=float)
            self.filter_bias = np.asarray(values["enc_filter_bias"], dtype=float)
        except KeyError as exc:
            raise DataError(f"model values missing {exc}") from exc

    def config(self):
        return {"kind": self.kind, "n_filters": self.n_filters,
                "window": self.window, "pool": self.pool,
                "finetune": self.finetune.mode,
                "strength": self.finetune.coefficient(), "oov": self.table.oov}

    def _windows(self, rows):
        t_len, dim = rows.shape
        pad = self.window - 1
        padded = np.zeros((t_len + 2 * pad, dim))
        padded[pad:pad + t_len] = rows
        m_len = t_len + self.window - 1
        return np.stack([padded[s:s + self.window].ravel() for s in range(m_len)])

    def encode(self, tokens, rate=0.0, rng=None, train=False):
        indices, rows, token_mask = self._token_inputs(tokens, rate, rng, train)
        windows = self._windows(rows)
        feature_map = np.tanh(windows @ self.filters.T + self.filter_bias)
        m_len = feature_map.shape[0]
        stacked = np.vstack([feature_map, np.zeros((self.pool - 1, self.n_filters))])
        pooled = np.stack([stacked[i:i + self.pool].max(axis=0) for i in range(m_len)])
        pool_arg = np.stack([stacked[i:i + self.pool].argmax(axis=0) for i in range(m_len)])
        top = pooled.argmax(axis=0)
        out = pooled[top, np.arange(self.n_filters)]
        out_mask = dropout_mask(out.shape, rate, rng, train)
        cache = (indices, token_mask, windows, feature_map, pool_arg, top, out_mask)
        return out * out_mask, cache

    def backward(self, cache, d_out, grads):
        indices, token_mask, windows, feature_map, pool_arg, top, out_mask = cache
        m_len = feature_map.shape[0]
        d_map = np.zeros_like(feature_map)
        for n in range(self.n_filters):
            i = top[n]
            j = i + pool_arg[i, n]
            if j < m_len:  # gradient dies on pooled-in padding zeros
                d_map[j, n] += d_out[n] * out_mask[n]
        d_pre = d_map * (1.0 - feature_map * feature_map)
        grads["enc_filters"] += d_pre.T @ windows
        grads["enc_filter_bias"] += d_pre.sum(axis=0)
        if not self.trainable_emb:
            return
        d_windows = d_pre @ self.filters
        t_len = len(indices)
        dim = self.table.dim
        pad = self.window - 1
        d_padded = np.zeros((t_len + 2 * pad, dim))
        for s in range(m_len):
            d_padded[s:s + self.window] += d_windows[s].reshape(self.window, dim)
        d_rows = d_padded[pad:pad + t_len] * token_mask
        self._emb_backward(grads, indices, d_rows)


class LstmEncoder(_EncoderBase):
    """Last hidden state of an LSTM run over the token vectors.

    Gates use the piecewise-linear hard sigmoid; the cell candidate is a
    plain tanh transform without a bias term. The bidirectional variant
    runs a second, separately parameterized pass over the reversed sequence
    and concatenates both final states.
    """

    kind = "lstm"

    _GATES = ("i", "f", "c", "o")

    def __init__(self, table, hidden=50, bidirectional=False, finetune=FineTune()):
        super().__init__(table, finetune)
        if hidden < 1:
            raise ValueError("hidden size must be positive")
        self.hidden = hidden
        self.bidirectional = bidirectional
        self.out_dim = hidden * (2 if bidirectional else 1)
        self.weights = {}

    def _prefixes(self):
        return ("enc_fw", "enc_bw") if self.bidirectional else ("enc_fw",)

    def _names(self, prefix):
        names = []
        for gate in self._GATES:
            names.append(f"{prefix}_rec_{gate}")
            names.append(f"{prefix}_in_{gate}")
        for gate in ("i", "f", "o"):
            names.append(f"{prefix}_bias_{gate}")
        return names

    def register(self, store, rng):
        h, d = self.hidden, self.table.dim
        for prefix in self._prefixes():
            for gate in self._GATES:
                self.weights[f"{prefix}_rec_{gate}"] = store.add(
                    f"{prefix}_rec_{gate}", xavier_init((h, h), rng), decay=True)
                self.weights[f"{prefix}_in_{gate}"] = store.add(
                    f"{prefix}_in_{gate}", xavier_init((h, d), rng), decay=True)
            for gate in ("i", "f", "o"):
                self.weights[f"{prefix}_bias_{gate}"] = store.add(
                    f"{prefix}_bias_{gate}", np.zeros(h))
        self._register_emb(store)

    def adopt(self, values):
        self._adopt_emb(values)
        for prefix in self._prefixes():
            for name in self._names(prefix):
                if name not in values:
                    raise DataError(f"model values missing {name!r}")
                self.weights[name] = np.asarray(values[name], dtype=float)

    def config(self):
        return {"kind": "bilstm" if self.bidirectional else "lstm",
                "hidden": self.hidden, "finetune": self.finetune.mode,
                "strength": self.finetune.coefficient(), "oov": self.table.oov}

    def _step(self, prefix, x, h_prev, c_prev):
        w = self.weights
        gate_i = hard_sigmoid(w[f"{prefix}_rec_i"] @ h_prev + w[f"{prefix}_in_i"] @ x
                              + w[f"{prefix}_bias_i"])
        gate_f = hard_sigmoid(w[f"{prefix}_rec_f"] @ h_prev + w[f"{prefix}_in_f"] @ x
                              + w[f"{prefix}_bias_f"])
        cand = np.tanh(w[f"{prefix}_rec_c"] @ h_prev + w[f"{prefix}_in_c"] @ x)
        c_new = gate_i * cand + gate_f * c_prev
        gate_o = hard_sigmoid(w[f"{prefix}_rec_o"] @ h_prev + w[f"{prefix}_in_o"] @ x
                              + w[f"{prefix}_bias_o"])
        tanh_c = np.tanh(c_new)
        h_new = gate_o * tanh_c
        return h_new, c_new, (x, h_prev, c_prev, gate_i, gate_f, cand, gate_o, tanh_c)

    def _run(self, prefix, rows):
        h = np.zeros(self.hidden)
        c = np.zeros(self.hidden)
        steps = []
        for x in rows:
            h, c, step = self._step(prefix, x, h, c)
            steps.append(step)
        return h, steps

    def lstm_step(self, x, h_prev, c_prev, prefix="enc_fw"):
        """Single forward cell update; exposed for direct inspection."""
        h, c, _ = self._step(prefix, np.asarray(x, dtype=float),
                             np.asarray(h_prev, dtype=float),
                             np.asarray(c_prev, dtype=float))
        return h, c

    def encode(self, tokens, rate=0.0, rng=None, train=False):
        indices, rows, token_mask = self._token_inputs(tokens, rate, rng, train)
        h_fw, steps_fw = self._run("enc_fw", rows)
        if self.bidirectional:
            h_bw, steps_bw = self._run("enc_bw", rows[::-1])
            out = np.concatenate([h_fw, h_bw])
        else:
            steps_bw = None
            out = h_fw
        out_mask = dropout_mask(out.shape, rate, rng, train)
        cache = (indices, token_mask, steps_fw, steps_bw)
        return out * out_mask, (cache, out_mask)

    def _run_backward(self, prefix, steps, d_last, grads, d_rows, reverse):
        w = self.weights
        t_len = len(steps)
        d_h = d_last.copy()
        d_c = np.zeros(self.hidden)

        def inside(gate):
            return ((gate > 0.0) & (gate < 1.0)).astype(float) * 0.2

        for t in range(t_len - 1, -1, -1):
            x, h_prev, c_prev, gate_i, gate_f, cand, gate_o, tanh_c = steps[t]
            d_gate_o = d_h * tanh_c
            d_c = d_c + d_h * gate_o * (1.0 - tanh_c * tanh_c)
            d_gate_i = d_c * cand
            d_cand = d_c * gate_i
            d_gate_f = d_c * c_prev
            d_c_prev = d_c * gate_f
            d_pre = {
                "i": d_gate_i * inside(gate_i),
                "f": d_gate_f * inside(gate_f),
                "c": d_cand * (1.0 - cand * cand),
                "o": d_gate_o * inside(gate_o),
            }
            d_h_prev = np.zeros(self.hidden)
            d_x = np.zeros(self.table.dim)
            for gate, delta in d_pre.items():
                grads[f"{prefix}_rec_{gate}"] += np.outer(delta, h_prev)
                grads[f"{prefix}_in_{gate}"] += np.outer(delta, x)
                if gate != "c":
                    grads[f"{prefix}_bias_{gate}"] += delta
                d_h_prev += w[f"{prefix}_rec_{gate}"].T @ delta
                d_x += w[f"{prefix}_in_{gate}"].T @ delta
            row = (t_len - 1 - t) if reverse else t
            d_rows[row] += d_x
            d_h = d_h_prev
            d_c = d_c_prev

    def backward(self, cache_bundle, d_out, grads):
        (indices, token_mask, steps_fw, steps_bw), out_mask = cache_bundle
        d_out = d_out * out_mask
        t_len = len(indices)
        d_rows = np.zeros((t_len, self.table.dim))
        self._run_backward("enc_fw", steps_fw, d_out[:self.hidden], grads, d_rows,
                           reverse=False)
        if self.bidirectional:
            self._run_backward("enc_bw", steps_bw, d_out[self.hidden:], grads,
                               d_rows, reverse=True)
        if self.trainable_emb:
            self._emb_backward(grads, indices, d_rows * token_mask)


ENCODER_KINDS = ("bow", "cnn", "lstm", "bilstm")


def make_encoder(kind, table, *, hidden=50, n_filters=50, window=3, pool=2,
                 finetune=FineTune()):
    if kind == "bow":
        return BowEncoder(table, finetune=finetune)
    if kind == "cnn":
        return CnnEncoder(table, n_filters=n_filters, window=window, pool=pool,
                          finetune=finetune)
    if kind == "lstm":
        return LstmEncoder(table, hidden=hidden, finetune=finetune)
    if kind == "bilstm":
        return LstmEncoder(table, hidden=hidden, bidirectional=True,
                           finetune=finetune)
    raise ValueError(f"unknown encoder kind {kind!r}")


def rebuild_encoder(config, vocab, values):
    """Reconstruct an encoder from a saved model's config/vocab/values."""
    if "emb" not in values:
        raise DataError("model with an encoder lacks an embedding matrix")
    if vocab is None:
        raise DataError("model with an encoder lacks a vocabulary")
    finetune = FineTune(mode=config.get("finetune", "frozen"),
                        strength=config.get("strength"))
    table = EmbeddingTable(vocab, np.asarray(values["emb"], dtype=float),
                           oov=config.get("oov", "zero"))
    encoder = make_encoder(config["kind"], table,
                           hidden=config.get("hidden", 50),
                           n_filters=config.get("n_filters", 50),
                           window=config.get("window", 3),
                           pool=config.get("pool", 2),
                           finetune=finetune)
    encoder.adopt(values)
    return encoder
