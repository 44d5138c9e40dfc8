"""Dense numeric kernel: parameter store, activations, adagrad, gradient checks.

Everything runs on float64 numpy arrays. Training mutates ParamStore values
in place (single writer); concurrent readers must work on snapshot() copies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError

# Largest float64 strictly below 1; keeps saturating activations inside
# their open ranges.
_ONE_BELOW = float(np.nextafter(1.0, 0.0))
_ZERO_ABOVE = float(np.nextafter(0.0, 1.0))


@dataclass
class OptimizerConfig:
    """Adagrad settings; defaults follow the standard training recipe."""

    lr: float = 0.01
    l2: float = 1e-4
    eps: float = 1e-8
    batch_size: int = 30
    max_epochs: int = 10000
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be at least 1")


def assert_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {what}")


class ParamStore:
    """Named float64 parameter arrays with per-entry adagrad accumulators.

    decay=True marks entries subject to L2 weight decay inside adagrad_step;
    by convention weight matrices decay while biases and embedding tables
    stay exempt. add() returns the live array so callers may keep a view
    that tracks in-place updates.
    """

    def __init__(self):
        self._values: dict[str, np.ndarray] = {}
        self._accum: dict[str, np.ndarray] = {}
        self._decay: set[str] = set()
        self.step_count = 0

    def add(self, name, value, decay=False):
        if name in self._values:
            raise ValueError(f"duplicate parameter {name!r}")
        arr = np.ascontiguousarray(value, dtype=float)
        assert_finite(arr, f"parameter {name!r}")
        self._values[name] = arr
        self._accum[name] = np.zeros_like(arr)
        if decay:
            self._decay.add(name)
        return arr

    def __getitem__(self, name):
        return self._values[name]

    def __contains__(self, name):
        return name in self._values

    def names(self):
        return list(self._values)

    def items(self):
        return self._values.items()

    def decays(self, name):
        return name in self._decay

    def accumulator(self, name):
        return self._accum[name]

    def zero_grads(self):
        return {name: np.zeros_like(v) for name, v in self._values.items()}

    def snapshot(self):
        return {name: v.copy() for name, v in self._values.items()}

    def load_values(self, values):
        if set(values) != set(self._values):
            raise ValueError("parameter names do not match the store")
        for name, arr in values.items():
            target = self._values[name]
            incoming = np.asarray(arr, dtype=float)
            if incoming.shape != target.shape:
                raise ValueError(f"shape mismatch for parameter {name!r}")
            target[...] = incoming


def xavier_init(shape, rng):
    """Uniform(-b, b) draw with b = sqrt(6 / (fan_in + fan_out)).

    2-d shapes use rows + cols as the fan sum; 1-d vectors count as having
    a single output unit (fan sum = len + 1).
    """
    shape = tuple(int(s) for s in shape)
    if not shape or any(s < 1 for s in shape):
        raise ValueError(f"invalid shape {shape!r}")
    if len(shape) == 1:
        fan_sum = shape[0] + 1
    elif len(shape) == 2:
        fan_sum = shape[0] + shape[1]
    else:
        raise ValueError("xavier_init supports 1-d and 2-d shapes only")
    bound = np.sqrt(6.0 / fan_sum)
    return rng.uniform(-bound, bound, size=shape)


def sigmoid(x):
    """Logistic function; saturates to 0/1 instead of overflowing."""
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


def hard_sigmoid(x):
    """Piecewise-linear gate: clamp(0.2 x + 0.5, 0, 1)."""
    return np.clip(0.2 * np.asarray(x, dtype=float) + 0.5, 0.0, 1.0)


def activate(x, kind):
    """Apply a named activation with input checks and range guarantees.

    tanh output stays strictly inside (-1, 1), sigmoid strictly inside
    (0, 1); hard_sigmoid covers the closed interval [0, 1]. Non-finite
    input raises NumericError.
    """
    arr = np.asarray(x, dtype=float)
    assert_finite(arr, f"activate({kind!r}) input")
    if kind == "tanh":
        return np.clip(np.tanh(arr), -_ONE_BELOW, _ONE_BELOW)
    if kind == "sigmoid":
        return np.clip(sigmoid(arr), _ZERO_ABOVE, _ONE_BELOW)
    if kind == "hard_sigmoid":
        return hard_sigmoid(arr)
    raise ValueError(f"unknown activation kind {kind!r}")


def adagrad_step(store, grads, cfg):
    """One adagrad update over every parameter in the store.

    Per entry: g <- g + l2 * theta (decay-flagged entries only), then
    accum <- accum + g^2 and theta <- theta - lr * g / (sqrt(accum) + eps).
    grads must supply exactly the store's parameter names.
    """
    if set(grads) != set(store.names()):
        missing = set(store.names()) ^ set(grads)
        raise ValueError(f"gradient names do not match parameters: {sorted(missing)}")
    for name, theta in store.items():
        g = np.asarray(grads[name], dtype=float)
        if g.shape != theta.shape:
            raise ValueError(f"gradient shape mismatch for {name!r}")
        assert_finite(g, f"gradient of {name!r}")
        if cfg.l2 and store.decays(name):
            g = g + cfg.l2 * theta
        acc = store.accumulator(name)
        acc += g * g
        theta -= cfg.lr * g / (np.sqrt(acc) + cfg.eps)
    store.step_count += 1


def gradcheck(loss_fn, store, epsilon=1e-5):
    """Compare analytic gradients against central finite differences.

    loss_fn() -> (scalar loss, {name: gradient}) evaluated at the store's
    current values; entries are perturbed in place and restored. Returns the
    maximum relative error |num - ana| / max(|num|, |ana|, 1e-8) over all
    parameter entries.
    """
    loss, grads = loss_fn()
    if not np.isfinite(loss):
        raise NumericError("non-finite loss in gradcheck")
    worst = 0.0
    for name, theta in store.items():
        analytic = np.asarray(grads[name], dtype=float)
        if analytic.shape != theta.shape:
            raise ValueError(f"gradient shape mismatch for {name!r}")
        it = np.nditer(theta, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = theta[idx]
            theta[idx] = orig + epsilon
            up, _ = loss_fn()
            theta[idx] = orig - epsilon
            down, _ = loss_fn()
            theta[idx] = orig
            numeric = (up - down) / (2.0 * epsilon)
            gap = abs(numeric - analytic[idx])
            denom = max(abs(numeric), abs(analytic[idx]), 1e-8)
            worst = max(worst, gap / denom)
    return worst


def dropout_mask(shape, rate, rng=None, train=True):
    """Inverted-dropout multiplier; kept entries scale by 1/(1 - rate).

    Evaluation mode (train=False) and rate 0 return all ones, so inference
    never rescales.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    if not train or rate == 0.0:
        return np.ones(shape)
    if rng is None:
        raise ValueError("training-mode dropout requires an rng")
    keep = rng.random(shape) >= rate
    return keep.astype(float) / (1.0 - rate)
