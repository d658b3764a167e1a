"""One-hidden-layer sigmoid networks trained by per-example SGD.

The heavy loops live in :mod:`iterlearn._kernels`; this module holds the
parameter container and the single-step API used by tests and agents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import _kernels as K
from .errors import ConfigError, NumericError

LOSSES = {"cross_entropy": K.CROSS_ENTROPY, "squared_error": K.SQUARED_ERROR}
REDUCTIONS = {"sum": 0, "mean": K.MEAN_REDUCTION}


def loss_code(loss: str, reduction: str = "mean") -> int:
    if loss not in LOSSES:
        raise ConfigError(f"unknown loss {loss!r}; expected one of {sorted(LOSSES)}")
    if reduction not in REDUCTIONS:
        raise ConfigError(f"unknown reduction {reduction!r}; expected one of {sorted(REDUCTIONS)}")
    return LOSSES[loss] | REDUCTIONS[reduction]


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 1.0
    loss: str = "squared_error"
    epochs: int = 20
    reduction: str = "mean"

    def __post_init__(self):
        if not self.eta > 0:
            raise ConfigError(f"eta must be > 0, got {self.eta}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        loss_code(self.loss, self.reduction)

    @property
    def loss_kind(self) -> int:
        return loss_code(self.loss, self.reduction)


@dataclass(eq=False)
class Mlp:
    """Weights are stored as ``w_ih: (hidden, in)`` and ``w_ho: (out, hidden)``."""

    w_ih: np.ndarray
    b_h: np.ndarray
    w_ho: np.ndarray
    b_o: np.ndarray
    steps: int = field(default=0, compare=False)

    def __post_init__(self):
        nh, ni = self.w_ih.shape
        no, nh2 = self.w_ho.shape
        if nh2 != nh or self.b_h.shape != (nh,) or self.b_o.shape != (no,):
            raise ValueError("inconsistent layer dimensions")

    @property
    def n_in(self) -> int:
        return self.w_ih.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.w_ih.shape[0]

    @property
    def n_out(self) -> int:
        return self.w_ho.shape[0]

    @property
    def params(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return (self.w_ih, self.b_h, self.w_ho, self.b_o)

    def copy(self) -> "Mlp":
        return Mlp(*(a.copy() for a in self.params))

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.params])

    def set_flat(self, vec: np.ndarray) -> None:
        pos = 0
        for a in self.params:
            a.ravel()[:] = vec[pos : pos + a.size]
            pos += a.size

    def same_as(self, other: "Mlp") -> bool:
        return all(np.array_equal(a, b) for a, b in zip(self.params, other.params))

    @classmethod
    def zeros(cls, n_in: int, n_hidden: int, n_out: int) -> "Mlp":
        return cls(
            np.zeros((n_hidden, n_in)), np.zeros(n_hidden),
            np.zeros((n_out, n_hidden)), np.zeros(n_out),
        )


def glorot_bound(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


def init_glorot(n_in: int, n_hidden: int, n_out: int, rng: np.random.Generator) -> Mlp:
    """Glorot-uniform weights, zero biases (a common dense-layer default)."""
    if min(n_in, n_hidden, n_out) < 1:
        raise ConfigError("layer sizes must be >= 1")
    a = glorot_bound(n_in, n_hidden)
    w_ih = rng.uniform(-a, a, size=(n_hidden, n_in))
    b = glorot_bound(n_hidden, n_out)
    w_ho = rng.uniform(-b, b, size=(n_out, n_hidden))
    return Mlp(w_ih, np.zeros(n_hidden), w_ho, np.zeros(n_out))


def forward(net: Mlp, x) -> np.ndarray:
    """Output probabilities for one input vector or a ``(batch, n_in)`` block."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.n_in:
        raise ValueError(f"input length {x.shape[-1]} != n_in {net.n_in}")
    h = expit(x @ net.w_ih.T + net.b_h)
    return expit(h @ net.w_ho.T + net.b_o)


def forward_chunked(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Compiled row-by-row :func:`forward` for large blocks."""
    x = np.ascontiguousarray(x)
    if x.ndim != 2 or x.shape[1] != net.n_in:
        raise ValueError(f"expected a (batch, {net.n_in}) block, got shape {x.shape}")
    out = np.empty((x.shape[0], net.n_out))
    K.forward_batch(net.params, x, out)
    return out


def map_indices(net: Mlp, idx: np.ndarray) -> np.ndarray:
    """Decided outputs, as indices, for inputs given as indices (MSB = bit 0)."""
    if net.n_in != net.n_out:
        raise ValueError("index mapping needs n_in == n_out")
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    out = np.empty(len(idx), dtype=np.int64)
    K.map_indices(net.params, net.n_in, idx, out)
    return out


def pair_probability(p, target) -> float:
    """Probability the output vector ``p`` assigns to the bit vector ``target``."""
    p = np.asarray(p, dtype=np.float64)
    target = np.asarray(target)
    if p.shape != target.shape:
        raise ValueError("length mismatch")
    return math.prod(float(pi) if ti else 1.0 - float(pi) for pi, ti in zip(p, target))


def loss_value(p, target, loss: str = "squared_error", reduction: str = "mean") -> float:
    p = np.asarray(p, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    loss_code(loss, reduction)
    if loss == "cross_entropy":
        q = np.clip(p, K.EPS, 1 - K.EPS)
        terms = -(t * np.log(q) + (1 - t) * np.log(1 - q))
    else:
        terms = (p - t) ** 2
    return float(terms.mean() if reduction == "mean" else terms.sum())


def _as_input(v, size: int) -> np.ndarray:
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.shape != (size,):
        raise ValueError(f"expected a vector of length {size}, got shape {v.shape}")
    return v


def _grads_like(net: Mlp):
    return tuple(np.empty_like(a) for a in net.params)


def gradient(
    net: Mlp, x, target, loss: str = "squared_error", reduction: str = "mean"
) -> tuple[float, np.ndarray]:
    """Loss and flattened parameter gradient for one example (no update)."""
    x = _as_input(x, net.n_in)
    t = _as_input(target, net.n_out)
    grads = _grads_like(net)
    value = K.supervised_grad(net.params, x, t, loss_code(loss, reduction), grads)
    return value, np.concatenate([g.ravel() for g in grads])


def chain_gradient(
    first: Mlp, second: Mlp, x, target, loss: str = "squared_error", reduction: str = "mean"
):
    """Loss and flattened gradients ``(g_first, g_second)`` of ``second(first(x))``."""
    if first.n_out != second.n_in:
        raise ValueError("chain dimension mismatch")
    x = _as_input(x, first.n_in)
    t = _as_input(target, second.n_out)
    g1, g2 = _grads_like(first), _grads_like(second)
    value = K.chain_grad(first.params, second.params, x, t, loss_code(loss, reduction), g1, g2)
    return value, np.concatenate([g.ravel() for g in g1]), np.concatenate([g.ravel() for g in g2])


def sgd_step(net: Mlp, x, target, cfg: TrainConfig) -> float:
    """One in-place SGD update on a single example; returns the pre-update loss."""
    x = _as_input(x, net.n_in)
    t = _as_input(target, net.n_out)
    value = K.supervised_step(net.params, x, t, cfg.eta, cfg.loss_kind, _grads_like(net))
    if not math.isfinite(value):
        raise NumericError("non-finite loss or gradient in sgd_step")
    net.steps += 1
    return value


def chain_forward(first: Mlp, second: Mlp, x) -> np.ndarray:
    """``second`` applied to the real-valued (undecided) output of ``first``."""
    return forward(second, forward(first, x))


def autoencoder_step(enc: Mlp, dec: Mlp, meaning, cfg: TrainConfig) -> float:
    """One SGD step on ``dec(enc(m))`` against ``m``, updating both networks in place."""
    if enc.n_out != dec.n_in or dec.n_out != enc.n_in:
        raise ValueError("encoder/decoder dimensions do not chain")
    x = _as_input(meaning, enc.n_in)
    value = K.chain_step(
        enc.params, dec.params, x, x, cfg.eta, cfg.loss_kind, _grads_like(enc), _grads_like(dec)
    )
    if not math.isfinite(value):
        raise NumericError("non-finite loss or gradient in autoencoder_step")
    return value
