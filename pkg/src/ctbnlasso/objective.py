"""Per-(node, transition) negative log-likelihood over sparse statistics.

Each fitting problem is a tiny exponential-family GLM: rows are the
visited contexts c of one node w in one own-state s, carrying the jump
count n, the occupation time t and the encoded covariates z (intercept
first).  The loss of a coefficient vector theta is

    (1/T) * sum_rows [ -n * (theta @ z) + t * exp(theta @ z) ]

which is convex; its gradient and Hessian quadratic form follow by
differentiating under the sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .stats import SuffStats

__all__ = [
    "EXP_CLAMP",
    "DegenerateTripleError",
    "TripleKey",
    "TripleProblem",
    "build_triple",
    "triple_keys",
    "loss",
    "grad",
    "hess_quad",
]

# exp argument beyond this returns an infinite loss instead of saturating
EXP_CLAMP = 700.0


class DegenerateTripleError(ValueError):
    """The node never occupies the source state: nothing to fit."""


@dataclass(frozen=True, order=True)
class TripleKey:
    """One node w and one transition s -> 1-s."""

    w: int
    s: int

    @property
    def sp(self) -> int:
        return 1 - self.s

    def __str__(self):
        return f"(w={self.w}, {self.s}->{self.sp})"


def triple_keys(d: int) -> list[TripleKey]:
    """All 2d fitting problems of a d-node network, in a fixed order."""
    return [TripleKey(w, s) for w in range(d) for s in (0, 1)]


@dataclass(frozen=True)
class TripleProblem:
    """Design of one per-triple fit: Z is (rows, d) with intercept column 0."""

    key: TripleKey
    Z: np.ndarray = field(repr=False)
    n: np.ndarray = field(repr=False)
    t: np.ndarray = field(repr=False)
    T: float

    def __post_init__(self):
        for name in ("Z", "n", "t"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_rows(self) -> int:
        return self.Z.shape[0]

    @property
    def n_cols(self) -> int:
        return self.Z.shape[1]


def _unpack_mask(mask: int, width: int) -> np.ndarray:
    return (mask >> np.arange(width, dtype=np.int64)) & 1


def build_triple(stats: SuffStats, key: TripleKey) -> TripleProblem:
    """Rows of the (w, s -> 1-s) problem: one per visited context.

    Raises DegenerateTripleError when the node has zero occupation in
    the source state, in which case the caller reports an all-zero
    coefficient vector instead of fitting.
    """
    w, s = key.w, key.s
    tk = stats.t_keys[w][s]
    if tk.size == 0 or float(stats.t_vals[w][s].sum()) <= 0.0:
        raise DegenerateTripleError(f"no occupation for triple {key}")
    nk = stats.n_keys[w][s]
    keys = np.union1d(tk, nk)
    t = np.zeros(keys.size)
    t[np.searchsorted(keys, tk)] = stats.t_vals[w][s]
    n = np.zeros(keys.size)
    n[np.searchsorted(keys, nk)] = stats.n_vals[w][s]
    d = stats.d
    Z = np.empty((keys.size, d))
    Z[:, 0] = 1.0
    if d > 1:
        bits = (keys[:, None] >> np.arange(d - 1, dtype=np.int64)[None, :]) & 1
        Z[:, 1:] = bits
    return TripleProblem(key=key, Z=Z, n=n, t=t, T=stats.T)


def loss(p: TripleProblem, theta) -> float:
    """Scaled negative log-likelihood; +inf when exp would overflow."""
    theta = np.asarray(theta, dtype=np.float64)
    u = p.Z @ theta
    if u.size and u.max() > EXP_CLAMP:
        return float("inf")
    return float((-(p.n @ u) + p.t @ np.exp(u)) / p.T)


def grad(p: TripleProblem, theta) -> np.ndarray:
    """Gradient of :func:`loss`; entries are +/-inf past the overflow clamp."""
    theta = np.asarray(theta, dtype=np.float64)
    u = p.Z @ theta
    if u.size and u.max() > EXP_CLAMP:
        u = np.minimum(u, EXP_CLAMP)
        r = p.t * np.exp(u) - p.n
        g = (p.Z.T @ r) / p.T
        return np.where(g > 0, np.inf, np.where(g < 0, -np.inf, 0.0))
    return (p.Z.T @ (p.t * np.exp(u) - p.n)) / p.T


def hess_quad(p: TripleProblem, theta, b) -> float:
    """Quadratic form b' H(theta) b of the loss Hessian; nonnegative."""
    theta = np.asarray(theta, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    u = np.minimum(p.Z @ theta, EXP_CLAMP)
    v = p.Z @ b
    return float((p.t * v * v) @ np.exp(u) / p.T)
