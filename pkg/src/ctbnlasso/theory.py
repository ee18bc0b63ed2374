"""Computable constants and empirical validators for the recovery guarantee.

The estimation-error guarantee trades off four ingredients: a curvature
floor obtained from the true coefficients (``a_beta``/``cif_report``),
stationary-occupation constants of the joint chain, a minimum
observation time, and a window of admissible penalty levels.  These are
conservative; at desk scales the window may well be empty and the
report flags that instead of failing.

Two identities from the analysis are exposed for direct empirical
checking: the compensated jump-count process (``martingale_residual``,
zero in expectation under the true model) and the curvature sandwich
relating gradient differences to the Hessian quadratic form
(``sandwich_check``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import BetaMatrix, ChainAnalysis, CtbnModel, column_of
from .objective import TripleProblem, grad, hess_quad
from .simulate import Trajectory
from .stats import SuffStats, extract

__all__ = [
    "UndefinedBoundError",
    "CifReport",
    "TheoremBounds",
    "a_beta",
    "cif_report",
    "theorem_bounds",
    "martingale_residual",
    "sandwich_check",
    "occupation_tail_bound",
    "cif_diagnostic",
    "theory_report_json",
]


class UndefinedBoundError(ValueError):
    """The curvature bound needs at least one nonzero coefficient."""


def _nonzero_coefs(beta: BetaMatrix) -> np.ndarray:
    coefs = beta.values[:, 1:]
    return coefs[coefs != 0.0]


def a_beta(beta: BetaMatrix) -> float:
    """Sum of exp(-coefficient) over all nonzero penalized coefficients.

    Grows when negative coefficients dominate (slow chains need longer
    observation windows); the curvature floor is its reciprocal up to
    the cone opening factor.
    """
    nz = _nonzero_coefs(beta)
    if nz.size == 0:
        raise UndefinedBoundError("all penalized coefficients are zero")
    return float(np.exp(-nz).sum())


@dataclass(frozen=True)
class CifReport:
    """Curvature floor of the penalized problem at the true coefficients."""

    xi: float
    a_beta: float
    f_lower: float
    beta_min: float
    s_size: int
    max_sw: int


def cif_report(beta: BetaMatrix, xi: float) -> CifReport:
    if xi <= 1:
        raise ValueError("xi must exceed 1")
    nz = _nonzero_coefs(beta)
    if nz.size == 0:
        raise UndefinedBoundError("all penalized coefficients are zero")
    ab = float(np.exp(-nz).sum())
    max_sw = max((len(p) for p in beta.parent_sets()), default=0)
    return CifReport(
        xi=float(xi),
        a_beta=ab,
        f_lower=1.0 / (xi * ab),
        beta_min=float(np.abs(nz).min()),
        s_size=int(nz.size),
        max_sw=int(max_sw),
    )


@dataclass(frozen=True)
class TheoremBounds:
    """Constants of the high-probability recovery guarantee.

    ``lambda_lo > lambda_hi`` means the guarantee is vacuous at the
    chosen (xi, epsilon, T); that is reported, not raised.
    """

    xi: float
    epsilon: float
    K: float
    T_min: float
    T_used: float
    lambda_lo: float
    lambda_hi: float
    R: float
    zeta: float
    rho1: float
    vacuous: bool


def theorem_bounds(
    model: CtbnModel,
    analysis: ChainAnalysis,
    xi: float,
    epsilon: float,
    T: float | None = None,
) -> TheoremBounds:
    """Evaluate the guarantee's constants for a model with known coefficients.

    The curvature term enters through its closed-form lower bound.  T
    defaults to the larger of the minimum observation time and 2/delta
    (both are assumptions of the guarantee); R is evaluated at the small
    end of the penalty window.
    """
    if model.beta is None:
        raise UndefinedBoundError("the model carries no coefficient matrix")
    if xi <= 1:
        raise ValueError("xi must exceed 1")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    d = model.d
    nz = _nonzero_coefs(model.beta)
    if nz.size:
        f_lower = 1.0 / (xi * float(np.exp(-nz).sum()))
        s_size = int(nz.size)
    else:
        # edgeless network: the cone degenerates and the error bound is trivial
        f_lower = math.inf
        s_size = 0
    max_sw = max((len(p) for p in model.beta.parent_sets()), default=0)

    K = 2.0 * (2.0 + math.e**2) * d * (d - 1)
    min_pi = 2.0 * analysis.zeta
    T_min = (
        36.0
        * ((max_sw + 1) * math.log(2.0) + math.log(d * analysis.nu_norm / epsilon))
        / (min_pi**2 * analysis.rho1)
    )
    T_used = float(T) if T is not None else max(T_min, 2.0 / analysis.delta)
    lambda_lo = (
        2.0 * (xi + 1.0) / (xi - 1.0) * math.log(K / epsilon) * math.sqrt(analysis.delta / T_used)
    )
    if s_size:
        lambda_hi = 2.0 * analysis.zeta * f_lower / (math.e * (xi + 1.0) * s_size)
    else:
        lambda_hi = math.inf
    R = 2.0 * math.e * xi * lambda_lo / ((xi + 1.0) * analysis.zeta * f_lower)
    return TheoremBounds(
        xi=float(xi),
        epsilon=float(epsilon),
        K=K,
        T_min=T_min,
        T_used=T_used,
        lambda_lo=lambda_lo,
        lambda_hi=lambda_hi,
        R=R,
        zeta=analysis.zeta,
        rho1=analysis.rho1,
        vacuous=bool(lambda_lo > lambda_hi),
    )


def martingale_residual(
    traj: Trajectory,
    model: CtbnModel,
    w: int,
    s: int,
    k: int,
    stats: SuffStats | None = None,
) -> float:
    """Compensated jump count of one triple along one encoded coordinate.

    Sums n - t * q over the contexts whose encoding has a 1 at slot k
    (slot 0 is the intercept, so k=0 sums over every context).  Under
    the true generating model this has mean zero for any horizon and
    any initial law, and the full vector over k equals -T times the
    loss gradient at the true coefficients.
    """
    if stats is None:
        stats = extract(traj)
    d = model.d
    if not 0 <= k < d:
        raise ValueError(f"coordinate k must lie in [0, {d})")
    parents = model.parents[w]
    positions = [u if u < w else u - 1 for u in parents]

    def q_of(mask: int) -> float:
        cfg = tuple((int(mask) >> pos) & 1 for pos in positions)
        return model.cims[w][cfg][s]

    keys = np.union1d(stats.n_keys[w][s], stats.t_keys[w][s])
    n_map = stats.n_map(w, s)
    t_map = stats.t_map(w, s)
    total = 0.0
    for mask in keys.tolist():
        if k > 0 and not (mask >> (k - 1)) & 1:
            continue
        total += n_map.get(mask, 0) - t_map.get(mask, 0.0) * q_of(mask)
    return float(total)


def sandwich_check(p: TripleProblem, beta, b, slack: float = 1e-10) -> bool:
    """Curvature sandwich: gradient increments vs the Hessian quadratic form.

    With c = max over rows of exp(|b . z|), checks
        H/c <= b . (grad(beta + b) - grad(beta)) <= c * H
    up to slack * (1 + |middle|).
    """
    beta = np.asarray(beta, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c_b = float(np.exp(np.abs(p.Z @ b)).max())
    middle = float(b @ (grad(p, beta + b) - grad(p, beta)))
    h = hess_quad(p, beta, b)
    tol = slack * (1.0 + abs(middle))
    return (h / c_b - tol <= middle) and (middle <= c_b * h + tol)


def occupation_tail_bound(pi_value: float, rho1: float, nu_norm: float, T: float) -> float:
    """Tail bound on under-occupation of one pinned configuration.

    Bounds the probability that the occupation fraction of a state with
    stationary mass pi_value stays below pi_value/2 on [0, T].  Reported
    as a diagnostic; it is not a certified quantity of this package.
    """
    if not 0 < pi_value < 1:
        raise ValueError("pi_value must lie in (0, 1)")
    return float(nu_norm * math.exp(-(pi_value**2) * rho1 * T / (16.0 + 20.0 * pi_value)))


def cif_diagnostic(beta: BetaMatrix, xi: float, n_samples: int = 200, seed: int = 0) -> float:
    """Monte Carlo probe of the restricted curvature over the cone.

    Samples directions theta with |theta_{off-support}|_1 <= xi *
    |theta_support|_1 and evaluates the pinned-context curvature ratio;
    returns the smallest ratio seen.  Diagnostic only: the closed-form
    lower bound, not this estimate, feeds the guarantee.
    """
    if xi <= 1:
        raise ValueError("xi must exceed 1")
    d = beta.d
    coefs = beta.values[:, 1:]
    support = coefs != 0.0
    if not support.any():
        raise UndefinedBoundError("all penalized coefficients are zero")
    parent_sets = beta.parent_sets()
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    best = math.inf
    for _ in range(n_samples):
        theta = np.zeros_like(coefs)
        theta[support] = rng.standard_normal(int(support.sum()))
        off = ~support
        n_off = int(off.sum())
        if n_off:
            raw = rng.standard_normal(n_off)
            budget = rng.random() * xi * np.abs(theta[support]).sum()
            norm = np.abs(raw).sum()
            theta[off] = raw * (budget / norm) if norm > 0 else 0.0
        numer = 0.0
        for w in range(d):
            pa = parent_sets[w]
            if not pa:
                continue
            cols = [column_of(w, u) - 1 for u in pa]
            for s in (0, 1):
                brow = coefs[2 * w + s]
                trow = theta[2 * w + s]
                for bits in range(1 << len(pa)):
                    c = [(bits >> j) & 1 for j in range(len(pa))]
                    e = sum(brow[col] * cj for col, cj in zip(cols, c))
                    v = sum(trow[col] * cj for col, cj in zip(cols, c))
                    numer += math.exp(e) * v * v
        denom = np.abs(theta[support]).sum() * np.abs(theta).max()
        if denom > 0:
            best = min(best, numer / denom)
    return float(best)


def theory_report_json(
    model: CtbnModel,
    analysis: ChainAnalysis,
    xi: float,
    epsilon: float,
    T: float | None = None,
) -> dict:
    """Flat JSON view combining the curvature report and the bound constants."""
    bounds = theorem_bounds(model, analysis, xi, epsilon, T)
    nz = _nonzero_coefs(model.beta)
    ab = float(np.exp(-nz).sum()) if nz.size else math.inf
    return {
        "A_beta": ab,
        "F_lower": 1.0 / (xi * ab) if nz.size else math.inf,
        "K": bounds.K,
        "T_min": bounds.T_min,
        "lambda_lo": bounds.lambda_lo,
        "lambda_hi": bounds.lambda_hi,
        "R": bounds.R,
        "zeta": bounds.zeta,
        "rho1": bounds.rho1,
        "vacuous": bounds.vacuous,
    }
