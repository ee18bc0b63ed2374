"""Model selection on top of the penalty paths.

Per triple, an information criterion with a log(n) complexity charge
picks the penalty level, then a second criterion with a log(2d(d-1))
charge picks a hard threshold that zeroes small coefficients (nothing
is refit afterwards).  Edges are read off the surviving coefficients:
u -> w exists when either transition of w keeps a nonzero coefficient
at u.  Intercepts never count towards model size and are never
thresholded.

Both criteria measure fit on the deviance scale, twice the unscaled
negative log-likelihood of the triple (2 * T * loss).  n always counts
the observed jumps of the whole process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .objective import (
    DegenerateTripleError,
    TripleKey,
    TripleProblem,
    build_triple,
    loss,
    triple_keys,
)
from .model import BetaMatrix, node_of_column
from .solver import LambdaPath, SolverConfig, path
from .stats import SuffStats, total_jumps

__all__ = [
    "TripleSelection",
    "SelectionResult",
    "bic_select",
    "gic_threshold",
    "assemble_edges",
    "select_structure",
]


def bic_select(lpath: LambdaPath, n_jumps: int) -> int:
    """Grid index minimizing deviance + log(n)*nnz; ties go to the sparser end.

    With at most one observed jump there is nothing to trade off and the
    empty-model index 0 is returned.
    """
    if len(lpath) == 0:
        raise ValueError("empty path")
    if n_jumps < 0:
        raise ValueError("n_jumps must be nonnegative")
    if n_jumps <= 1:
        return 0
    crit = 2.0 * lpath.T * lpath.losses + math.log(n_jumps) * lpath.nnz()
    # argmin returns the first minimizer; the grid descends, so that is
    # the largest penalty (the sparser model)
    return int(np.argmin(crit))


def gic_threshold(
    beta_hat, p: TripleProblem, n_jumps: int, d: int, grid=None
) -> tuple[float, np.ndarray]:
    """Pick the coefficient threshold by deviance + log(2d(d-1))*nnz.

    Candidate thresholds default to 0 plus every distinct magnitude of
    the penalized coefficients (the criterion is piecewise constant in
    the threshold with breakpoints exactly there).  Coordinates with
    magnitude <= threshold are zeroed; the intercept is kept and the
    survivors are not refit.  Ties prefer the larger threshold.
    """
    beta_hat = np.asarray(beta_hat, dtype=np.float64)
    if grid is None:
        grid = np.concatenate(([0.0], np.unique(np.abs(beta_hat[1:]))))
    penalty = math.log(2 * d * (d - 1))
    best_delta = None
    best_crit = math.inf
    best_beta = beta_hat
    for delta in sorted(set(float(x) for x in grid)):
        cand = beta_hat.copy()
        small = np.abs(cand[1:]) <= delta
        cand[1:][small] = 0.0
        crit = 2.0 * p.T * loss(p, cand) + penalty * int(np.count_nonzero(cand[1:]))
        if crit <= best_crit:
            best_crit = crit
            best_delta = delta
            best_beta = cand
    return best_delta, best_beta


@dataclass(frozen=True)
class TripleSelection:
    """Outcome of one per-triple fit-and-threshold."""

    key: TripleKey
    lambda_index: int
    lam: float
    beta_pre: np.ndarray = field(repr=False)
    delta: float = 0.0
    beta_post: np.ndarray = field(repr=False, default=None)
    bic: float = math.nan
    gic: float = math.nan
    degenerate: bool = False
    converged: bool = True

    def to_json_dict(self) -> dict:
        return {
            "w": self.key.w,
            "s": self.key.s,
            "sp": self.key.sp,
            "lambda": float(self.lam),
            "delta": float(self.delta),
            "beta": [float(x) for x in self.beta_post],
            "bic": float(self.bic),
            "gic": float(self.gic),
        }


@dataclass(frozen=True)
class SelectionResult:
    """All per-triple selections plus the recovered edge set."""

    d: int
    n_jumps: int
    triples: tuple[TripleSelection, ...]
    edges: frozenset[tuple[int, int]]

    def beta_matrix(self, post: bool = True) -> BetaMatrix:
        values = np.zeros((2 * self.d, self.d))
        for ts in self.triples:
            values[2 * ts.key.w + ts.key.s] = ts.beta_post if post else ts.beta_pre
        return BetaMatrix(self.d, values)


def assemble_edges(d: int, coefficient_rows: dict[TripleKey, np.ndarray]) -> frozenset:
    """Edges implied by post-threshold coefficients of all 2d triples."""
    edges = set()
    for key, beta in coefficient_rows.items():
        for j in range(1, d):
            if beta[j] != 0.0:
                edges.add((node_of_column(key.w, j, d), key.w))
    return frozenset(edges)


def select_structure(
    stats: SuffStats,
    cfg: SolverConfig | None = None,
    keep_paths: bool = False,
):
    """Full pipeline from sufficient statistics to an edge set.

    Degenerate triples (no occupation of the source state) contribute
    all-zero coefficients.  A trajectory without a single jump
    short-circuits to the empty graph.
    """
    cfg = cfg or SolverConfig()
    d = stats.d
    n = total_jumps(stats)
    selections: list[TripleSelection] = []
    paths: dict[TripleKey, LambdaPath] = {}
    for key in triple_keys(d):
        zeros = np.zeros(d)
        if n == 0:
            selections.append(
                TripleSelection(
                    key=key, lambda_index=0, lam=0.0, beta_pre=zeros,
                    delta=0.0, beta_post=zeros, degenerate=True,
                )
            )
            continue
        try:
            problem = build_triple(stats, key)
        except DegenerateTripleError:
            selections.append(
                TripleSelection(
                    key=key, lambda_index=0, lam=0.0, beta_pre=zeros,
                    delta=0.0, beta_post=zeros, degenerate=True,
                )
            )
            continue
        lpath = path(problem, cfg)
        if keep_paths:
            paths[key] = lpath
        i_star = bic_select(lpath, n)
        beta_pre = lpath.solutions[i_star]
        bic_val = float(
            2.0 * lpath.T * lpath.losses[i_star]
            + (math.log(n) if n > 1 else 0.0) * (beta_pre[1:] != 0).sum()
        )
        delta, beta_post = gic_threshold(beta_pre, problem, n, d)
        gic_val = float(
            2.0 * problem.T * loss(problem, beta_post)
            + math.log(2 * d * (d - 1)) * int(np.count_nonzero(beta_post[1:]))
        )
        selections.append(
            TripleSelection(
                key=key,
                lambda_index=i_star,
                lam=float(lpath.lambdas[i_star]),
                beta_pre=beta_pre,
                delta=delta,
                beta_post=beta_post,
                bic=bic_val,
                gic=gic_val,
                converged=bool(lpath.converged.all()),
            )
        )
    rows = {ts.key: ts.beta_post for ts in selections}
    result = SelectionResult(
        d=d, n_jumps=n, triples=tuple(selections), edges=assemble_edges(d, rows)
    )
    if keep_paths:
        return result, paths
    return result
