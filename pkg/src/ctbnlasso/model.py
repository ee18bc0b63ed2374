"""Domain types for binary CTBNs.

A network on d binary nodes is described per node w by a conditional
intensity table: for every configuration of pa(w) the pair of flip rates
(q01, q10), i.e. the rate of leaving state 0 and the rate of leaving
state 1.  Node order is ascending integer order everywhere: it fixes the
column layout of ``dummy_encode`` and the row layout of ``BetaMatrix``.

Full configurations are 0/1 vectors of length d; where a packed integer
is convenient (state indices of the amalgamated chain), bit w holds the
state of node w.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

__all__ = [
    "InvalidModelError",
    "CapacityError",
    "BetaMatrix",
    "CtbnModel",
    "ChainAnalysis",
    "dummy_encode",
    "rate",
    "leaving_rates",
    "make_m1",
    "make_m2",
    "true_edges",
    "amalgamate",
    "stationary_distribution",
    "analyze_chain",
    "model_to_json_dict",
    "model_from_json_dict",
]

# Packed restricted configurations use int64 bit masks.
MAX_NODES = 63

# Dense amalgamation / chain analysis cap: 2^14 states.
MAX_AMALGAMATION_NODES = 14

LOG9 = math.log(9.0)


class InvalidModelError(ValueError):
    """Raised for malformed models, configurations or parameters."""


class CapacityError(ValueError):
    """Raised when a computation would exceed the supported problem size."""


def _as_config(s, d: int) -> np.ndarray:
    s = np.asarray(s, dtype=np.int64)
    if s.shape != (d,):
        raise InvalidModelError(f"expected a configuration of length {d}, got shape {s.shape}")
    if np.any((s != 0) & (s != 1)):
        raise InvalidModelError("configuration entries must be 0 or 1")
    return s


def dummy_encode(w: int, c, d: int | None = None) -> np.ndarray:
    """Dummy encoding of a restricted configuration c over the nodes != w.

    Returns a 0/1 vector of length d: a leading 1 (intercept slot)
    followed by the states of the nodes != w in ascending node order.
    """
    c = np.asarray(c, dtype=np.int64)
    if d is None:
        d = c.size + 1
    if c.shape != (d - 1,):
        raise InvalidModelError(
            f"restricted configuration must have length {d - 1}, got shape {c.shape}"
        )
    if np.any((c != 0) & (c != 1)):
        raise InvalidModelError("configuration entries must be 0 or 1")
    z = np.empty(d, dtype=np.int64)
    z[0] = 1
    z[1:] = c
    return z


def column_of(w: int, u: int) -> int:
    """Column of node u in the encoded vector / coefficient row of node w."""
    if u == w:
        raise InvalidModelError("a node has no column in its own row")
    return 1 + (u if u < w else u - 1)


def node_of_column(w: int, j: int, d: int) -> int:
    """Inverse of :func:`column_of`; j >= 1 is a coefficient column."""
    if not 1 <= j < d:
        raise InvalidModelError(f"column {j} is not a coefficient column for d={d}")
    u = j - 1
    return u if u < w else u + 1


@dataclass(frozen=True)
class BetaMatrix:
    """Log-linear coefficients of all flip intensities.

    ``values`` has shape (2d, d).  Row 2w + s holds the coefficients of
    the intensity of node w leaving state s: the intercept first, then
    one coefficient per node != w in ascending node order.
    """

    d: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (2 * self.d, self.d):
            raise InvalidModelError(
                f"beta must have shape {(2 * self.d, self.d)}, got {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidModelError("beta entries must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def row(self, w: int, s: int) -> np.ndarray:
        return self.values[2 * w + s]

    def coef(self, w: int, s: int, u: int) -> float:
        """Coefficient of node u in the (w, s -> 1-s) intensity."""
        return float(self.values[2 * w + s, column_of(w, u)])

    def intercept(self, w: int, s: int) -> float:
        return float(self.values[2 * w + s, 0])

    def edges(self) -> frozenset[tuple[int, int]]:
        """Edges (u, w) with a nonzero coefficient in either transition of w."""
        out = set()
        for w in range(self.d):
            for j in range(1, self.d):
                if self.values[2 * w, j] != 0.0 or self.values[2 * w + 1, j] != 0.0:
                    out.add((node_of_column(w, j, self.d), w))
        return frozenset(out)

    def parent_sets(self) -> tuple[tuple[int, ...], ...]:
        """Per-node sorted parent tuples induced by the edge rule."""
        pa: list[list[int]] = [[] for _ in range(self.d)]
        for u, w in self.edges():
            pa[w].append(u)
        return tuple(tuple(sorted(p)) for p in pa)


@dataclass(frozen=True)
class CtbnModel:
    """A binary CTBN: parent sets plus conditional intensity tables.

    ``cims[w]`` maps each parent configuration (a 0/1 tuple over pa(w) in
    ascending order) to the flip-rate pair ``(q01, q10)``.  Instances are
    treated as immutable after construction.
    """

    d: int
    parents: tuple[tuple[int, ...], ...]
    cims: tuple[dict[tuple[int, ...], tuple[float, float]], ...]
    beta: BetaMatrix | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.d < 2:
            raise InvalidModelError("a CTBN needs at least 2 nodes")
        if self.d > MAX_NODES:
            raise CapacityError(f"at most {MAX_NODES} nodes are supported")
        if len(self.parents) != self.d or len(self.cims) != self.d:
            raise InvalidModelError("parents and cims must list every node")
        for w, pa in enumerate(self.parents):
            if w in pa:
                raise InvalidModelError(f"node {w} cannot be its own parent")
            if list(pa) != sorted(set(pa)):
                raise InvalidModelError(f"parent list of node {w} must be sorted and unique")
            if any(not 0 <= u < self.d for u in pa):
                raise InvalidModelError(f"parent of node {w} out of range")
            table = self.cims[w]
            if len(table) != 2 ** len(pa):
                raise InvalidModelError(
                    f"CIM of node {w} must cover all {2 ** len(pa)} parent configurations"
                )
            for cfg, rates in table.items():
                if len(cfg) != len(pa) or any(b not in (0, 1) for b in cfg):
                    raise InvalidModelError(f"bad CIM key {cfg} for node {w}")
                q01, q10 = rates
                if not (0 < q01 < math.inf and 0 < q10 < math.inf):
                    raise InvalidModelError(f"CIM rates of node {w} must be positive and finite")
        if self.beta is not None:
            if self.beta.d != self.d:
                raise InvalidModelError("beta dimension does not match the model")
            _check_beta_consistency(self)


def _check_beta_consistency(model: CtbnModel, rtol: float = 1e-12) -> None:
    """The stored log-linear coefficients must reproduce the CIM rates."""
    for w in range(model.d):
        beta0 = model.beta.row(w, 0)
        beta1 = model.beta.row(w, 1)
        for cfg, (q01, q10) in model.cims[w].items():
            z0 = beta0[0] + sum(
                beta0[column_of(w, u)] * b for u, b in zip(model.parents[w], cfg)
            )
            z1 = beta1[0] + sum(
                beta1[column_of(w, u)] * b for u, b in zip(model.parents[w], cfg)
            )
            if abs(math.exp(z0) - q01) > rtol * q01 or abs(math.exp(z1) - q10) > rtol * q10:
                raise InvalidModelError(
                    f"beta does not reproduce the CIM of node {w} at configuration {cfg}"
                )


def rate(model: CtbnModel, s, w: int) -> float:
    """Intensity of node w flipping out of its current state in configuration s."""
    s = _as_config(s, model.d)
    cfg = tuple(int(s[u]) for u in model.parents[w])
    pair = model.cims[w][cfg]
    return float(pair[int(s[w])])


def leaving_rates(model: CtbnModel, s) -> np.ndarray:
    """Vector of all d flip intensities in configuration s."""
    s = _as_config(s, model.d)
    out = np.empty(model.d, dtype=np.float64)
    for w in range(model.d):
        cfg = tuple(int(s[u]) for u in model.parents[w])
        out[w] = model.cims[w][cfg][int(s[w])]
    return out


def true_edges(model: CtbnModel) -> frozenset[tuple[int, int]]:
    """Edges (u, w) of the generating graph."""
    return frozenset((u, w) for w in range(model.d) for u in model.parents[w])


def _rng_from(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def make_m1(d: int, seed=0) -> CtbnModel:
    """Benchmark chain model: pa(k) = {k-1}, flip rates 1 vs 9.

    Node 0 flips at rate 5 in both states.  Every other node draws a
    fair coin a deciding whether it prefers to match (a=0) or mismatch
    (a=1) its parent; the rate of leaving the preferred state is 1 and
    of leaving the other state is 9.  The stored coefficients are the
    exact log-linear form of these rates, so the true edge set has the
    d-1 chain edges.
    """
    if d < 2:
        raise InvalidModelError("M1 requires d >= 2")
    if d > MAX_NODES:
        raise CapacityError(f"at most {MAX_NODES} nodes are supported")
    rng = _rng_from(seed)
    parents: list[tuple[int, ...]] = [()]
    cims: list[dict] = [{(): (5.0, 5.0)}]
    beta = np.zeros((2 * d, d))
    beta[0, 0] = beta[1, 0] = math.log(5.0)
    for k in range(1, d):
        a = int(rng.integers(0, 2))
        parents.append((k - 1,))
        table = {}
        for c in (0, 1):
            preferred = abs(c - a)
            q01 = 1.0 if preferred == 0 else 9.0
            q10 = 1.0 if preferred == 1 else 9.0
            table[(c,)] = (q01, q10)
        cims.append(table)
        col = column_of(k, k - 1)
        # log-rate of leaving s is LOG9*(c != |s-a| preference indicator)
        if a == 0:
            beta[2 * k, 0], beta[2 * k, col] = 0.0, LOG9
            beta[2 * k + 1, 0], beta[2 * k + 1, col] = LOG9, -LOG9
        else:
            beta[2 * k, 0], beta[2 * k, col] = LOG9, -LOG9
            beta[2 * k + 1, 0], beta[2 * k + 1, col] = 0.0, LOG9
    seed_val = seed if isinstance(seed, int) else None
    return CtbnModel(d, tuple(parents), tuple(cims), BetaMatrix(d, beta), seed_val)


def make_m2(d: int, seed=0) -> CtbnModel:
    """Benchmark model with a dense head: 10 edges among the first 5 nodes.

    Each of the first 5 nodes receives exactly 2 parents drawn uniformly
    without replacement from the other four of the first 5 nodes; the
    remaining nodes are parentless with flip rate 5.  For a node with
    parents, a random state a is drawn: when every parent is 1 the node
    is pushed away from a, otherwise towards it (rates 9 vs 1).  This
    dependence is not additive on the log scale, so no coefficient
    matrix is stored.
    """
    if d < 5:
        raise InvalidModelError("M2 requires d >= 5")
    if d > MAX_NODES:
        raise CapacityError(f"at most {MAX_NODES} nodes are supported")
    rng = _rng_from(seed)
    parents: list[tuple[int, ...]] = []
    cims: list[dict] = []
    for w in range(5):
        others = [u for u in range(5) if u != w]
        picked = rng.choice(len(others), size=2, replace=False)
        pa = tuple(sorted(others[i] for i in picked))
        a = int(rng.integers(0, 2))
        table = {}
        for c0 in (0, 1):
            for c1 in (0, 1):
                prod = c0 * c1
                rates = []
                for s in (0, 1):
                    if s == a:
                        rates.append(9.0 if prod == 1 else 1.0)
                    else:
                        rates.append(9.0 if prod == 0 else 1.0)
                table[(c0, c1)] = (rates[0], rates[1])
        parents.append(pa)
        cims.append(table)
    for w in range(5, d):
        parents.append(())
        cims.append({(): (5.0, 5.0)})
    seed_val = seed if isinstance(seed, int) else None
    return CtbnModel(d, tuple(parents), tuple(cims), None, seed_val)


def _rate_from_mask(model: CtbnModel, m: int, w: int) -> float:
    cfg = tuple((m >> u) & 1 for u in model.parents[w])
    return model.cims[w][cfg][(m >> w) & 1]


def amalgamate(model: CtbnModel) -> np.ndarray:
    """Full 2^d x 2^d generator of the joint chain.

    Entry (m, m') with m' = m XOR (1 << w) is the flip rate of node w in
    state m; entries differing in two or more coordinates are 0 and the
    diagonal makes rows sum to 0.
    """
    if model.d > MAX_AMALGAMATION_NODES:
        raise CapacityError(
            f"amalgamation is limited to d <= {MAX_AMALGAMATION_NODES} (2^d states)"
        )
    size = 1 << model.d
    Q = np.zeros((size, size))
    for m in range(size):
        for w in range(model.d):
            Q[m, m ^ (1 << w)] = _rate_from_mask(model, m, w)
        Q[m, m] = -Q[m].sum()
    return Q


def stationary_distribution(model: CtbnModel) -> np.ndarray:
    """Stationary law over the 2^d joint states, solved sparsely."""
    if model.d > MAX_AMALGAMATION_NODES:
        raise CapacityError(
            f"stationary distribution is limited to d <= {MAX_AMALGAMATION_NODES}"
        )
    size = 1 << model.d
    rows, cols, data = [], [], []
    diag = np.zeros(size)
    for m in range(size):
        for w in range(model.d):
            q = _rate_from_mask(model, m, w)
            rows.append(m)
            cols.append(m ^ (1 << w))
            data.append(q)
            diag[m] -= q
    rows.extend(range(size))
    cols.extend(range(size))
    data.extend(diag)
    Q = scipy.sparse.csr_matrix((data, (rows, cols)), shape=(size, size))
    # pi Q = 0 with sum(pi) = 1: replace the last equation of Q^T x = 0.
    A = Q.T.tolil()
    A[size - 1, :] = 1.0
    b = np.zeros(size)
    b[size - 1] = 1.0
    pi = scipy.sparse.linalg.spsolve(A.tocsr(), b)
    if not np.all(np.isfinite(pi)) or pi.min() <= 0:
        raise InvalidModelError("chain has no unique positive stationary distribution")
    return pi / pi.sum()


@dataclass(frozen=True)
class ChainAnalysis:
    """Spectral and stationary quantities of the amalgamated chain.

    pi       stationary law over the 2^d joint states
    rho1     smallest positive eigenvalue of -(Q + Q*)/2
    delta    largest off-diagonal intensity of Q
    nu_norm  sqrt(sum nu(s)^2 / pi(s)) of the initial law
    zeta     half the smallest pi(s, c_pa, 0) over nodes, own states and
             parent configurations (non-parents pinned to 0)
    """

    pi: np.ndarray = field(repr=False)
    rho1: float
    delta: float
    nu_norm: float
    zeta: float


def _min_pinned_pi(model: CtbnModel, pi: np.ndarray) -> float:
    parent_sets = (
        model.beta.parent_sets() if model.beta is not None else model.parents
    )
    best = math.inf
    for w in range(model.d):
        pa = parent_sets[w]
        for s in (0, 1):
            for bits in range(1 << len(pa)):
                m = s << w
                for j, u in enumerate(pa):
                    m |= ((bits >> j) & 1) << u
                best = min(best, pi[m])
    return best


def analyze_chain(model: CtbnModel, nu=None) -> ChainAnalysis:
    """Stationary law, spectral gap and concentration constants.

    nu is the initial distribution: None for the stationary law itself,
    a length-2^d probability vector, or a length-d 0/1 configuration for
    a point mass.
    """
    Q = amalgamate(model)
    size = Q.shape[0]
    pi = stationary_distribution(model)
    resid = np.abs(pi @ Q).max()
    if resid > 1e-8:
        raise InvalidModelError(f"stationary solve failed, |pi Q| = {resid:.3e}")

    # -(Q+Q*)/2 is self-adjoint in L2(pi); diagonalize its symmetric similar form.
    sqrt_pi = np.sqrt(pi)
    M = -0.5 * (
        sqrt_pi[:, None] * Q / sqrt_pi[None, :]
        + (Q.T * sqrt_pi[None, :]) / sqrt_pi[:, None]
    )
    M = 0.5 * (M + M.T)
    evals = scipy.linalg.eigh(M, eigvals_only=True)
    cutoff = max(abs(evals[0]), abs(evals[-1])) * 1e-9
    positive = evals[evals > cutoff]
    if positive.size != size - 1:
        raise InvalidModelError("chain is reducible: zero eigenvalue is not simple")
    rho1 = float(positive.min())

    offdiag = Q - np.diag(np.diag(Q))
    delta = float(offdiag.max())

    if nu is None:
        nu_vec = pi
    else:
        nu_arr = np.asarray(nu, dtype=np.float64)
        if nu_arr.shape == (model.d,):
            idx = int(sum(int(b) << w for w, b in enumerate(_as_config(nu_arr, model.d))))
            nu_vec = np.zeros(size)
            nu_vec[idx] = 1.0
        elif nu_arr.shape == (size,):
            if np.any(nu_arr < 0) or abs(nu_arr.sum() - 1.0) > 1e-10:
                raise InvalidModelError("nu must be a probability vector")
            nu_vec = nu_arr
        else:
            raise InvalidModelError("nu must be a configuration or a distribution over states")
    nu_norm = float(np.sqrt(np.sum(nu_vec**2 / pi)))

    zeta = _min_pinned_pi(model, pi) / 2.0
    return ChainAnalysis(pi=pi, rho1=rho1, delta=delta, nu_norm=nu_norm, zeta=zeta)


def model_to_json_dict(model: CtbnModel) -> dict:
    """JSON form: parent lists, CIM tables keyed by parent bit strings."""
    cims = {}
    for w in range(model.d):
        table = {}
        for cfg in sorted(model.cims[w]):
            q01, q10 = model.cims[w][cfg]
            table["".join(str(b) for b in cfg)] = [q01, q10]
        cims[str(w)] = table
    out = {
        "d": model.d,
        "parents": [list(p) for p in model.parents],
        "cims": cims,
    }
    if model.beta is not None:
        out["beta"] = {
            str(w): {
                "01": [float(x) for x in model.beta.row(w, 0)],
                "10": [float(x) for x in model.beta.row(w, 1)],
            }
            for w in range(model.d)
        }
    if model.seed is not None:
        out["seed"] = model.seed
    return out


def model_from_json_dict(data: dict) -> CtbnModel:
    d = int(data["d"])
    parents = tuple(tuple(int(u) for u in p) for p in data["parents"])
    cims = []
    for w in range(d):
        table = {}
        for key, rates in data["cims"][str(w)].items():
            if len(key) != len(parents[w]):
                raise InvalidModelError(f"CIM key '{key}' does not match parents of node {w}")
            cfg = tuple(int(ch) for ch in key)
            table[cfg] = (float(rates[0]), float(rates[1]))
        cims.append(table)
    beta = None
    if "beta" in data and data["beta"] is not None:
        values = np.zeros((2 * d, d))
        for w in range(d):
            values[2 * w] = data["beta"][str(w)]["01"]
            values[2 * w + 1] = data["beta"][str(w)]["10"]
        beta = BetaMatrix(d, values)
    return CtbnModel(d, parents, tuple(cims), beta, data.get("seed"))
