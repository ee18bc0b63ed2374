"""Exact trajectory sampling by competing exponential clocks.

All randomness flows through a Philox counter-based generator; waiting
times are drawn by inverse CDF so a seed pins the path bit-for-bit.
Replicate k of a batch uses the seed stream ``SeedSequence((seed, k))``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .model import CtbnModel, InvalidModelError, MAX_AMALGAMATION_NODES, stationary_distribution

__all__ = [
    "Trajectory",
    "InvalidTrajectoryError",
    "sample_path",
    "replicate",
    "sub_seed",
    "trajectory_to_json",
    "trajectory_from_json",
    "BURN_IN",
]

# Horizon of the discarded warm-up used for "stationary" starts when the
# state space is too large to solve for the stationary law exactly.
BURN_IN = 10.0


class InvalidTrajectoryError(ValueError):
    """Raised for malformed sample paths."""


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-constant path on [0, T].

    ``times[i]`` is the instant at which node ``nodes[i]`` flips; times
    are strictly increasing inside (0, T].  Replaying the flips from
    ``initial`` reconstructs the path.
    """

    d: int
    T: float
    initial: np.ndarray = field(repr=False)
    times: np.ndarray = field(repr=False)
    nodes: np.ndarray = field(repr=False)

    def __post_init__(self):
        initial = np.asarray(self.initial, dtype=np.int8)
        times = np.asarray(self.times, dtype=np.float64)
        nodes = np.asarray(self.nodes, dtype=np.int64)
        if self.T <= 0:
            raise InvalidTrajectoryError("horizon must be positive")
        if initial.shape != (self.d,) or np.any((initial != 0) & (initial != 1)):
            raise InvalidTrajectoryError("initial configuration must be 0/1 of length d")
        if times.shape != nodes.shape or times.ndim != 1:
            raise InvalidTrajectoryError("times and nodes must be 1-d and aligned")
        if times.size:
            if np.any(np.diff(times) <= 0):
                raise InvalidTrajectoryError("jump times must be strictly increasing")
            if times[0] <= 0 or times[-1] > self.T:
                raise InvalidTrajectoryError("jump times must lie in (0, T]")
            if np.any((nodes < 0) | (nodes >= self.d)):
                raise InvalidTrajectoryError("jump node out of range")
        for name, arr in (("initial", initial), ("times", times), ("nodes", nodes)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_jumps(self) -> int:
        return int(self.times.size)


def sub_seed(seed: int, index: int) -> np.random.SeedSequence:
    """Deterministic per-replicate seed stream."""
    return np.random.SeedSequence((seed, index))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def _exponential(rng: np.random.Generator, rate: float) -> float:
    # inverse CDF keeps the draw reproducible across platforms
    return -np.log1p(-rng.random()) / rate


class _RateTables:
    """Dense per-node rate lookup: table[w][parent bits packed, own state]."""

    def __init__(self, model: CtbnModel):
        self.parents = model.parents
        self.children: list[list[int]] = [[] for _ in range(model.d)]
        for w, pa in enumerate(model.parents):
            for u in pa:
                self.children[u].append(w)
        self.tables = []
        for w, pa in enumerate(model.parents):
            tab = np.empty((1 << len(pa), 2))
            for cfg, (q01, q10) in model.cims[w].items():
                idx = sum(b << j for j, b in enumerate(cfg))
                tab[idx, 0] = q01
                tab[idx, 1] = q10
            self.tables.append(tab)

    def rate(self, w: int, state: np.ndarray) -> float:
        idx = 0
        for j, u in enumerate(self.parents[w]):
            idx |= int(state[u]) << j
        return self.tables[w][idx, int(state[w])]


def _gillespie(model, tables, state, T, rng, record):
    """Advance ``state`` in place until T; optionally record jumps."""
    d = model.d
    rates = np.array([tables.rate(w, state) for w in range(d)])
    total = rates.sum()
    times: list[float] = []
    nodes: list[int] = []
    t = 0.0
    while True:
        t += _exponential(rng, total)
        if t >= T:
            break
        u = rng.random() * total
        w = int(np.searchsorted(np.cumsum(rates), u, side="right"))
        if w >= d:
            w = d - 1
        state[w] = 1 - state[w]
        if record:
            times.append(t)
            nodes.append(w)
        rates[w] = tables.rate(w, state)
        for child in tables.children[w]:
            rates[child] = tables.rate(child, state)
        total = rates.sum()
    return times, nodes


def sample_path(model: CtbnModel, nu, T: float, seed=0) -> Trajectory:
    """Sample one trajectory of the CTBN on [0, T].

    Parameters
    ----------
    model : CtbnModel
    nu : "stationary" or array-like
        Start specification.  "stationary" samples the initial
        configuration from the stationary law when the state space is
        small enough, and otherwise discards a warm-up of length
        ``BURN_IN``.  An explicit 0/1 configuration is used as is.
    T : float
        Horizon; events exactly at T are excluded.
    seed : int, SeedSequence or Generator
    """
    if T <= 0:
        raise InvalidTrajectoryError("horizon must be positive")
    rng = _rng(seed)
    tables = _RateTables(model)
    d = model.d
    if isinstance(nu, str):
        if nu != "stationary":
            raise InvalidModelError(f"unknown start spec '{nu}'")
        if d <= MAX_AMALGAMATION_NODES:
            pi = stationary_distribution(model)
            idx = int(np.searchsorted(np.cumsum(pi), rng.random(), side="right"))
            idx = min(idx, pi.size - 1)
            state = np.array([(idx >> w) & 1 for w in range(d)], dtype=np.int8)
        else:
            state = rng.integers(0, 2, size=d).astype(np.int8)
            _gillespie(model, tables, state, BURN_IN, rng, record=False)
    else:
        state = np.asarray(nu, dtype=np.int8).copy()
        if state.shape != (d,) or np.any((state != 0) & (state != 1)):
            raise InvalidModelError("explicit start must be a 0/1 configuration of length d")
    initial = state.copy()
    times, nodes = _gillespie(model, tables, state, T, rng, record=True)
    return Trajectory(d=d, T=float(T), initial=initial, times=np.array(times), nodes=np.array(nodes, dtype=np.int64))


def replicate(model: CtbnModel, nu, T: float, n_reps: int, seed: int = 0) -> list[Trajectory]:
    """Independent trajectories from per-replicate seed streams.

    The same (model, nu, T, n_reps, seed) always yields bit-identical
    output; replicate k equals ``sample_path`` run with ``sub_seed(seed, k)``.
    """
    if n_reps < 1:
        raise InvalidTrajectoryError("n_reps must be at least 1")
    return [sample_path(model, nu, T, sub_seed(seed, k)) for k in range(n_reps)]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_to_json(traj: Trajectory) -> str:
    """Serialize with 17 significant digits on every time stamp."""
    jumps = ",".join(
        '{"t":%s,"node":%d}' % (_fmt(t), int(w)) for t, w in zip(traj.times, traj.nodes)
    )
    initial = ",".join(str(int(b)) for b in traj.initial)
    return (
        '{"d":%d,"T":%s,"initial":[%s],"jumps":[%s]}'
        % (traj.d, _fmt(traj.T), initial, jumps)
    )


def trajectory_from_json(text: str) -> Trajectory:
    data = json.loads(text)
    jumps = data.get("jumps", [])
    return Trajectory(
        d=int(data["d"]),
        T=float(data["T"]),
        initial=np.array(data["initial"], dtype=np.int8),
        times=np.array([j["t"] for j in jumps], dtype=np.float64),
        nodes=np.array([j["node"] for j in jumps], dtype=np.int64),
    )
