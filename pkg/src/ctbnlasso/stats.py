"""Sufficient statistics of a trajectory under the all-parents model.

For every node w the path is summarized by jump counts and occupation
times keyed by the configuration of the other d-1 nodes.  Keys are bit
masks over the nodes != w in ascending order (bit j = j-th such node),
which keeps hashing O(1) and serialization bit-exact.  Only visited
keys are stored; a path with k jumps touches at most k+1 keys per map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .simulate import InvalidTrajectoryError, Trajectory

__all__ = ["SuffStats", "extract", "total_jumps", "stats_to_json_dict", "stats_from_json_dict"]


@dataclass(frozen=True)
class SuffStats:
    """Per-(node, own state) jump counts and occupation times.

    ``n_keys[w][s]`` / ``n_vals[w][s]`` hold the masks and counts of the
    flips of node w out of state s; ``t_keys[w][s]`` / ``t_vals[w][s]``
    the masks and the time node w spent in state s.  Key arrays are
    sorted and all four structures are immutable.
    """

    d: int
    T: float
    n_keys: tuple = field(repr=False)
    n_vals: tuple = field(repr=False)
    t_keys: tuple = field(repr=False)
    t_vals: tuple = field(repr=False)

    def n_map(self, w: int, s: int) -> dict[int, int]:
        """Jump counts of node w out of state s, keyed by context mask."""
        return dict(zip(self.n_keys[w][s].tolist(), self.n_vals[w][s].tolist()))

    def t_map(self, w: int, s: int) -> dict[int, float]:
        """Occupation times of node w in state s, keyed by context mask."""
        return dict(zip(self.t_keys[w][s].tolist(), self.t_vals[w][s].tolist()))


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _restricted_masks(masks: np.ndarray, w: int) -> np.ndarray:
    """Drop bit w and close the gap: masks over the remaining nodes."""
    low = masks & ((np.int64(1) << w) - 1)
    high = (masks >> (w + 1)) << w
    return low | high


def extract(traj: Trajectory) -> SuffStats:
    """Accumulate jump counts and occupation times from a path."""
    d, T = traj.d, traj.T
    times = traj.times
    nodes = traj.nodes
    if times.size and np.any(np.diff(times) <= 0):
        raise InvalidTrajectoryError("jump times must be strictly increasing")

    # state mask of every constant segment; segment i spans [bounds[i], bounds[i+1])
    m0 = np.int64(sum(int(b) << w for w, b in enumerate(traj.initial)))
    flips = (np.int64(1) << nodes).astype(np.int64)
    seg_masks = np.bitwise_xor.accumulate(np.concatenate(([m0], flips)))
    bounds = np.concatenate(([0.0], times, [T]))
    durations = np.diff(bounds)

    n_keys, n_vals, t_keys, t_vals = [], [], [], []
    pre_jump_masks = seg_masks[:-1]
    for w in range(d):
        ctx = _restricted_masks(seg_masks, w)
        own = (seg_masks >> w) & 1
        tk, tv = [], []
        for s in (0, 1):
            sel = (own == s) & (durations > 0)
            keys, inverse = np.unique(ctx[sel], return_inverse=True)
            sums = np.zeros(keys.size)
            np.add.at(sums, inverse, durations[sel])
            tk.append(_freeze(keys))
            tv.append(_freeze(sums))
        t_keys.append(tuple(tk))
        t_vals.append(tuple(tv))

        nk, nv = [], []
        is_w = nodes == w
        jump_ctx = _restricted_masks(pre_jump_masks[is_w], w)
        jump_from = (pre_jump_masks[is_w] >> w) & 1
        for s in (0, 1):
            keys, counts = np.unique(jump_ctx[jump_from == s], return_counts=True)
            nk.append(_freeze(keys))
            nv.append(_freeze(counts.astype(np.int64)))
        n_keys.append(tuple(nk))
        n_vals.append(tuple(nv))

    return SuffStats(
        d=d,
        T=T,
        n_keys=tuple(n_keys),
        n_vals=tuple(n_vals),
        t_keys=tuple(t_keys),
        t_vals=tuple(t_vals),
    )


def total_jumps(stats: SuffStats) -> int:
    """Total number of recorded flips across all nodes."""
    return int(sum(int(stats.n_vals[w][s].sum()) for w in range(stats.d) for s in (0, 1)))


def stats_to_json_dict(stats: SuffStats) -> dict:
    """Debug/export form with decimal-string mask keys."""
    n = {}
    t = {}
    for w in range(stats.d):
        n[str(w)] = {
            "01": {str(k): int(v) for k, v in stats.n_map(w, 0).items()},
            "10": {str(k): int(v) for k, v in stats.n_map(w, 1).items()},
        }
        t[str(w)] = {
            "0": {str(k): float(v) for k, v in stats.t_map(w, 0).items()},
            "1": {str(k): float(v) for k, v in stats.t_map(w, 1).items()},
        }
    return {"d": stats.d, "T": stats.T, "n": n, "t": t}


def stats_from_json_dict(data: dict) -> SuffStats:
    d = int(data["d"])
    n_keys, n_vals, t_keys, t_vals = [], [], [], []
    for w in range(d):
        nk, nv, tk, tv = [], [], [], []
        for label in ("01", "10"):
            items = sorted((int(k), int(v)) for k, v in data["n"][str(w)][label].items())
            nk.append(_freeze(np.array([k for k, _ in items], dtype=np.int64)))
            nv.append(_freeze(np.array([v for _, v in items], dtype=np.int64)))
        for label in ("0", "1"):
            items = sorted((int(k), float(v)) for k, v in data["t"][str(w)][label].items())
            tk.append(_freeze(np.array([k for k, _ in items], dtype=np.int64)))
            tv.append(_freeze(np.array([v for _, v in items], dtype=np.float64)))
        n_keys.append(tuple(nk))
        n_vals.append(tuple(nv))
        t_keys.append(tuple(tk))
        t_vals.append(tuple(tv))
    return SuffStats(
        d=d,
        T=float(data["T"]),
        n_keys=tuple(n_keys),
        n_vals=tuple(n_vals),
        t_keys=tuple(t_keys),
        t_vals=tuple(t_vals),
    )
