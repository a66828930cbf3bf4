"""Interval backtracking for the noisy turnpike, and its exhaustive limit.

The classic search: anchor the extremes at 0 and d_max, then repeatedly take
the largest unassigned distance d and try the two placements d_max - d and d.
A placement is consistent when every induced distance to the points placed so
far matches a remaining multiset entry within delta_d; matched entries are
removed greedily (nearest value first, ties to the smaller value) and
restored on backtrack.  With delta_d as large as d_max every branch completes
and the search degenerates into exhaustive enumeration, whose solutions are
ranked by the earth mover's distance between their distance multiset and the
measured one.

There is no beltway variant: without a largest-distance anchor the strategy
does not apply on a loop.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

from .domain import DistanceMultiset, Geometry, MultisetKind, PointConfig

__all__ = [
    "BacktrackConfig",
    "BacktrackResult",
    "backtrack_turnpike",
    "exhaustive_turnpike",
]

_EXHAUSTIVE_MAX_N = 12


@dataclass(frozen=True)
class BacktrackConfig:
    delta_d: float = 0.0
    node_budget: int = 10_000_000
    find_all: bool = False

    def __post_init__(self):
        if self.delta_d < 0:
            raise ValueError("delta_d must be nonnegative")
        if self.node_budget < 1:
            raise ValueError("node_budget must be >= 1")


@dataclass
class BacktrackResult:
    solutions: list  # PointConfig, in discovery order (deduplicated)
    nodes: int = 0
    exhausted: bool = False  # node budget hit before the search space was covered

    @property
    def failed(self) -> bool:
        return not self.solutions


def _take_nearest(pool: list, target: float, delta: float):
    """Pop and return the pool entry nearest to target if within delta."""
    i = bisect.bisect_left(pool, target)
    best = None
    if i > 0:
        best = i - 1
    if i < len(pool):
        # ties go to the smaller value, i.e. the left neighbour
        if best is None or pool[i] - target < target - pool[best]:
            best = i
    if best is None or abs(pool[best] - target) > delta:
        return None
    return pool.pop(best)


def backtrack_turnpike(
    dm: DistanceMultiset, N: int, cfg: BacktrackConfig = BacktrackConfig()
) -> BacktrackResult:
    if dm.kind is not MultisetKind.TURNPIKE_RAW:
        raise ValueError("backtracking consumes the raw turnpike multiset")
    if dm.N != N:
        raise ValueError("multiset point count disagrees with N")

    vals = sorted(float(v) for v in dm.values)
    d_max = vals[-1]
    pool = vals[:-1]
    placed = [0.0, d_max]
    result = BacktrackResult(solutions=[])
    seen = set()

    def record():
        tup = tuple(sorted(placed))
        if tup not in seen:
            seen.add(tup)
            result.solutions.append(PointConfig(np.array(tup), Geometry.line()))

    def search() -> bool:
        """Depth-first; returns True when the caller should stop unwinding."""
        if not pool:
            record()
            return not cfg.find_all
        result.nodes += 1
        if result.nodes > cfg.node_budget:
            result.exhausted = True
            return True
        d = pool[-1]
        for cand in (d_max - d, d):
            if any(cand == q for q in placed):
                continue  # coincident points are not a valid configuration
            induced = sorted((abs(cand - q) for q in placed), reverse=True)
            removed = []
            feasible = True
            for target in induced:
                got = _take_nearest(pool, target, cfg.delta_d)
                if got is None:
                    feasible = False
                    break
                removed.append(got)
            if feasible:
                placed.append(cand)
                stop = search()
                placed.pop()
                if stop:
                    for v in removed:
                        bisect.insort(pool, v)
                    return True
            for v in removed:
                bisect.insort(pool, v)
        return False

    search()
    return result


def _multiset_emd(a: np.ndarray, b: np.ndarray) -> float:
    """Exact 1D earth mover's distance between two equal-size multisets."""
    return float(np.mean(np.abs(np.sort(a) - np.sort(b))))


def exhaustive_turnpike(
    dm: DistanceMultiset, N: int, d_max: float | None = None, node_budget: int = 10_000_000
) -> list:
    """All backtracking solutions with the search interval opened to d_max,
    ranked best-first by distance-distribution mismatch with the data."""
    if N > _EXHAUSTIVE_MAX_N:
        raise ValueError(f"exhaustive search is guarded to N <= {_EXHAUSTIVE_MAX_N}")
    if d_max is None:
        d_max = float(dm.values.max())
    res = backtrack_turnpike(
        dm, N, BacktrackConfig(delta_d=d_max, node_budget=node_budget, find_all=True)
    )
    observed = np.sort(dm.values)

    def score(config: PointConfig) -> float:
        u = config.locations
        i, j = np.triu_indices(len(u), k=1)
        return _multiset_emd(np.abs(u[j] - u[i]), observed)

    return sorted(res.solutions, key=score)
