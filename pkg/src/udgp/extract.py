"""Turning a converged density into point location estimates.

Every grid cell with nonzero weight starts as its own cluster.  The closest
pair of clusters that are both lighter than a full point (weight < 1) and
closer than the minimum point separation is merged, weights adding and
centroids averaging by weight, until N clusters remain or nothing more can
merge.  The centroids of the N heaviest clusters are the estimates.  Ties in
the closest-pair distance are broken by a seeded random draw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import NONZERO_EPS, Density

__all__ = ["Cluster", "ExtractResult", "extract_points"]


@dataclass
class Cluster:
    weight: float
    centroid: float
    member_cells: list

    def span(self, delta_l: float):
        centers = [m * delta_l for m in self.member_cells]
        return min(centers), max(centers)


@dataclass
class ExtractResult:
    locations: np.ndarray  # ascending
    weights: np.ndarray  # aligned with locations
    deficient: bool
    clusters: list  # final clusters, for diagnostics

    def to_json(self) -> str:
        import json

        return json.dumps(
            {
                "locations": [float(v) for v in self.locations],
                "weights": [float(w) for w in self.weights],
                "deficient": bool(self.deficient),
            }
        )


def _circular_delta(a: float, b: float, L: float) -> float:
    """Signed shortest-arc displacement from a to b."""
    return (b - a + L / 2.0) % L - L / 2.0


def extract_points(
    z: Density, d_min: float, N: int, rng: np.random.Generator
) -> ExtractResult:
    if not d_min > 0:
        raise ValueError("d_min must be positive")
    grid = z.grid
    is_loop = grid.geometry.is_loop
    L = grid.length
    cells = z.support_cells(NONZERO_EPS)
    if cells.size < N:
        raise ValueError(
            f"density has only {cells.size} nonzero cells; cannot extract {N} points"
        )

    cents = cells.astype(float) * grid.delta_l
    weights = z.z[cells].astype(float)
    members = [[int(m)] for m in cells]
    # cells come out sorted, so centroids start sorted

    while len(members) > N:
        w = weights
        c = cents
        light = np.nonzero(w < 1.0)[0]
        if light.size < 2:
            break
        a = light[:-1]
        b = light[1:]
        if is_loop and light.size >= 2:
            a = np.append(a, light[-1])
            b = np.append(b, light[0])
        if is_loop:
            dist = np.abs((c[b] - c[a] + L / 2.0) % L - L / 2.0)
        else:
            dist = c[b] - c[a]
        ok = dist < d_min
        if not np.any(ok):
            break
        dmin_val = dist[ok].min()
        tied = np.nonzero(ok & (dist == dmin_val))[0]
        pick = tied[0] if tied.size == 1 else tied[rng.integers(tied.size)]
        i, j = int(a[pick]), int(b[pick])

        wi, wj = w[i], w[j]
        if is_loop:
            merged_c = (c[i] + (wj / (wi + wj)) * _circular_delta(c[i], c[j], L)) % L
        else:
            merged_c = (wi * c[i] + wj * c[j]) / (wi + wj)
        merged_w = wi + wj
        merged_members = members[i] + members[j]

        keep = np.ones(len(members), dtype=bool)
        keep[[i, j]] = False
        cents = cents[keep]
        weights = weights[keep]
        members = [m for k, m in enumerate(members) if keep[k]]
        pos = int(np.searchsorted(cents, merged_c))
        cents = np.insert(cents, pos, merged_c)
        weights = np.insert(weights, pos, merged_w)
        members.insert(pos, merged_members)

    clusters = [Cluster(float(w), float(c), m) for w, c, m in zip(weights, cents, members)]
    if len(clusters) > N:
        heaviest = np.argsort(-weights, kind="stable")[:N]
        clusters = [clusters[k] for k in sorted(heaviest)]
    deficient = len(clusters) < N

    locs = np.array([cl.centroid for cl in clusters])
    ws = np.array([cl.weight for cl in clusters])
    order = np.argsort(locs, kind="stable")
    return ExtractResult(locs[order], ws[order], deficient, [clusters[k] for k in order])
