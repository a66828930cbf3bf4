"""Core value types for 1D unassigned distance geometry.

Points live either on a line or on a loop of known circumference.  The
measurement is an *unassigned* multiset of pairwise distances: on a line all
C(N,2) absolute differences, on a loop all N(N-1) clockwise distances.  Before
distribution matching the multiset is augmented with the N zero self
distances, so the augmented sizes are N(N+1)/2 (line) and N^2 (loop).

Everything here is an immutable value validated at construction time; the
rest of the package assumes well-formed instances.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

__all__ = [
    "Geometry",
    "Grid",
    "PointConfig",
    "MultisetKind",
    "DistanceMultiset",
    "Density",
    "DistDistribution",
    "quantize_location",
    "quantize_config",
    "pairwise_distances",
    "add_noise",
    "round_half_away",
]

LOOP_GRID_RTOL = 1e-9
DENSITY_SUM_RTOL = 1e-8
DIST_SUM_TOL = 1e-9

# Cells below this weight are numerical dust, not point mass.
NONZERO_EPS = 1e-12


@dataclass(frozen=True)
class Geometry:
    """A line, or a loop of circumference ``loop_length``."""

    kind: Literal["line", "loop"]
    loop_length: float | None = None

    def __post_init__(self):
        if self.kind not in ("line", "loop"):
            raise ValueError(f"unknown geometry kind {self.kind!r}")
        if self.kind == "loop":
            if self.loop_length is None or not self.loop_length > 0:
                raise ValueError("loop geometry requires loop_length > 0")
        elif self.loop_length is not None:
            raise ValueError("line geometry does not take a loop_length")

    @property
    def is_loop(self) -> bool:
        return self.kind == "loop"

    @staticmethod
    def line() -> "Geometry":
        return Geometry("line")

    @staticmethod
    def loop(length: float) -> "Geometry":
        return Geometry("loop", float(length))


@dataclass(frozen=True)
class Grid:
    """Uniform discretization into ``M`` cells of width ``delta_l``.

    Cell ``m`` is centered at ``m * delta_l``.  A loop grid must tile the
    circumference exactly; a line grid covers ``M * delta_l``, which must be
    at least the largest distance of the problem it serves.
    """

    M: int
    delta_l: float
    geometry: Geometry

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("grid needs at least one cell")
        if not self.delta_l > 0:
            raise ValueError("delta_l must be positive")
        if self.geometry.is_loop:
            L = self.geometry.loop_length
            if abs(self.M * self.delta_l - L) > LOOP_GRID_RTOL * L:
                raise ValueError(
                    f"loop grid must tile the loop: M*delta_l={self.M * self.delta_l!r} "
                    f"vs loop_length={L!r}"
                )

    @property
    def length(self) -> float:
        return self.M * self.delta_l

    def cell_center(self, m) -> float:
        return m * self.delta_l

    @staticmethod
    def for_line(max_distance: float, delta_l: float) -> "Grid":
        # one spare cell so the largest observed distance always quantizes inside
        if not max_distance > 0:
            raise ValueError("max_distance must be positive")
        M = int(math.ceil(max_distance / float(delta_l))) + 1
        return Grid(M, float(delta_l), Geometry.line())

    @staticmethod
    def for_loop(loop_length: float, delta_l: float) -> "Grid":
        M = int(round(loop_length / float(delta_l)))
        return Grid(M, float(delta_l), Geometry.loop(loop_length))


def round_half_away(x):
    """Nearest integer, ties away from zero (0.5 -> 1, -0.5 -> -1)."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize_location(u: float, grid: Grid) -> int:
    """Map a continuous coordinate to its nearest grid cell index."""
    v = int(round_half_away(u / grid.delta_l))
    if grid.geometry.is_loop:
        return v % grid.M
    if v < 0 or v > grid.M - 1:
        raise ValueError(f"location {u!r} quantizes to cell {v}, outside 0..{grid.M - 1}")
    return v


def quantize_config(config: "PointConfig", grid: Grid) -> np.ndarray:
    """Quantize every point; reject configurations that collide on the grid."""
    cells = np.array([quantize_location(u, grid) for u in config.locations], dtype=int)
    if np.unique(cells).size != cells.size:
        raise ValueError(
            "two points quantize to the same cell; grid violates the "
            "minimum separation criterion (delta_l too coarse)"
        )
    return cells


@dataclass(frozen=True)
class PointConfig:
    """N distinct point locations on a line or loop, continuous units."""

    locations: np.ndarray
    geometry: Geometry

    def __post_init__(self):
        u = np.array(self.locations, dtype=float)
        if u.ndim != 1 or u.size < 2:
            raise ValueError("need at least two points")
        if not np.all(np.isfinite(u)):
            raise ValueError("locations must be finite")
        if self.geometry.is_loop:
            L = self.geometry.loop_length
            if np.any(u < 0) or np.any(u >= L):
                raise ValueError("loop locations must lie in [0, loop_length)")
        else:
            if np.any(u < 0):
                raise ValueError("line locations must be nonnegative")
        u.setflags(write=False)
        object.__setattr__(self, "locations", u)
        if not self.min_separation() > 0:
            raise ValueError("points must be pairwise distinct")

    @property
    def N(self) -> int:
        return self.locations.size

    def min_separation(self) -> float:
        u = np.sort(self.locations)
        gaps = np.diff(u)
        if self.geometry.is_loop:
            wrap = self.geometry.loop_length - (u[-1] - u[0])
            return float(min(gaps.min(), wrap))
        return float(gaps.min())

    def to_json(self) -> str:
        return json.dumps(
            {
                "geometry": self.geometry.kind,
                "loop_length": self.geometry.loop_length,
                "locations": [float(v) for v in self.locations],
            }
        )

    @staticmethod
    def from_json(text: str) -> "PointConfig":
        obj = json.loads(text)
        kind = obj["geometry"]
        if kind == "loop":
            geom = Geometry.loop(obj["loop_length"])
        else:
            geom = Geometry.line()
        return PointConfig(np.asarray(obj["locations"], dtype=float), geom)


class MultisetKind(enum.Enum):
    TURNPIKE_RAW = "turnpike_raw"
    TURNPIKE_AUGMENTED = "turnpike_augmented"
    BELTWAY_RAW = "beltway_raw"
    BELTWAY_AUGMENTED = "beltway_augmented"

    @property
    def is_augmented(self) -> bool:
        return self in (MultisetKind.TURNPIKE_AUGMENTED, MultisetKind.BELTWAY_AUGMENTED)

    @property
    def family(self) -> str:
        return "turnpike" if self.value.startswith("turnpike") else "beltway"


def _expected_size(kind: MultisetKind, N: int) -> int:
    if kind is MultisetKind.TURNPIKE_RAW:
        return N * (N - 1) // 2
    if kind is MultisetKind.TURNPIKE_AUGMENTED:
        return N * (N + 1) // 2
    if kind is MultisetKind.BELTWAY_RAW:
        return N * (N - 1)
    return N * N


@dataclass(frozen=True)
class DistanceMultiset:
    """Unassigned distance measurements (order carries no information)."""

    values: np.ndarray
    kind: MultisetKind
    N: int

    def __post_init__(self):
        d = np.array(self.values, dtype=float)
        if self.N < 2:
            raise ValueError("N must be at least 2")
        if d.ndim != 1 or d.size != _expected_size(self.kind, self.N):
            raise ValueError(
                f"{self.kind.value} multiset for N={self.N} must have "
                f"{_expected_size(self.kind, self.N)} entries, got {d.size}"
            )
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ValueError("distances must be finite and nonnegative")
        d.setflags(write=False)
        object.__setattr__(self, "values", d)

    @property
    def augmented_size(self) -> int:
        """Measurement count after appending the N self distances."""
        if self.kind.family == "turnpike":
            return self.N * (self.N + 1) // 2
        return self.N * self.N

    def augmented(self) -> "DistanceMultiset":
        """Append the N zero self-distances."""
        if self.kind.is_augmented:
            raise ValueError("multiset is already augmented")
        new_kind = (
            MultisetKind.TURNPIKE_AUGMENTED
            if self.kind.family == "turnpike"
            else MultisetKind.BELTWAY_AUGMENTED
        )
        return DistanceMultiset(
            np.concatenate([self.values, np.zeros(self.N)]), new_kind, self.N
        )


def pairwise_distances(config: PointConfig) -> DistanceMultiset:
    """All pairwise distances of a configuration, raw (no self zeros).

    Line: C(N,2) absolute differences.  Loop: N(N-1) clockwise distances,
    one per ordered pair, stored explicitly in both directions.
    """
    u = config.locations
    N = config.N
    if config.geometry.is_loop:
        L = config.geometry.loop_length
        diff = np.mod(u[None, :] - u[:, None], L)
        vals = diff[~np.eye(N, dtype=bool)]
        return DistanceMultiset(vals, MultisetKind.BELTWAY_RAW, N)
    i, j = np.triu_indices(N, k=1)
    vals = np.abs(u[j] - u[i])
    return DistanceMultiset(vals, MultisetKind.TURNPIKE_RAW, N)


def add_noise(dm: DistanceMultiset, xi: float, rng: np.random.Generator) -> DistanceMultiset:
    """Add iid zero-mean Gaussian noise of std ``xi``; clamp results at 0.

    Only raw multisets may be perturbed: the self zeros are bookkeeping
    appended after measurement, never noisy.
    """
    if dm.kind.is_augmented:
        raise ValueError("noise applies to raw measurements, not augmented multisets")
    if xi < 0:
        raise ValueError("xi must be nonnegative")
    if xi == 0:
        return DistanceMultiset(dm.values.copy(), dm.kind, dm.N)
    noisy = dm.values + rng.normal(0.0, xi, size=dm.values.size)
    return DistanceMultiset(np.maximum(noisy, 0.0), dm.kind, dm.N)


@dataclass(frozen=True)
class Density:
    """Relaxed N-hot encoding: z in [0,1]^M with ||z||_1 = N."""

    z: np.ndarray
    N: int
    grid: Grid

    def __post_init__(self):
        z = np.array(self.z, dtype=float)
        if z.ndim != 1 or z.size != self.grid.M:
            raise ValueError(f"density must have length M={self.grid.M}")
        if np.any(z < 0) or np.any(z > 1):
            raise ValueError("density entries must lie in [0, 1]")
        if abs(z.sum() - self.N) > DENSITY_SUM_RTOL * self.N:
            raise ValueError(
                f"density mass {z.sum()!r} deviates from N={self.N} beyond tolerance"
            )
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    def support_cells(self, eps: float = NONZERO_EPS) -> np.ndarray:
        return np.nonzero(self.z > eps)[0]


@dataclass(frozen=True)
class DistDistribution:
    """Mass over quantized lags y = 0..M-1.

    Observed distributions are normalized to total mass 1.  Model
    distributions of a *relaxed* density on a line sum to
    (N^2 + ||z||_2^2) / (2K) <= 1, so only an upper bound is enforced here;
    constructors that promise normalization assert it themselves.
    """

    p: np.ndarray
    grid: Grid

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 1 or p.size != self.grid.M:
            raise ValueError(f"distribution must have length M={self.grid.M}")
        if np.any(p < 0):
            raise ValueError("distribution mass must be nonnegative")
        if p.sum() > 1 + DIST_SUM_TOL:
            raise ValueError("distribution mass exceeds 1")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def is_normalized(self) -> bool:
        return abs(float(self.p.sum()) - 1.0) <= DIST_SUM_TOL
