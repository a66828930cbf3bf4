"""End-to-end reconstruction pipeline and protocol samplers.

Glue shared by the CLI and the experiment harness: sample a configuration,
observe its (noisy) distance multiset, then for each candidate smoothing
width build the observed distribution, initialize, run the solver, extract
points, and keep the width whose reconstruction best explains the data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distribution import SmoothingParams, observed_distribution
from .domain import (
    Density,
    DistanceMultiset,
    Geometry,
    Grid,
    PointConfig,
    round_half_away,
)
from .evaluate import select_sigma
from .extract import extract_points
from .solver import SolveConfig, SolveResult, solve
from .spectral import SpectralConfig, make_initializer

__all__ = [
    "ReconstructionResult",
    "reconstruct",
    "default_sigma_grid",
    "sample_line_config",
    "sample_loop_config",
]

_MAX_SAMPLE_ATTEMPTS = 1_000_000


def default_sigma_grid(d_min: float, count: int = 8) -> list:
    """Logarithmically spaced smoothing widths inside (0, d_min)."""
    return list(np.geomspace(d_min / 50.0, 0.9 * d_min, count))


@dataclass
class ReconstructionResult:
    locations: np.ndarray
    sigma: float
    emd: float
    density: Density
    solve: SolveResult
    per_sigma: list = field(default_factory=list)

    def to_json(self) -> str:
        import json

        return json.dumps(
            {
                "locations": [float(v) for v in self.locations],
                "sigma": self.sigma,
                "emd": self.emd,
                "converged": self.solve.converged,
                "iterations": self.solve.iterations,
                "per_sigma": self.per_sigma,
            }
        )


def _run_sigma(packed):
    """One smoothing-width candidate; top-level so process pools can pickle it."""
    dm_aug, N, grid, d_min, sigma, k, init_scheme, solve_cfg, spectral_cfg, seed = packed
    try:
        p = observed_distribution(dm_aug, SmoothingParams(sigma, grid))
        rng = np.random.default_rng([seed, k])
        z0 = make_initializer(init_scheme, p, N, grid, spectral_cfg, rng=rng)
        res = solve(p, N, z0, solve_cfg)
        ext = extract_points(res.z, d_min, N, rng)
        return sigma, ext.locations, res, ext, None
    except Exception as exc:
        return sigma, None, None, None, exc


def reconstruct(
    dm: DistanceMultiset,
    N: int,
    grid: Grid,
    d_min: float,
    sigma_grid,
    init_scheme: str = "auto",
    solve_cfg: SolveConfig = SolveConfig(),
    spectral_cfg: SpectralConfig | None = None,
    seed: int = 0,
    jobs: int = 1,
) -> ReconstructionResult:
    """Full pipeline with earth-mover selection over the smoothing widths.

    ``init_scheme="auto"`` resolves to spectral on a line and random on a
    loop: the implicit spectral matrix of a loop is circulant, its leading
    eigenvector is the constant vector, and the resulting flat density is an
    exact fixed point of the projected descent (the gradient at a constant
    density is constant by rotational symmetry), so the spectral start can
    never leave it there.

    With jobs > 1 the sigma candidates run in parallel processes; the
    selection itself is a deterministic reduction, so results do not depend
    on scheduling.
    """
    if init_scheme == "auto":
        init_scheme = "random" if grid.geometry.is_loop else "spectral"
    dm_aug = dm if dm.kind.is_augmented else dm.augmented()
    sigma_grid = sorted(float(s) for s in sigma_grid)
    spectral_cfg = spectral_cfg or SpectralConfig(seed=seed)
    tasks = [
        (dm_aug, N, grid, d_min, sigma, k, init_scheme, solve_cfg, spectral_cfg, seed)
        for k, sigma in enumerate(sigma_grid)
    ]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_sigma, tasks))
    else:
        outcomes = [_run_sigma(t) for t in tasks]
    artifacts = {sigma: (res, ext, err) for sigma, _, res, ext, err in outcomes}
    locations = {sigma: locs for sigma, locs, _, _, _ in outcomes}

    def run_one(sigma: float) -> np.ndarray:
        res, ext, err = artifacts[sigma]
        if err is not None:
            raise err
        return locations[sigma]

    sel = select_sigma(dm_aug, N, grid, sigma_grid, run_one)
    res, ext, _ = artifacts[sel.sigma]
    return ReconstructionResult(
        locations=sel.locations,
        sigma=sel.sigma,
        emd=sel.emd,
        density=res.z,
        solve=res,
        per_sigma=sel.per_sigma,
    )


def sample_line_config(
    N: int, d_min: float, d_max: float, grid: Grid, rng: np.random.Generator
) -> PointConfig:
    """Uniform points on [0, d_max] with minimum separation d_min.

    Draws are rejected until the separation holds and every point quantizes
    inside the grid's lag support (a point within half a cell of the upper
    boundary would fall off the last cell).
    """
    for _ in range(_MAX_SAMPLE_ATTEMPTS):
        u = rng.uniform(0.0, d_max, size=N)
        su = np.sort(u)
        if np.diff(su).min() < d_min:
            continue
        cells = round_half_away(u / grid.delta_l)
        if cells.max() > grid.M - 1:
            continue
        return PointConfig(u, Geometry.line())
    raise RuntimeError("rejection sampling failed; constraints too tight")


def sample_loop_config(
    N: int, d_min: float, loop_length: float, rng: np.random.Generator
) -> PointConfig:
    """Uniform points on a loop with minimum circular separation d_min."""
    for _ in range(_MAX_SAMPLE_ATTEMPTS):
        u = rng.uniform(0.0, loop_length, size=N)
        su = np.sort(u)
        gaps = np.diff(su)
        wrap = loop_length - (su[-1] - su[0])
        if min(gaps.min() if gaps.size else wrap, wrap) < d_min:
            continue
        return PointConfig(u, Geometry.loop(loop_length))
    raise RuntimeError("rejection sampling failed; constraints too tight")
