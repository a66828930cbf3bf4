"""Initializers for the distribution-matching solver.

The spectral initializer treats the normalized lag matrices as an
orthonormal basis of a matrix subspace.  The observed distribution fixes the
expansion coefficients of the (unknown) rank-one location outer product in
that basis, giving an implicit least-squares estimate whose symmetrization
is diagonalized by power iteration; the scaled leading eigenvector, projected
back onto the feasible set, is the starting point.  Random and uniform
starts, projected the same way, are available for comparison runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distribution import (
    LagOperatorPlan,
    lag_correlate,
    lag_frobenius_norms,
    pair_normalizer,
)
from .domain import Density, DistDistribution, Grid
from .projection import project_l1_box

__all__ = [
    "SpectralConfig",
    "SpectralInit",
    "spectral_coefficients",
    "spectral_init",
    "uniform_init",
    "random_init",
    "make_initializer",
    "INIT_SCHEMES",
]

INIT_SCHEMES = ("spectral", "random", "uniform")


@dataclass(frozen=True)
class SpectralConfig:
    max_power_iters: int = 200
    power_tol: float = 1e-8  # relative eigenvector change
    seed: int = 0

    def __post_init__(self):
        if self.max_power_iters < 1:
            raise ValueError("max_power_iters must be >= 1")
        if not self.power_tol > 0:
            raise ValueError("power_tol must be positive")


@dataclass(frozen=True)
class SpectralInit:
    z0: Density
    converged: bool
    iterations: int
    eigenvalue: float
    eigenvector: np.ndarray


def spectral_coefficients(p: DistDistribution, total: int, grid: Grid) -> np.ndarray:
    """Expansion coefficients of the implicit outer-product estimate.

    coeff_y = p(y) * total / ||A_y||_F, with the Frobenius norms sqrt(M-y)
    on a line and sqrt(M) on a loop.
    """
    if p.grid != grid:
        raise ValueError("distribution grid mismatch")
    return p.p * total / lag_frobenius_norms(grid.M, grid.geometry.is_loop)


def _matvec_weights(p: DistDistribution, total: int, grid: Grid) -> np.ndarray:
    # beta_y / ||A_y||_F: the per-lag weight of the implicit matrix
    norms = lag_frobenius_norms(grid.M, grid.geometry.is_loop)
    return p.p * total / (norms * norms)


def spectral_init(
    p: DistDistribution, N: int, grid: Grid, cfg: SpectralConfig = SpectralConfig()
) -> SpectralInit:
    """Power iteration on the symmetrized implicit estimate, then sqrt(N)
    scaling and projection onto the feasible set.

    The start vector is all-ones (deterministic, nonnegative overlap).  If
    the iteration stalls -- e.g. a degenerate leading eigenvalue pair -- a
    seeded 1e-6 perturbation of the start is tried once; failing that, the
    last iterate is used and the result is flagged non-converged.
    """
    plan = LagOperatorPlan.for_grid(grid)
    total = pair_normalizer(N, grid.geometry)
    weights = _matvec_weights(p, total, grid)
    M = grid.M

    def run(start: np.ndarray):
        e = start / np.linalg.norm(start)
        iters = 0
        for _ in range(cfg.max_power_iters):
            w = lag_correlate(e, weights, plan)
            nw = np.linalg.norm(w)
            if nw == 0:
                return e, iters, False  # start in the null space
            e_new = w / nw
            iters += 1
            if np.linalg.norm(e_new - e) < cfg.power_tol:
                return e_new, iters, True
            e = e_new
        return e, iters, False

    e, iters, converged = run(np.ones(M))
    if not converged:
        rng = np.random.default_rng(cfg.seed)
        perturbed = np.ones(M) + 1e-6 * rng.standard_normal(M)
        e2, iters2, converged = run(perturbed)
        iters += iters2
        if converged:
            e = e2

    if e.sum() < 0:  # eigenvectors are sign-ambiguous; the target is nonnegative
        e = -e
    eigenvalue = float(e @ lag_correlate(e, weights, plan))
    z0 = project_l1_box(np.sqrt(N) * e, N).s
    return SpectralInit(Density(z0, N, grid), converged, iters, eigenvalue, e)


def uniform_init(N: int, grid: Grid) -> Density:
    """All-ones start projected onto the feasible set: the flat density N/M."""
    return Density(project_l1_box(np.ones(grid.M), N).s, N, grid)


def random_init(N: int, grid: Grid, rng: np.random.Generator) -> Density:
    """Entries drawn from a zero-mean Gaussian with variance 0.01, projected."""
    return Density(project_l1_box(rng.normal(0.0, 0.1, size=grid.M), N).s, N, grid)


def make_initializer(
    scheme: str,
    p: DistDistribution,
    N: int,
    grid: Grid,
    cfg: SpectralConfig = SpectralConfig(),
    rng: np.random.Generator | None = None,
) -> Density:
    if scheme == "spectral":
        return spectral_init(p, N, grid, cfg).z0
    if scheme == "uniform":
        return uniform_init(N, grid)
    if scheme == "random":
        if rng is None:
            raise ValueError("random initializer needs an explicit rng")
        return random_init(N, grid, rng)
    raise ValueError(f"unknown init scheme {scheme!r}; pick one of {INIT_SCHEMES}")
