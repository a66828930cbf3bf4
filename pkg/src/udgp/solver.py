"""Distribution matching by projected gradient descent with adaptive step.

Minimizes f(z) = (1/M) * sum_y (q_z(y) - p(y))^2 over the box-with-mass set
{0 <= z <= 1, sum z = N}, where q_z is the model lag distribution of z.  The
step size grows by 1/beta after every accepted step and shrinks by beta on
rejection; a step is accepted as soon as it does not increase f.  Iteration
stops when the relative iterate change falls below epsilon.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .distribution import LagOperatorPlan, pair_normalizer
from .domain import Density, DistDistribution
from .projection import project_l1_box

__all__ = ["SolveConfig", "SolveResult", "objective", "gradient", "solve"]

_ETA_CAP = 1e100  # keeps the growth rule finite at exact fixed points


@dataclass(frozen=True)
class SolveConfig:
    eta0: float = 1.0
    beta: float = 0.5
    epsilon: float = 1e-9
    T: int = 10_000
    max_linesearch: int = 60

    def __post_init__(self):
        if not self.eta0 > 0:
            raise ValueError("eta0 must be positive")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie strictly inside (0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.T < 1 or self.max_linesearch < 1:
            raise ValueError("iteration budgets must be >= 1")


@dataclass
class SolveResult:
    z: Density
    objective_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    final_eta: float = 0.0

    def to_json(self) -> str:
        return json.dumps(
            {
                "z": [float(v) for v in self.z.z],
                "objective_trace": [float(v) for v in self.objective_trace],
                "iterations": self.iterations,
                "converged": self.converged,
            }
        )


def _check_match(z: Density, p: DistDistribution):
    if z.grid != p.grid:
        raise ValueError("density and distribution grids do not match")


def _resid_and_f(zvec, target, total, M, plan):
    # residual per lag in unnormalized units: z^T A_y z - total * p(y)
    resid = plan.autocorr_from_spectrum(plan.spectrum(zvec)) - total * target
    f = float(resid @ resid) / (M * total * total)
    return resid, f


def objective(z: Density, p: DistDistribution, plan: LagOperatorPlan | None = None) -> float:
    """Mean squared gap between the model distribution of z and p."""
    _check_match(z, p)
    plan = plan or LagOperatorPlan.for_grid(z.grid)
    total = pair_normalizer(z.N, z.grid.geometry)
    _, f = _resid_and_f(z.z, p.p, total, z.grid.M, plan)
    return f


def gradient(z: Density, p: DistDistribution, plan: LagOperatorPlan | None = None) -> np.ndarray:
    """Gradient of the objective: (2/(M*total^2)) sum_y resid_y (A_y + A_y^T) z."""
    _check_match(z, p)
    plan = plan or LagOperatorPlan.for_grid(z.grid)
    total = pair_normalizer(z.N, z.grid.geometry)
    M = z.grid.M
    Fz = plan.spectrum(z.z)
    resid = plan.autocorr_from_spectrum(Fz) - total * p.p
    scale = 2.0 / (M * total * total)
    return scale * plan.correlate_spectra(Fz, plan.spectrum(resid))


def solve(
    p: DistDistribution, N: int, z0: Density, cfg: SolveConfig = SolveConfig()
) -> SolveResult:
    """Projected gradient descent from the feasible start z0.

    Every iterate stays feasible; the objective trace is nonincreasing (a
    step is accepted only if it does not increase f).  If the line search
    exhausts its budget without finding a non-increasing step the current
    iterate is returned as a stationary point at numerical precision, with
    ``converged`` False.
    """
    _check_match(z0, p)
    if z0.N != N:
        raise ValueError("z0 carries a different point count")
    grid = z0.grid
    plan = LagOperatorPlan.for_grid(grid)
    total = pair_normalizer(N, grid.geometry)
    M = grid.M
    target = p.p
    scale = 2.0 / (M * total * total)

    z = z0.z.copy()
    Fz = plan.spectrum(z)
    resid = plan.autocorr_from_spectrum(Fz) - total * target
    f_z = float(resid @ resid) / (M * total * total)

    # eta0 is a relative first-step size: the raw gradient magnitude varies by
    # orders of magnitude with M and N, and starting too small would trip the
    # convergence test during warm-up (too large is harmless: the line search
    # shrinks it geometrically within one iteration).
    grad0 = scale * plan.correlate_spectra(Fz, plan.spectrum(resid))
    gnorm = float(np.linalg.norm(grad0))
    eta = cfg.eta0 * float(np.linalg.norm(z)) / gnorm if gnorm > 0 else cfg.eta0
    trace = [f_z]
    converged = False
    iterations = 0

    for _ in range(cfg.T):
        grad = scale * plan.correlate_spectra(Fz, plan.spectrum(resid))
        accepted = False
        for _ in range(cfg.max_linesearch):
            trial = project_l1_box(z - eta * grad, N).s
            Ft = plan.spectrum(trial)
            resid_t = plan.autocorr_from_spectrum(Ft) - total * target
            f_t = float(resid_t @ resid_t) / (M * total * total)
            if f_t <= f_z:
                eta = min(eta / cfg.beta, _ETA_CAP)
                accepted = True
                break
            eta = cfg.beta * eta
        if not accepted:
            break  # stationary at numerical precision
        iterations += 1
        denom = float(np.linalg.norm(z))
        step = float(np.linalg.norm(trial - z))
        z, Fz, resid, f_z = trial, Ft, resid_t, f_t
        trace.append(f_z)
        if step / denom < cfg.epsilon:
            converged = True
            break

    return SolveResult(
        z=Density(z, N, grid),
        objective_trace=trace,
        iterations=iterations,
        converged=converged,
        final_eta=eta,
    )
