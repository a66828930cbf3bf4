"""Local convergence diagnostics for the distribution-matching objective.

Around a binary optimizer x the curvature relevant to contraction is carried
by the positive semidefinite form

    quadratic_E(x, h) = sum_y (h^T B_y x)^2,     B_y = A_y + A_y^T,

whose minimum lambda over the normalized feasible perturbation polytope G
(zero-sum, sign-constrained by x, unit weighted l1 mass) sets the radius

    tau = (2 - 1/q) * sqrt(lambda / 4),   q in (0.5, 1),

inside which projected gradient descent contracts linearly.  The minimum is
computed by projected gradient descent on G, the projection itself by
Dykstra alternation between the sign box and the two hyperplanes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distribution import LagOperatorPlan, bilinear_lag_form, lag_correlate, lag_matrix
from .domain import Density

__all__ = [
    "ConvergenceCert",
    "quadratic_E",
    "estimate_lambda_E",
    "convergence_radius",
    "certify",
    "feasible_direction",
    "project_onto_G",
    "dykstra",
    "null_space_certified",
]

# Face identification on polyhedral intersections can crawl for thousands of
# sweeps before snapping; the change-per-sweep test alone is not a safe stop.
_DYKSTRA_MAX_ITERS = 200_000
_DYKSTRA_TOL = 1e-10
_NULLSPACE_MAX_M = 64


@dataclass(frozen=True)
class ConvergenceCert:
    lambda_E: float
    q: float
    tau: float
    x: Density

    def __post_init__(self):
        if self.lambda_E < 0:
            raise ValueError("lambda_E must be nonnegative")
        expected = convergence_radius(self.lambda_E, self.q)
        if abs(self.tau - expected) > 1e-12 * max(1.0, abs(expected)):
            raise ValueError("tau inconsistent with lambda_E and q")


def _plan(x: Density) -> LagOperatorPlan:
    return LagOperatorPlan.for_grid(x.grid)


def quadratic_E(x: Density, h: np.ndarray, plan: LagOperatorPlan | None = None) -> float:
    """sum_y (h^T B_y x)^2, evaluated lag-wise without materializing E."""
    h = np.asarray(h, dtype=float)
    if h.size != x.grid.M:
        raise ValueError("h must have length M")
    plan = plan or _plan(x)
    t = bilinear_lag_form(h, x.z, plan)
    return float(t @ t)


def _require_binary(x: Density) -> np.ndarray:
    xv = x.z
    if not np.all((np.abs(xv) < 1e-9) | (np.abs(xv - 1.0) < 1e-9)):
        raise ValueError("x must be a binary density")
    return np.where(xv > 0.5, 1.0, 0.0)


def dykstra(projections, x0: np.ndarray, max_iters: int = _DYKSTRA_MAX_ITERS,
            tol: float = _DYKSTRA_TOL) -> np.ndarray:
    """Dykstra's alternating projection onto an intersection of convex sets.

    Stops only when the sweep barely moves AND the per-set projections agree,
    i.e. the iterate actually sits in every set.
    """
    x = np.asarray(x0, dtype=float).copy()
    increments = [np.zeros_like(x) for _ in projections]
    for _ in range(max_iters):
        x_prev = x.copy()
        gap = 0.0
        for k, proj in enumerate(projections):
            y = proj(x + increments[k])
            increments[k] = x + increments[k] - y
            gap = max(gap, float(np.linalg.norm(y - x)))
            x = y
        scale = tol * max(1.0, float(np.linalg.norm(x)))
        if np.linalg.norm(x - x_prev) <= scale and gap <= max(scale, 1e-9):
            break
    return x


def _make_G_projections(xb: np.ndarray):
    M = xb.size
    N = int(xb.sum())
    r = np.where(xb > 0.5, -1.0, 1.0)
    lo = np.where(xb > 0.5, -0.5, 0.0)
    hi = np.where(xb > 0.5, 0.0, 0.5)

    ones = np.ones(M)
    # affine part: 1^T h = 0 and r^T h = 1; Gram matrix of the two normals
    G = np.array([[M, M - 2.0 * N], [M - 2.0 * N, M]])
    Ginv = np.linalg.inv(G)

    def project_box(h):
        return np.clip(h, lo, hi)

    def project_affine(h):
        resid = np.array([ones @ h, r @ h - 1.0])
        coef = Ginv @ resid
        return h - coef[0] * ones - coef[1] * r

    return project_box, project_affine, r


def feasible_direction(x: Density) -> np.ndarray:
    """An interior point of G: spread the unit mass evenly on each sign class."""
    xb = _require_binary(x)
    N = int(xb.sum())
    M = xb.size
    if N == 0 or N == M:
        raise ValueError("the perturbation polytope is empty for N=0 or N=M")
    h = np.where(xb > 0.5, -0.5 / N, 0.5 / (M - N))
    return h


def project_onto_G(x: Density, h: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the perturbation polytope of a binary x."""
    xb = _require_binary(x)
    N = int(xb.sum())
    if N == 0 or N == xb.size:
        raise ValueError("the perturbation polytope is empty for N=0 or N=M")
    project_box, project_affine, _ = _make_G_projections(xb)
    return dykstra([project_box, project_affine], np.asarray(h, dtype=float))


def estimate_lambda_E(x: Density, tol: float = 1e-10, max_iters: int = 100_000) -> float:
    """Minimum of quadratic_E over the perturbation polytope of a binary x.

    Projected gradient descent on a convex quadratic: the step size comes
    from a power-iteration bound on the largest curvature, and iteration
    stops once the relative objective decrease falls below tol.
    """
    xb = _require_binary(x)
    N = int(xb.sum())
    M = xb.size
    if N == 0 or N == M:
        raise ValueError("the perturbation polytope is empty for N=0 or N=M")
    plan = _plan(x)
    project_box, project_affine, _ = _make_G_projections(xb)

    def matvec_E(v):
        return lag_correlate(xb, bilinear_lag_form(v, xb, plan), plan)

    # largest curvature of h^T E h, for the safe fixed step 1/(2*lambda_max)
    v = np.ones(M) / np.sqrt(M)
    lam_max = 1.0
    for _ in range(60):
        w = matvec_E(v)
        nw = np.linalg.norm(w)
        if nw == 0:
            break
        lam_max = nw
        v = w / nw
    eta = 0.5 / max(lam_max, 1e-30)

    h = feasible_direction(x)
    t = bilinear_lag_form(h, xb, plan)
    f = float(t @ t)
    for _ in range(max_iters):
        grad = 2.0 * lag_correlate(xb, t, plan)
        h_new = dykstra([project_box, project_affine], h - eta * grad)
        t = bilinear_lag_form(h_new, xb, plan)
        f_new = float(t @ t)
        done = abs(f - f_new) <= tol * max(f, 1e-300)
        h, f = h_new, f_new
        if done:
            break
    return f


def convergence_radius(lambda_E: float, q: float) -> float:
    """tau = (2 - 1/q) * sqrt(lambda_E / 4)."""
    if not 0.5 < q < 1.0:
        raise ValueError("q must lie strictly inside (0.5, 1)")
    if lambda_E < 0:
        raise ValueError("lambda_E must be nonnegative")
    return (2.0 - 1.0 / q) * np.sqrt(lambda_E / 4.0)


def certify(x: Density, q: float = 0.75, tol: float = 1e-10) -> ConvergenceCert:
    lam = estimate_lambda_E(x, tol=tol)
    return ConvergenceCert(lam, q, convergence_radius(lam, q), x)


def null_space_certified(x: Density) -> bool | None:
    """Small-scale check that the stacked lag forms of x have trivial null space.

    Returns None for M beyond the dense guard: such instances are simply not
    certified either way.
    """
    M = x.grid.M
    if M > _NULLSPACE_MAX_M:
        return None
    is_loop = x.grid.geometry.is_loop
    rows = []
    for y in range(M):
        B = lag_matrix(M, y, is_loop)
        rows.append((B + B.T) @ x.z)
    S = np.vstack(rows)
    return int(np.linalg.matrix_rank(S)) == M
