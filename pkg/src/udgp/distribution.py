"""Observed and model distance distributions, plus the fast lag machinery.

The model distribution of a density z is a family of quadratic forms: on a
line, q(y) is the one-sided autocorrelation sum_i z_i z_{i+y} scaled by 1/K;
on a loop it is the circular autocorrelation scaled by 1/Z.  Gradients and
the spectral initializer need the companion operator

    lag_correlate(z, r)_i = sum_y r_y (z_{i+y} + z_{i-y})

with out-of-range terms dropped (line) or indices wrapped (loop).  Both are
evaluated through real FFTs; dense O(M^2) reference implementations are kept
alongside for testing.

The observed distribution smooths each measured distance with a Gaussian of
width sigma and integrates over the grid bins via CDF differences.  Mass
smeared below the first bin edge is reflected back onto the positive axis
and mass beyond the last bin is accumulated into it (line); on a loop the
bins simply wrap.  The result is renormalized to total mass exactly 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy.special import ndtr

from .domain import (
    Density,
    DistanceMultiset,
    DistDistribution,
    Geometry,
    Grid,
    round_half_away,
)

__all__ = [
    "SmoothingParams",
    "LagOperatorPlan",
    "pair_normalizer",
    "observed_distribution",
    "model_distribution",
    "model_distribution_dense",
    "lag_correlate",
    "lag_correlate_dense",
    "autocorrelation",
    "autocorrelation_dense",
    "bilinear_lag_form",
    "bilinear_lag_form_dense",
    "lag_matrix",
    "lag_frobenius_norms",
]


def pair_normalizer(N: int, geometry: Geometry) -> int:
    """Size of the augmented measurement multiset: N(N+1)/2 line, N^2 loop."""
    return N * N if geometry.is_loop else N * (N + 1) // 2


@dataclass(frozen=True)
class SmoothingParams:
    """Gaussian smoothing width (continuous units) for the observed histogram.

    For recovery runs sigma should stay below the minimum point separation;
    that is protocol guidance, not something enforceable here.
    """

    sigma: float
    grid: Grid

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class LagOperatorPlan:
    """Transform sizes for the FFT paths; immutable and shareable."""

    M: int
    is_loop: bool
    nfft: int

    @staticmethod
    def for_grid(grid: Grid) -> "LagOperatorPlan":
        if grid.geometry.is_loop:
            return LagOperatorPlan(grid.M, True, grid.M)
        return LagOperatorPlan(grid.M, False, sfft.next_fast_len(2 * grid.M - 1))

    def spectrum(self, v: np.ndarray) -> np.ndarray:
        return sfft.rfft(v, self.nfft)

    def autocorr_from_spectrum(self, F: np.ndarray) -> np.ndarray:
        power = F.real * F.real + F.imag * F.imag
        return sfft.irfft(power, self.nfft)[: self.M]

    def correlate_spectra(self, Fz: np.ndarray, Fr: np.ndarray) -> np.ndarray:
        # conj(Fr)*Fz + Fr*Fz collapses to 2*Re(Fr)*Fz: one inverse transform
        return sfft.irfft(2.0 * Fr.real * Fz, self.nfft)[: self.M]


def _plan_for(grid: Grid, plan: LagOperatorPlan | None) -> LagOperatorPlan:
    if plan is None:
        return LagOperatorPlan.for_grid(grid)
    if plan.M != grid.M or plan.is_loop != grid.geometry.is_loop:
        raise ValueError("plan does not match grid")
    return plan


def autocorrelation(z: np.ndarray, plan: LagOperatorPlan) -> np.ndarray:
    """c[y] = sum_i z_i z_{i+y}, linear (line) or circular (loop)."""
    return plan.autocorr_from_spectrum(plan.spectrum(np.asarray(z, dtype=float)))


def autocorrelation_dense(z: np.ndarray, is_loop: bool) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    M = z.size
    c = np.empty(M)
    for y in range(M):
        if is_loop:
            c[y] = float(z @ np.roll(z, -y))
        else:
            c[y] = float(z[: M - y] @ z[y:])
    return c


def lag_correlate(z: np.ndarray, r: np.ndarray, plan: LagOperatorPlan) -> np.ndarray:
    """out_i = sum_y r_y (z_{i+y} + z_{i-y}); the symmetrized lag operator."""
    z = np.asarray(z, dtype=float)
    r = np.asarray(r, dtype=float)
    if z.size != plan.M or r.size != plan.M:
        raise ValueError("z and r must both have length M")
    return plan.correlate_spectra(plan.spectrum(z), plan.spectrum(r))


def lag_correlate_dense(z: np.ndarray, r: np.ndarray, is_loop: bool) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    r = np.asarray(r, dtype=float)
    M = z.size
    if r.size != M:
        raise ValueError("z and r must both have length M")
    out = np.zeros(M)
    for i in range(M):
        acc = 0.0
        for y in range(M):
            if is_loop:
                acc += r[y] * (z[(i + y) % M] + z[(i - y) % M])
            else:
                if i + y < M:
                    acc += r[y] * z[i + y]
                if i - y >= 0:
                    acc += r[y] * z[i - y]
        out[i] = acc
    return out


def bilinear_lag_form(u: np.ndarray, v: np.ndarray, plan: LagOperatorPlan) -> np.ndarray:
    """t[y] = u^T (A_y + A_y^T) v for every lag y, via one cross-correlation."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.size != plan.M or v.size != plan.M:
        raise ValueError("u and v must both have length M")
    cc = sfft.irfft(np.conj(plan.spectrum(u)) * plan.spectrum(v), plan.nfft)
    M = plan.M
    t = np.empty(M)
    t[0] = 2.0 * cc[0]
    ys = np.arange(1, M)
    neg = (M - ys) if plan.is_loop else (plan.nfft - ys)
    t[1:] = cc[ys] + cc[neg]
    return t


def bilinear_lag_form_dense(u: np.ndarray, v: np.ndarray, is_loop: bool) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    M = u.size
    t = np.empty(M)
    for y in range(M):
        B = lag_matrix(M, y, is_loop)
        B = B + B.T
        t[y] = float(u @ B @ v)
    return t


def lag_matrix(M: int, y: int, is_loop: bool) -> np.ndarray:
    """Dense lag measurement matrix: upper-shift band (line) or cyclic shift (loop)."""
    if not 0 <= y < M:
        raise ValueError("lag out of range")
    A = np.zeros((M, M))
    i = np.arange(M)
    if is_loop:
        A[i, (i + y) % M] = 1.0
    else:
        A[i[: M - y], i[: M - y] + y] = 1.0
    return A


def lag_frobenius_norms(M: int, is_loop: bool) -> np.ndarray:
    """||A_y||_F = sqrt(M - y) on a line; ||R_y||_F = sqrt(M) on a loop."""
    if is_loop:
        return np.full(M, np.sqrt(M))
    return np.sqrt(M - np.arange(M, dtype=float))


def model_distribution(z: Density, plan: LagOperatorPlan | None = None) -> DistDistribution:
    """Distribution of quantized lags implied by a density.

    Line: q(y) = (z^T A_y z)/K.  Loop: q(y) = (z^T R_y z)/Z.  On a line the
    total mass is (N^2 + ||z||_2^2)/(2K), which is 1 exactly when z is
    binary; on a loop the mass is always exactly 1.
    """
    plan = _plan_for(z.grid, plan)
    c = autocorrelation(z.z, plan)
    q = c / pair_normalizer(z.N, z.grid.geometry)
    # FFT round-off can leave tiny negatives on exact zeros
    np.clip(q, 0.0, None, out=q)
    return DistDistribution(q, z.grid)


def model_distribution_dense(z: Density) -> DistDistribution:
    c = autocorrelation_dense(z.z, z.grid.geometry.is_loop)
    q = np.clip(c / pair_normalizer(z.N, z.grid.geometry), 0.0, None)
    return DistDistribution(q, z.grid)


def observed_distribution(dm: DistanceMultiset, params: SmoothingParams) -> DistDistribution:
    """Bin the Gaussian-smoothed measured distances onto the grid.

    Requires the augmented multiset (self zeros included) so the result is
    comparable with model distributions.  Line distances must quantize
    within the lag support 0..M-1; anything beyond is an error rather than
    being silently clipped.
    """
    if not dm.kind.is_augmented:
        raise ValueError("observed_distribution needs the augmented multiset")
    grid = params.grid
    d = dm.values
    if d.size == 0:
        raise ValueError("empty distance multiset")
    M, dl = grid.M, grid.delta_l
    is_loop = grid.geometry.is_loop
    sigma = params.sigma

    nearest = round_half_away(d / dl).astype(int)
    if not is_loop and np.any(nearest > M - 1):
        bad = d[nearest > M - 1]
        raise ValueError(
            f"distance {bad.max()!r} quantizes beyond the last lag {M - 1}; "
            "enlarge the grid"
        )

    halfw = int(np.ceil(8.0 * sigma / dl)) + 1
    offsets = np.arange(-halfw, halfw + 1)
    bins = nearest[:, None] + offsets[None, :]
    lo = (bins - 0.5) * dl
    hi = (bins + 0.5) * dl
    mass = ndtr((hi - d[:, None]) / sigma) - ndtr((lo - d[:, None]) / sigma)

    if is_loop:
        idx = np.mod(bins, M)
    else:
        idx = np.where(bins < 0, -bins, bins)  # reflect negative-axis mass
        idx = np.minimum(idx, M - 1)  # pile far-tail mass into the last bin
    p = np.bincount(idx.ravel(), weights=mass.ravel(), minlength=M)

    total = p.sum()
    if total <= 0:
        raise ValueError("smoothing produced no mass; sigma pathological")
    p /= total
    out = DistDistribution(p, grid)
    assert out.is_normalized
    return out
