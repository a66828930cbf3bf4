"""Exact Euclidean projection onto S = { s : 0 <= s_m <= 1, sum_m s_m = N }.

The minimizer of ||s - z||^2 over S has a sorted structure: after sorting z
in non-increasing order the solution starts with r-1 saturated ones, then a
block of interior entries z_m - kappa, then zeros beyond index rho.  For a
fixed count of leading ones the remaining block is a plain simplex
projection, whose support size follows the classic sorted-threshold rule.
There is at most one r in 1..N whose threshold satisfies both strictness
conditions 0 < z_r - kappa < 1 and (for r >= 2) z_{r-1} - kappa >= 1; if no
r qualifies, the projection is binary: top-N entries set to 1.

``project_l1_box`` runs that search (binary search per candidate r on shared
prefix sums); ``project_oracle`` re-solves the problem by enumerating every
contiguous (ones / interior / zeros) split and checking the KKT conditions,
independently of the threshold rule, and exists purely for testing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

__all__ = ["ProjectionResult", "project_l1_box", "project_oracle"]

# Strictness margin for the interior-entry checks; inputs within this margin
# of a bound may legitimately resolve to the all-saturated case.
BOUND_MARGIN = 1e-12


@dataclass(frozen=True)
class ProjectionResult:
    """Projection value plus the accepted threshold bookkeeping.

    ``r``/``rho``/``kappa`` describe the sorted solution structure (1-based
    positions in the sorted order; kappa is reported in the frame of the
    original, unshifted input).  They are None in the all-saturated case.
    ``n_valid_r`` counts how many r candidates passed the acceptance checks
    and is populated only when the search is asked to scan all of them.
    """

    s: np.ndarray
    case: Literal["interior", "all_saturated"]
    r: int | None = None
    rho: int | None = None
    kappa: float | None = None
    n_valid_r: int | None = None


def project_l1_box(z: np.ndarray, N: int, *, scan_all: bool = False) -> ProjectionResult:
    z = np.asarray(z, dtype=float)
    M = z.size
    if not 1 <= N <= M:
        raise ValueError(f"need 1 <= N <= M, got N={N}, M={M}")

    shift = N - z.min()
    v = np.sort(z)[::-1] + shift  # sorted non-increasing, all entries >= N
    S = np.cumsum(v)

    accepted = None
    n_valid = 0
    for r in range(1, N + 1):
        a = float(N - r + 1)
        base = S[r - 2] if r >= 2 else 0.0
        # Largest l in 1..M-r+1 with  l*v[r-1+l-1] - (prefix sum of the block) + a > 0.
        # The predicate holds on a prefix of l, so binary search applies.
        lo, hi = 1, M - r + 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            m = r - 2 + mid  # 0-based index of the mid-th block entry
            if mid * v[m] - (S[m] - base) + a > 0:
                lo = mid
            else:
                hi = mid - 1
        rho_v = lo
        kappa_v = (S[r - 2 + rho_v] - base - a) / rho_v
        s_r = v[r - 1] - kappa_v
        if not (BOUND_MARGIN < s_r < 1.0 - BOUND_MARGIN):
            continue
        if r >= 2 and not (v[r - 2] - kappa_v >= 1.0 - BOUND_MARGIN):
            continue
        n_valid += 1
        if accepted is None:
            accepted = (r, rho_v, kappa_v)
        if not scan_all:
            break

    if accepted is None:
        # binary case: saturate the N largest entries (stable under ties)
        order = np.argsort(-z, kind="stable")
        s = np.zeros(M)
        s[order[:N]] = 1.0
        return ProjectionResult(s, "all_saturated", n_valid_r=n_valid if scan_all else None)

    r, rho_v, kappa_v = accepted
    # the value is order-free once kappa is known
    s = np.clip(z + shift - kappa_v, 0.0, 1.0)
    # prefix sums lose ~M*eps*|S| of precision at large M; polish kappa with
    # Newton steps on the exact mass (the mass is piecewise linear in kappa
    # with slope -#interior, so this converges immediately)
    for _ in range(3):
        mass_gap = float(s.sum()) - N
        if abs(mass_gap) <= 1e-12 * N:
            break
        n_interior = int(np.count_nonzero((s > 0.0) & (s < 1.0)))
        if n_interior == 0:
            break
        kappa_v += mass_gap / n_interior
        s = np.clip(z + shift - kappa_v, 0.0, 1.0)
    return ProjectionResult(
        s,
        "interior",
        r=r,
        rho=rho_v + r - 1,
        kappa=float(kappa_v - shift),
        n_valid_r=n_valid if scan_all else None,
    )


def project_oracle(z: np.ndarray, N: int, tol: float = 1e-9) -> np.ndarray:
    """Slow reference projection by exhaustive split enumeration + KKT check.

    Sorting makes the boundary sets contiguous, so every candidate solution
    is (k ones | interior | zeros) for some split (k, t).  Each candidate
    fixes kappa affinely from the mass constraint; the first split whose
    KKT sign conditions all hold is the (unique) projection.  Meant for
    small M; cost is O(M^2) after the sort.
    """
    z = np.asarray(z, dtype=float)
    M = z.size
    if not 1 <= N <= M:
        raise ValueError(f"need 1 <= N <= M, got N={N}, M={M}")
    order = np.argsort(-z, kind="stable")
    v = z[order]
    S = np.concatenate([[0.0], np.cumsum(v)])

    def unsort(s_sorted):
        s = np.empty(M)
        s[order] = s_sorted
        return s

    # all-binary candidate: N ones, M-N zeros, no interior entries
    if M == N:
        return np.ones(M)
    if v[N - 1] - 1.0 >= v[N] - tol:
        s_sorted = np.zeros(M)
        s_sorted[:N] = 1.0
        return unsort(s_sorted)

    for k in range(0, N):  # number of saturated ones
        for t in range(k + 1, M + 1):  # support size (ones + interior)
            kappa = (S[t] - S[k] - (N - k)) / (t - k)
            if k >= 1 and not (v[k - 1] - kappa >= 1.0 - tol):
                continue
            if not (v[k] - kappa <= 1.0 + tol):  # first interior entry below 1
                continue
            if not (v[t - 1] - kappa >= -tol):  # last interior entry above 0
                continue
            if t < M and not (v[t] - kappa <= tol):  # zeros stay clipped
                continue
            s_sorted = np.clip(v - kappa, 0.0, 1.0)
            s_sorted[:k] = 1.0
            s_sorted[t:] = 0.0
            return unsort(s_sorted)
    raise RuntimeError("no KKT-consistent split found; should be impossible")
