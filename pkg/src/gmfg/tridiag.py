"""Periodic (cyclic) tridiagonal solves.

Row ``i`` of the system reads
``lower[i] * x[i-1] + diag[i] * x[i] + upper[i] * x[i+1] = rhs[i]``
with indices taken modulo ``n``. The corner couplings are removed by a
rank-one Sherman-Morrison correction around an ordinary Thomas sweep.
"""

from __future__ import annotations

import numba
import numpy as np

from .errors import NumericalFailure

# prefer OpenMP over an outdated TBB; the per-row loop has no shared state
numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

RESIDUAL_TOL = 1e-12


@numba.njit(cache=True)
def _thomas(a, b, c, r, x, cp, dp):
    n = b.shape[0]
    beta = b[0]
    if beta == 0.0:
        return False
    cp[0] = c[0] / beta
    dp[0] = r[0] / beta
    for i in range(1, n):
        beta = b[i] - a[i] * cp[i - 1]
        if beta == 0.0:
            return False
        cp[i] = c[i] / beta
        dp[i] = (r[i] - a[i] * dp[i - 1]) / beta
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return True


@numba.njit(cache=True, parallel=True)
def _cyclic_batch(lower, diag, upper, rhs, out):
    nrow, n = rhs.shape
    ok = np.ones(nrow, dtype=np.bool_)
    for row in numba.prange(nrow):
        a = lower[row]
        c = upper[row]
        beta = a[0]
        alpha = c[n - 1]
        gamma = -diag[row, 0]
        bb = diag[row].copy()
        bb[0] = diag[row, 0] - gamma
        bb[n - 1] = diag[row, n - 1] - alpha * beta / gamma
        x = np.empty(n)
        z = np.empty(n)
        u = np.zeros(n)
        u[0] = gamma
        u[n - 1] = alpha
        cp = np.empty(n)
        dp = np.empty(n)
        if not _thomas(a, bb, c, rhs[row], x, cp, dp):
            ok[row] = False
            continue
        if not _thomas(a, bb, c, u, z, cp, dp):
            ok[row] = False
            continue
        corr = beta * z[n - 1] / gamma
        denom = 1.0 + z[0] + corr
        # cancellation in the rank-one correction signals a (near) singular system
        if abs(denom) <= 1e-13 * (1.0 + abs(z[0]) + abs(corr)):
            ok[row] = False
            continue
        fact = (x[0] + beta * x[n - 1] / gamma) / denom
        for i in range(n):
            out[row, i] = x[i] - fact * z[i]
    return ok


def cyclic_residual(lower, diag, upper, x, rhs) -> np.ndarray:
    return lower * np.roll(x, 1, axis=-1) + diag * x + upper * np.roll(x, -1, axis=-1) - rhs


def solve_cyclic(lower, diag, upper, rhs, tol: float = RESIDUAL_TOL) -> np.ndarray:
    """Solve a stack of periodic tridiagonal systems along the last axis.

    Coefficient arrays broadcast against ``rhs``. The max-norm residual is
    verified against ``tol * (|A|_inf |x|_inf + |rhs|_inf)`` per system.
    """
    rhs = np.asarray(rhs, dtype=float)
    shape = rhs.shape
    n = shape[-1]
    if n < 3:
        raise NumericalFailure("cyclic solve needs at least 3 unknowns")
    lo, di, up = (np.ascontiguousarray(np.broadcast_to(np.asarray(v, dtype=float), shape)).reshape(-1, n)
                  for v in (lower, diag, upper))
    r2 = np.ascontiguousarray(rhs).reshape(-1, n)
    out = np.empty_like(r2)
    ok = _cyclic_batch(lo, di, up, r2, out)
    if not np.all(ok):
        raise NumericalFailure("singular pivot in cyclic tridiagonal solve")
    res = np.max(np.abs(cyclic_residual(lo, di, up, out, r2)), axis=-1)
    # normwise backward-error scale |A| |x| + |rhs|, so stiff systems are judged fairly
    anorm = np.max(np.abs(lo) + np.abs(di) + np.abs(up), axis=-1)
    scale = anorm * np.max(np.abs(out), axis=-1) + np.max(np.abs(r2), axis=-1) + np.finfo(float).tiny
    if not np.all(np.isfinite(out)) or np.any(res > tol * scale):
        worst = float(np.max(res / scale))
        raise NumericalFailure(f"cyclic solve residual {worst:.3e} exceeds {tol:.1e}")
    return out.reshape(shape)
