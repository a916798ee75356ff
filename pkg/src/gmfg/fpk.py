"""Forward Fokker-Planck solves ``nu_t = (vbar nu)_x + 1/2 nu_xx`` per cluster.

``vbar`` is the gradient of the shifted value function, so mass moves
with velocity ``u = -vbar``. Two conservative schemes are available:

``upwind``
    explicit donor-cell advection with the face velocity
    ``u_{i+1/2} = -(vbar_i + vbar_{i+1}) / 2``, implicit diffusion. Positive
    whenever ``dt * max_i(u+_{i+1/2} + u-_{i-1/2}) <= h``, which is at most
    ``h / max|vbar|`` for drifts that do not spread mass apart.
``central``
    backward Euler with the centred face flux ``u_{i+1/2} (nu_i + nu_{i+1}) / 2``
    and implicit diffusion. The step matrix is an M-matrix when the cell
    Peclet number ``h * max|vbar|`` stays at most 1; second order in space.

Both keep the mass ``h * sum(nu)`` to rounding: the advective fluxes
telescope and every column of the implicit matrix sums to one.
"""

from __future__ import annotations

import math

import numpy as np

from .checks import BoundReport
from .errors import InvalidInputError, NumericalFailure, StabilityError
from .parabolic import TimeGrid
from .torus import TorusGrid, gradient, laplacian
from .tridiag import solve_cyclic
from .wasserstein import first_moment, holder_half_seminorm, w1_weights

SCHEMES = ("upwind", "central")
NEG_TOL = 1e-12
MASS_TOL = 1e-10


def _face_velocity(drift: np.ndarray) -> np.ndarray:
    # u_{i+1/2} stored at index i
    return -0.5 * (drift + np.roll(drift, -1, axis=-1))


def upwind_dt_limit(drift: np.ndarray, grid: TorusGrid) -> float:
    """Largest ``dt`` for which the explicit advection keeps every weight nonnegative."""
    u = _face_velocity(np.asarray(drift, dtype=float))
    outflow = np.maximum(u, 0.0) + np.maximum(-np.roll(u, 1, axis=-1), 0.0)
    peak = float(np.max(outflow)) if outflow.size else 0.0
    return math.inf if peak == 0.0 else grid.h / peak


def central_n_limit(drift: np.ndarray) -> int:
    """Smallest ``n`` with cell Peclet number ``max|vbar| / n <= 1``."""
    peak = float(np.max(np.abs(drift))) if np.size(drift) else 0.0
    return max(4, math.ceil(peak))


def _diffuse(rhs: np.ndarray, dt: float, grid: TorusGrid) -> np.ndarray:
    off = -0.5 * dt / grid.h**2
    return solve_cyclic(off, 1.0 + dt / grid.h**2, off, rhs)


def fpk_step(nu_k: np.ndarray, drift_k: np.ndarray, dt: float, grid: TorusGrid,
             scheme: str = "upwind", drift_next: np.ndarray | None = None, check: bool = True) -> np.ndarray:
    """Advance a density (or a batch of densities) by one step.

    ``upwind`` uses the drift at the current level; ``central`` is implicit
    and uses ``drift_next`` (falling back to ``drift_k``).
    """
    if scheme not in SCHEMES:
        raise InvalidInputError(f"unknown FPK scheme {scheme!r}; expected one of {SCHEMES}")
    if not dt > 0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    nu_k = grid.check(np.asarray(nu_k, dtype=float))
    drift_k = np.broadcast_to(np.asarray(drift_k, dtype=float), nu_k.shape)
    if not np.all(np.isfinite(drift_k)):
        raise InvalidInputError("drift must be finite")
    h = grid.h

    if scheme == "upwind":
        if check:
            limit = upwind_dt_limit(drift_k, grid)
            if dt > limit:
                raise StabilityError(f"upwind CFL violated: dt = {dt:.3g} > {limit:.3g}", required_dt=limit)
        u = _face_velocity(drift_k)
        flux = np.maximum(u, 0.0) * nu_k + np.minimum(u, 0.0) * np.roll(nu_k, -1, axis=-1)
        star = nu_k - dt / h * (flux - np.roll(flux, 1, axis=-1))
        out = _diffuse(star, dt, grid)
    else:
        drift = drift_k if drift_next is None else np.broadcast_to(np.asarray(drift_next, dtype=float), nu_k.shape)
        if check and h * float(np.max(np.abs(drift))) > 1.0:
            need = central_n_limit(drift)
            raise StabilityError(f"cell Peclet number {h * float(np.max(np.abs(drift))):.3g} > 1; use n >= {need}",
                                 required_n=need)
        u = _face_velocity(drift)  # u_{i+1/2}
        u_m = np.roll(u, 1, axis=-1)  # u_{i-1/2}
        d = 0.5 / h**2
        lower = -dt * (u_m / (2 * h) + d)
        upper = -dt * (-u / (2 * h) + d)
        diag = 1.0 + dt * ((u - u_m) / (2 * h) + 2 * d)
        out = solve_cyclic(lower, diag, upper, nu_k)

    low = float(np.min(out))
    if low < -NEG_TOL:
        raise NumericalFailure(f"density became negative ({low:.3e}); reduce dt")
    return out


def phi2(grad_v_tilde: np.ndarray, m0: np.ndarray, grid: TorusGrid, tgrid: TimeGrid,
         scheme: str = "upwind") -> np.ndarray:
    """Density trajectory ``(n_t + 1, *batch, n)`` driven by ``grad_v_tilde`` from ``m0``.

    The stability guard is evaluated once on the drift of the whole run.
    """
    m0 = grid.check(np.asarray(m0, dtype=float))
    drift = np.asarray(grad_v_tilde, dtype=float)
    shape = (tgrid.n_t + 1,) + m0.shape
    if drift.shape != shape:
        try:
            drift = np.broadcast_to(drift, shape)
        except ValueError as exc:
            raise InvalidInputError(f"drift shape {drift.shape} does not conform to {shape}") from exc
    if not np.all(np.isfinite(drift)):
        raise InvalidInputError("drift must be finite")
    dt = tgrid.dt
    if scheme == "upwind":
        limit = upwind_dt_limit(drift[:-1], grid)
        if dt > limit:
            raise StabilityError(f"upwind CFL violated: dt = {dt:.3g} > {limit:.3g}", required_dt=limit)
    elif scheme == "central":
        peak = float(np.max(np.abs(drift[1:])))
        if grid.h * peak > 1.0:
            need = central_n_limit(drift[1:])
            raise StabilityError(f"cell Peclet number {grid.h * peak:.3g} > 1; use n >= {need}", required_n=need)
    mu = np.empty(shape)
    mu[0] = m0
    for k in range(tgrid.n_t):
        mu[k + 1] = fpk_step(mu[k], drift[k], dt, grid, scheme, drift_next=drift[k + 1], check=False)
    return mu


def density_reports(mu: np.ndarray, grid: TorusGrid) -> dict[str, BoundReport]:
    """Mass and positivity of every slice of a density field."""
    mu = np.asarray(mu, dtype=float)
    mass = grid.h * np.sum(mu, axis=-1)
    low = float(np.min(mu))
    return {
        "mass": BoundReport("mass_conservation", actual=float(np.max(np.abs(mass - 1.0))), bound=MASS_TOL),
        "positivity": BoundReport("positivity", actual=-low, bound=NEG_TOL, details={"min": low}),
    }


def check_holder_half(mu: np.ndarray, drift_bound: float, grid: TorusGrid, tgrid: TimeGrid,
                      tol: float = 1e-12) -> BoundReport:
    """``W1(mu_t, mu_s) <= (1 + sqrt(T) |drift|_0) |t - s|^(1/2)`` over all level pairs and clusters."""
    const = 1.0 + math.sqrt(tgrid.T) * float(drift_bound)
    ratio = holder_half_seminorm(mu, grid, tgrid.dt)
    return BoundReport("holder_half", actual=ratio, bound=const, tol=tol, details={"drift_bound": float(drift_bound)})


def check_first_moment(mu: np.ndarray, m0: np.ndarray, drift_bound: float, grid: TorusGrid, tgrid: TimeGrid,
                       representative: str = "torus", tol: float = 1e-12) -> BoundReport:
    """``sup_t int |x| mu_t <= int |x| m0 + |drift|_0 T + sqrt(T)`` per cluster.

    The report carries the cluster with the smallest margin. The torus
    distance to the origin is the default reading of ``|x|``; the lift in
    ``[0, 1)`` is available for comparison but is not a valid bound near 0.
    """
    mom = first_moment(mu, grid, representative)  # (n_t + 1, *batch)
    mom0 = first_moment(m0, grid, representative)
    T = tgrid.T
    bound = mom0 + float(drift_bound) * T + math.sqrt(T)
    peak = np.max(mom, axis=0)
    margin = bound - peak
    j = np.unravel_index(int(np.argmin(margin)), np.shape(margin)) if np.ndim(margin) else ()
    return BoundReport(
        "first_moment",
        actual=float(np.asarray(peak)[j]),
        bound=float(np.asarray(bound)[j]),
        tol=tol,
        details={"representative": representative, "initial_moment": float(np.asarray(mom0)[j])},
    )


def fpk_residual(mu: np.ndarray, drift: np.ndarray, grid: TorusGrid, tgrid: TimeGrid) -> np.ndarray:
    """Residual of ``mu_t - (drift mu)_x - 1/2 mu_xx`` at the half levels.

    Time derivative by differences, spatial operator by central
    differences averaged over the two levels (trapezoidal in time).
    """
    mu = np.asarray(mu, dtype=float)
    drift = np.asarray(drift, dtype=float)
    rhs = gradient(drift * mu, grid) + 0.5 * laplacian(mu, grid)
    return np.diff(mu, axis=0) / tgrid.dt - 0.5 * (rhs[1:] + rhs[:-1])


def drift_lipschitz_report(mu1: np.ndarray, mu2: np.ndarray, drift1: np.ndarray, drift2: np.ndarray,
                           grid: TorusGrid, tgrid: TimeGrid) -> BoundReport:
    """``sup_t W1(nu1, nu2) <= T exp(K T) |b1 - b2|_0`` with ``K = |b1|_0 + |b2|_0``."""
    h = grid.h
    gap = float(np.max(w1_weights(h * np.asarray(mu1), h * np.asarray(mu2), h)))
    K = float(np.max(np.abs(drift1))) + float(np.max(np.abs(drift2)))
    T = tgrid.T
    bound = T * math.exp(K * T) * float(np.max(np.abs(np.asarray(drift1) - np.asarray(drift2))))
    return BoundReport("fpk_drift_lipschitz", actual=gap, bound=bound, tol=1e-12, details={"K": K})
