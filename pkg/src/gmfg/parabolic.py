"""Linear parabolic problems ``u_t = 1/2 u_xx - c u + f`` on the circle.

The theta-scheme treats diffusion and reaction implicitly with weight
``theta`` (Crank-Nicolson by default) and the source at the
theta-weighted time level. Each step is one batch of periodic
tridiagonal solves.

Backward problems ``v_t + 1/2 v_xx - c v + f = 0`` with terminal data are
handled by the reflection ``u(s) = v(T - s)`` in :func:`solve_backward`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .checks import BoundReport
from .errors import InvalidInputError, NumericalFailure, StabilityError
from .torus import TorusGrid, laplacian
from .tridiag import solve_cyclic


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time levels ``t_k = k * dt`` for ``k = 0..n_t``."""

    T: float
    n_t: int

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise InvalidInputError(f"horizon T must be positive, got {self.T!r}")
        if int(self.n_t) != self.n_t or self.n_t < 1:
            raise InvalidInputError(f"n_t must be a positive integer, got {self.n_t!r}")
        object.__setattr__(self, "n_t", int(self.n_t))

    @property
    def dt(self) -> float:
        return self.T / self.n_t

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_t + 1) * self.dt


@dataclass
class ParabolicCoefficients:
    """Reaction ``c`` and source ``f`` on every time level, initial datum ``psi``.

    ``c`` and ``f`` have shape ``(n_t + 1, *batch, n)`` (anything that
    broadcasts to it is accepted); ``psi`` has shape ``(*batch, n)``.
    """

    c: np.ndarray
    f: np.ndarray
    psi: np.ndarray

    def conform(self, grid: TorusGrid, tgrid: TimeGrid) -> "ParabolicCoefficients":
        psi = grid.check(np.asarray(self.psi, dtype=float))
        shape = (tgrid.n_t + 1,) + psi.shape
        try:
            c = np.broadcast_to(np.asarray(self.c, dtype=float), shape)
            f = np.broadcast_to(np.asarray(self.f, dtype=float), shape)
        except ValueError as exc:
            raise InvalidInputError(f"coefficients do not conform to {shape}") from exc
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(f)) and np.all(np.isfinite(psi))):
            raise InvalidInputError("coefficients must be finite")
        return ParabolicCoefficients(c=c, f=f, psi=psi)


@dataclass
class ParabolicSolution:
    u: np.ndarray  # (n_t + 1, *batch, n)
    grid: TorusGrid
    tgrid: TimeGrid


def step_theta(u_k, c_k, f_k, dt: float, grid: TorusGrid, theta: float = 0.5,
               c_next=None, f_next=None) -> np.ndarray:
    """Advance one theta-step; ``c_next``/``f_next`` default to the current level."""
    if not 0.0 <= theta <= 1.0:
        raise InvalidInputError(f"theta must lie in [0, 1], got {theta}")
    if not dt > 0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    u_k = grid.check(u_k)
    c_k = np.broadcast_to(np.asarray(c_k, dtype=float), u_k.shape)
    f_k = np.broadcast_to(np.asarray(f_k, dtype=float), u_k.shape)
    c_next = c_k if c_next is None else np.broadcast_to(np.asarray(c_next, dtype=float), u_k.shape)
    f_next = f_k if f_next is None else np.broadcast_to(np.asarray(f_next, dtype=float), u_k.shape)
    if np.any(1.0 + theta * dt * c_next <= 0.0):
        raise NumericalFailure("implicit reaction makes the step matrix singular; reduce dt")

    rhs = u_k + dt * (theta * f_next + (1.0 - theta) * f_k)
    if theta < 1.0:
        rhs = rhs + (1.0 - theta) * dt * (0.5 * laplacian(u_k, grid) - c_k * u_k)
    if theta == 0.0:
        return rhs
    off = -0.5 * theta * dt / grid.h**2
    diag = 1.0 + theta * dt * (1.0 / grid.h**2 + c_next)
    return solve_cyclic(off, diag, off, rhs)


def solve(coeffs: ParabolicCoefficients, grid: TorusGrid, tgrid: TimeGrid, theta: float = 0.5) -> ParabolicSolution:
    """Full trajectory of the forward problem starting from ``psi``."""
    co = coeffs.conform(grid, tgrid)
    dt = tgrid.dt
    cmax = float(np.max(np.abs(co.c))) if co.c.size else 0.0
    if theta < 1.0 and dt * cmax >= 1.0:
        raise StabilityError(
            f"dt*|c|_0 = {dt * cmax:.3g} >= 1 with theta = {theta}; use dt < {1.0 / cmax:.3g}",
            required_dt=1.0 / cmax,
        )
    u = np.empty(co.c.shape)
    u[0] = co.psi
    for k in range(tgrid.n_t):
        u[k + 1] = step_theta(u[k], co.c[k], co.f[k], dt, grid, theta, c_next=co.c[k + 1], f_next=co.f[k + 1])
    return ParabolicSolution(u=u, grid=grid, tgrid=tgrid)


def solve_backward(c, f, terminal, grid: TorusGrid, tgrid: TimeGrid, theta: float = 0.5) -> np.ndarray:
    """Solve ``v_t + 1/2 v_xx - c v + f = 0``, ``v(T) = terminal``.

    ``c`` and ``f`` are indexed by the forward time levels; the result is
    too. Internally the forward solver runs on the reflected coefficients.
    """
    terminal = grid.check(np.asarray(terminal, dtype=float))
    shape = (tgrid.n_t + 1,) + terminal.shape
    c = np.broadcast_to(np.asarray(c, dtype=float), shape)[::-1]
    f = np.broadcast_to(np.asarray(f, dtype=float), shape)[::-1]
    sol = solve(ParabolicCoefficients(c=c, f=f, psi=terminal), grid, tgrid, theta)
    return sol.u[::-1].copy()


def sup_norm(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.max(np.abs(a))) if a.size else 0.0


def check_sup_bound(sol: ParabolicSolution, coeffs: ParabolicCoefficients) -> BoundReport:
    """Comparison-principle bound ``|u|_0 <= exp(|c|_0 T) |f|_0 T`` for zero initial data."""
    co = coeffs.conform(sol.grid, sol.tgrid)
    if np.any(co.psi != 0.0):
        raise InvalidInputError("sup bound applies to zero initial data only")
    T = sol.tgrid.T
    bound = math.exp(sup_norm(co.c) * T) * sup_norm(co.f) * T
    return BoundReport(
        name="parabolic_sup_bound",
        actual=sup_norm(sol.u),
        bound=bound,
        tol=1e-8 * (1.0 + bound),
    )


def check_sensitivity(c, f1, f2, grid: TorusGrid, tgrid: TimeGrid, theta: float = 0.5) -> BoundReport:
    """Source sensitivity ``|u[c,f1] - u[c,f2]|_0 <= T exp(T |c|_0) |f1 - f2|_0``."""
    zero = np.zeros(grid.n)
    co1 = ParabolicCoefficients(c=c, f=f1, psi=zero).conform(grid, tgrid)
    co2 = ParabolicCoefficients(c=c, f=f2, psi=zero).conform(grid, tgrid)
    u1 = solve(co1, grid, tgrid, theta).u
    u2 = solve(co2, grid, tgrid, theta).u
    T = tgrid.T
    bound = T * math.exp(T * sup_norm(co1.c)) * sup_norm(co1.f - co2.f)
    return BoundReport(
        name="parabolic_sensitivity",
        actual=sup_norm(u1 - u2),
        bound=bound,
        tol=1e-8 * (1.0 + bound),
    )
