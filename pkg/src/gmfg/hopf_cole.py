"""Value-function half of the fixed-point map via the Hopf-Cole transform.

With ``v~ = v - b`` the HJB equation becomes

    v~_t - 1/2 |v~_x|^2 + 1/2 v~_xx + l~1 = 0,    v~(T) = -b(T),

and ``w = exp(-v~)`` solves the linear backward problem

    w_t + 1/2 w_xx - l~1 w = 0,                   w(T) = exp(b(T)),

where ``l~1 = l1 + b_t + 1/2 |b_x|^2 + 1/2 b_xx``. Every cluster slice is
solved independently; the drift fed to the Fokker-Planck step is
``v~_x = -w_x / w``.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .checks import BoundReport
from .errors import InvalidInputError, PositivityError
from .expressions import Expression
from .parabolic import TimeGrid, solve_backward
from .torus import TorusGrid, gradient, laplacian

Field = Callable[..., np.ndarray]


@dataclass
class DriftPotential:
    """Potential ``b(t, alpha, x)`` with its analytic derivatives.

    All callables take keyword arrays ``t``, ``alpha``, ``x`` and broadcast.
    """

    b: Field
    b_t: Field
    b_x: Field
    b_xx: Field
    source: str = "<callable>"

    @classmethod
    def from_expression(cls, text: str) -> "DriftPotential":
        e = Expression.parse(text, ("t", "alpha", "x"))
        pot = cls(b=e, b_t=e.diff("t"), b_x=e.diff("x"), b_xx=e.diff("x", 2), source=e.source)
        pot.validate()
        return pot

    @classmethod
    def zero(cls) -> "DriftPotential":
        return cls.from_expression("0")

    def validate(self, samples: int = 16, seed: int = 7) -> None:
        """Probe the supplied derivatives with central differences."""
        rng = np.random.default_rng(seed)
        t = rng.uniform(0.1, 0.9, samples)
        a = rng.uniform(0.0, 1.0, samples)
        x = rng.uniform(0.0, 1.0, samples)
        d1, d2 = 1e-5, 1e-3

        def b(tt, xx):
            return np.asarray(self.b(t=tt, alpha=a, x=xx), dtype=float)

        scale = 1.0 + float(np.max(np.abs(b(t, x))))
        probes = {
            "b_t": ((b(t + d1, x) - b(t - d1, x)) / (2 * d1), self.b_t, 1e-5),
            "b_x": ((b(t, x + d1) - b(t, x - d1)) / (2 * d1), self.b_x, 1e-5),
            "b_xx": ((b(t, x + d2) - 2 * b(t, x) + b(t, x - d2)) / d2**2, self.b_xx, 1e-3),
        }
        for name, (fd, fn, rel) in probes.items():
            exact = np.asarray(fn(t=t, alpha=a, x=x), dtype=float)
            tol = rel * (scale + float(np.max(np.abs(exact))))
            err = float(np.max(np.abs(fd - exact)))
            if not err <= tol:
                raise InvalidInputError(f"derivative {name} of drift potential disagrees with finite differences ({err:.2e})")

    def on_grid(self, times: np.ndarray, alphas: np.ndarray, x: np.ndarray) -> dict[str, np.ndarray]:
        t = np.asarray(times)[:, None, None]
        a = np.asarray(alphas)[None, :, None]
        xx = np.asarray(x)[None, None, :]
        shape = (t.shape[0], a.shape[1], xx.shape[2])
        return {
            name: np.broadcast_to(np.asarray(getattr(self, name)(t=t, alpha=a, x=xx), dtype=float), shape).copy()
            for name in ("b", "b_t", "b_x", "b_xx")
        }


@dataclass
class ValueField:
    """Hopf-Cole variable ``w`` and derived fields on (time, cluster, space)."""

    w: np.ndarray
    v_tilde: np.ndarray
    grad_v_tilde: np.ndarray
    b: np.ndarray
    b_x: np.ndarray

    @property
    def v(self) -> np.ndarray:
        return self.v_tilde + self.b

    @property
    def control(self) -> np.ndarray:
        """Optimal feedback ``a* = -grad v = -(grad v~ + b_x)``."""
        return -(self.grad_v_tilde + self.b_x)


def effective_cost(ell1: np.ndarray, bgrid: dict[str, np.ndarray]) -> np.ndarray:
    """``l1 + b_t + 1/2 b_x^2 + 1/2 b_xx`` on the grid."""
    ell1 = np.asarray(ell1, dtype=float)
    corr = bgrid["b_t"] + 0.5 * bgrid["b_x"] ** 2 + 0.5 * bgrid["b_xx"]
    if corr.shape != ell1.shape:
        raise InvalidInputError(f"cost field shape {ell1.shape} does not match drift grid {corr.shape}")
    out = ell1 + corr
    if not np.all(np.isfinite(out)):
        raise InvalidInputError("effective cost is not finite")
    return out


def solve_w(ell_tilde: np.ndarray, b_terminal: np.ndarray, grid: TorusGrid, tgrid: TimeGrid,
            theta: float = 0.5) -> np.ndarray:
    """Backward linear solve for ``w`` with terminal datum ``exp(b(T))``.

    ``ell_tilde`` has shape ``(n_t + 1, ..., n)``; ``b_terminal`` the
    trailing shape. Leading batch axes (clusters) are solved together but
    independently.
    """
    return solve_backward(ell_tilde, 0.0, np.exp(b_terminal), grid, tgrid, theta)


def check_harnack(w: np.ndarray, b_terminal: np.ndarray, ell_tilde: np.ndarray, T: float,
                  slack: float = 1e-12, dt: float | None = None) -> BoundReport:
    """Two-sided bound ``exp(-(|b|_0 + |c|_0 T)) <= w <= exp(|b|_0 + |c|_0 T)``.

    Evaluated per cluster slice (axis 1 when ``w`` is a full field); the
    report carries the tightest slice. Passing ``dt`` widens the relative
    slack by the Crank-Nicolson amplification error ``T |c|^3 dt^2 / 6``,
    which matters only when the bound is attained (constant ``c``).
    """
    w = np.asarray(w, dtype=float)
    if w.ndim == 2:
        w = w[:, None, :]
        b_terminal = np.asarray(b_terminal)[None, :]
        ell_tilde = np.asarray(ell_tilde)[:, None, :]
    bsup = np.max(np.abs(b_terminal), axis=-1)
    csup = np.max(np.abs(ell_tilde), axis=(0, 2))
    expo = bsup + csup * T
    if dt is not None:
        slack = max(slack, float(np.max(csup)) ** 3 * T * dt**2 / 6.0)
    upper = np.exp(expo)
    lower = np.exp(-expo)
    wmax = np.max(w, axis=(0, 2))
    wmin = np.min(w, axis=(0, 2))
    # relative slack keeps the comparison meaningful for large exponents
    up_margin = (upper - wmax) / upper
    lo_margin = (wmin - lower) / lower
    j_up = int(np.argmin(up_margin))
    j_lo = int(np.argmin(lo_margin))
    return BoundReport(
        "harnack",
        actual=float(wmax[j_up] / upper[j_up]),
        bound=1.0,
        lower=1.0,
        actual_min=float(wmin[j_lo] / lower[j_lo]),
        tol=slack,
        details={
            "w_max": float(np.max(wmax)),
            "w_min": float(np.min(wmin)),
            "upper": float(upper[j_up]),
            "lower": float(lower[j_lo]),
        },
    )


def recover(w: np.ndarray, bgrid: dict[str, np.ndarray], grid: TorusGrid) -> ValueField:
    if not np.all(w > 0.0):
        raise PositivityError(f"Hopf-Cole variable lost positivity (min w = {float(np.min(w)):.3e}); reduce dt")
    return ValueField(
        w=w,
        v_tilde=-np.log(w),
        grad_v_tilde=-gradient(w, grid) / w,
        b=bgrid["b"],
        b_x=bgrid["b_x"],
    )


def semilinear_residual(vt: np.ndarray, ell_tilde: np.ndarray, grid: TorusGrid, tgrid: TimeGrid) -> np.ndarray:
    """Residual of ``v~_t - 1/2 v~_x^2 + 1/2 v~_xx + l~1`` at the half time levels."""
    dvt = np.diff(vt, axis=0) / tgrid.dt
    spatial = -0.5 * gradient(vt, grid) ** 2 + 0.5 * laplacian(vt, grid) + ell_tilde
    return dvt + 0.5 * (spatial[1:] + spatial[:-1])


def phi1(mu: np.ndarray, scenario) -> tuple[np.ndarray, ValueField, dict[str, BoundReport]]:
    """Optimal drift gradient ``v~_x`` for a given density field.

    Returns the drift, the full :class:`ValueField` and the bound reports
    (running-cost bound and Harnack) collected during the pass.
    """
    ell1 = scenario.cost.assemble(mu)
    reports = {"ell1_bound": scenario.cost.bound_report(ell1)}
    bgrid = scenario.bgrid
    ell_tilde = effective_cost(ell1, bgrid)
    w = solve_w(ell_tilde, bgrid["b"][-1], scenario.grid, scenario.tgrid, scenario.theta)
    reports["harnack"] = check_harnack(w, bgrid["b"][-1], ell_tilde, scenario.tgrid.T, dt=scenario.tgrid.dt)
    vf = recover(w, bgrid, scenario.grid)
    return vf.grad_v_tilde, vf, reports

