"""Discrete Holder-type norms of solution fields for reports."""

from __future__ import annotations

import numpy as np

from .parabolic import TimeGrid
from .torus import TorusGrid, forward_difference
from .wasserstein import s_half_norm


def time_holder(u: np.ndarray, dt: float, exponent: float = 0.5) -> float:
    """``sup_{k != l} |u_k - u_l| / |t_k - t_l|^exponent`` over the leading axis."""
    u = np.asarray(u, dtype=float)
    best = 0.0
    for lag in range(1, u.shape[0]):
        d = np.max(np.abs(u[lag:] - u[:-lag]))
        best = max(best, float(d) / (lag * dt) ** exponent)
    return best


def field_norms(u: np.ndarray, grid: TorusGrid, tgrid: TimeGrid) -> dict[str, float]:
    """Sup norms of ``u`` and its first two spatial differences, time difference, and time 1/2-Holder seminorm."""
    u = np.asarray(u, dtype=float)
    dx = forward_difference(u, grid)
    return {
        "sup": float(np.max(np.abs(u))),
        "dx_sup": float(np.max(np.abs(dx))),
        "dxx_sup": float(np.max(np.abs(forward_difference(dx, grid)))),
        "dt_sup": float(np.max(np.abs(np.diff(u, axis=0)))) / tgrid.dt if u.shape[0] > 1 else 0.0,
        "time_holder_half": time_holder(u, tgrid.dt),
    }


def solution_norms(mu: np.ndarray, v: np.ndarray, grid: TorusGrid, tgrid: TimeGrid,
                   control: np.ndarray | None = None) -> dict[str, dict[str, float]]:
    moment, holder = s_half_norm(mu, grid, tgrid.dt)
    out = {
        "v": field_norms(v, grid, tgrid),
        "mu": {"first_moment": moment, "w1_holder_half": holder, "sup": float(np.max(mu)),
               "min": float(np.min(mu))},
    }
    if control is not None:
        out["control"] = {"sup": float(np.max(np.abs(control)))}
    return out
