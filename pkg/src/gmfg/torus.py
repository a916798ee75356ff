"""Uniform periodic grid on the unit circle and its difference operators.

Grid functions are plain numpy arrays whose last axis has length ``n``;
leading axes (time, cluster) are carried along untouched, so every
operator works on a single slice or on a whole stack of slices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class TorusGrid:
    """Nodes ``x_i = i/n``, ``i = 0..n-1``, on the circle of length one."""

    n: int
    dim: int = 1
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4:
            raise InvalidInputError(f"grid needs n >= 4 nodes, got {self.n!r}")
        if self.dim != 1:
            raise InvalidInputError("only the one-dimensional torus is implemented")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "h", 1.0 / self.n)
        nodes = np.arange(self.n) / self.n
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    def check(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape[-1:] != (self.n,):
            raise InvalidInputError(f"grid function must have trailing length {self.n}, got shape {u.shape}")
        return u

    def evaluate(self, func) -> np.ndarray:
        return np.asarray(func(self.nodes), dtype=float) * np.ones(self.n)

    def mass(self, u: np.ndarray) -> np.ndarray:
        """Discrete integral ``h * sum_i u_i`` over the last axis."""
        return self.h * np.sum(self.check(u), axis=-1)


def wrap(x):
    """Representative of ``x`` modulo one in ``[0, 1)``."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("wrap() needs finite input")
    out = arr - np.floor(arr)
    # x slightly below an integer can round up to exactly 1.0
    out = np.where(out >= 1.0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def torus_distance(x, y):
    """Length of the shorter arc between ``x`` and ``y``; lies in ``[0, 0.5]``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidInputError("torus_distance() needs finite input")
    d = np.abs(x - y)
    d = d - np.floor(d)
    out = np.minimum(d, 1.0 - d)
    return float(out) if out.ndim == 0 else out


def gradient(u: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Central difference ``(u[i+1] - u[i-1]) / 2h``."""
    u = grid.check(u)
    return (np.roll(u, -1, axis=-1) - np.roll(u, 1, axis=-1)) / (2.0 * grid.h)


def laplacian(u: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Three-point stencil ``(u[i+1] - 2u[i] + u[i-1]) / h^2``."""
    u = grid.check(u)
    return (np.roll(u, -1, axis=-1) - 2.0 * u + np.roll(u, 1, axis=-1)) / grid.h**2


def face_values(u: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Arithmetic mean on faces; entry ``i`` sits at ``x_{i+1/2}``."""
    u = grid.check(u)
    return 0.5 * (u + np.roll(u, -1, axis=-1))


def divergence(flux: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Conservative divergence ``(F_{i+1/2} - F_{i-1/2}) / h`` of a nodal flux.

    Face fluxes are averages of the neighbouring nodal values, so the
    discrete integral of the result telescopes to zero.
    """
    faces = face_values(flux, grid)
    return (faces - np.roll(faces, 1, axis=-1)) / grid.h


def forward_difference(u: np.ndarray, grid: TorusGrid, axis: int = -1) -> np.ndarray:
    """``(u[i+1] - u[i]) / h`` along ``axis``; used by Lipschitz estimators."""
    u = np.asarray(u, dtype=float)
    return (np.roll(u, -1, axis=axis) - u) / grid.h


def discrete_lipschitz(u: np.ndarray, grid: TorusGrid, axis: int = -1) -> float:
    """Largest adjacent difference quotient; the Lipschitz constant of ``u``
    for the path metric of the cycle of grid nodes."""
    return float(np.max(np.abs(forward_difference(u, grid, axis=axis)))) if np.size(u) else 0.0

