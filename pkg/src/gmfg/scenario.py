"""Assembled model: grids, cost, drift potential and initial densities."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidInputError
from .expressions import Expression
from .fpk import SCHEMES
from .graphon import AlphaGrid, CostModel, Graphon
from .hopf_cole import DriftPotential
from .parabolic import TimeGrid
from .torus import TorusGrid


def normalize_density(m0: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Scale every slice to mass ``h * sum = 1``; rejects negative or empty slices."""
    m0 = grid.check(np.asarray(m0, dtype=float))
    if not np.all(np.isfinite(m0)):
        raise InvalidInputError("initial density must be finite")
    if np.any(m0 < 0.0):
        raise InvalidInputError("initial density must be nonnegative")
    mass = grid.h * m0.sum(axis=-1, keepdims=True)
    if np.any(mass <= 0.0):
        raise InvalidInputError("initial density has a slice with zero mass")
    return m0 / mass


def density_from_expression(text: str | Expression, grid: TorusGrid, agrid: AlphaGrid) -> np.ndarray:
    e = text if isinstance(text, Expression) else Expression.parse(text, ("alpha", "x"))
    raw = e(alpha=agrid.nodes[:, None], x=grid.nodes[None, :])
    return normalize_density(np.broadcast_to(raw, (agrid.M, grid.n)), grid)


@dataclass
class Scenario:
    """Everything the fixed-point map needs, immutable after assembly.

    ``m0`` has shape ``(M, n)`` and is already normalised.
    """

    grid: TorusGrid
    tgrid: TimeGrid
    agrid: AlphaGrid
    cost: CostModel
    drift: DriftPotential
    m0: np.ndarray
    theta: float = 0.5
    scheme: str = "upwind"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidInputError(f"unknown FPK scheme {self.scheme!r}")
        if not 0.5 <= self.theta <= 1.0:
            raise InvalidInputError(f"theta must lie in [0.5, 1], got {self.theta}")
        m0 = np.asarray(self.m0, dtype=float)
        if m0.shape != (self.agrid.M, self.grid.n):
            raise InvalidInputError(f"m0 must have shape ({self.agrid.M}, {self.grid.n}), got {m0.shape}")
        mass = self.grid.h * m0.sum(axis=-1)
        if np.any(m0 < 0.0) or np.max(np.abs(mass - 1.0)) > 1e-10:
            raise InvalidInputError("m0 must be a nonnegative density with unit mass per cluster")
        self.m0 = m0
        self.m0.setflags(write=False)

    @classmethod
    def build(cls, n: int = 64, n_t: int = 200, M: int = 16, T: float = 0.5,
              graphon: Graphon | None = None, ell2: str | np.ndarray = "cos(2*pi*(x - y))",
              b: str | DriftPotential = "0", m0: str | np.ndarray = "1 + 0.5*cos(2*pi*x)",
              theta: float = 0.5, scheme: str = "upwind") -> "Scenario":
        grid, tgrid, agrid = TorusGrid(n), TimeGrid(T, n_t), AlphaGrid(M)
        graphon = graphon or Graphon("uniform_attachment")
        if isinstance(ell2, np.ndarray):
            cost = CostModel(ell2=ell2, G=graphon.matrix(agrid), grid=grid, agrid=agrid)
        else:
            cost = CostModel.from_expression(ell2, graphon, grid, agrid)
        drift = b if isinstance(b, DriftPotential) else DriftPotential.from_expression(b)
        if isinstance(m0, str):
            dens = density_from_expression(m0, grid, agrid)
        else:
            arr = np.asarray(m0, dtype=float)
            dens = normalize_density(np.broadcast_to(arr, (M, n)) if arr.ndim == 1 else arr, grid)
        return cls(grid=grid, tgrid=tgrid, agrid=agrid, cost=cost, drift=drift, m0=dens,
                   theta=theta, scheme=scheme)

    @cached_property
    def bgrid(self) -> dict[str, np.ndarray]:
        out = self.drift.on_grid(self.tgrid.times, self.agrid.nodes, self.grid.nodes)
        for arr in out.values():
            arr.setflags(write=False)
        return out

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.tgrid.n_t + 1, self.agrid.M, self.grid.n)

    def seed_density(self, kind: str | np.ndarray = "m0") -> np.ndarray:
        """Initial Picard iterate held constant in time."""
        if isinstance(kind, np.ndarray):
            arr = np.asarray(kind, dtype=float)
            if arr.shape == self.shape:
                return normalize_density(arr, self.grid)
            base = normalize_density(np.broadcast_to(arr, self.m0.shape), self.grid)
        elif kind == "m0":
            base = self.m0
        elif kind == "uniform":
            base = np.ones(self.m0.shape)
        else:
            raise InvalidInputError(f"unknown seed {kind!r}; expected 'm0', 'uniform' or an array")
        return np.broadcast_to(base, self.shape).copy()
