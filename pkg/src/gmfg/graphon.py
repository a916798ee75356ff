"""Graphons on the cluster grid and the graphon-coupled running cost.

The running cost of a cluster ``alpha`` at state ``x`` is

    l1[mu](t, alpha, x) = int_0^1 int l2(x, y) mu(t, alpha', dy) g(alpha, alpha') dalpha'

discretised with the midpoint rule in ``alpha'`` and the exact grid sum
in ``y``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .checks import BoundReport
from .errors import InvalidInputError
from .expressions import Expression
from .torus import TorusGrid, discrete_lipschitz, forward_difference

GRAPHON_KINDS = ("constant", "uniform_attachment", "piecewise_constant", "expression")


@dataclass(frozen=True)
class AlphaGrid:
    """Cluster nodes at cell midpoints ``(j + 1/2)/M`` with weights ``1/M``."""

    M: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise InvalidInputError(f"M must be a positive integer, got {self.M!r}")
        object.__setattr__(self, "M", int(self.M))
        nodes = (np.arange(self.M) + 0.5) / self.M
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.M, 1.0 / self.M)


@dataclass(frozen=True)
class Graphon:
    """Symmetric bounded kernel on the unit square.

    kind ``constant`` uses ``p``; ``piecewise_constant`` uses a square
    ``table`` whose cell ``(i, k)`` covers ``[i/K, (i+1)/K) x [k/K, (k+1)/K)``;
    ``expression`` uses a catalog formula in ``alpha`` and ``y`` (the
    second cluster variable).
    """

    kind: str
    p: float = 1.0
    table: np.ndarray | None = None
    expr: Expression | None = None
    bound: float | None = None

    def __post_init__(self):
        if self.kind not in GRAPHON_KINDS:
            raise InvalidInputError(f"unknown graphon kind {self.kind!r}; expected one of {GRAPHON_KINDS}")
        if self.kind == "piecewise_constant":
            if self.table is None:
                raise InvalidInputError("piecewise_constant graphon needs a table")
            table = np.asarray(self.table, dtype=float)
            if table.ndim != 2 or table.shape[0] != table.shape[1]:
                raise InvalidInputError(f"graphon table must be square, got shape {table.shape}")
            if not np.array_equal(table, table.T):
                raise InvalidInputError("graphon table is not symmetric")
            object.__setattr__(self, "table", table)
        if self.kind == "expression" and self.expr is None:
            raise InvalidInputError("expression graphon needs a formula")

    def __call__(self, a, a2):
        a = np.asarray(a, dtype=float)
        a2 = np.asarray(a2, dtype=float)
        if np.any((a < 0) | (a > 1) | (a2 < 0) | (a2 > 1)) or not (np.all(np.isfinite(a)) and np.all(np.isfinite(a2))):
            raise InvalidInputError("graphon arguments must lie in [0, 1]")
        if self.kind == "constant":
            out = np.full(np.broadcast_shapes(a.shape, a2.shape), float(self.p))
        elif self.kind == "uniform_attachment":
            out = 1.0 - np.maximum(a, a2)
        elif self.kind == "piecewise_constant":
            K = self.table.shape[0]
            i = np.minimum((a * K).astype(int), K - 1)
            k = np.minimum((a2 * K).astype(int), K - 1)
            out = self.table[i, k]
        else:
            out = self.expr(alpha=a, y=a2)
        return float(out) if np.ndim(out) == 0 else out

    def matrix(self, agrid: AlphaGrid) -> np.ndarray:
        """``G[j, k] = g(alpha_j, alpha_k)``, symmetric by construction."""
        a = agrid.nodes
        G = np.asarray(self(a[:, None], a[None, :]), dtype=float)
        if not np.allclose(G, G.T, rtol=0.0, atol=1e-12 * (1.0 + np.max(np.abs(G)))):
            raise InvalidInputError("graphon is not symmetric on the cluster grid")
        G = 0.5 * (G + G.T)
        if self.bound is not None and np.max(np.abs(G)) > self.bound:
            raise InvalidInputError(f"graphon exceeds its declared bound {self.bound}")
        return G


def eval_graphon(kind: str, alpha: float, alpha2: float, **params) -> float:
    return Graphon(kind, **params)(alpha, alpha2)


class RunningCost(Protocol):
    """Anything mapping a density field to a cost field of the same shape."""

    def assemble(self, mu: np.ndarray) -> np.ndarray: ...

    def bound_report(self, ell1: np.ndarray) -> BoundReport: ...


@dataclass
class CostModel:
    """Graphon-coupled cost with interaction kernel ``ell2[i, m] = l2(x_i, y_m)``."""

    ell2: np.ndarray
    G: np.ndarray
    grid: TorusGrid
    agrid: AlphaGrid

    def __post_init__(self):
        self.ell2 = np.asarray(self.ell2, dtype=float)
        self.G = np.asarray(self.G, dtype=float)
        n, M = self.grid.n, self.agrid.M
        if self.ell2.shape != (n, n):
            raise InvalidInputError(f"ell2 must be {n}x{n}, got {self.ell2.shape}")
        if self.G.shape != (M, M):
            raise InvalidInputError(f"graphon matrix must be {M}x{M}, got {self.G.shape}")
        if not np.all(np.isfinite(self.ell2)):
            raise InvalidInputError("ell2 must be finite")
        if not np.array_equal(self.G, self.G.T):
            raise InvalidInputError("graphon matrix must be exactly symmetric")

    @classmethod
    def from_expression(cls, ell2: Expression | str, graphon: Graphon, grid: TorusGrid, agrid: AlphaGrid) -> "CostModel":
        if isinstance(ell2, str):
            ell2 = Expression.parse(ell2, ("x", "y"))
        K = ell2(x=grid.nodes[:, None], y=grid.nodes[None, :])
        return cls(ell2=K, G=graphon.matrix(agrid), grid=grid, agrid=agrid)

    @property
    def g_sup(self) -> float:
        return float(np.max(np.abs(self.G))) if self.G.size else 0.0

    def ell2_norms(self) -> dict[str, float]:
        """Discrete sup norms and difference quotients of the kernel."""
        K = self.ell2
        dx = forward_difference(K, self.grid, axis=0)
        return {
            "sup": float(np.max(np.abs(K))),
            "lip_x": float(np.max(np.abs(dx))),
            "lip_y": discrete_lipschitz(K, self.grid, axis=1),
            "lip_xy": discrete_lipschitz(dx, self.grid, axis=1),
            "second_x": float(np.max(np.abs(forward_difference(dx, self.grid, axis=0)))),
        }

    def assemble(self, mu: np.ndarray) -> np.ndarray:
        """Cost field over ``(time, cluster, space)`` for a density field ``mu``."""
        mu = np.asarray(mu, dtype=float)
        if mu.shape[-2:] != (self.agrid.M, self.grid.n):
            raise InvalidInputError(f"density field shape {mu.shape} does not match (.., {self.agrid.M}, {self.grid.n})")
        # inner[..., k, i] = h * sum_m l2(x_i, y_m) mu[..., k, m]
        inner = (mu @ self.ell2.T) * self.grid.h
        return np.einsum("jk,...ki->...ji", self.G / self.agrid.M, inner)

    def bound_report(self, ell1: np.ndarray) -> BoundReport:
        """Uniform bound ``|l1|_0 + |D_x l1|_0 <= (|l2|_0 + |D_x l2|_0) |g|_0``."""
        norms = self.ell2_norms()
        actual = float(np.max(np.abs(ell1))) + float(np.max(np.abs(forward_difference(ell1, self.grid))))
        bound = (norms["sup"] + norms["lip_x"]) * self.g_sup
        return BoundReport("ell1_uniform_bound", actual=actual, bound=bound, tol=1e-10 * (1.0 + bound))


def assemble_ell1(mu: np.ndarray, cost: CostModel) -> np.ndarray:
    return cost.assemble(mu)


def check_ell1_lipschitz(cost: CostModel, mu1: np.ndarray, mu2: np.ndarray) -> BoundReport:
    """``|l1[mu1] - l1[mu2]|_{0,0,1} <= M_L rho(mu1, mu2)`` with
    ``M_L = (Lip_y l2 + Lip_y D_x l2) |g|_0`` from grid difference quotients."""
    from .wasserstein import rho

    d = cost.assemble(mu1) - cost.assemble(mu2)
    actual = float(np.max(np.abs(d))) + float(np.max(np.abs(forward_difference(d, cost.grid))))
    norms = cost.ell2_norms()
    M_L = (norms["lip_y"] + norms["lip_xy"]) * cost.g_sup
    dist = rho(mu1, mu2, cost.grid)
    bound = M_L * dist
    return BoundReport(
        "ell1_lipschitz",
        actual=actual,
        bound=bound,
        tol=1e-10 * (1.0 + bound),
        details={"M_L": M_L, "rho": dist},
    )
