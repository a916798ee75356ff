"""Wasserstein-1 distance between measures on the grid of the circle.

For cell masses ``a`` and ``b`` on the uniform grid, with
``F_i = sum_{j <= i} (a_j - b_j)``, the circular transport cost is

    W1(a, b) = h * min_s sum_i |F_i - s|

and the minimising shift is a median of the ``F_i`` (all weights equal
``h``). A dense linear program over couplings is kept as an independent
reference for small grids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .checks import BoundReport
from .errors import InvalidInputError, NumericalFailure
from .torus import TorusGrid, torus_distance

MASS_TOL = 1e-10
LP_MAX_N = 64


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability weights (cell masses) attached to the grid nodes."""

    grid: TorusGrid
    weights: np.ndarray

    def __post_init__(self):
        w = self.grid.check(np.asarray(self.weights, dtype=float))
        if w.ndim != 1:
            raise InvalidInputError("a discrete measure carries one weight per node")
        if np.any(w < -1e-12) or abs(w.sum() - 1.0) > MASS_TOL:
            raise InvalidInputError(f"weights must be nonnegative with total mass 1 (got {w.sum():.15g})")
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_density(cls, grid: TorusGrid, density) -> "DiscreteMeasure":
        return cls(grid, grid.h * np.asarray(density, dtype=float))

    @classmethod
    def point_mass(cls, grid: TorusGrid, x: float) -> "DiscreteMeasure":
        w = np.zeros(grid.n)
        w[int(np.rint(x * grid.n)) % grid.n] = 1.0
        return cls(grid, w)


def _weights(m, grid: TorusGrid | None):
    if isinstance(m, DiscreteMeasure):
        return m.weights, m.grid
    if grid is None:
        raise InvalidInputError("raw weight arrays need an explicit grid")
    return grid.check(np.asarray(m, dtype=float)), grid


def w1_weights(a: np.ndarray, b: np.ndarray, h: float) -> np.ndarray:
    """Vectorised circle W1 between weight arrays along the last axis."""
    F = np.cumsum(a - b, axis=-1)
    s = np.median(F, axis=-1, keepdims=True)
    return h * np.sum(np.abs(F - s), axis=-1)


def w1_circle(mu, nu, grid: TorusGrid | None = None) -> float:
    a, ga = _weights(mu, grid)
    b, gb = _weights(nu, grid)
    if ga.n != gb.n:
        raise InvalidInputError("measures live on different grids")
    return float(w1_weights(a, b, ga.h))


def w1_lp_oracle(mu, nu, grid: TorusGrid | None = None) -> float:
    """Optimal transport LP over all couplings with torus ground cost."""
    a, ga = _weights(mu, grid)
    b, gb = _weights(nu, grid)
    n = ga.n
    if gb.n != n:
        raise InvalidInputError("measures live on different grids")
    if n > LP_MAX_N:
        raise InvalidInputError(f"LP oracle is limited to n <= {LP_MAX_N}")
    x = ga.nodes
    cost = torus_distance(x[:, None], x[None, :]).ravel()
    rows = np.zeros((2 * n, n * n))
    for i in range(n):
        rows[i, i * n:(i + 1) * n] = 1.0
        rows[n + i, i::n] = 1.0
    # one marginal row is implied by the others; keeping it upsets the simplex
    b = b * (a.sum() / b.sum())
    res = linprog(cost, A_eq=rows[:-1], b_eq=np.concatenate([a, b])[:-1], bounds=(0, None), method="highs-ds",
                  options={"presolve": False, "primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise NumericalFailure(f"transport LP failed: {res.message}")
    return float(res.fun)


def rho(mu1: np.ndarray, mu2: np.ndarray, grid: TorusGrid) -> float:
    """Sup over all (time, cluster) slices of W1 between two density fields."""
    mu1 = np.asarray(mu1, dtype=float)
    mu2 = np.asarray(mu2, dtype=float)
    if mu1.shape != mu2.shape:
        raise InvalidInputError(f"density fields differ in shape: {mu1.shape} vs {mu2.shape}")
    grid.check(mu1)
    return float(np.max(w1_weights(grid.h * mu1, grid.h * mu2, grid.h)))


def first_moment(mu: np.ndarray, grid: TorusGrid, representative: str = "unit") -> np.ndarray:
    """``int |x| mu(dx)`` per slice of a density field.

    ``representative="unit"`` measures ``|x|`` by the lift in ``[0, 1)``;
    ``"torus"`` by the arc length to the origin.
    """
    if representative == "unit":
        absx = grid.nodes
    elif representative == "torus":
        absx = torus_distance(grid.nodes, 0.0)
    else:
        raise InvalidInputError(f"unknown representative {representative!r}")
    return grid.h * np.asarray(mu, dtype=float) @ absx


def holder_half_seminorm(mu: np.ndarray, grid: TorusGrid, dt: float) -> float:
    """Max over time-level pairs and clusters of ``W1(mu_t, mu_s) / |t - s|^(1/2)``.

    ``mu`` has shape ``(n_times, ..., n)``; a single time level gives 0.
    """
    mu = grid.check(np.asarray(mu, dtype=float))
    F = np.cumsum(grid.h * mu, axis=-1)
    K = mu.shape[0]
    best = 0.0
    for k in range(K - 1):
        D = F[k + 1:] - F[k]
        s = np.median(D, axis=-1, keepdims=True)
        w = grid.h * np.sum(np.abs(D - s), axis=-1)
        lag = np.sqrt(dt * np.arange(1, K - k)).reshape((-1,) + (1,) * (w.ndim - 1))
        best = max(best, float(np.max(w / lag)))
    return best


def s_half_norm(mu: np.ndarray, grid: TorusGrid, dt: float) -> tuple[float, float]:
    """(first-moment part, discrete 1/2-Holder part) of a density field."""
    moment = float(np.max(first_moment(mu, grid, "unit")))
    return moment, holder_half_seminorm(mu, grid, dt)


def duality_gap_probe(mu, nu, f, grid: TorusGrid | None = None) -> BoundReport:
    """Kantorovich certificate ``int f d(mu - nu) <= W1(mu, nu)`` for 1-Lipschitz ``f``."""
    a, g = _weights(mu, grid)
    b, _ = _weights(nu, g)
    f = g.check(np.asarray(f, dtype=float))
    steps = np.abs(np.roll(f, -1) - f)
    if np.max(steps) > g.h * (1.0 + 1e-12):
        raise InvalidInputError("test function is not 1-Lipschitz on the grid")
    value = float(f @ (a - b))
    dist = w1_circle(a, b, g)
    return BoundReport("kantorovich_duality", actual=value, bound=dist, tol=1e-10)
