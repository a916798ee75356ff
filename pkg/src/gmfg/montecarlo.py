"""Monte Carlo cross-checks for the grid solvers.

* :func:`mc_parabolic` estimates the Feynman-Kac expectation of the
  backward problem ``v_t + 1/2 v_xx - c v + f = 0`` along wrapped Brownian
  paths started at ``(t, x)``.
* :func:`simulate_particles` runs Euler-Maruyama for ``dX = beta dt + dW``
  on the circle and bins the particles on the grid.
* :func:`cost_functional` estimates ``E int_0^T (1/2 a^2 + l1) dt`` along
  paths driven by ``b_x + a``.

Paths are simulated in fixed-size blocks; block ``j`` of stream ``s``
draws from a Philox generator keyed by ``(seed, s, j)``, so results do not
depend on scheduling and are bit-identical across runs.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .parabolic import TimeGrid
from .torus import TorusGrid, wrap
from .wasserstein import w1_weights

BLOCK = 512
STREAM_FEYNMAN_KAC = 1
STREAM_PARTICLES = 2
STREAM_COST = 3


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 4096
    dt_mc: float = 1e-3
    rng_seed: int = 20240601
    antithetic: bool = True

    def __post_init__(self):
        if int(self.n_paths) != self.n_paths or self.n_paths < 100:
            raise InvalidInputError(f"n_paths must be an integer >= 100, got {self.n_paths}")
        if not (math.isfinite(self.dt_mc) and self.dt_mc > 0):
            raise InvalidInputError(f"dt_mc must be positive, got {self.dt_mc}")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise InvalidInputError("rng_seed must be a 64-bit unsigned integer")

    def check_against(self, dt: float) -> None:
        if self.dt_mc > dt * (1 + 1e-12):
            raise InvalidInputError(f"dt_mc = {self.dt_mc} exceeds the grid time step {dt}")

    def with_paths(self, n_paths: int) -> "McConfig":
        return McConfig(n_paths=n_paths, dt_mc=self.dt_mc, rng_seed=self.rng_seed, antithetic=self.antithetic)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_paths: int


def block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.Philox(ss))


def _blocks(n_paths: int):
    start = 0
    j = 0
    while start < n_paths:
        size = min(BLOCK, n_paths - start)
        yield j, size
        start += size
        j += 1


def _normals(rng: np.random.Generator, size: int, antithetic: bool) -> np.ndarray:
    """Standard normals; with antithetics the second half mirrors the first."""
    if not antithetic:
        return rng.standard_normal(size)
    half = (size + 1) // 2
    z = rng.standard_normal(half)
    return np.concatenate([z, -z])[:size]


def _estimate(values: np.ndarray, antithetic: bool) -> McEstimate:
    """Mean and standard error; antithetic pairs are averaged before the variance."""
    n = values.shape[0]
    if antithetic:
        samples = _pair_means(values)
    else:
        samples = values
    mean = float(np.mean(values))
    m = samples.shape[0]
    se = float(np.std(samples, ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    # a path-independent integrand only differs by rounding between paths
    if np.ptp(values) <= 64 * np.finfo(float).eps * max(float(np.max(np.abs(values))), 1.0):
        se = 0.0
    return McEstimate(mean=mean, std_error=se, n_paths=n)


def _pair_means(values: np.ndarray) -> np.ndarray:
    # blocks store [z, -z] halves; rebuild the pairs block by block
    out = []
    start = 0
    for _, size in _blocks(values.shape[0]):
        v = values[start:start + size]
        half = (size + 1) // 2
        a, b = v[:half], v[half:]
        if b.shape[0] < half:
            out.append(0.5 * (a[:-1] + b))
            out.append(a[-1:])
        else:
            out.append(0.5 * (a + b))
        start += size
    return np.concatenate(out)


Coefficient = Callable[[float, np.ndarray], np.ndarray]


def _as_callable(c) -> Coefficient:
    if callable(c):
        return c
    value = float(c)
    return lambda s, x: np.full(np.shape(x), value)


def feynman_kac_paths(c, f, t: float, x: float, T: float, cfg: McConfig, terminal=None,
                      refine: int = 1) -> list[np.ndarray]:
    """Per-path functionals on ``refine`` nested step sizes ``dt_mc / 2**l``.

    All levels share the Brownian increments of the finest level, which is
    what makes the level differences low-variance.
    """
    c, f = _as_callable(c), _as_callable(f)
    g = None if terminal is None else _as_callable(terminal)
    N = max(1, math.ceil((T - t) / cfg.dt_mc - 1e-9))
    levels = []
    for lev in range(refine):
        levels.append((N * 2**lev, (T - t) / (N * 2**lev)))
    fine_steps, fine_dt = levels[-1]
    results = [[] for _ in range(refine)]
    for j, size in _blocks(cfg.n_paths):
        rng = block_rng(cfg.rng_seed, STREAM_FEYNMAN_KAC, j)
        X = [np.full(size, float(x)) for _ in range(refine)]
        acc = [np.zeros(size) for _ in range(refine)]
        logd = [np.zeros(size) for _ in range(refine)]
        pending = [np.zeros(size) for _ in range(refine)]
        for step in range(fine_steps):
            dW = math.sqrt(fine_dt) * _normals(rng, size, cfg.antithetic)
            for lev, (steps, dt) in enumerate(levels):
                ratio = fine_steps // steps
                if step % ratio == 0:
                    s = t + (step // ratio) * dt
                    acc[lev] += np.exp(logd[lev]) * f(s, X[lev]) * dt
                    logd[lev] -= c(s, X[lev]) * dt
                pending[lev] += dW
                if (step + 1) % ratio == 0:
                    X[lev] = wrap(X[lev] + pending[lev])
                    pending[lev][:] = 0.0
        for lev in range(refine):
            val = acc[lev]
            if g is not None:
                val = val + np.exp(logd[lev]) * g(T, X[lev])
            results[lev].append(val)
    return [np.concatenate(r) for r in results]


def mc_parabolic(c, f, t: float, x: float, T: float, cfg: McConfig, terminal=None) -> McEstimate:
    """Feynman-Kac estimate of ``v(t, x)``.

    ``c`` and ``f`` are constants or callables ``(s, x_array) -> array``;
    an optional ``terminal`` payoff adds ``exp(-int c) terminal(X_T)``.
    Integrals are left Riemann sums on steps of at most ``dt_mc``.
    """
    if t >= T:
        # empty horizon: only the terminal payoff at the starting point survives
        if terminal is None:
            return McEstimate(mean=0.0, std_error=0.0, n_paths=cfg.n_paths)
        return _terminal_only(terminal, T, x, cfg)
    (values,) = feynman_kac_paths(c, f, t, x, T, cfg, terminal)
    return _estimate(values, cfg.antithetic)


def _terminal_only(terminal, T: float, x: float, cfg: McConfig) -> McEstimate:
    value = float(np.asarray(_as_callable(terminal)(T, np.array([float(x)])))[0])
    return McEstimate(mean=value, std_error=0.0, n_paths=cfg.n_paths)


def mc_time_bias(c, f, t: float, x: float, T: float, cfg: McConfig, terminal=None) -> McEstimate:
    """Difference between the ``dt_mc`` and ``dt_mc / 2`` estimates on common paths."""
    if t >= T:
        return McEstimate(0.0, 0.0, cfg.n_paths)
    coarse, fine = feynman_kac_paths(c, f, t, x, T, cfg, terminal, refine=2)
    return _estimate(coarse - fine, cfg.antithetic)


def _interp(field: np.ndarray, X: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Periodic linear interpolation of one time slice."""
    xf = X / grid.h
    i0 = np.floor(xf).astype(np.int64)
    w = xf - i0
    i0 %= grid.n
    return (1.0 - w) * field[i0] + w * field[(i0 + 1) % grid.n]


def _slice(field: np.ndarray, s: float, tgrid: TimeGrid) -> np.ndarray:
    kf = s / tgrid.dt
    k0 = min(int(math.floor(kf)), tgrid.n_t - 1)
    wt = kf - k0
    return (1.0 - wt) * field[k0] + wt * field[k0 + 1]


def sample_initial(m0_slice: np.ndarray, grid: TorusGrid, size: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draw of the cell, then a uniform position inside the cell around its node."""
    p = grid.h * np.asarray(m0_slice, dtype=float)
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    u = rng.random(size)
    cell = np.minimum(np.searchsorted(cdf, u, side="right"), grid.n - 1)
    jitter = rng.random(size) - 0.5
    return wrap(grid.nodes[cell] + grid.h * jitter)


def bin_particles(X: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Particle counts per cell ``[x_i - h/2, x_i + h/2)``."""
    idx = np.floor(X / grid.h + 0.5).astype(np.int64) % grid.n
    return np.bincount(idx, minlength=grid.n)


@dataclass
class ParticleRun:
    """Cell histograms at every grid time level, as densities (``mass = h * sum``)."""

    counts: np.ndarray  # (n_t + 1, n) integer counts
    grid: TorusGrid
    tgrid: TimeGrid

    @property
    def n_particles(self) -> int:
        return int(self.counts[0].sum())

    @property
    def density(self) -> np.ndarray:
        return self.counts / (self.n_particles * self.grid.h)


def simulate_particles(drift: np.ndarray, m0_slice: np.ndarray, cfg: McConfig, grid: TorusGrid,
                       tgrid: TimeGrid, stream: int = STREAM_PARTICLES) -> ParticleRun:
    """Euler-Maruyama for ``dX = drift(t, X) dt + dW`` wrapped on the circle.

    ``drift`` has shape ``(n_t + 1, n)`` and is interpolated linearly in time
    and space. Each grid step is split into equal substeps of at most
    ``dt_mc``.
    """
    cfg.check_against(tgrid.dt)
    drift = np.asarray(drift, dtype=float)
    if drift.shape != (tgrid.n_t + 1, grid.n):
        raise InvalidInputError(f"drift must have shape {(tgrid.n_t + 1, grid.n)}, got {drift.shape}")
    if not np.all(np.isfinite(drift)):
        raise InvalidInputError("drift must be finite")
    sub = max(1, math.ceil(tgrid.dt / cfg.dt_mc - 1e-9))
    dt = tgrid.dt / sub
    counts = np.zeros((tgrid.n_t + 1, grid.n), dtype=np.int64)
    for j, size in _blocks(cfg.n_paths):
        rng = block_rng(cfg.rng_seed, stream, j)
        X = sample_initial(m0_slice, grid, size, rng)
        counts[0] += bin_particles(X, grid)
        for k in range(tgrid.n_t):
            for m in range(sub):
                s = (k + m / sub) * tgrid.dt
                beta = _interp(_slice(drift, s, tgrid), X, grid)
                X = wrap(X + beta * dt + math.sqrt(dt) * _normals(rng, size, cfg.antithetic))
            counts[k + 1] += bin_particles(X, grid)
    return ParticleRun(counts=counts, grid=grid, tgrid=tgrid)


def bootstrap_w1_error(counts: np.ndarray, grid: TorusGrid, n_boot: int = 50, seed: int = 0) -> float:
    """RMS W1 between a histogram and multinomial resamples of itself."""
    counts = np.asarray(counts)
    N = int(counts.sum())
    p = counts / N
    rng = block_rng(seed, 99, 0)
    res = rng.multinomial(N, p, size=n_boot) / N
    return float(np.sqrt(np.mean(w1_weights(res, p[None, :], grid.h) ** 2)))


def particle_discrepancy(run: ParticleRun, mu_slice: np.ndarray, checkpoints, n_boot: int = 50,
                         seed: int = 0) -> list[dict]:
    """W1 between particle histograms and grid densities at the given time indices."""
    g = run.grid
    out = []
    for k in checkpoints:
        counts = run.counts[k]
        emp = counts / counts.sum()
        w1 = float(w1_weights(emp, g.h * np.asarray(mu_slice[k]), g.h))
        out.append({
            "index": int(k),
            "time": float(run.tgrid.times[k]),
            "w1": w1,
            "bootstrap": bootstrap_w1_error(counts, g, n_boot, seed + int(k)),
        })
    return out


def cost_functional(control: np.ndarray, mu: np.ndarray, cost, alpha: float, cfg: McConfig,
                    tgrid: TimeGrid, b_x: np.ndarray | None = None) -> McEstimate:
    """Estimate ``J(a, mu) = E int_0^T (1/2 a^2 + l1[mu])(t, alpha, X_t) dt``.

    ``alpha`` selects the nearest cluster node. ``control`` and ``b_x`` are
    either full ``(n_t + 1, M, n)`` fields or the ``(n_t + 1, n)`` slice of
    that cluster. Paths start from ``mu(0, alpha)`` and follow
    ``dX = (b_x + a) dt + dW``; the running cost is a left Riemann sum.
    Controls compared on the same seed share their Brownian paths.
    """
    grid, agrid = cost.grid, cost.agrid
    cfg.check_against(tgrid.dt)
    j = int(np.argmin(np.abs(agrid.nodes - float(alpha))))
    mu = np.asarray(mu, dtype=float)

    def cluster(field_):
        arr = np.asarray(field_, dtype=float)
        return arr[:, j] if arr.ndim == 3 else arr

    a = cluster(control)
    bx = np.zeros_like(a) if b_x is None else cluster(b_x)
    running = 0.5 * a**2 + cost.assemble(mu)[:, j]
    beta = bx + a
    sub = max(1, math.ceil(tgrid.dt / cfg.dt_mc - 1e-9))
    dt = tgrid.dt / sub
    vals = []
    for blk, size in _blocks(cfg.n_paths):
        rng = block_rng(cfg.rng_seed, STREAM_COST, blk)
        X = sample_initial(mu[0, j], grid, size, rng)
        acc = np.zeros(size)
        for k in range(tgrid.n_t):
            for m in range(sub):
                s = (k + m / sub) * tgrid.dt
                acc += _interp(_slice(running, s, tgrid), X, grid) * dt
                drift = _interp(_slice(beta, s, tgrid), X, grid)
                X = wrap(X + drift * dt + math.sqrt(dt) * _normals(rng, size, cfg.antithetic))
        vals.append(acc)
    return _estimate(np.concatenate(vals), cfg.antithetic)


def nash_battery(sol, scenario, alphas, cfg: McConfig, eps=(0.2, -0.2, 0.5)) -> list[dict]:
    """Compare ``J(a*)`` with ``J(a* + eps sin(2 pi x))`` at the given clusters."""
    sc = scenario
    pert = np.sin(2 * np.pi * sc.grid.nodes)
    out = []
    for alpha in alphas:
        base = cost_functional(sol.control, sol.mu, sc.cost, alpha, cfg, sc.tgrid, sc.bgrid["b_x"])
        for e in eps:
            other = cost_functional(sol.control + e * pert, sol.mu, sc.cost, alpha, cfg, sc.tgrid, sc.bgrid["b_x"])
            se = math.hypot(base.std_error, other.std_error)
            out.append({
                "alpha": float(alpha),
                "eps": float(e),
                "J_opt": base.mean,
                "J_pert": other.mean,
                "combined_se": se,
                "passed": bool(base.mean <= other.mean + 3.0 * se),
            })
    return out
