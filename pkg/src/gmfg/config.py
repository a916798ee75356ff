"""Scenario files: INI sections resolved into a validated configuration.

Example::

    [grid]
    n = 64
    [time]
    T = 0.5
    n_t = 200
    [graphon]
    kind = uniform_attachment
    [cost]
    ell2 = cos(2*pi*(x - y))
    [drift]
    b = 0.1*sin(2*pi*x)
    [initial]
    m0 = 1 + 0.5*cos(2*pi*x)

Every key is optional; unknown sections or keys are rejected. File
references (``table_file``, ``ell2_file``, ``m0_file``) are resolved
relative to the scenario file.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np

from .errors import InvalidInputError
from .expressions import Expression
from .fixed_point import PicardConfig
from .fpk import SCHEMES
from .graphon import GRAPHON_KINDS, AlphaGrid, CostModel, Graphon
from .hopf_cole import DriftPotential
from .io import read_field_csv, read_matrix
from .montecarlo import McConfig
from .parabolic import TimeGrid
from .scenario import Scenario, density_from_expression, normalize_density
from .torus import TorusGrid

# section -> key -> (type, default)
SCHEMA: dict[str, dict[str, tuple[type, Any]]] = {
    "grid": {"n": (int, 64)},
    "time": {"T": (float, 0.5), "n_t": (int, 200)},
    "clusters": {"M": (int, 16)},
    "graphon": {
        "kind": (str, "uniform_attachment"),
        "p": (float, 1.0),
        "table": (str, None),
        "table_file": (str, None),
        "expression": (str, None),
        "bound": (float, None),
    },
    "cost": {"ell2": (str, "cos(2*pi*(x - y))"), "ell2_file": (str, None)},
    "drift": {"b": (str, "0")},
    "initial": {"m0": (str, "1 + 0.5*cos(2*pi*x)"), "m0_file": (str, None)},
    "solver": {"theta": (float, 0.5), "scheme": (str, "upwind")},
    "picard": {
        "damping": (float, 0.5),
        "tol": (float, 1e-6),
        "max_iter": (int, 200),
        "seed": (str, "m0"),
        "undamped_first": (bool, True),
    },
    "montecarlo": {
        "n_paths": (int, 4096),
        "dt_mc": (float, None),
        "rng_seed": (int, 20240601),
        "antithetic": (bool, True),
    },
    "output": {"directory": (str, "output")},
}

POSITIVE = {"grid.n", "time.T", "time.n_t", "clusters.M", "picard.tol", "picard.max_iter",
            "montecarlo.n_paths", "montecarlo.dt_mc"}


def _convert(key: str, raw: str, kind: type):
    text = raw.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            value = float(text)
            if not math.isfinite(value):
                raise ValueError(text)
            return value
        return text
    except ValueError:
        raise InvalidInputError(f"{key}: cannot read {raw!r} as {kind.__name__}") from None


def _parse_table(text: str) -> np.ndarray:
    rows = [r.split() for r in text.replace(",", " ").split(";") if r.strip()]
    try:
        return np.array([[float(v) for v in row] for row in rows])
    except ValueError as exc:
        raise InvalidInputError(f"graphon.table: {exc}") from None


@dataclass
class ScenarioConfig:
    values: dict[str, dict[str, Any]]
    base: Path = field(default_factory=Path.cwd)
    source: str | None = None

    def get(self, key: str):
        section, name = key.split(".")
        return self.values[section][name]

    def path(self, key: str) -> Path | None:
        raw = self.get(key)
        if raw is None:
            return None
        p = Path(raw)
        return p if p.is_absolute() else self.base / p

    def to_dict(self) -> dict:
        return {s: dict(v) for s, v in self.values.items()}

    @property
    def output_dir(self) -> Path:
        return self.path("output.directory")

    def picard(self) -> PicardConfig:
        seed = self.get("picard.seed")
        if seed not in ("m0", "uniform"):
            raise InvalidInputError(f"picard.seed: expected 'm0' or 'uniform', got {seed!r}")
        try:
            return PicardConfig(damping=self.get("picard.damping"), tol=self.get("picard.tol"),
                                max_iter=self.get("picard.max_iter"), seed=seed,
                                undamped_first=self.get("picard.undamped_first"))
        except InvalidInputError as exc:
            raise InvalidInputError(f"picard: {exc}") from None

    def montecarlo(self) -> McConfig:
        dt_mc = self.get("montecarlo.dt_mc")
        if dt_mc is None:
            dt_mc = 0.5 * self.get("time.T") / self.get("time.n_t")
        try:
            cfg = McConfig(n_paths=self.get("montecarlo.n_paths"), dt_mc=dt_mc,
                           rng_seed=self.get("montecarlo.rng_seed"), antithetic=self.get("montecarlo.antithetic"))
            cfg.check_against(self.get("time.T") / self.get("time.n_t"))
            return cfg
        except InvalidInputError as exc:
            raise InvalidInputError(f"montecarlo: {exc}") from None

    def graphon(self) -> Graphon:
        kind = self.get("graphon.kind")
        if kind not in GRAPHON_KINDS:
            raise InvalidInputError(f"graphon.kind: unknown kind {kind!r}; expected one of {GRAPHON_KINDS}")
        kw: dict[str, Any] = {"bound": self.get("graphon.bound")}
        if kind == "constant":
            kw["p"] = self.get("graphon.p")
        elif kind == "piecewise_constant":
            if self.get("graphon.table_file") is not None:
                table = read_matrix(self.path("graphon.table_file"))
            elif self.get("graphon.table") is not None:
                table = _parse_table(self.get("graphon.table"))
            else:
                raise InvalidInputError("graphon.table: piecewise_constant needs table or table_file")
            kw["table"] = table
        elif kind == "expression":
            text = self.get("graphon.expression")
            if text is None:
                raise InvalidInputError("graphon.expression: expression graphon needs a formula")
            kw["expr"] = _expr("graphon.expression", text, ("alpha", "y"), periodic=())
        try:
            return Graphon(kind, **kw)
        except InvalidInputError as exc:
            raise InvalidInputError(f"graphon: {exc}") from None

    @cached_property
    def scenario(self) -> Scenario:
        return self.build()

    def build(self) -> Scenario:
        n, M = self.get("grid.n"), self.get("clusters.M")
        grid, tgrid, agrid = TorusGrid(n), TimeGrid(self.get("time.T"), self.get("time.n_t")), AlphaGrid(M)
        graphon = self.graphon()
        try:
            G = graphon.matrix(agrid)
        except InvalidInputError as exc:
            raise InvalidInputError(f"graphon: {exc}") from None
        if self.get("cost.ell2_file") is not None:
            K = read_matrix(self.path("cost.ell2_file"))
            if K.shape != (n, n):
                raise InvalidInputError(f"cost.ell2_file: expected a {n}x{n} matrix, got {K.shape}")
        else:
            e = _expr("cost.ell2", self.get("cost.ell2"), ("x", "y"))
            K = e(x=grid.nodes[:, None], y=grid.nodes[None, :])
        cost = CostModel(ell2=K, G=G, grid=grid, agrid=agrid)
        try:
            drift = DriftPotential.from_expression(self.get("drift.b"))
        except InvalidInputError as exc:
            raise InvalidInputError(f"drift.b: {exc}") from None
        m0 = self._initial(grid, agrid)
        scheme = self.get("solver.scheme")
        if scheme not in SCHEMES:
            raise InvalidInputError(f"solver.scheme: expected one of {SCHEMES}, got {scheme!r}")
        theta = self.get("solver.theta")
        if not 0.5 <= theta <= 1.0:
            raise InvalidInputError(f"solver.theta: must lie in [0.5, 1], got {theta}")
        return Scenario(grid=grid, tgrid=tgrid, agrid=agrid, cost=cost, drift=drift, m0=m0,
                        theta=theta, scheme=scheme, meta={"config": self.to_dict()})

    def _initial(self, grid: TorusGrid, agrid: AlphaGrid) -> np.ndarray:
        key = "initial.m0_file"
        if self.get(key) is None:
            e = _expr("initial.m0", self.get("initial.m0"), ("alpha", "x"))
            try:
                return density_from_expression(e, grid, agrid)
            except InvalidInputError as exc:
                raise InvalidInputError(f"initial.m0: {exc}") from None
        path = self.path(key)
        if path.suffix == ".csv":
            times, alphas, xs, values = read_field_csv(path)
            arr = values[-1]
        else:
            arr = read_matrix(path)
            if arr.shape[0] == 1:
                arr = np.broadcast_to(arr, (agrid.M, arr.shape[1]))
        if arr.shape != (agrid.M, grid.n):
            raise InvalidInputError(f"{key}: expected shape ({agrid.M}, {grid.n}), got {arr.shape}")
        try:
            return normalize_density(arr, grid)
        except InvalidInputError as exc:
            raise InvalidInputError(f"{key}: {exc}") from None


def _expr(key: str, text: str, variables: tuple[str, ...], periodic=("x", "y")) -> Expression:
    try:
        return Expression.parse(text, variables, periodic)
    except InvalidInputError as exc:
        raise InvalidInputError(f"{key}: {exc}") from None


def parse_scenario(text: str, base: Path | None = None, source: str | None = None) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str  # keys are case sensitive (T vs t)
    try:
        parser.read_string(text, source=source or "<scenario>")
    except configparser.MissingSectionHeaderError as exc:
        raise InvalidInputError(f"{source or '<scenario>'}, line {exc.lineno}: expected a [section] header") from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise InvalidInputError(f"{source or '<scenario>'}, line {lineno}: cannot parse {line.strip()!r}") from None
    except configparser.Error as exc:
        raise InvalidInputError(f"cannot parse scenario: {exc}") from None
    values = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    for section in parser.sections():
        if section not in SCHEMA:
            raise InvalidInputError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise InvalidInputError(f"unknown key {section}.{key}")
            kind, _ = SCHEMA[section][key]
            values[section][key] = _convert(f"{section}.{key}", raw, kind)
    for dotted in sorted(POSITIVE):
        s, k = dotted.split(".")
        v = values[s][k]
        if v is not None and not v > 0:
            raise InvalidInputError(f"{dotted}: must be positive, got {v}")
    if values["grid"]["n"] < 4:
        raise InvalidInputError("grid.n: must be at least 4")
    cfg = ScenarioConfig(values=values, base=base or Path.cwd(), source=source)
    cfg.picard()
    cfg.montecarlo()
    cfg.scenario  # resolves formulas and files, normalises m0
    return cfg


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidInputError(f"cannot read scenario file {path}: {exc.strerror}") from None
    return parse_scenario(text, base=path.resolve().parent, source=str(path))
