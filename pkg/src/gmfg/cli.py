"""Command-line entry point: ``gmfg {solve,validate,probe,norms} CONFIG``.

Exit status: 0 converged with every check passing, 1 usage or I/O error,
2 no convergence (or an inconclusive probe), 3 a bound check, stability
guard or oracle comparison failed.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, load_scenario
from .diagnostics import solution_norms
from .errors import InvalidInputError, NumericalFailure, StabilityError
from .fixed_point import GmfgSolution, picard_solve, residual_audit, uniqueness_probe
from .hopf_cole import effective_cost
from .io import read_field_csv, write_field_csv, write_json
from .montecarlo import McConfig, mc_parabolic, mc_time_bias, nash_battery, particle_discrepancy, \
    simulate_particles
from .scenario import Scenario

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_CHECK_FAILED = 0, 1, 2, 3

REPORT_KEYS = ("command", "status", "exit_code", "converged", "iterations", "residuals",
               "fixed_point_residual", "monotone_tail", "alpha_variation", "checks", "violations",
               "notes", "timings", "norms", "residual_audit", "error", "validation", "probe", "config")


def empty_report(command: str, cfg: ScenarioConfig) -> dict:
    report = dict.fromkeys(REPORT_KEYS)
    report.update(command=command, config=cfg.to_dict(), notes=[], violations=[], checks={}, residuals=[])
    return report


def _error(exc: Exception) -> dict:
    out = {"type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, StabilityError):
        out["required_dt"] = exc.required_dt
        out["required_n"] = exc.required_n
    return out


def write_fields(out: Path, sol: GmfgSolution, sc: Scenario) -> None:
    axes = (sc.tgrid.times, sc.agrid.nodes, sc.grid.nodes)
    write_field_csv(out / "mu.csv", sol.mu, *axes)
    write_field_csv(out / "v.csv", sol.v, *axes)
    write_field_csv(out / "grad_v.csv", -sol.control, *axes)


def _fill_solution(report: dict, sol: GmfgSolution, sc: Scenario) -> None:
    rep = sol.report.to_dict()
    for key in ("converged", "iterations", "residuals", "fixed_point_residual", "monotone_tail",
                "alpha_variation", "checks", "violations", "notes", "timings"):
        report[key] = rep[key]
    report["norms"] = solution_norms(sol.mu, sol.v, sc.grid, sc.tgrid, sol.control)
    report["residual_audit"] = residual_audit(sol, sc)


def _solve_exit(sol: GmfgSolution) -> int:
    if not sol.report.all_checks_passed:
        return EXIT_CHECK_FAILED
    return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED


def _status(code: int) -> str:
    return {EXIT_OK: "ok", EXIT_NOT_CONVERGED: "not_converged", EXIT_CHECK_FAILED: "check_failed"}.get(code, "error")


def _run_solve(cfg: ScenarioConfig, report: dict, out: Path):
    sc = cfg.scenario
    try:
        sol = picard_solve(sc, cfg.picard())
    except (StabilityError, NumericalFailure) as exc:
        report["error"] = _error(exc)
        return None, EXIT_CHECK_FAILED
    _fill_solution(report, sol, sc)
    write_fields(out, sol, sc)
    return sol, _solve_exit(sol)


def _interp_field(field: np.ndarray, sc: Scenario):
    """Callable ``(s, x)`` interpolating a ``(n_t + 1, n)`` grid field linearly."""
    g, tg = sc.grid, sc.tgrid

    def fn(s, x):
        kf = s / tg.dt
        k0 = min(int(math.floor(kf)), tg.n_t - 1)
        wt = kf - k0
        row = (1.0 - wt) * field[k0] + wt * field[min(k0 + 1, tg.n_t)]
        xf = np.asarray(x) / g.h
        i0 = np.floor(xf).astype(np.int64)
        w = xf - i0
        i0 %= g.n
        return (1.0 - w) * row[i0] + w * row[(i0 + 1) % g.n]

    return fn


def _pick(M: int, k: int = 3) -> list[int]:
    return sorted({int(round(j)) for j in np.linspace(0, M - 1, k)})


def run_validation(sol: GmfgSolution, sc: Scenario, mc: McConfig) -> dict:
    """Monte Carlo cross-checks of the Hopf-Cole solve, the densities and the Nash property."""
    mc.check_against(sc.tgrid.dt)
    g, tg = sc.grid, sc.tgrid
    ell1 = sc.cost.assemble(sol.mu_star)
    ell_tilde = effective_cost(ell1, sc.bgrid)
    clusters = _pick(sc.agrid.M)
    fk = []
    for j in clusters:
        i = g.n // 3
        c = _interp_field(ell_tilde[:, j], sc)
        bT = sc.bgrid["b"][-1, j]
        terminal = _interp_field(np.broadcast_to(np.exp(bT), (tg.n_t + 1, g.n)), sc)
        est = mc_parabolic(c, 0.0, 0.0, float(g.nodes[i]), tg.T, mc, terminal=terminal)
        bias = mc_time_bias(c, 0.0, 0.0, float(g.nodes[i]), tg.T, mc, terminal=terminal)
        w = float(sol.value.w[0, j, i])
        allowance = 2.0 * abs(bias.mean) + 10.0 * (g.h**2 + tg.dt**2) * abs(w)
        fk.append({"alpha": float(sc.agrid.nodes[j]), "x": float(g.nodes[i]), "pde": w, "mc": est.mean,
                   "std_error": est.std_error, "allowance": allowance,
                   "passed": abs(est.mean - w) <= 3.0 * est.std_error + allowance})
    particles = []
    checkpoints = np.linspace(tg.n_t // 5, tg.n_t, 5).astype(int)
    for j in clusters:
        run = simulate_particles(-sol.grad_v_tilde[:, j], sc.m0[j], mc, g, tg)
        for row in particle_discrepancy(run, sol.mu[:, j], checkpoints):
            row["alpha"] = float(sc.agrid.nodes[j])
            row["bound"] = 3.0 * row["bootstrap"] + g.h + mc.dt_mc
            row["passed"] = row["w1"] <= row["bound"]
            particles.append(row)
    nash = nash_battery(sol, sc, [float(sc.agrid.nodes[j]) for j in clusters], mc)
    passed = all(r["passed"] for r in fk + particles + nash)
    return {"passed": passed, "feynman_kac": fk, "particles": particles, "nash": nash}


def probe_seeds(sc: Scenario, k: int) -> list:
    seeds: list = ["m0", "uniform"][:k]
    x = sc.grid.nodes
    for j in range(2, k):
        seeds.append(1.0 + 0.5 * np.cos(2 * np.pi * (x - j / (k + 1))))
    return seeds


def cmd_solve(cfg: ScenarioConfig, out: Path, args) -> tuple[int, dict]:
    report = empty_report("solve", cfg)
    _, code = _run_solve(cfg, report, out)
    return code, report


def cmd_validate(cfg: ScenarioConfig, out: Path, args) -> tuple[int, dict]:
    report = empty_report("validate", cfg)
    sol, code = _run_solve(cfg, report, out)
    if sol is None:
        return code, report
    t0 = time.perf_counter()
    report["validation"] = run_validation(sol, cfg.scenario, cfg.montecarlo())
    report["timings"]["validation"] = time.perf_counter() - t0
    if code == EXIT_OK and not report["validation"]["passed"]:
        code = EXIT_CHECK_FAILED
    return code, report


def cmd_probe(cfg: ScenarioConfig, out: Path, args) -> tuple[int, dict]:
    report = empty_report("probe", cfg)
    sc = cfg.scenario
    if args.seeds < 1:
        raise InvalidInputError("--seeds must be at least 1")
    try:
        res = uniqueness_probe(sc, cfg.picard(), probe_seeds(sc, args.seeds))
    except (StabilityError, NumericalFailure) as exc:
        report["error"] = _error(exc)
        return EXIT_CHECK_FAILED, report
    sols = res.pop("solutions")
    report["probe"] = res
    _fill_solution(report, sols[0], sc)
    write_fields(out, sols[0], sc)
    code = {"pass": EXIT_OK, "inconclusive": EXIT_NOT_CONVERGED, "fail": EXIT_CHECK_FAILED}[res["status"]]
    if code == EXIT_OK and not all(s.report.all_checks_passed for s in sols):
        code = EXIT_CHECK_FAILED
    return code, report


def cmd_norms(cfg: ScenarioConfig, out: Path, args) -> tuple[int, dict]:
    sc = cfg.scenario
    _, _, _, mu = read_field_csv(out / "mu.csv")
    _, _, _, v = read_field_csv(out / "v.csv")
    if mu.shape != sc.shape or v.shape != sc.shape:
        raise InvalidInputError(f"saved fields have shape {mu.shape}, scenario expects {sc.shape}")
    norms = solution_norms(mu, v, sc.grid, sc.tgrid)
    norms["ell2"] = sc.cost.ell2_norms()
    norms["graphon_sup"] = sc.cost.g_sup
    return EXIT_OK, {"command": "norms", "norms": norms, "config": cfg.to_dict()}


COMMANDS = {"solve": cmd_solve, "validate": cmd_validate, "probe": cmd_probe, "norms": cmd_norms}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gmfg", description="Graphon mean field game solver on the circle.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("config", help="scenario file (INI)")
    p.add_argument("--seeds", type=int, default=3, help="number of seeds for probe")
    p.add_argument("--threads", type=int, default=None, help="cap on solver worker threads")
    p.add_argument("--output", default=None, help="output directory (overrides the scenario)")
    p.add_argument("--quiet", action="store_true")
    return p


def _summary(report: dict) -> str:
    if report.get("command") == "norms":
        return "norms written"
    parts = [f"status={report['status']}"]
    if report.get("iterations") is not None:
        parts.append(f"iterations={report['iterations']}")
    if report.get("residuals"):
        parts.append(f"rho={report['residuals'][-1]:.3e}")
    if report.get("error"):
        parts.append(f"error={report['error']['message']}")
    return " ".join(parts)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads is not None:
            if args.threads < 1:
                raise InvalidInputError("--threads must be at least 1")
            import numba

            numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
        cfg = load_scenario(args.config)
        out = Path(args.output) if args.output else cfg.output_dir
        out.mkdir(parents=True, exist_ok=True)
        code, report = COMMANDS[args.command](cfg, out, args)
    except (InvalidInputError, OSError) as exc:
        print(f"gmfg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "norms":
        write_json(out / "norms.json", report)
    else:
        report["exit_code"] = code
        report["status"] = _status(code)
        write_json(out / "report.json", report)
    if not args.quiet:
        print(_summary({**report, "status": _status(code)}))
    return code


if __name__ == "__main__":
    sys.exit(main())
