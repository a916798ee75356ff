import json
import shutil
import subprocess

import pytest

from gmfg.cli import EXIT_CHECK_FAILED, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_USAGE, REPORT_KEYS, main

SMALL = """
[grid]
n = 32
[time]
T = 0.5
n_t = 40
[clusters]
M = 4
[drift]
b = 0.1*(1 + alpha)*sin(2*pi*x)
[initial]
m0 = 1 + 0.5*cos(2*pi*(x - alpha))
[picard]
tol = 1e-7
[montecarlo]
n_paths = 1024
"""


def write(tmp_path, text, name="s.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run(tmp_path, text, *extra, command="solve", out="out"):
    code = main([command, write(tmp_path, text), "--output", str(tmp_path / out), "--quiet", *extra])
    report_name = "norms.json" if command == "norms" else "report.json"
    report_path = tmp_path / out / report_name
    report = json.loads(report_path.read_text()) if report_path.exists() else None
    return code, report


def test_decoupled_scenario_exit_zero(tmp_path):
    code, rep = run(tmp_path, "[graphon]\nkind = constant\np = 0\n[grid]\nn = 32\n[time]\nn_t = 40\n[clusters]\nM = 4\n")
    assert code == EXIT_OK and rep["status"] == "ok"
    assert rep["iterations"] <= 2
    for name in ("mu.csv", "v.csv", "grad_v.csv"):
        assert (tmp_path / "out" / name).read_text().startswith("t,alpha,x,value\n")


def test_constant_graphon_alpha_variation(tmp_path):
    text = SMALL.replace("b = 0.1*(1 + alpha)*sin(2*pi*x)", "b = 0.1*sin(2*pi*x)")
    text = text.replace("m0 = 1 + 0.5*cos(2*pi*(x - alpha))", "m0 = 1 + 0.5*cos(2*pi*x)")
    code, rep = run(tmp_path, text + "[graphon]\nkind = constant\np = 0.5\n")
    assert code == EXIT_OK
    assert max(rep["alpha_variation"].values()) <= 10 * 1e-7


def test_cfl_violation_exit_three(tmp_path):
    text = "[grid]\nn = 128\n[time]\nn_t = 10\n[clusters]\nM = 2\n[drift]\nb = 3*sin(2*pi*x)\n"
    code, rep = run(tmp_path, text)
    assert code == EXIT_CHECK_FAILED and rep["status"] == "check_failed"
    assert rep["error"]["type"] == "StabilityError"
    assert 0 < rep["error"]["required_dt"] < 0.05
    assert set(rep) == set(REPORT_KEYS)


def test_non_convergence_exit_two(tmp_path):
    code, rep = run(tmp_path, SMALL.replace("tol = 1e-7", "tol = 1e-7\nmax_iter = 2"))
    assert code == EXIT_NOT_CONVERGED and not rep["converged"]
    assert rep["notes"]


def test_report_schema_is_stable(tmp_path):
    _, ok = run(tmp_path, SMALL, out="a")
    _, bad = run(tmp_path, SMALL.replace("tol = 1e-7", "tol = 1e-7\nmax_iter = 1"), out="b")
    assert set(ok) == set(bad) == set(REPORT_KEYS)
    assert set(ok["residual_audit"]) == {"hjb", "argmin", "fpk", "boundary"}
    assert ok["config"]["grid"]["n"] == 32


def test_identical_configs_give_identical_bytes(tmp_path):
    run(tmp_path, SMALL, out="a")
    run(tmp_path, SMALL, out="b")
    for name in ("mu.csv", "v.csv", "grad_v.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_usage_errors_exit_one(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "missing.ini")]) == EXIT_USAGE
    code, _ = run(tmp_path, "[time]\nT = -1\n")
    assert code == EXIT_USAGE
    assert "time.T" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["launch", "x.ini"])
    code, _ = run(tmp_path, SMALL, "--threads", "0")
    assert code == EXIT_USAGE
    code, _ = run(tmp_path, SMALL, "--seeds", "0", command="probe")
    assert code == EXIT_USAGE


def test_norms_after_solve(tmp_path):
    run(tmp_path, SMALL)
    code, rep = run(tmp_path, SMALL, command="norms")
    assert code == EXIT_OK
    assert {"v", "mu", "ell2", "graphon_sup"} <= set(rep["norms"])
    assert rep["norms"]["mu"]["w1_holder_half"] >= 0


def test_norms_rejects_mismatched_fields(tmp_path):
    run(tmp_path, SMALL)
    code, _ = run(tmp_path, SMALL.replace("n = 32", "n = 16"), command="norms")
    assert code == EXIT_USAGE


def test_probe_three_seeds(tmp_path):
    code, rep = run(tmp_path, SMALL, "--seeds", "3", command="probe")
    assert code == EXIT_OK
    assert rep["probe"]["status"] == "pass" and len(rep["probe"]["pairwise_rho"]) == 3


def test_validate_small(tmp_path):
    code, rep = run(tmp_path, SMALL, command="validate")
    val = rep["validation"]
    assert code == EXIT_OK, val
    assert len(val["feynman_kac"]) == 3 and len(val["particles"]) == 15 and len(val["nash"]) == 9


@pytest.mark.skipif(shutil.which("gmfg") is None, reason="console script not installed")
def test_console_script(tmp_path):
    path = write(tmp_path, SMALL.replace("tol = 1e-7", "tol = 1e-7\nmax_iter = 2"))
    res = subprocess.run(["gmfg", "solve", path, "--output", str(tmp_path / "o")], capture_output=True, text=True)
    assert res.returncode == EXIT_NOT_CONVERGED
    assert "status=not_converged" in res.stdout
