from pathlib import Path

import numpy as np
import pytest

from gmfg.config import load_scenario, parse_scenario
from gmfg.errors import InvalidInputError
from gmfg.io import read_field_csv, read_matrix, write_field_csv, write_json, write_matrix


def test_minimal_config_uses_defaults(tmp_path):
    cfg = parse_scenario("", base=tmp_path)
    sc = cfg.scenario
    assert (sc.grid.n, sc.tgrid.n_t, sc.agrid.M, sc.tgrid.T) == (64, 200, 16, 0.5)
    pc = cfg.picard()
    assert (pc.damping, pc.tol) == (0.5, 1e-6)
    assert cfg.montecarlo().dt_mc == pytest.approx(0.5 / 200 / 2)
    np.testing.assert_allclose(sc.grid.h * sc.m0.sum(axis=1), 1.0, atol=1e-14)


def test_uniform_attachment_matrix():
    sc = parse_scenario("[clusters]\nM = 8\n[graphon]\nkind = uniform_attachment\n").scenario
    a = sc.agrid.nodes
    np.testing.assert_array_equal(sc.cost.G, 1 - np.maximum(a[:, None], a[None, :]))


@pytest.mark.parametrize("text, key", [
    ("[time]\nT = -1\n", "time.T"),
    ("[grid]\nn = 0\n", "grid.n"),
    ("[grid]\nn = abc\n", "grid.n"),
    ("[grid]\nsize = 3\n", "grid.size"),
    ("[mesh]\nn = 3\n", "[mesh]"),
    ("[picard]\ndamping = 2\n", "picard"),
    ("[picard]\nseed = file\n", "picard.seed"),
    ("[picard]\nundamped_first = maybe\n", "picard.undamped_first"),
    ("[montecarlo]\nn_paths = 10\n", "montecarlo"),
    ("[montecarlo]\ndt_mc = 0.1\n", "montecarlo"),
    ("[solver]\nscheme = lax\n", "solver.scheme"),
    ("[solver]\ntheta = 0.2\n", "solver.theta"),
    ("[graphon]\nkind = star\n", "graphon.kind"),
    ("[graphon]\nkind = piecewise_constant\n", "graphon.table"),
    ("[graphon]\nkind = expression\n", "graphon.expression"),
    ("[drift]\nb = exp(x)\n", "drift.b"),
    ("[initial]\nm0 = -1 + 0*x\n", "initial.m0"),
    ("[cost]\nell2 = import os\n", "cost.ell2"),
    ("[time]\nT = inf\n", "time.T"),
])
def test_validation_errors_name_the_key(text, key):
    with pytest.raises(InvalidInputError) as info:
        parse_scenario(text)
    assert key in str(info.value)


def test_parse_error_reports_line():
    with pytest.raises(InvalidInputError) as info:
        parse_scenario("[grid]\nn = 8\nthis line is broken\n", source="s.ini")
    assert "line 3" in str(info.value)


def test_asymmetric_table_rejected():
    with pytest.raises(InvalidInputError):
        parse_scenario("[clusters]\nM = 2\n[graphon]\nkind = piecewise_constant\ntable = 1 0.5; 0.2 1\n")


def test_piecewise_table_and_expression_graphon(tmp_path):
    write_matrix(tmp_path / "g.txt", np.array([[1.0, 0.3], [0.3, 0.5]]))
    cfg = parse_scenario("[clusters]\nM = 4\n[graphon]\nkind = piecewise_constant\ntable_file = g.txt\n",
                         base=tmp_path)
    np.testing.assert_array_equal(cfg.scenario.cost.G[0], [1.0, 1.0, 0.3, 0.3])
    cfg = parse_scenario("[clusters]\nM = 4\n[graphon]\nkind = expression\nexpression = alpha*y\n")
    a = cfg.scenario.agrid.nodes
    np.testing.assert_allclose(cfg.scenario.cost.G, np.outer(a, a))


def test_ell2_and_m0_files(tmp_path):
    n = 8
    x = np.arange(n) / n
    write_matrix(tmp_path / "k.txt", np.cos(2 * np.pi * (x[:, None] - x[None, :])))
    write_matrix(tmp_path / "m.txt", 2 * (1 + 0.5 * np.cos(2 * np.pi * x))[None])
    text = f"[grid]\nn = {n}\n[clusters]\nM = 3\n[cost]\nell2_file = k.txt\n[initial]\nm0_file = m.txt\n"
    sc = parse_scenario(text, base=tmp_path).scenario
    assert sc.m0.shape == (3, n)
    np.testing.assert_allclose(sc.m0[2], 1 + 0.5 * np.cos(2 * np.pi * x), atol=1e-14)
    write_matrix(tmp_path / "k.txt", np.ones((4, 4)))
    with pytest.raises(InvalidInputError, match="cost.ell2_file"):
        parse_scenario(text, base=tmp_path)


def test_density_csv_round_trip_as_initial_data(tmp_path):
    text = "[grid]\nn = 16\n[time]\nn_t = 10\n[clusters]\nM = 2\n[initial]\nm0 = 1 + 0.3*sin(2*pi*(x + alpha))\n"
    sc = parse_scenario(text).scenario
    mu = np.broadcast_to(sc.m0, (11, 2, 16)).copy()
    mu[-1, 0] = 1 + 0.2 * np.cos(2 * np.pi * sc.grid.nodes)
    write_field_csv(tmp_path / "mu.csv", mu, sc.tgrid.times, sc.agrid.nodes, sc.grid.nodes)
    cfg = parse_scenario(text.replace("m0 = 1 + 0.3*sin(2*pi*(x + alpha))", "m0_file = mu.csv"), base=tmp_path)
    np.testing.assert_allclose(cfg.scenario.m0, mu[-1], rtol=0, atol=1e-12)


def test_load_scenario_missing_file(tmp_path):
    with pytest.raises(InvalidInputError):
        load_scenario(tmp_path / "nope.ini")


def test_field_csv_round_trip_is_exact(tmp_path, rng):
    vals = rng.normal(size=(3, 2, 5)) * 1e-3
    t, a, x = np.linspace(0, 1, 3), np.array([0.25, 0.75]), np.arange(5) / 5
    write_field_csv(tmp_path / "f.csv", vals, t, a, x)
    t2, a2, x2, v2 = read_field_csv(tmp_path / "f.csv")
    assert np.array_equal(v2, vals) and np.array_equal(t2, t) and np.array_equal(x2, x)
    assert (tmp_path / "f.csv").read_text().splitlines()[0] == "t,alpha,x,value"


def test_field_csv_errors(tmp_path):
    with pytest.raises(InvalidInputError):
        write_field_csv(tmp_path / "f.csv", np.zeros((2, 2, 2)), [0, 1], [0.5], [0, 0.5])
    (tmp_path / "bad.csv").write_text("a,b,c,d\n0,0,0,1\n")
    with pytest.raises(InvalidInputError):
        read_field_csv(tmp_path / "bad.csv")
    (tmp_path / "hole.csv").write_text("t,alpha,x,value\n0,0.5,0,1\n0,0.5,0.5,1\n1,0.5,0,1\n")
    with pytest.raises(InvalidInputError):
        read_field_csv(tmp_path / "hole.csv")
    (tmp_path / "order.csv").write_text("t,alpha,x,value\n0,0.5,0.5,1\n0,0.5,0,1\n")
    with pytest.raises(InvalidInputError):
        read_field_csv(tmp_path / "order.csv")


def test_matrix_files(tmp_path, rng):
    a = rng.normal(size=(3, 4))
    write_matrix(tmp_path / "a.txt", a)
    assert np.array_equal(read_matrix(tmp_path / "a.txt"), a)
    (tmp_path / "b.txt").write_text("2 2\n1 2\n3\n")
    with pytest.raises(InvalidInputError):
        read_matrix(tmp_path / "b.txt")
    (tmp_path / "c.txt").write_text("3 1\n1\n2\n")
    with pytest.raises(InvalidInputError):
        read_matrix(tmp_path / "c.txt")
    (tmp_path / "d.txt").write_text("")
    with pytest.raises(InvalidInputError):
        read_matrix(tmp_path / "d.txt")


def test_write_json_handles_numpy(tmp_path):
    write_json(tmp_path / "r.json", {"b": np.float64(1.5), "a": np.arange(2), "p": Path("x")})
    text = (tmp_path / "r.json").read_text()
    assert text.index('"a"') < text.index('"b"') and '"x"' in text


def test_missing_section_header_reports_line():
    with pytest.raises(InvalidInputError, match="line 1"):
        parse_scenario("n = 8\n")


@pytest.mark.parametrize("name", ["coupled.ini", "decoupled.ini"])
def test_shipped_scenarios_load(name):
    path = Path(__file__).resolve().parent.parent / "scenarios" / name
    cfg = load_scenario(path)
    assert cfg.output_dir.parent == path.parent
    assert cfg.scenario.grid.n == 64
