import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gmfg.errors import InvalidInputError
from gmfg.torus import TorusGrid, torus_distance
from gmfg.wasserstein import (DiscreteMeasure, duality_gap_probe, first_moment, holder_half_seminorm, rho,
                              s_half_norm, w1_circle, w1_lp_oracle, w1_weights)

seeds = st.integers(0, 2**31 - 1)


def random_weights(rng, n, sparse=False):
    w = rng.random(n)
    if sparse:
        w[rng.random(n) < 0.6] = 0.0
        w[rng.integers(n)] += 0.1
    return w / w.sum()


def test_point_mass_examples():
    g = TorusGrid(20)
    pm = DiscreteMeasure.point_mass
    assert w1_circle(pm(g, 0.1), pm(g, 0.1)) == 0.0
    assert w1_circle(pm(g, 0.1), pm(g, 0.3)) == pytest.approx(0.2, abs=1e-15)
    assert w1_circle(pm(g, 0.05), pm(g, 0.85)) == pytest.approx(0.2, abs=1e-15)
    assert w1_lp_oracle(pm(g, 0.05), pm(g, 0.85)) == pytest.approx(0.2, abs=1e-12)
    assert w1_lp_oracle(pm(g, 0.0), pm(g, 0.5)) == pytest.approx(0.5, abs=1e-12)
    assert w1_lp_oracle(pm(g, 0.3), pm(g, 0.3)) == pytest.approx(0.0, abs=1e-12)


def test_measure_validation():
    g = TorusGrid(8)
    with pytest.raises(InvalidInputError):
        DiscreteMeasure(g, np.full(8, 0.2))
    with pytest.raises(InvalidInputError):
        DiscreteMeasure(g, np.r_[-0.1, 1.1, np.zeros(6)])
    with pytest.raises(InvalidInputError):
        w1_circle(DiscreteMeasure.point_mass(g, 0), DiscreteMeasure.point_mass(TorusGrid(16), 0))
    with pytest.raises(InvalidInputError):
        w1_lp_oracle(np.ones(80) / 80, np.ones(80) / 80, TorusGrid(80))


@given(seeds, st.sampled_from([4, 7, 16, 24]), st.booleans())
def test_matches_lp_oracle(seed, n, sparse):
    rng = np.random.default_rng(seed)
    g = TorusGrid(n)
    a, b = random_weights(rng, n, sparse), random_weights(rng, n, sparse)
    assert abs(w1_circle(a, b, g) - w1_lp_oracle(a, b, g)) <= 1e-10


@given(seeds)
def test_metric_axioms_and_shift_invariance(seed):
    rng = np.random.default_rng(seed)
    g = TorusGrid(32)
    a, b, c = (random_weights(rng, 32) for _ in range(3))
    dab = w1_circle(a, b, g)
    assert dab >= 0.0
    assert dab == w1_circle(b, a, g)
    assert w1_circle(a, c, g) <= dab + w1_circle(b, c, g) + 1e-10
    s = int(rng.integers(32))
    assert w1_circle(np.roll(a, s), np.roll(b, s), g) == pytest.approx(dab, abs=1e-14)


@given(st.integers(0, 63))
def test_moving_point_mass(k):
    g = TorusGrid(64)
    a = DiscreteMeasure.point_mass(g, 0.0)
    b = DiscreteMeasure.point_mass(g, k / 64)
    assert w1_circle(a, b) == pytest.approx(min(k / 64, 1 - k / 64), abs=1e-14)


def test_vectorised_weights_agree(rng):
    g = TorusGrid(16)
    A, B = rng.random((5, 16)), rng.random((5, 16))
    A /= A.sum(-1, keepdims=True)
    B /= B.sum(-1, keepdims=True)
    np.testing.assert_allclose(w1_weights(A, B, g.h), [w1_circle(a, b, g) for a, b in zip(A, B)])


def test_rho_picks_worst_slice():
    g = TorusGrid(10)
    mu1 = np.ones((3, 2, 10))
    mu2 = mu1.copy()
    assert rho(mu1, mu2, g) == 0.0
    mu1[1, 1] = 0.0
    mu2[1, 1] = 0.0
    mu1[1, 1, 0] = 10.0
    mu2[1, 1, 2] = 10.0
    assert rho(mu1, mu2, g) == pytest.approx(0.2)
    with pytest.raises(InvalidInputError):
        rho(mu1, mu2[:2], g)


@given(seeds)
def test_rho_triangle(seed):
    rng = np.random.default_rng(seed)
    g = TorusGrid(16)
    a, b, c = (rng.random((3, 2, 16)) + 0.01 for _ in range(3))
    a, b, c = (x / (g.h * x.sum(-1, keepdims=True)) for x in (a, b, c))
    assert rho(a, c, g) <= rho(a, b, g) + rho(b, c, g) + 1e-12


def test_s_half_norm_uniform_and_single_slice():
    g = TorusGrid(32)
    moment, holder = s_half_norm(np.ones((5, 3, 32)), g, 0.1)
    assert moment == pytest.approx(0.5 - g.h / 2)  # node sum of x_i over [0, 1)
    assert holder == 0.0
    assert holder_half_seminorm(np.ones((1, 32)), g, 0.1) == 0.0


def test_holder_seminorm_direct(rng):
    g = TorusGrid(16)
    mu = rng.random((4, 16)) + 0.1
    mu /= g.h * mu.sum(-1, keepdims=True)
    dt = 0.05
    ref = max(w1_circle(g.h * mu[k], g.h * mu[l], g) / np.sqrt(dt * abs(k - l))
              for k in range(4) for l in range(4) if k != l)
    assert holder_half_seminorm(mu, g, dt) == pytest.approx(ref, rel=1e-13)


def test_first_moment_representatives():
    g = TorusGrid(10)
    mu = np.zeros(10)
    mu[9] = 10.0  # unit mass at x = 0.9
    assert first_moment(mu, g, "unit") == pytest.approx(0.9)
    assert first_moment(mu, g, "torus") == pytest.approx(0.1)
    with pytest.raises(InvalidInputError):
        first_moment(mu, g, "euclid")


def test_duality_examples(rng):
    g = TorusGrid(20)
    a = DiscreteMeasure.point_mass(g, 0.0)
    b = DiscreteMeasure.point_mass(g, 0.3)
    rep = duality_gap_probe(b, a, torus_distance(g.nodes, 0.0))
    assert rep.passed and rep.actual == pytest.approx(0.3) and rep.bound == pytest.approx(0.3)
    assert duality_gap_probe(a, b, np.full(20, 3.0)).actual == 0.0
    with pytest.raises(InvalidInputError):
        duality_gap_probe(a, b, 2 * torus_distance(g.nodes, 0.0))


@given(seeds)
def test_duality_random_lipschitz(seed):
    rng = np.random.default_rng(seed)
    g = TorusGrid(24)
    steps = rng.uniform(-1, 1, 24) * g.h
    steps -= steps.mean()  # closes up around the circle
    steps *= 1 / max(1.0, np.max(np.abs(steps)) / g.h)
    f = np.concatenate([[0.0], np.cumsum(steps)[:-1]])
    a, b = random_weights(rng, 24), random_weights(rng, 24)
    assert duality_gap_probe(a, b, f, g).passed
