import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fsoalloc.program import Action, RofsoConstants, ShapeError, capacity_rofso
from fsoalloc.program.rofso import capacity_rofso_limit
from oracles import rofso_capacity

K = RofsoConstants()


def test_zero_power_zero_capacity():
    assert capacity_rofso(0.13, 0.0, K) == 0.0


def test_reference_value_unit_gain():
    # frozen from the independent term-by-term evaluation in tests/oracles.py
    assert capacity_rofso(1.0, 0.3, K) == pytest.approx(30.959749571176584, rel=1e-12)


def test_high_power_limit():
    assert capacity_rofso_limit(K) == pytest.approx(30.96767997645317, rel=1e-12)
    assert capacity_rofso(1.0, 1e6, K) == pytest.approx(capacity_rofso_limit(K), rel=1e-9)


@given(st.floats(1e-4, 2.0), st.floats(0.0, 0.3))
def test_matches_independent_formula(h, p):
    assert capacity_rofso(h, p, K) == pytest.approx(rofso_capacity(h, p), rel=1e-10, abs=1e-300)


def test_rejects_negative_inputs():
    with pytest.raises(ValueError):
        capacity_rofso(-0.1, 0.2, K)
    with pytest.raises(ValueError):
        capacity_rofso(0.1, -0.2, K)


def test_monotone_in_power_and_gain():
    p = np.linspace(0, 0.3, 400)
    h = np.linspace(1e-3, 1.0, 300)
    c = capacity_rofso(h[:, None], p[None, :], K)
    assert np.all(np.diff(c, axis=1) >= 0)
    assert np.all(np.diff(c, axis=0) >= 0)


def test_objective_reductions(rofso10, rng):
    h = rofso10.sample_csi(rng, 5)
    assert np.all(rofso10.objective(h, Action(powers=np.zeros((5, 10)))) == 0)
    one_hot = rofso10.__class__(rofso10.link_attenuation, rofso10.turbulence, omega=np.eye(10)[3])
    p = np.full((5, 10), 0.2)
    np.testing.assert_allclose(one_hot.objective(h, Action(powers=p)), capacity_rofso(h[:, 3], 0.2, K))


def test_objective_matches_resummation(rofso10, rng):
    h = rofso10.sample_csi(rng, 3)
    p = rng.uniform(0, 0.3, size=(3, 10))
    ref = [sum(rofso10.omega[i] * rofso_capacity(h[b, i], p[b, i]) for i in range(10)) for b in range(3)]
    np.testing.assert_allclose(rofso10.objective(h, Action(powers=p)), ref, rtol=1e-12)


def test_constraint_values(rofso10, rng):
    h = rofso10.sample_csi(rng, 3)
    np.testing.assert_allclose(rofso10.constraints(h, Action(powers=np.zeros((3, 10)))), -1.5)
    np.testing.assert_allclose(rofso10.constraints(h, Action(powers=np.full((3, 10), 0.15))), 0.0, atol=1e-15)
    np.testing.assert_allclose(rofso10.constraints(h, Action(powers=np.full((3, 10), 0.3))), 1.5)
    assert rofso10.n_constraints == 1


def test_shape_errors(rofso10, rng):
    h = rofso10.sample_csi(rng, 3)
    with pytest.raises(ShapeError):
        rofso10.objective(h, Action(powers=np.zeros((3, 9))))
    with pytest.raises(ShapeError):
        rofso10.objective(h[:, :5], Action(powers=np.zeros((3, 5))))


def test_zero_price_uses_peak_power(rofso10, rng):
    h = rofso10.sample_csi(rng, 16)
    np.testing.assert_allclose(rofso10.primal_argmax(h, [0.0]).powers, 0.3)


def test_huge_price_uses_no_power(rofso10, rng):
    # the marginal capacity peaks near 3e9 nats/W (thermal noise is tiny), so a
    # price above that makes every positive power a loss
    h = rofso10.sample_csi(rng, 16)
    np.testing.assert_allclose(rofso10.primal_argmax(h, [1e12]).powers, 0.0)


def test_argmax_matches_grid_oracle(rofso10, rng):
    h = rofso10.sample_csi(rng, 4)
    p = rofso10.primal_argmax(h, [0.5]).powers
    grid = np.linspace(0, 0.3, 2000)
    for b in range(4):
        for i in range(10):
            vals = [rofso10.omega[i] * rofso_capacity(h[b, i], x) - 0.5 * x for x in grid]
            assert abs(p[b, i] - grid[int(np.argmax(vals))]) < 1e-3


def test_argmax_beats_random_feasible_actions(rofso10, rng):
    h = rofso10.sample_csi(rng, 1)
    lam = np.array([0.4])
    best = rofso10.lagrangian(h, rofso10.primal_argmax(h, lam), lam)[0]
    hh = np.repeat(h, 10_000, axis=0)
    rand = rofso10.lagrangian(hh, Action(powers=rng.uniform(0, 0.3, size=(10_000, 10))), lam)
    assert best >= rand.max() - 1e-9
