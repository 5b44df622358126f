import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fsoalloc.baselines import waterfill_rofso
from fsoalloc.program.base import Action
from fsoalloc.sdg import (
    DualState,
    NonFiniteError,
    SdgConfig,
    dual_step,
    execute_policy,
    lagrangian,
    parallel_argmax,
    sdg_run,
    step_scales,
    trailing_mean,
)
from toy import ToyPowerProblem


def test_lagrangian_by_hand():
    toy = ToyPowerProblem(budget=1.0)
    h = np.array([[1.0], [3.0]])
    a = Action(powers=np.array([[1.0], [2.0]]))
    # log 2 - 0.5 * 0 and log 7 - 0.5 * 1
    np.testing.assert_allclose(lagrangian(toy, h, a, [0.5]), [np.log(2.0), np.log(7.0) - 0.5])


def test_dual_step_examples():
    assert dual_step([1.0], 0.1, [0.5]).lambdas[0] == pytest.approx(1.05)
    assert dual_step([0.01], 0.1, [-1.0]).lambdas[0] == 0.0
    assert dual_step([0.7], 0.1, [0.0]).lambdas[0] == 0.7


@given(
    lam=st.lists(st.floats(0, 100), min_size=1, max_size=6),
    eta=st.floats(1e-6, 10),
    c=st.lists(st.floats(-1e3, 1e3), min_size=6, max_size=6),
)
def test_multipliers_stay_nonnegative(lam, eta, c):
    out = dual_step(lam, eta, c[: len(lam)])
    assert np.all(out.lambdas >= 0)


def test_dual_state_rejects_negative_and_nan():
    with pytest.raises(ValueError):
        DualState(np.array([-0.1]))
    with pytest.raises(ValueError):
        DualState(np.array([np.nan]))


def test_config_validation():
    with pytest.raises(ValueError):
        SdgConfig(gamma=1.5)
    with pytest.raises(ValueError):
        SdgConfig(eta0=0)
    with pytest.raises(ValueError):
        step_scales(ToyPowerProblem(), {"nonsense": 0.1})


def test_trailing_mean():
    np.testing.assert_allclose(trailing_mean(np.arange(10.0)[:, None], 4), [7.5])


def test_converges_to_closed_form_multiplier():
    toy = ToyPowerProblem()
    res = sdg_run(toy, SdgConfig(iterations=4000, eta0=0.5, gamma=0.999, batch=64, window=1000), np.random.default_rng(0))
    assert res.lambda_star[0] == pytest.approx(toy.optimal_lambda(), rel=0.02)
    c_tail = np.mean([r.constraints for r in res.trace[-1000:]])
    assert abs(c_tail) < 0.02


def test_deterministic_for_a_seed():
    toy = ToyPowerProblem()
    cfg = SdgConfig(iterations=200, batch=16, window=50)
    a = sdg_run(toy, cfg, np.random.default_rng(7))
    b = sdg_run(toy, cfg, np.random.default_rng(7))
    np.testing.assert_array_equal(a.lambda_star, b.lambda_star)
    assert [r.objective for r in a.trace] == [r.objective for r in b.trace]


def test_no_constraints_reduces_to_per_sample_argmax(relay2x5, rng):
    res = sdg_run(relay2x5, SdgConfig(iterations=5, batch=8, window=5), rng)
    assert res.lambda_star.shape == (0,)
    h = relay2x5.sample_csi(rng, 32)
    a = execute_policy(relay2x5, h, res.lambda_star)
    np.testing.assert_array_equal(a.selections, relay2x5.primal_argmax(h, np.zeros(0)).selections)


def test_nan_guard_keeps_partial_trace():
    toy = ToyPowerProblem(poison_at=10)
    with pytest.raises(NonFiniteError) as info:
        sdg_run(toy, SdgConfig(iterations=100, batch=4, window=5), np.random.default_rng(0))
    assert len(info.value.trace) == 11
    assert np.isnan(info.value.trace[-1].objective)


def test_parallel_argmax_is_worker_independent(rofso10, rng):
    h = rofso10.sample_csi(rng, 20)
    lam = np.array([0.4])
    one = parallel_argmax(rofso10, h, lam, workers=1)
    four = parallel_argmax(rofso10, h, lam, workers=4)
    np.testing.assert_array_equal(one.powers, four.powers)


@pytest.mark.parametrize("lam", [0.0, 0.1, 0.38, 2.0])
def test_weak_duality_against_a_feasible_policy(rofso10, rng, lam):
    # any per-sample feasible allocation scores at most the Lagrangian maximum
    h = rofso10.sample_csi(rng, 64)
    feasible = waterfill_rofso(rofso10, h)
    assert np.all(rofso10.constraints(h, feasible) <= 1e-12)
    top = rofso10.lagrangian(h, rofso10.primal_argmax(h, [lam]), [lam])
    assert np.all(rofso10.objective(h, feasible) <= top + 1e-6)
