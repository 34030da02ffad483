import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate

from picrasp.errors import ConditioningError, ParameterDomainError
from picrasp.model import (
    ModelParams,
    cause_mass,
    dependence_ratio,
    grad_interval_probs,
    grad_reliability,
    interval_probs,
    log_reliability,
    reliability,
    sub_density,
    sub_survivor,
)

from conftest import central_jacobian, random_theta

pos = st.floats(0.2, 3.0)


def test_reliability_closed_forms():
    assert reliability(0.0, ModelParams((1.3, 0.4), 2.0, 0.7)) == 1.0
    assert_allclose(reliability(1.0, ModelParams((1, 1), 1.0, 1.0)), 1 / 3, rtol=1e-14)
    assert_allclose(reliability(1.0, ModelParams((1, 1), 1.0, 0.0)), math.exp(-2), rtol=1e-14)


@pytest.mark.parametrize("bad", [dict(eta=(1, -1), shape=1.0), dict(eta=(1, 1), shape=0.0), dict(eta=(1,), shape=1.0, nu=-0.1)])
def test_invalid_params(bad):
    with pytest.raises(ParameterDomainError):
        ModelParams(**bad)


def test_negative_time_rejected(battery):
    with pytest.raises(ParameterDomainError):
        reliability(-0.1, battery)


@given(pos, pos, pos, st.floats(0.0, 3.0))
def test_reliability_decreasing_to_zero(e1, e2, g, nu):
    th = ModelParams((e1, e2), g, nu)
    grid = np.linspace(0, 5 * max(e1, e2), 200)
    r = reliability(grid, th)
    assert r[0] == 1.0
    assert np.all(np.diff(r) <= 0)
    live = r > 1e-250
    assert np.all(np.diff(r[live]) < 0)
    # far enough out that the summed cumulative hazard exceeds 1e12
    assert reliability(max(e1, e2) * 1e12 ** (1 / g), th) < 1e-3


def test_large_time_log_survivor_finite():
    th = ModelParams((0.01, 0.02), 3.0, 0.0)
    assert np.isfinite(log_reliability(100.0, th))
    assert reliability(100.0, th) == 0.0


def test_sub_survivor_symmetry():
    th = ModelParams((0.8, 0.8), 1.7, 0.4)
    for t in (0.0, 0.3, 1.1):
        assert_allclose(sub_survivor(1, t, th), reliability(t, th) / 2, rtol=1e-13)


def test_sub_survivor_at_zero_is_cause_probability():
    assert_allclose(sub_survivor(1, 0.0, ModelParams((1, 2), 1.0, 0.0)), 2 / 3, rtol=1e-13)


def _quad_tail(j, t, th):
    val, _ = integrate.quad(lambda s: sub_density(j, s, th), t, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)
    return val


def test_sub_survivor_against_quadrature(battery):
    assert_allclose(sub_survivor(1, 0.5, battery), _quad_tail(1, 0.5, battery), rtol=1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_cause_probabilities_sum_to_one(seed):
    th = random_theta(np.random.default_rng(seed))
    total = sum(_quad_tail(j, 1e-300, th) for j in (1, 2))
    assert_allclose(total, 1.0, rtol=1e-7)


def test_unequal_shapes_quadrature_consistent():
    th = ModelParams((1.0, 1.5), (1.2, 2.3), 0.6)
    s = sum(sub_survivor(j, 0.4, th) for j in (1, 2))
    assert_allclose(s, reliability(0.4, th), rtol=1e-8)


def test_sub_density_exponential_limit():
    th = ModelParams((1, 1), 1.0, 0.0)
    t = np.array([0.1, 0.7, 2.0])
    assert_allclose(sub_density(1, t, th), np.exp(-2 * t), rtol=1e-13)


def test_sub_density_is_minus_derivative_of_sub_survivor():
    th = ModelParams((1, 2), 2.0, 0.5)
    h = 1e-5
    fd = -(sub_survivor(1, 1 + h, th) - sub_survivor(1, 1 - h, th)) / (2 * h)
    assert_allclose(sub_density(1, 1.0, th), fd, rtol=1e-8)


def test_dependence_ratio():
    t = np.linspace(0.1, 2, 5)
    assert_allclose(dependence_ratio(t, ModelParams((1, 2), 1.5, 0.0)), 1.0)
    assert_allclose(dependence_ratio(1.0, ModelParams((1, 1), 1.0, 1.0)), math.e**2 / 3, rtol=1e-12)
    rho = [dependence_ratio(1.0, ModelParams((1.2, 0.9), 1.4, nu)) for nu in np.linspace(0.1, 2, 20)]
    assert np.all(np.diff(rho) > 0)


def test_cause_split_constant_across_intervals(battery_dep):
    L = np.array([0.2, 0.5, 0.9, 1.4])
    qij, q = interval_probs(L, battery_dep)
    assert_allclose(qij / q[:, None], np.tile(np.exp(-cause_mass(battery_dep)), (4, 1)), rtol=1e-13)


def test_interval_probs_telescoping(battery_dep):
    L = np.array([0.2, 0.5, 0.9, 1.4])
    _, q = interval_probs(L, battery_dep)
    assert_allclose(np.prod(1 - q), reliability(1.4, battery_dep), rtol=1e-13)


def test_interval_probs_errors(battery):
    with pytest.raises(ParameterDomainError):
        interval_probs([0.3, 0.2], battery)
    with pytest.raises(ConditioningError) as exc:
        interval_probs([0.5, 60.0, 70.0], battery)
    assert exc.value.interval == 2  # q hits 1 where the survivor underflows


def test_unequal_shape_interval_probs_reduce_to_equal():
    eq = ModelParams((0.9, 1.3), 1.6, 0.3)
    uneq = ModelParams((0.9, 1.3), (1.6, 1.6), 0.3)
    L = [0.3, 0.6, 1.0]
    assert_allclose(interval_probs(L, uneq)[0], interval_probs(L, eq)[0], rtol=1e-8)


def _rel_err(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


@pytest.mark.parametrize("seed", range(10))
def test_gradients_against_finite_differences(seed):
    rng = np.random.default_rng(seed)
    th = random_theta(rng)
    L = np.cumsum(rng.uniform(0.05, 0.4, 5))
    vec = th.to_vector()

    def rebuild(v):
        return ModelParams.from_vector(v, th.J, True, True)

    fd_r = central_jacobian(lambda v: reliability(L, rebuild(v)), vec)
    assert _rel_err(grad_reliability(L, th), fd_r) < 1e-6
    dqij, dq = grad_interval_probs(L, th)
    assert _rel_err(dqij, central_jacobian(lambda v: interval_probs(L, rebuild(v))[0], vec)) < 1e-6
    assert _rel_err(dq, central_jacobian(lambda v: interval_probs(L, rebuild(v))[1], vec)) < 1e-6


def test_gradient_continuous_at_independence():
    L = np.array([0.2, 0.4, 0.7])
    g0 = grad_reliability(L, ModelParams((1.1, 1.4), 1.3, 0.0))
    g1 = grad_reliability(L, ModelParams((1.1, 1.4), 1.3, 1e-6))
    assert_allclose(g1[:, :3], g0, rtol=1e-4)


def test_unequal_shape_gradient_shapes():
    th = ModelParams((1.0, 1.5), (1.2, 2.3), 0.6)
    dqij, dq = grad_interval_probs([0.3, 0.7], th)
    assert dqij.shape == (2, 2, 5) and dq.shape == (2, 5)
    assert_allclose(dq, dqij.sum(axis=1))


def test_params_round_trip():
    for th in (ModelParams((1.0, 2.0), 1.5, 0.3), ModelParams((0.5,), (2.0,), 0.0)):
        assert ModelParams.from_json(th.to_json()) == th
        assert ModelParams.from_vector(th.to_vector(), th.J, th.equal_shape, th.dependent) == th


@given(pos, pos, pos, st.floats(0.0, 3.0), st.floats(0.0, 4.0))
def test_sub_survivors_sum_to_reliability(e1, e2, g, nu, t):
    th = ModelParams((e1, e2), g, nu)
    assert_allclose(sub_survivor(1, t, th) + sub_survivor(2, t, th), reliability(t, th), rtol=1e-12, atol=1e-300)


@given(pos, pos, pos, st.floats(0.05, 3.0))
def test_reliability_non_decreasing_in_frailty_variance(e1, e2, g, t):
    r = [reliability(t, ModelParams((e1, e2), g, nu)) for nu in (0.0, 1e-9, 1e-4, 0.1, 0.5, 1.0, 2.0, 5.0)]
    assert np.all(np.diff(r) >= -1e-15 * max(r))
