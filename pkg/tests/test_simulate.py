import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_array_equal
from scipy import stats

from picrasp.errors import ParameterDomainError
from picrasp.model import ModelParams
from picrasp.plans import RiskSpec, design_plan
from picrasp.scheme import PicScheme, expected_counts
from picrasp.simulate import mc_evaluate, simulate_dataset, simulation_probs


def check_invariants(data, scheme):
    """Counting recursion and floor-withdrawal rule."""
    n_i = data.at_risk
    surv = n_i - data.d.sum(axis=1)
    assert np.all(surv >= 0)
    assert np.all(n_i[1:] == surv[:-1] - data.r[:-1])
    for i in range(scheme.M - 1):
        assert data.r[i] == math.floor(scheme.p[i] * surv[i])
    assert data.r[-1] == surv[-1]


@given(
    st.floats(0.3, 2.0), st.floats(0.3, 2.0), st.floats(0.6, 2.5), st.floats(0.0, 2.0),
    st.integers(1, 8), st.floats(0.05, 0.5), st.floats(0.0, 0.9), st.integers(1, 300), st.integers(0, 2**32),
)
def test_invariants_fuzzed(e1, e2, g, nu, M, h, p, n, seed):
    scheme = PicScheme.equispaced(M, h, p)
    data = simulate_dataset(ModelParams((e1, e2), g, nu), scheme, n, seed)
    assert data.n == n
    check_invariants(data, scheme)


def test_reproducible():
    th, s = ModelParams((1, 1.2), 1.4, 0.3), PicScheme.equispaced(5, 0.2, 0.2)
    a, b = simulate_dataset(th, s, 100, seed=4, replicate=7), simulate_dataset(th, s, 100, seed=4, replicate=7)
    assert_array_equal(a.d, b.d)
    c = simulate_dataset(th, s, 100, seed=4, replicate=8)
    assert not np.array_equal(a.d, c.d)


def test_no_failures_when_scales_huge():
    data = simulate_dataset(ModelParams((1e9, 1e9), 2.0), PicScheme.equispaced(4, 0.1, 0.0), 50, seed=0)
    assert data.d.sum() == 0 and data.r[-1] == 50


def test_probability_rows():
    probs = simulation_probs(PicScheme.equispaced(5, 0.3, 0.2), ModelParams((0.7, 0.9), 1.2, 0.8))
    assert probs.shape == (5, 3)
    assert np.allclose(probs.sum(axis=1), 1.0)


def test_worked_example_shape():
    th = ModelParams((0.292, 0.374), 1.779, 0.668)
    s = PicScheme.equispaced(5, 0.115, 0.2)
    data = simulate_dataset(th, s, 73, seed=2024)
    assert data.d.shape == (5, 2) and data.n == 73 and data.r[:-1].sum() > 0
    check_invariants(data, s)


def test_first_interval_goodness_of_fit():
    th = ModelParams((0.9, 1.3), 1.5, 0.5)
    s = PicScheme.equispaced(4, 0.3, 0.0)
    n, reps = 40, 5000
    counts = np.zeros(3)
    for k in range(reps):
        data = simulate_dataset(th, s, n, seed=17, replicate=k)
        counts += [data.d[0, 0], data.d[0, 1], n - data.d[0].sum()]
    expected = n * reps * simulation_probs(s, th)[0]
    assert stats.chisquare(counts, expected).pvalue > 1e-4


def test_mean_failures_match_expectation():
    th = ModelParams((1.291, 1.339), 1.644, 1.0)
    s = PicScheme.equispaced(4, 0.348)
    reps = 10_000
    D = np.array([simulate_dataset(th, s, 71, seed=8, replicate=k).d.sum() for k in range(reps)])
    expect = expected_counts(71, s, th).e_d_total
    assert abs(D.mean() - expect) < 3 * D.std(ddof=1) / math.sqrt(reps)


def test_bad_n():
    with pytest.raises(ParameterDomainError):
        simulate_dataset(ModelParams((1, 1), 1.0), PicScheme.equispaced(2, 0.1), 0, seed=0)


@pytest.fixture(scope="module")
def small_plan():
    sp = RiskSpec.from_discrimination(0.05, 0.1, 0.15, (0.439, 0.822), 1.5, 1.135, 0.0)
    return sp, design_plan(sp, PicScheme.equispaced(5, 0.054))


def test_mc_single_replicate_reproducible(small_plan):
    sp, plan = small_plan
    a = mc_evaluate(plan, sp.theta0, sp.theta1, reps=1, seed=3)
    b = mc_evaluate(plan, sp.theta0, sp.theta1, reps=1, seed=3)
    assert a == b


def test_mc_independent_of_worker_count(small_plan):
    sp, plan = small_plan
    a = mc_evaluate(plan, sp.theta0, sp.theta1, reps=40, seed=5)
    b = mc_evaluate(plan, sp.theta0, sp.theta1, reps=40, seed=5, workers=2)
    assert a == b
    assert 0 <= a.alpha_hat <= 1 and a.failures_h0 == 0
