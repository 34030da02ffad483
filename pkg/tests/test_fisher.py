import numpy as np
import pytest
from numpy.testing import assert_allclose

from picrasp import _kernels
from picrasp.errors import DesignSingularError, ParameterDomainError
from picrasp.fisher import (
    asymptotic_covariance,
    fisher_information,
    information_from_weights,
    pd_factor,
    std_variance,
    unit_information,
)
from picrasp.model import ModelParams, interval_probs
from picrasp.scheme import PicScheme, expected_counts
from picrasp.simulate import simulate_dataset

from conftest import central_jacobian


def test_standardized_variance_battery(battery):
    assert 10 * std_variance(PicScheme.equispaced(4, 0.197), battery, 0.5) == pytest.approx(1.649, abs=0.01)
    dep = ModelParams(battery.eta, battery.gamma, 1.0)
    assert 10 * std_variance(PicScheme.equispaced(4, 0.348), dep, 0.5) == pytest.approx(1.767, abs=0.01)


def test_information_linear_in_n(battery_dep):
    s = PicScheme.equispaced(6, 0.3, 0.2)
    assert_allclose(fisher_information(250, s, battery_dep), 250 * unit_information(s, battery_dep), rtol=1e-13)
    assert_allclose(asymptotic_covariance(50, s, battery_dep) * 50, asymptotic_covariance(1, s, battery_dep), rtol=1e-10)


def test_information_symmetric_positive_definite(battery_dep):
    info = unit_information(PicScheme.equispaced(6, 0.3, 0.2), battery_dep)
    assert_allclose(info, info.T)
    assert np.all(np.linalg.eigvalsh(info) > 0)


def test_too_few_inspections(battery_dep):
    with pytest.raises(ParameterDomainError, match="M must be >= s"):
        unit_information(PicScheme.equispaced(3, 0.3), battery_dep)


def test_singular_matrix_rejected():
    with pytest.raises(DesignSingularError):
        pd_factor(np.array([[1.0, 1.0], [1.0, 1.0]]))
    f = pd_factor(np.array([[4.0, 1.0], [1.0, 3.0]]))
    assert_allclose(f.inverse(), np.linalg.inv([[4.0, 1.0], [1.0, 3.0]]))


def test_pd_check_ignores_parameter_units():
    a = np.array([[2.0, 0.3], [0.3, 1.0]])
    scale = np.diag([1e-7, 1e5])
    f = pd_factor(scale @ a @ scale)
    assert_allclose(f.quad_inv(np.array([1.0, 0.0])), np.linalg.inv(scale @ a @ scale)[0, 0], rtol=1e-9)


def test_matches_hessian_of_expected_loglik(battery_dep):
    """-Hessian of the expected log-likelihood equals the information at the truth."""
    s = PicScheme.equispaced(6, 0.3, 0.2)
    e = expected_counts(100, s, battery_dep)
    L, J = s.times, battery_dep.J

    def grad(v):
        th = ModelParams.from_vector(v, J, True, True)
        return _kernels.loglik_grad(L, e.e_d, e.e_n, np.asarray(th.eta), th.gamma, th.nu, True)[1]

    hess = central_jacobian(grad, battery_dep.to_vector(), rel_step=1e-6)
    assert_allclose(-0.5 * (hess + hess.T), fisher_information(100, s, battery_dep), rtol=1e-6, atol=1e-6)


def test_information_from_weights_matches_outer_products():
    th = ModelParams((0.9, 1.4), 1.3, 0.4)
    L = np.array([0.2, 0.5, 0.8, 1.2, 1.7])
    qij, q = interval_probs(L, th)
    from picrasp.model import grad_interval_probs

    dqij, dq = grad_interval_probs(L, th)
    w = np.array([10.0, 8.0, 5.0, 3.0, 2.0])
    ref = sum(
        w[i] * (sum(np.outer(dqij[i, j], dqij[i, j]) / qij[i, j] for j in range(2)) + np.outer(dq[i], dq[i]) / (1 - q[i]))
        for i in range(5)
    )
    assert_allclose(information_from_weights(w, L, th), ref, rtol=1e-12)


def test_score_oracle_within_monte_carlo_error(battery_dep):
    s = PicScheme.equispaced(6, 0.3, 0.2)
    th, n, reps = battery_dep, 200, 2000
    scores, risk = [], []
    for k in range(reps):
        d = simulate_dataset(th, s, n, seed=21, replicate=k)
        _, g = _kernels.loglik_grad(s.times, d.d.astype(float), d.at_risk.astype(float), np.asarray(th.eta), th.gamma, th.nu, True)
        scores.append(g)
        risk.append(d.at_risk)
    S = np.array(scores)
    z = S.mean(axis=0) / (S.std(axis=0, ddof=1) / np.sqrt(reps))
    assert np.all(np.abs(z) < 4)
    outer = np.einsum("ku,kv->kuv", S, S)
    se = outer.std(axis=0, ddof=1) / np.sqrt(reps)
    # the information at the realised mean at-risk counts removes the floor-withdrawal offset
    info = information_from_weights(np.mean(risk, axis=0), s.times, th)
    assert np.all(np.abs(outer.mean(axis=0) - info) < 4 * se)
