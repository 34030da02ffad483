import numpy as np
import pytest
from numpy.testing import assert_allclose

from picrasp import _accel, _kernels


def _case(seed, dependent):
    rng = np.random.default_rng(seed)
    eta = rng.uniform(0.4, 2.0, 2)
    gamma = rng.uniform(0.8, 2.5)
    nu = rng.choice([1e-9, 1e-4, rng.uniform(0.05, 2.0)]) if dependent else 0.0
    L = np.cumsum(rng.uniform(0.05, 0.4, 6))
    return L, eta, gamma, nu


@pytest.mark.parametrize("dependent", [False, True])
@pytest.mark.parametrize("seed", range(6))
def test_interval_terms_agree(seed, dependent):
    L, eta, gamma, nu = _case(seed, dependent)
    a = _kernels._interval_terms_nb(L, eta, gamma, nu, dependent)
    b = _kernels._interval_terms_np(L, eta, gamma, nu, dependent)
    assert a[0] == b[0]
    for x, y in zip(a[1:], b[1:]):
        assert_allclose(x, y, rtol=1e-12, atol=1e-300)


@pytest.mark.parametrize("seed", range(6))
def test_loglik_and_information_agree(seed):
    L, eta, gamma, nu = _case(seed, True)
    rng = np.random.default_rng(100 + seed)
    d = rng.integers(0, 6, (L.size, 2)).astype(float)
    nrisk = d.sum(axis=1) + rng.integers(0, 5, L.size)
    lla, ga = _kernels._loglik_grad_nb(L, d, nrisk, eta, gamma, nu, True)
    llb, gb = _kernels._loglik_grad_np(L, d, nrisk, eta, gamma, nu, True)
    assert_allclose(lla, llb, rtol=1e-12)
    assert_allclose(ga, gb, rtol=1e-10, atol=1e-12)
    _, _, q, _, qij, dq, dqij, *_ = _kernels._interval_terms_np(L, eta, gamma, nu, True)
    w = nrisk.astype(float)
    assert_allclose(_kernels._information_nb(w, q, qij, dq, dqij), _kernels._information_np(w, q, qij, dq, dqij), rtol=1e-12)


def test_backend_flag_reported():
    assert _accel.BACKEND in ("numba", "numpy")
    assert (_accel.BACKEND == "numba") == _accel.HAS_NUMBA


def test_zero_probability_interval_gives_minus_inf():
    L = np.array([1e-6, 0.5])
    d = np.array([[1.0, 0.0], [0.0, 0.0]])
    for f in (_kernels._loglik_grad_nb, _kernels._loglik_grad_np):
        ll, _ = f(L, d, np.array([5.0, 4.0]), np.array([1e3, 1e3]), 40.0, 0.0, False)
        assert ll == -np.inf


def test_numpy_backend_end_to_end():
    import json
    import os
    import subprocess
    import sys
    from pathlib import Path

    code = (
        "import json; from picrasp import BACKEND; from picrasp.plans import RiskSpec, design_plan;"
        "from picrasp.scheme import PicScheme; from picrasp.inference import ObservedData, fit_mle;"
        "p = design_plan(RiskSpec.from_discrimination(.05, .1, .5, (1.291, 1.339), 1.5, 1.644, 1.0), PicScheme.equispaced(4, .4));"
        f"f = fit_mle(ObservedData.from_csv(open({str(Path(__file__).parent / 'data' / 'worked_example.csv')!r}).read()));"
        "print(json.dumps([BACKEND, p.n_star, p.pi_c, f.loglik]))"
    )
    env = dict(os.environ, PICRASP_BACKEND="numpy")
    backend, n, pi_c, ll = json.loads(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout)
    assert backend == "numpy"
    assert (n, round(pi_c, 3)) == (71, 0.628)
    assert ll == pytest.approx(-129.7291, abs=1e-3)
