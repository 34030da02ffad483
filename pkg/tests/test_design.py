import numpy as np
import pytest

from picrasp.design import design_budget, design_unconstrained, monotonicity_report, optimize_h
from picrasp.errors import BudgetInfeasibleError, DegenerateHypothesesError, ParameterDomainError
from picrasp.model import ModelParams
from picrasp.plans import RiskSpec
from picrasp.scheme import CostParams

ETA, GAMMA = (1.291, 1.339), 1.644
COSTS = dict(c_sample=0.1, c_time=5, c_failure=0.025, c_inspection=10)


def spec(nu=0.0, d=1.5):
    return RiskSpec.from_discrimination(0.05, 0.1, 0.5, ETA, d, GAMMA, nu)


@pytest.mark.parametrize(
    "nu,M,p,h,phi10",
    [(0.0, 4, 0.0, 0.197, 1.649), (1.0, 6, 0.0, 0.284, 1.683), (0.5, 8, 0.3, 0.378, 1.901), (0.5, 4, 0.3, 0.407, None)],
)
def test_optimal_spacing(nu, M, p, h, phi10):
    opt = optimize_h(M, p, ModelParams(ETA, GAMMA, nu), 0.5)
    assert opt.h == pytest.approx(h, abs=0.005)
    if phi10 is not None:
        assert 10 * opt.phi == pytest.approx(phi10, abs=0.01)
    assert not opt.boundary


def test_optimum_is_local_minimum():
    th = ModelParams(ETA, GAMMA, 1.0)
    opt = optimize_h(6, 0.0, th, 0.5)
    from picrasp.design import criterion_phi
    from picrasp.scheme import PicScheme

    for dh in (-0.01, 0.01):
        assert criterion_phi(PicScheme.equispaced(6, opt.h + dh), th, 0.5) > opt.phi


def test_boundary_flagged():
    opt = optimize_h(4, 0.0, ModelParams(ETA, GAMMA), 0.5, h_bounds=(0.01, 0.1))
    assert opt.boundary and "boundary" in opt.message
    assert opt.h == pytest.approx(0.1, abs=1e-3)


@pytest.mark.parametrize(
    "nu,M,p,n,pi_c,h,htol",
    [(0.0, 4, 0.0, 32, 0.547, 0.197, 0.005), (1.0, 8, 0.2, 73, 0.628, 0.36, 0.01)],
)
def test_unconstrained_design(nu, M, p, n, pi_c, h, htol):
    res = design_unconstrained(spec(nu), M, p)
    assert res.plan.n_star == n
    assert res.plan.pi_c == pytest.approx(pi_c, abs=0.001)
    assert res.h == pytest.approx(h, abs=htol)


def test_design_errors():
    with pytest.raises(DegenerateHypothesesError):
        design_unconstrained(spec(d=1.0), 4)
    with pytest.raises(ParameterDomainError, match="M must be >= s"):
        design_unconstrained(spec(nu=0.5), 3)


@pytest.mark.parametrize(
    "nu,d,budget,n,M,h",
    [(0.0, 1.5, 55, 32, 4, 0.196), (1.0, 1.5, 95, 67, 7, 0.263), (0.0, 1.8, 95, 12, 8, 0.112)],
)
def test_budget_design(nu, d, budget, n, M, h):
    res = design_budget(spec(nu, d), CostParams(**COSTS, budget=budget))
    assert (res.plan.n_star, res.M) == (n, M)
    assert res.h == pytest.approx(h, abs=0.005)
    assert res.cost.total <= budget + 1e-6


def test_budget_binding_constraint():
    """A tighter budget can only raise the attainable criterion."""
    loose = design_budget(spec(1.0), CostParams(**COSTS, budget=95))
    tight = design_budget(spec(1.0), CostParams(**COSTS, budget=80))
    assert tight.phi >= loose.phi - 1e-12


def test_budget_infeasible():
    with pytest.raises(BudgetInfeasibleError) as exc:
        design_budget(spec(), CostParams(**COSTS, budget=1e-9))
    assert exc.value.min_cost > 0


def test_budget_parallel_matches_serial():
    a = design_budget(spec(), CostParams(**COSTS, budget=55), M_max=6)
    b = design_budget(spec(), CostParams(**COSTS, budget=55), M_max=6, workers=3)
    assert (a.M, a.h, a.phi) == (b.M, b.h, b.phi)


def test_monotonicity_reference_grid():
    th = ModelParams(ETA, GAMMA, 0.5)
    rep = monotonicity_report(th, 0.5, range(4, 11), [0, 0.1, 0.2, 0.3, 0.4], [0.1, 0.2, 0.3, 0.4])
    assert rep.ok, rep.violations
    assert rep.phi.shape == (7, 5, 4)
    single = monotonicity_report(th, 0.5, [4], [0.2], [0.3])
    assert single.violations == []
