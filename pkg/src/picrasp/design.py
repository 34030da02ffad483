"""c-optimal equispaced schemes, with and without a test budget."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import (
    BudgetInfeasibleError,
    ConditioningError,
    DesignSingularError,
    ParameterDomainError,
)
from .fisher import std_variance
from .model import ModelParams
from .plans import PlanResult, RiskSpec, _plan_from_deviations, check_hypotheses
from .scheme import CostParams, CostSummary, PicScheme, cost_summary

__all__ = [
    "criterion_phi",
    "HOptimum",
    "optimize_h",
    "DesignResult",
    "design_unconstrained",
    "BudgetDesignResult",
    "design_budget",
    "MonotonicityReport",
    "monotonicity_report",
]

H_XTOL = 1e-5
GRID_POINTS = 100


def criterion_phi(scheme: PicScheme, theta: ModelParams, t0: float) -> float:
    """Design criterion: the standardized variance of the reliability estimate at t0."""
    return std_variance(scheme, theta, t0)


def _default_bounds(t0, h_bounds):
    lo, hi = (0.01, 2.0 * t0) if h_bounds is None else h_bounds
    if not (0 < lo < hi):
        raise ParameterDomainError(f"h_bounds must satisfy 0 < lower < upper, got ({lo}, {hi})")
    return float(lo), float(hi)


def _safe_phi(M, h, p, theta, t0):
    try:
        return criterion_phi(PicScheme.equispaced(M, h, p), theta, t0)
    except (DesignSingularError, ConditioningError):
        return math.inf


def _check_M(M, theta):
    s = theta.n_params
    if M < s:
        raise ParameterDomainError(f"M must be >= s: got M={M} with s={s} model parameters")


def _refine_min(f, grid, vals, lo, hi):
    """Polish the best grid point with a bounded Brent search on its neighbouring cell."""
    k = int(np.argmin(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": H_XTOL})
    h, phi = (float(res.x), float(res.fun)) if res.fun <= vals[k] else (float(grid[k]), float(vals[k]))
    boundary = h - lo < 10 * H_XTOL or hi - h < 10 * H_XTOL
    return h, phi, boundary


@dataclass(frozen=True)
class HOptimum:
    h: float
    phi: float
    boundary: bool
    message: str = ""


def optimize_h(M: int, p: float, theta: ModelParams, t0: float, h_bounds=None, grid_points: int = 40) -> HOptimum:
    """Minimize phi over the common spacing h of an equispaced M-inspection scheme.

    A coarse grid locates the basin and a bounded Brent search refines it. If
    the minimum sits on a bracket edge the result is flagged ``boundary``.
    """
    _check_M(M, theta)
    lo, hi = _default_bounds(t0, h_bounds)
    grid = np.linspace(lo, hi, grid_points)
    vals = np.array([_safe_phi(M, h, p, theta, t0) for h in grid])
    if not np.isfinite(vals).any():
        raise DesignSingularError(f"phi is undefined over the whole h range for M={M}, p={p}")
    h, phi, boundary = _refine_min(lambda x: _safe_phi(M, x, p, theta, t0), grid, vals, lo, hi)
    msg = f"minimum on the boundary of h range [{lo:g}, {hi:g}]" if boundary else ""
    return HOptimum(h, phi, boundary, msg)


@dataclass(frozen=True)
class DesignResult:
    plan: PlanResult
    M: int
    h: float
    phi: float
    boundary: bool = False

    def to_dict(self) -> dict:
        return {"M": self.M, "h": self.h, "phi": self.phi, "boundary": self.boundary, **self.plan.to_dict()}


def design_unconstrained(
    spec: RiskSpec, M: int, p: float = 0.0, h_bounds=None, round_up: bool = False
) -> DesignResult:
    """Best h for fixed (M, p) under H0, then the plan on that scheme."""
    pi0, pi1 = check_hypotheses(spec)
    opt = optimize_h(M, p, spec.theta0, spec.t0, h_bounds)
    scheme = PicScheme.equispaced(M, opt.h, p)
    s0 = math.sqrt(opt.phi)
    s1 = math.sqrt(std_variance(scheme, spec.theta1, spec.t0))
    plan = _plan_from_deviations(spec, pi0, pi1, s0, s1, scheme, round_up)
    return DesignResult(plan, M, opt.h, opt.phi, opt.boundary)


# --------------------------------------------------------------------------
# budget-constrained design
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _Point:
    h: float
    phi: float
    n_raw: float
    cost: float


class _BudgetProblem:
    """phi(h) and TC(h) for one M, with n taken from the risk equations at each h."""

    def __init__(self, spec, costs, M, p, pis):
        self.spec, self.costs, self.M, self.p = spec, costs, M, p
        self.pi0, self.pi1 = pis

    def evaluate(self, h) -> _Point:
        scheme = PicScheme.equispaced(self.M, h, self.p)
        try:
            phi0 = std_variance(scheme, self.spec.theta0, self.spec.t0)
            phi1 = std_variance(scheme, self.spec.theta1, self.spec.t0)
            plan = _plan_from_deviations(
                self.spec, self.pi0, self.pi1, math.sqrt(phi0), math.sqrt(phi1), scheme
            )
            tc = cost_summary(plan.n_raw, scheme, self.spec.theta0, self.costs).total
        except (DesignSingularError, ConditioningError):
            return _Point(h, math.inf, math.inf, math.inf)
        return _Point(h, phi0, plan.n_raw, tc)

    def slack(self, h):
        return self.evaluate(h).cost - self.costs.budget


def _feasible_runs(points, budget):
    runs, start = [], None
    for k, pt in enumerate(points):
        ok = pt.cost <= budget
        if ok and start is None:
            start = k
        if not ok and start is not None:
            runs.append((start, k - 1))
            start = None
    if start is not None:
        runs.append((start, len(points) - 1))
    return runs


def _edge(prob, inside, outside):
    """Constraint boundary between a feasible and an infeasible grid h."""
    a, b = sorted((inside, outside))
    try:
        return optimize.brentq(prob.slack, a, b, xtol=1e-10)
    except ValueError:
        return inside


def _best_for_M(prob: _BudgetProblem, lo, hi, grid_points):
    grid = np.linspace(lo, hi, grid_points)
    pts = [prob.evaluate(h) for h in grid]
    min_cost = min(pt.cost for pt in pts)
    best = None
    for i, j in _feasible_runs(pts, prob.costs.budget):
        a = _edge(prob, grid[i], grid[i - 1]) if i > 0 else grid[i]
        b = _edge(prob, grid[j], grid[j + 1]) if j < len(grid) - 1 else grid[j]
        # the edges may land a hair on the wrong side; keep only feasible candidates
        cands = [pts[k] for k in range(i, j + 1)] + [prob.evaluate(a), prob.evaluate(b)]
        if b > a:
            res = optimize.minimize_scalar(
                lambda h: prob.evaluate(h).phi, bounds=(a, b), method="bounded", options={"xatol": H_XTOL}
            )
            cands.append(prob.evaluate(float(res.x)))
        for c in cands:
            if c.cost <= prob.costs.budget * (1 + 1e-12) and (best is None or c.phi < best.phi):
                best = c
    return best, min_cost


@dataclass(frozen=True)
class BudgetDesignResult:
    plan: PlanResult
    M: int
    h: float
    phi: float
    cost: CostSummary
    per_M: list = field(default_factory=list, compare=False)

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "h": self.h,
            "phi": self.phi,
            "E_D": self.cost.e_d,
            "E_tau": self.cost.e_tau,
            "E_I": self.cost.e_inspections,
            "TC": self.cost.total,
            **self.plan.to_dict(),
        }


def design_budget(
    spec: RiskSpec,
    costs: CostParams,
    p: float = 0.0,
    M_max: int = 10,
    h_bounds=None,
    round_up: bool = False,
    grid_points: int = GRID_POINTS,
    workers: int = 1,
) -> BudgetDesignResult:
    """Minimize phi over (M, h) subject to expected total cost <= budget.

    M runs from s (the parameter count) to ``M_max`` inclusive. For each M the
    feasible part of the h range is located on a grid, its edges are refined by
    root finding, and phi is minimized inside every feasible piece. The cost
    uses the real-valued sample size; the reported plan floors it (or rounds up)
    and its expectation summary is evaluated at that integer size.
    Ties in phi go to the smaller M.
    """
    pis = check_hypotheses(spec)
    s = spec.theta0.n_params
    if M_max < s:
        raise ParameterDomainError(f"M_max must be >= s: got {M_max} with s={s}")
    lo, hi = _default_bounds(spec.t0, h_bounds)
    Ms = list(range(s, M_max + 1))

    def solve(M):
        return _best_for_M(_BudgetProblem(spec, costs, M, p, pis), lo, hi, grid_points)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(solve, Ms))
    else:
        results = [solve(M) for M in Ms]

    per_M, winner = [], None
    for M, (best, _) in zip(Ms, results):
        per_M.append({"M": M, "h": None if best is None else best.h, "phi": None if best is None else best.phi})
        if best is not None and (winner is None or best.phi < winner[1].phi):
            winner = (M, best)
    if winner is None:
        min_tc = min(mc for _, mc in results)
        raise BudgetInfeasibleError(
            f"no scheme with M in [{s}, {M_max}] meets budget {costs.budget:g}; "
            f"smallest achievable expected cost is {min_tc:.6g}",
            min_cost=min_tc,
        )
    M, best = winner
    scheme = PicScheme.equispaced(M, best.h, p)
    s1 = math.sqrt(std_variance(scheme, spec.theta1, spec.t0))
    plan = _plan_from_deviations(spec, pis[0], pis[1], math.sqrt(best.phi), s1, scheme, round_up)
    # expectations are reported for the plan actually run, i.e. the integer size
    summary = cost_summary(plan.n_star, scheme, spec.theta0, costs)
    return BudgetDesignResult(plan, M, best.h, best.phi, summary, per_M)


# --------------------------------------------------------------------------
# monotonicity checks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MonotonicityReport:
    M: tuple
    p: tuple
    h: tuple
    phi: np.ndarray  # indexed [M, p, h]
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def monotonicity_report(theta: ModelParams, t0: float, M_list, p_list, h_list, slack: float = 1e-12):
    """Evaluate phi on an (M, p, h) grid and flag where it fails to fall with M or rise with p."""
    Ms, ps, hs = sorted(M_list), sorted(p_list), sorted(h_list)
    for M in Ms:
        _check_M(M, theta)
    phi = np.array([[[criterion_phi(PicScheme.equispaced(M, h, p), theta, t0) for h in hs] for p in ps] for M in Ms])
    violations = []
    for a in range(len(Ms) - 1):
        for b in range(len(ps)):
            for c in range(len(hs)):
                lo, hi = phi[a, b, c], phi[a + 1, b, c]
                if hi > lo + slack * max(1.0, abs(lo)):
                    violations.append(("M", Ms[a], Ms[a + 1], ps[b], hs[c], lo, hi))
    for a in range(len(Ms)):
        for b in range(len(ps) - 1):
            for c in range(len(hs)):
                lo, hi = phi[a, b, c], phi[a, b + 1, c]
                if hi < lo - slack * max(1.0, abs(lo)):
                    violations.append(("p", Ms[a], ps[b], ps[b + 1], hs[c], lo, hi))
    return MonotonicityReport(tuple(Ms), tuple(ps), tuple(hs), phi, violations)
