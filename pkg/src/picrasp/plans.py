"""Sample size and acceptance limit from producer/consumer risks, OC curves and lot decisions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DegenerateHypothesesError, ParameterDomainError, RiskSpecificationError
from .fisher import std_variance
from .model import ModelParams, reliability
from .scheme import PicScheme

__all__ = [
    "RiskSpec",
    "PlanResult",
    "derive_hypotheses",
    "design_plan",
    "acceptance_probability",
    "oc_curve",
    "scaling_path",
    "decide",
    "upper_quantile",
]


def upper_quantile(delta: float) -> float:
    """z with P(Z > z) = delta for a standard normal Z."""
    return float(-ndtri(delta))


def derive_hypotheses(eta0: Sequence[float], d: Sequence[float] | float, gamma, nu: float = 0.0):
    """Build (theta0, theta1) with theta1 scales ``eta0[j] / d[j]``."""
    eta0 = np.atleast_1d(np.asarray(eta0, dtype=float))
    d = np.broadcast_to(np.asarray(d, dtype=float), eta0.shape)
    for j, dj in enumerate(d):
        if not (math.isfinite(dj) and dj >= 1.0):
            raise ParameterDomainError(f"d[{j}] must be >= 1, got {dj}")
    shape = gamma if np.ndim(gamma) == 0 else tuple(gamma)
    return ModelParams(tuple(eta0), shape, nu), ModelParams(tuple(eta0 / d), shape, nu)


@dataclass(frozen=True)
class RiskSpec:
    """Producer risk ``alpha``, consumer risk ``beta``, mission time ``t0`` and the two hypotheses."""

    alpha: float
    beta: float
    t0: float
    theta0: ModelParams
    theta1: ModelParams

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = float(getattr(self, name))
            if not (0.0 < v < 1.0):
                raise ParameterDomainError(f"{name} must be in (0, 1), got {v}")
            object.__setattr__(self, name, v)
        if not (self.t0 > 0 and math.isfinite(self.t0)):
            raise ParameterDomainError(f"t0 must be > 0, got {self.t0}")
        object.__setattr__(self, "t0", float(self.t0))
        if self.theta0.J != self.theta1.J:
            raise ParameterDomainError("theta0 and theta1 must have the same number of causes")

    @classmethod
    def from_discrimination(cls, alpha, beta, t0, eta0, d, gamma, nu=0.0) -> "RiskSpec":
        theta0, theta1 = derive_hypotheses(eta0, d, gamma, nu)
        return cls(alpha, beta, t0, theta0, theta1)

    @property
    def pi0(self) -> float:
        return float(reliability(self.t0, self.theta0))

    @property
    def pi1(self) -> float:
        return float(reliability(self.t0, self.theta1))


@dataclass(frozen=True)
class PlanResult:
    n_raw: float
    n_star: int
    pi_c: float
    s0: float
    s1: float
    pi0: float
    pi1: float
    scheme: PicScheme
    t0: float
    extras: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        out = {
            "n_raw": self.n_raw,
            "n_star": self.n_star,
            "pi_c": self.pi_c,
            "pi0": self.pi0,
            "pi1": self.pi1,
            "s0": self.s0,
            "s1": self.s1,
            "t0": self.t0,
            "scheme": self.scheme.to_dict(),
        }
        out.update(self.extras)
        return out

    def summary(self) -> str:
        return (
            f"test n={self.n_star} units over M={self.scheme.M} inspections; "
            f"accept if estimated R(t0={self.t0:g}) > {self.pi_c:.4f}"
        )


def _plan_from_deviations(spec: RiskSpec, pi0, pi1, s0, s1, scheme, round_up=False) -> PlanResult:
    z_beta = upper_quantile(spec.beta)
    z_alpha = upper_quantile(1.0 - spec.alpha)
    denom = s1 * z_beta - s0 * z_alpha
    if not denom > 0:
        raise RiskSpecificationError(
            f"risks alpha={spec.alpha}, beta={spec.beta} give a non-positive z-denominator ({denom:.4g})"
        )
    pi_c = (pi0 * s1 * z_beta - pi1 * s0 * z_alpha) / denom
    n_raw = (denom / (pi0 - pi1)) ** 2
    n_star = math.ceil(n_raw) if round_up else math.floor(n_raw)
    return PlanResult(float(n_raw), max(int(n_star), 1), float(pi_c), s0, s1, pi0, pi1, scheme, spec.t0)


def check_hypotheses(spec: RiskSpec) -> tuple[float, float]:
    pi0, pi1 = spec.pi0, spec.pi1
    if not pi0 > pi1:
        raise DegenerateHypothesesError(
            f"hypotheses give R(t0) = {pi0:.6g} under H0 and {pi1:.6g} under H1; need pi0 > pi1"
        )
    return pi0, pi1


def design_plan(spec: RiskSpec, scheme: PicScheme, round_up: bool = False) -> PlanResult:
    """Solve the two risk equations for (n, pi_c) on a fixed scheme.

    ``n_star`` is ``floor(n_raw)`` unless ``round_up`` is set.
    """
    pi0, pi1 = check_hypotheses(spec)
    s0 = math.sqrt(std_variance(scheme, spec.theta0, spec.t0))
    s1 = math.sqrt(std_variance(scheme, spec.theta1, spec.t0))
    return _plan_from_deviations(spec, pi0, pi1, s0, s1, scheme, round_up)


def acceptance_probability(theta: ModelParams, plan: PlanResult, t0: float | None = None) -> float:
    """Large-sample P(estimated R(t0) > pi_c) when the lot follows ``theta``."""
    t0 = plan.t0 if t0 is None else t0
    s = math.sqrt(std_variance(plan.scheme, theta, t0))
    z = math.sqrt(plan.n_star) * (plan.pi_c - float(reliability(t0, theta))) / s
    return float(ndtr(-z))


def scaling_path(theta0: ModelParams, theta1: ModelParams) -> Callable[[float], ModelParams]:
    """Path lam -> theta with eta_j(lam) = eta0_j * (1 + lam * (1/d_j - 1)).

    With a common ratio d this is the common scaling ``c * eta0`` with ``c``
    running from 1 (lam=0) to 1/d (lam=1). Shape and frailty are held at theta0.
    """
    eta0 = np.asarray(theta0.eta)
    inv_d = np.asarray(theta1.eta) / eta0

    def path(lam: float) -> ModelParams:
        return theta0.with_eta(eta0 * (1.0 + lam * (inv_d - 1.0)))

    return path


def oc_curve(
    plan: PlanResult,
    theta0: ModelParams,
    theta1: ModelParams,
    t0: float | None = None,
    grid_size: int = 50,
    path: Callable[[float], ModelParams] | None = None,
    span: tuple[float, float] = (0.0, 1.0),
) -> np.ndarray:
    """Operating characteristic as an array of (defective proportion, acceptance probability) rows.

    ``path`` maps lam in ``span`` to a model; the default is ``scaling_path``.
    Points where the scale would become non-positive are skipped.
    """
    if grid_size < 2:
        raise ParameterDomainError(f"grid_size must be >= 2, got {grid_size}")
    t0 = plan.t0 if t0 is None else t0
    path = scaling_path(theta0, theta1) if path is None else path
    rows = []
    for lam in np.linspace(span[0], span[1], grid_size):
        try:
            theta = path(float(lam))
        except ParameterDomainError:
            continue
        rows.append((1.0 - float(reliability(t0, theta)), acceptance_probability(theta, plan, t0)))
    return np.asarray(rows)


def decide(reliability_estimate: float, pi_c: float) -> str:
    """'accept' iff the estimate strictly exceeds the limit."""
    return "accept" if reliability_estimate > pi_c else "reject"
