"""Progressive Type-I interval censoring schemes and their expected-cost summaries."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterDomainError
from .model import ModelParams, interval_probs

__all__ = [
    "PicScheme",
    "CostParams",
    "ExpectedCounts",
    "expected_counts",
    "termination_distribution",
    "total_cost",
    "CostSummary",
    "cost_summary",
]


@dataclass(frozen=True)
class PicScheme:
    """Inspection times ``L`` and withdrawal proportions ``p`` (``p[-1] == 1``)."""

    L: tuple[float, ...]
    p: tuple[float, ...]

    def __post_init__(self):
        L = tuple(float(x) for x in self.L)
        p = tuple(float(x) for x in self.p)
        if len(L) < 1:
            raise ParameterDomainError("M must be >= 1")
        if len(p) != len(L):
            raise ParameterDomainError(f"p must have M={len(L)} entries, got {len(p)}")
        if not all(math.isfinite(x) for x in L) or L[0] <= 0 or any(b <= a for a, b in zip(L, L[1:])):
            raise ParameterDomainError("L must be positive and strictly increasing")
        for i, pi in enumerate(p[:-1]):
            if not (0.0 <= pi < 1.0):
                raise ParameterDomainError(f"p[{i}] must be in [0, 1), got {pi}")
        if p[-1] != 1.0:
            raise ParameterDomainError(f"p[{len(p) - 1}] (final withdrawal) must be 1, got {p[-1]}")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "p", p)

    @classmethod
    def equispaced(cls, M: int, h: float, p: float = 0.0) -> "PicScheme":
        """L_i = i*h with a common withdrawal proportion ``p`` before the last inspection."""
        if int(M) != M or M < 1:
            raise ParameterDomainError(f"M must be a positive integer, got {M}")
        if not (h > 0 and math.isfinite(h)):
            raise ParameterDomainError(f"h must be > 0, got {h}")
        M = int(M)
        return cls(tuple(h * np.arange(1, M + 1)), tuple([p] * (M - 1) + [1.0]))

    @property
    def M(self) -> int:
        return len(self.L)

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.L)

    @property
    def withdrawals(self) -> np.ndarray:
        return np.asarray(self.p)

    @property
    def h(self) -> float | None:
        """Common spacing if the scheme is equispaced, else None."""
        L = np.concatenate([[0.0], self.L])
        gaps = np.diff(L)
        return float(gaps[0]) if np.allclose(gaps, gaps[0], rtol=1e-9, atol=0) else None

    def to_dict(self) -> dict:
        out: dict = {"L": list(self.L)}
        common = set(self.p[:-1])
        if len(common) <= 1:
            out["p"] = self.p[0] if self.M > 1 else 0.0
        else:
            out["p_list"] = list(self.p)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "PicScheme":
        if "L" in obj:
            L = tuple(obj["L"])
            M = len(L)
        elif "M" in obj and "h" in obj:
            M, h = obj["M"], obj["h"]
            if int(M) != M or M < 1:
                raise ParameterDomainError(f"M must be a positive integer, got {M}")
            if not (isinstance(h, (int, float)) and h > 0):
                raise ParameterDomainError(f"h must be > 0, got {h}")
            L = tuple(float(h) * np.arange(1, int(M) + 1))
            M = int(M)
        else:
            raise ParameterDomainError("scheme requires either 'L' or both 'M' and 'h'")
        if "p_list" in obj:
            p = tuple(obj["p_list"])
        else:
            pc = obj.get("p", 0.0)
            p = tuple([pc] * (M - 1) + [1.0])
        return cls(L, p)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PicScheme":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class CostParams:
    """Unit, per-time, per-failure and per-inspection costs, plus the budget."""

    c_sample: float
    c_time: float
    c_failure: float
    c_inspection: float
    budget: float = math.inf

    def __post_init__(self):
        for name in ("c_sample", "c_time", "c_failure", "c_inspection"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v >= 0):
                raise ParameterDomainError(f"{name} must be >= 0, got {v}")
            object.__setattr__(self, name, v)
        b = float(self.budget)
        if not b > 0:
            raise ParameterDomainError(f"budget must be > 0, got {b}")
        object.__setattr__(self, "budget", b)

    def to_dict(self) -> dict:
        return {
            "c_sample": self.c_sample,
            "c_time": self.c_time,
            "c_failure": self.c_failure,
            "c_inspection": self.c_inspection,
            "budget": self.budget,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CostParams":
        missing = [k for k in ("c_sample", "c_time", "c_failure", "c_inspection") if k not in obj]
        if missing:
            raise ParameterDomainError(f"costs missing {', '.join(missing)}")
        return cls(obj["c_sample"], obj["c_time"], obj["c_failure"], obj["c_inspection"], obj.get("budget", math.inf))


@dataclass(frozen=True)
class ExpectedCounts:
    e_n: np.ndarray
    e_d: np.ndarray
    e_dplus: np.ndarray
    e_r: np.ndarray
    e_d_total: float


def _survival_weights(scheme, q):
    """Per-unit probability of still being on test at the start of each interval."""
    p = scheme.withdrawals
    stay = (1.0 - q) * (1.0 - p)
    return np.concatenate([[1.0], np.cumprod(stay)[:-1]])


def expected_counts(n: float, scheme: PicScheme, theta: ModelParams) -> ExpectedCounts:
    """Expected at-risk, failure and withdrawal counts per interval.

    Withdrawals are taken as the exact proportion ``p_i`` of survivors (no
    flooring), so ``n`` may be real-valued.
    """
    if not n > 0:
        raise ParameterDomainError(f"n must be positive, got {n}")
    qij, q = interval_probs(scheme.L, theta)
    e_n = n * _survival_weights(scheme, q)
    e_d = e_n[:, None] * qij
    e_dplus = e_n * q
    e_r = e_n * (1.0 - q) * scheme.withdrawals
    return ExpectedCounts(e_n, e_d, e_dplus, e_r, float(e_dplus.sum()))


def termination_distribution(n: float, scheme: PicScheme, theta: ModelParams):
    """Distribution of the inspection at which the test ends.

    The test ends at ``L_m`` once every unit has failed or been withdrawn. A unit
    is absorbed in interval l with probability ``q_l + (1 - q_l) p_l`` given it
    is still on test, so P(ended by L_m) is the n-th power of the cumulative
    absorption probability; the last inspection always ends the test.

    Returns ``(term_prob, e_tau, e_inspections)``.
    """
    if not n > 0:
        raise ParameterDomainError(f"n must be positive, got {n}")
    _, q = interval_probs(scheme.L, theta)
    p = scheme.withdrawals
    absorb = q + (1.0 - q) * p
    cum = np.minimum(np.cumsum(_survival_weights(scheme, q) * absorb), 1.0)
    ended = cum**n
    ended[-1] = 1.0
    term_prob = np.diff(np.concatenate([[0.0], ended]))
    e_tau = float(term_prob @ scheme.times)
    e_insp = float(term_prob @ np.arange(1, scheme.M + 1))
    return term_prob, e_tau, e_insp


@dataclass(frozen=True)
class CostSummary:
    e_d: float
    e_tau: float
    e_inspections: float
    total: float


def cost_summary(n: float, scheme: PicScheme, theta: ModelParams, costs: CostParams) -> CostSummary:
    ec = expected_counts(n, scheme, theta)
    _, e_tau, e_insp = termination_distribution(n, scheme, theta)
    total = n * costs.c_sample + costs.c_time * e_tau + costs.c_failure * ec.e_d_total + costs.c_inspection * e_insp
    return CostSummary(ec.e_d_total, e_tau, e_insp, float(total))


def total_cost(n: float, scheme: PicScheme, theta: ModelParams, costs: CostParams) -> float:
    """n*C_S + C_tau*E[tau] + C_D*E[D] + C_I*E[I]."""
    return cost_summary(n, scheme, theta, costs).total
