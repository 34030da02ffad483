"""Gamma-frailty Weibull competing-risks model.

Causes share a gamma frailty with mean 1 and variance ``nu``; given the
frailty, cause-specific Weibull lifetimes are independent. ``nu == 0`` is the
independent competing-risks model. The unconditional survivor of the system is

    R(t) = (1 + nu * Delta(t)) ** (-1/nu),   Delta(t) = sum_j (t / eta_j) ** gamma

and ``exp(-Delta(t))`` in the independent limit.

Cause indices in the public functions are 1-based (cause 1 .. J), matching the
usual labelling of failure modes; arrays returned are ordinary 0-based numpy
arrays with one column per cause.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from . import _kernels
from .errors import ConditioningError, ParameterDomainError

__all__ = [
    "ModelParams",
    "reliability",
    "log_reliability",
    "sub_survivor",
    "sub_density",
    "dependence_ratio",
    "cause_mass",
    "grad_cause_mass",
    "interval_probs",
    "grad_reliability",
    "grad_interval_probs",
]

QUAD_TOL = 1e-10


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the competing-risks lifetime model.

    ``shape`` is a single float for the common-shape model or a sequence of J
    floats for the cause-specific-shape variant. ``nu > 0`` makes the model
    dependent; ``nu == 0`` is the independent limit and drops ``nu`` from the
    parameter vector.
    """

    eta: tuple[float, ...]
    shape: float | tuple[float, ...]
    nu: float = 0.0

    def __post_init__(self):
        try:
            eta = tuple(float(e) for e in np.atleast_1d(self.eta))
        except (TypeError, ValueError) as exc:
            raise ParameterDomainError(f"eta must be a sequence of reals: {exc}") from None
        if len(eta) < 1:
            raise ParameterDomainError("eta must have at least one cause")
        for j, e in enumerate(eta):
            if not (math.isfinite(e) and e > 0):
                raise ParameterDomainError(f"eta[{j}] must be > 0, got {e}")
        if np.ndim(self.shape) == 0:
            shape = float(self.shape)
            if not (math.isfinite(shape) and shape > 0):
                raise ParameterDomainError(f"gamma must be > 0, got {shape}")
        else:
            shape = tuple(float(g) for g in self.shape)
            if len(shape) != len(eta):
                raise ParameterDomainError(f"gammas must have {len(eta)} entries, got {len(shape)}")
            for j, g in enumerate(shape):
                if not (math.isfinite(g) and g > 0):
                    raise ParameterDomainError(f"gammas[{j}] must be > 0, got {g}")
        nu = float(self.nu)
        if not (math.isfinite(nu) and nu >= 0):
            raise ParameterDomainError(f"nu must be >= 0, got {nu}")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "nu", nu)

    @property
    def J(self) -> int:
        return len(self.eta)

    @property
    def equal_shape(self) -> bool:
        return isinstance(self.shape, float)

    @property
    def dependent(self) -> bool:
        return self.nu > 0

    @property
    def gamma(self) -> float:
        if not self.equal_shape:
            raise ParameterDomainError("model has cause-specific shapes; no common gamma")
        return self.shape

    @property
    def shapes(self) -> np.ndarray:
        if self.equal_shape:
            return np.full(self.J, self.shape)
        return np.asarray(self.shape)

    @property
    def n_params(self) -> int:
        return self.J + (1 if self.equal_shape else self.J) + (1 if self.dependent else 0)

    @property
    def param_names(self) -> list[str]:
        names = [f"eta_{j + 1}" for j in range(self.J)]
        names += ["gamma"] if self.equal_shape else [f"gamma_{j + 1}" for j in range(self.J)]
        if self.dependent:
            names.append("nu")
        return names

    def to_vector(self) -> np.ndarray:
        parts = [self.eta, [self.shape] if self.equal_shape else self.shape]
        if self.dependent:
            parts.append([self.nu])
        return np.concatenate([np.asarray(p, dtype=float) for p in parts])

    @classmethod
    def from_vector(cls, vec, J: int, equal_shape: bool = True, dependent: bool = False) -> "ModelParams":
        vec = np.asarray(vec, dtype=float)
        eta = tuple(vec[:J])
        if equal_shape:
            shape, k = float(vec[J]), J + 1
        else:
            shape, k = tuple(vec[J : 2 * J]), 2 * J
        nu = float(vec[k]) if dependent else 0.0
        return cls(eta, shape, nu)

    def with_eta(self, eta: Sequence[float]) -> "ModelParams":
        return ModelParams(tuple(eta), self.shape, self.nu)

    def to_dict(self) -> dict:
        out: dict = {"eta": list(self.eta)}
        if self.equal_shape:
            out["gamma"] = self.shape
        else:
            out["gammas"] = list(self.shape)
        out["nu"] = self.nu
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelParams":
        if "eta" not in obj:
            raise ParameterDomainError("model requires 'eta'")
        if "gamma" in obj and "gammas" in obj:
            raise ParameterDomainError("give either 'gamma' or 'gammas', not both")
        if "gamma" in obj:
            shape = obj["gamma"]
        elif "gammas" in obj:
            shape = tuple(obj["gammas"])
        else:
            raise ParameterDomainError("model requires 'gamma' or 'gammas'")
        return cls(tuple(obj["eta"]), shape, obj.get("nu", 0.0))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))


def _arrays(theta: ModelParams):
    return np.asarray(theta.eta), theta.shapes


def _check_time(t, strict=False):
    arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(arr)) or (np.any(arr <= 0) if strict else np.any(arr < 0)):
        bound = "> 0" if strict else ">= 0"
        raise ParameterDomainError(f"time must be finite and {bound}")
    return arr


def log_reliability(t, theta: ModelParams):
    """Natural log of the system survivor function."""
    arr = _check_time(t)
    eta, shapes = _arrays(theta)
    logs, _ = _kernels.log_survival(
        np.atleast_1d(arr).astype(float), eta, shapes, theta.nu, theta.equal_shape, theta.dependent
    )
    return float(logs[0]) if arr.ndim == 0 else logs.reshape(arr.shape)


def reliability(t, theta: ModelParams):
    """System survivor P(T > t); scalar in, scalar out."""
    return np.exp(log_reliability(t, theta))


def cause_mass(theta: ModelParams) -> np.ndarray:
    """Return psi with ``exp(-psi_j) = P(C = j)`` for the common-shape model."""
    eta = np.asarray(theta.eta)
    psi, _, _ = _kernels._cause_mass_np(eta, theta.gamma, theta.n_params)
    return psi


def grad_cause_mass(theta: ModelParams) -> np.ndarray:
    """J x s Jacobian of psi with respect to the parameter vector."""
    eta = np.asarray(theta.eta)
    _, _, dpsi = _kernels._cause_mass_np(eta, theta.gamma, theta.n_params)
    return dpsi


def _check_cause(j, theta):
    if not (isinstance(j, (int, np.integer)) and 1 <= j <= theta.J):
        raise ParameterDomainError(f"cause index must be in 1..{theta.J}, got {j}")
    return int(j) - 1


def sub_density(j: int, t, theta: ModelParams):
    """Sub-density g(j, t) of failing from cause j at time t (t > 0)."""
    k = _check_cause(j, theta)
    arr = _check_time(t, strict=True)
    eta, shapes = _arrays(theta)
    x = np.atleast_1d(arr)
    delta = ((x[:, None] / eta[None, :]) ** shapes[None, :]).sum(axis=1)
    logs, _ = _kernels._log_survival_np(x, eta, shapes, theta.nu, theta.equal_shape, theta.dependent)
    hazard = shapes[k] / eta[k] * (x / eta[k]) ** (shapes[k] - 1.0)
    out = hazard * np.exp(logs) / (1.0 + theta.nu * delta)
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def _cause_integral(k, lo, hi, theta, log_norm=0.0, tol=QUAD_TOL):
    """Integral of g(k, s) over (lo, hi], scaled by exp(-log_norm).

    Integrates in u = (s / eta_k) ** gamma_k, which removes the s ** (gamma - 1)
    singularity at the origin.
    """
    eta, shapes = _arrays(theta)
    gk, ek = shapes[k], eta[k]
    nu = theta.nu

    def integrand(u):
        s = ek * u ** (1.0 / gk)
        delta = float(((s / eta) ** shapes).sum())
        if theta.dependent:
            val = -(1.0 / nu + 1.0) * math.log1p(nu * delta)
        else:
            val = -delta
        return math.exp(val - log_norm)

    u_lo = (lo / ek) ** gk
    u_hi = math.inf if math.isinf(hi) else (hi / ek) ** gk
    val, _ = integrate.quad(integrand, u_lo, u_hi, epsabs=tol, epsrel=tol, limit=200)
    return val


def sub_survivor(j: int, t, theta: ModelParams):
    """Sub-survivor P(C = j, T > t).

    Closed form ``exp(-psi_j) R(t)`` for common shapes; adaptive quadrature of
    the sub-density otherwise.
    """
    k = _check_cause(j, theta)
    arr = _check_time(t)
    if theta.equal_shape:
        out = np.exp(-cause_mass(theta)[k]) * np.exp(np.atleast_1d(log_reliability(arr, theta)))
    else:
        out = np.array([_cause_integral(k, float(tt), math.inf, theta) for tt in np.atleast_1d(arr)])
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def dependence_ratio(t, theta: ModelParams):
    """Joint survivor at (t, ..., t) over the product of marginal survivors."""
    arr = _check_time(t, strict=True)
    eta, shapes = _arrays(theta)
    x = np.atleast_1d(arr)
    delta = ((x[:, None] / eta[None, :]) ** shapes[None, :]).sum(axis=1)
    logs = np.atleast_1d(log_reliability(x, theta))
    out = np.exp(logs + delta)
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def _check_times(L) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    if L.ndim != 1 or L.size == 0:
        raise ParameterDomainError("inspection times must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(L)) or L[0] <= 0 or np.any(np.diff(L) <= 0):
        raise ParameterDomainError("inspection times must be positive and strictly increasing")
    return L


def _raise_bad(bad, logs):
    i = bad + 1
    if logs[bad] < _kernels.LOG_TINY:
        raise ConditioningError(f"survivor at the start of interval {i} underflows to 0", interval=i)
    raise ConditioningError(f"failure probability in interval {i} degenerates to 0 or 1", interval=i)


def interval_probs(L, theta: ModelParams):
    """Conditional interval failure probabilities.

    Returns ``(q_matrix, q)`` where ``q_matrix[i, j]`` is the probability that
    a unit at risk at the start of interval i+1 fails in it from cause j+1 and
    ``q[i]`` is the all-cause probability.
    """
    L = _check_times(L)
    if theta.equal_shape:
        bad, logs, q, _, qij, *_ = _kernels.interval_terms(
            L, np.asarray(theta.eta), theta.gamma, theta.nu, theta.dependent
        )
        if bad >= 0:
            _raise_bad(bad, logs)
        return qij, q
    return _interval_probs_quad(L, theta)


def _interval_probs_quad(L, theta, tol=QUAD_TOL):
    logs = np.concatenate([[0.0], np.atleast_1d(log_reliability(L, theta))])
    M, J = L.size, theta.J
    edges = np.concatenate([[0.0], L])
    qij = np.empty((M, J))
    for i in range(M):
        if logs[i] < _kernels.LOG_TINY:
            raise ConditioningError(f"survivor at the start of interval {i + 1} underflows to 0", interval=i + 1)
        for k in range(J):
            qij[i, k] = _cause_integral(k, edges[i], edges[i + 1], theta, log_norm=logs[i], tol=tol)
    q = -np.expm1(np.diff(logs))
    if np.any(qij <= 0) or np.any(q >= 1):
        bad = int(np.argmax((qij <= 0).any(axis=1) | (q >= 1)))
        raise ConditioningError(f"failure probability in interval {bad + 1} degenerates to 0 or 1", interval=bad + 1)
    return qij, q


def grad_reliability(t, theta: ModelParams):
    """Gradient of R(t) with respect to the parameter vector (see ``param_names``)."""
    arr = _check_time(t)
    eta, shapes = _arrays(theta)
    x = np.atleast_1d(arr).astype(float)
    logs, G = _kernels.log_survival(x, eta, shapes, theta.nu, theta.equal_shape, theta.dependent)
    out = np.exp(logs)[:, None] * G
    return out[0] if arr.ndim == 0 else out.reshape(arr.shape + (theta.n_params,))


def grad_interval_probs(L, theta: ModelParams):
    """Jacobians of the interval probabilities.

    Returns ``(dq_matrix, dq)`` with shapes (M, J, s) and (M, s). Common-shape
    models use the closed-form derivatives; cause-specific shapes fall back to
    central differences of the quadrature probabilities.
    """
    L = _check_times(L)
    if theta.equal_shape:
        bad, logs, _, _, _, dq, dqij, *_ = _kernels.interval_terms(
            L, np.asarray(theta.eta), theta.gamma, theta.nu, theta.dependent
        )
        if bad >= 0:
            _raise_bad(bad, logs)
        return dqij, dq
    return _grad_interval_probs_fd(L, theta)


def _grad_interval_probs_fd(L, theta, rel_step=1e-5):
    vec = theta.to_vector()
    s = vec.size
    M, J = L.size, theta.J
    dqij = np.empty((M, J, s))
    for u in range(s):
        h = rel_step * max(abs(vec[u]), 1e-3)
        up, dn = vec.copy(), vec.copy()
        up[u] += h
        dn[u] -= h
        qu, _ = _interval_probs_quad(L, ModelParams.from_vector(up, J, False, theta.dependent), tol=1e-13)
        qd, _ = _interval_probs_quad(L, ModelParams.from_vector(dn, J, False, theta.dependent), tol=1e-13)
        dqij[:, :, u] = (qu - qd) / (2 * h)
    return dqij, dqij.sum(axis=1)
