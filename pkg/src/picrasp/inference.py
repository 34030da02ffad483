"""Grouped competing-risks data, its likelihood, and maximum-likelihood fitting."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import _kernels
from .errors import (
    ConditioningError,
    ConvergenceError,
    DataValidationError,
    DesignSingularError,
    ParameterDomainError,
)
from .fisher import information_from_weights, pd_factor
from .model import ModelParams, grad_reliability, interval_probs, reliability
from .scheme import PicScheme

__all__ = [
    "ObservedData",
    "log_likelihood",
    "FitResult",
    "fit_mle",
    "estimate_reliability",
    "VARIANTS",
]

VARIANTS = ("independent-equal", "dependent-equal", "independent-unequal", "dependent-unequal")
NU_BOUNDARY = 1e-6
LOG_BOUNDS = (-25.0, 25.0)
LOG_NU_BOUNDS = (math.log(1e-10), math.log(1e3))


@dataclass(frozen=True)
class ObservedData:
    """Failures ``d[i, j]`` by interval and cause, and withdrawals ``r[i]`` at each inspection."""

    scheme: PicScheme
    d: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d)
        r = np.asarray(self.r)
        M = self.scheme.M
        if d.ndim != 2 or d.shape[0] != M:
            raise DataValidationError(f"d must be an M x J matrix with M={M}, got shape {d.shape}")
        if r.shape != (M,):
            raise DataValidationError(f"r must have M={M} entries, got shape {r.shape}")
        for name, arr in (("d", d), ("r", r)):
            if np.any(arr < 0) or np.any(arr != np.round(arr)):
                raise DataValidationError(f"{name} must contain non-negative integers")
        d = d.astype(np.int64)
        r = r.astype(np.int64)
        at_risk = int(d.sum() + r.sum())
        if at_risk < 1:
            raise DataValidationError("data must contain at least one unit")
        left = at_risk - np.concatenate([[0], np.cumsum(d.sum(axis=1) + r)[:-1]])
        for i in range(M):
            if d[i].sum() + r[i] > left[i]:
                raise DataValidationError(f"interval {i + 1}: failures plus withdrawals exceed the {left[i]} at risk")
        d.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "r", r)

    @classmethod
    def from_counts(cls, L, d, r) -> "ObservedData":
        """Build data with the withdrawal proportions implied by the counts."""
        d = np.asarray(d)
        r = np.asarray(r)
        if d.ndim != 2 or r.ndim != 1 or d.shape[0] != r.size or len(L) != r.size:
            raise DataValidationError(
                f"need one row of d and one r per inspection: got {len(L)} times, d {d.shape}, r {r.shape}"
            )
        n = int(d.sum() + r.sum())
        at_risk = n - np.concatenate([[0], np.cumsum(d.sum(axis=1) + r)[:-1]])
        surv = at_risk - d.sum(axis=1)
        p = np.where(surv > 0, r / np.maximum(surv, 1), 0.0)
        p = np.minimum(p, np.nextafter(1.0, 0.0))
        p[-1] = 1.0
        try:
            scheme = PicScheme(tuple(L), tuple(p))
        except ParameterDomainError as exc:
            raise DataValidationError(str(exc)) from None
        return cls(scheme, d, r)

    @property
    def M(self) -> int:
        return self.scheme.M

    @property
    def J(self) -> int:
        return self.d.shape[1]

    @property
    def n(self) -> int:
        return int(self.d.sum() + self.r.sum())

    @property
    def at_risk(self) -> np.ndarray:
        """Units on test at the start of each interval."""
        return self.n - np.concatenate([[0], np.cumsum(self.d.sum(axis=1) + self.r)[:-1]])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "L_lower", "L_upper", *[f"d_{j + 1}" for j in range(self.J)], "r"])
        lower = (0.0,) + self.scheme.L[:-1]
        for i in range(self.M):
            w.writerow([i + 1, repr(lower[i]), repr(self.scheme.L[i]), *self.d[i].tolist(), int(self.r[i])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, scheme: PicScheme | None = None) -> "ObservedData":
        rows = list(csv.reader(io.StringIO(text)))
        rows = [r for r in rows if r and any(c.strip() for c in r)]
        if not rows:
            raise DataValidationError("empty CSV")
        header = [h.strip() for h in rows[0]]
        J = len(header) - 4
        expected = ["i", "L_lower", "L_upper", *[f"d_{j + 1}" for j in range(J)], "r"]
        if J < 1 or header != expected:
            raise DataValidationError(f"CSV header must be {','.join(expected[:3])},d_1,...,d_J,r; got {','.join(header)}")
        body = rows[1:]
        if not body:
            raise DataValidationError("CSV has no data rows")
        try:
            vals = np.array([[float(c) for c in row] for row in body])
        except ValueError as exc:
            raise DataValidationError(f"non-numeric CSV entry: {exc}") from None
        if vals.shape[1] != len(header):
            raise DataValidationError("CSV rows must match the header width")
        if not np.array_equal(vals[:, 0], np.arange(1, len(body) + 1)):
            raise DataValidationError("column i must run 1..M in order")
        lower, upper = vals[:, 1], vals[:, 2]
        if lower[0] != 0.0 or not np.allclose(lower[1:], upper[:-1], rtol=1e-12, atol=0):
            raise DataValidationError("intervals must be contiguous and start at 0")
        d, r = vals[:, 3 : 3 + J], vals[:, -1]
        if scheme is not None:
            if not np.allclose(scheme.L, upper, rtol=1e-12, atol=0):
                raise DataValidationError("CSV inspection times disagree with the supplied scheme")
            return cls(scheme, d, r)
        try:
            return cls.from_counts(upper, d, r)
        except ParameterDomainError as exc:
            raise DataValidationError(str(exc)) from None


def _ll_quadrature(data: ObservedData, theta: ModelParams) -> float:
    qij, q = interval_probs(data.scheme.L, theta)
    d = data.d
    surv = data.at_risk - d.sum(axis=1)
    if np.any((qij <= 0) & (d > 0)):
        return -math.inf
    with np.errstate(divide="ignore"):
        term = np.where(d > 0, d * np.log(np.where(qij > 0, qij, 1.0)), 0.0).sum()
        term += np.where(surv > 0, surv * np.log1p(-q), 0.0).sum()
    return float(term)


def log_likelihood(data: ObservedData, theta: ModelParams) -> float:
    """Grouped-data log-likelihood with the multinomial constant dropped.

    Returns ``-inf`` when an interval with observed failures has zero failure
    probability (or the survivor underflows before it).
    """
    if theta.J != data.J:
        raise ParameterDomainError(f"model has J={theta.J} causes but data has {data.J}")
    if theta.equal_shape:
        ll, _ = _kernels.loglik_grad(
            data.scheme.times,
            data.d.astype(float),
            data.at_risk.astype(float),
            np.asarray(theta.eta),
            theta.gamma,
            theta.nu,
            theta.dependent,
        )
        return float(ll) if math.isfinite(ll) else -math.inf
    try:
        return _ll_quadrature(data, theta)
    except ConditioningError:
        return -math.inf


# --------------------------------------------------------------------------
# fitting
# --------------------------------------------------------------------------


def _parse_variant(variant) -> tuple[bool, bool]:
    if isinstance(variant, tuple):
        dependent, equal = variant
        return bool(dependent), bool(equal)
    if variant not in VARIANTS:
        raise ParameterDomainError(f"variant must be one of {', '.join(VARIANTS)}; got {variant!r}")
    dep, shape = variant.split("-")
    return dep == "dependent", shape == "equal"


def _variant_name(dependent, equal):
    return f"{'dependent' if dependent else 'independent'}-{'equal' if equal else 'unequal'}"


def initial_guess(data: ObservedData, dependent: bool, equal: bool) -> np.ndarray:
    """Start point in log coordinates.

    Shapes start at 1. Scales match the actuarial cause-specific cumulative
    incidence at the last inspection to an independent exponential model.
    The frailty variance starts at 0.5.
    """
    n_i = data.at_risk.astype(float)
    d = data.d.astype(float)
    surv_prev = np.concatenate([[1.0], np.cumprod(1.0 - d.sum(axis=1) / np.maximum(n_i, 1.0))[:-1]])
    cif = (surv_prev[:, None] * d / np.maximum(n_i, 1.0)[:, None]).sum(axis=0)
    cif = np.maximum(cif, 0.5 / data.n)
    total = min(cif.sum(), 1.0 - 0.5 / data.n)
    cif *= total / cif.sum()
    rate = -math.log1p(-total) / data.scheme.L[-1]
    eta = 1.0 / (rate * cif / total)
    J = data.J
    x = list(np.log(eta)) + [0.0] * (1 if equal else J)
    if dependent:
        x.append(math.log(0.5))
    return np.array(x)


class _Objective:
    """Negative mean log-likelihood in log coordinates, with its gradient when available."""

    def __init__(self, data, dependent, equal):
        self.data = data
        self.dependent, self.equal = dependent, equal
        self.J = data.J
        self.L = data.scheme.times
        self.d = data.d.astype(float)
        self.nrisk = data.at_risk.astype(float)
        self.scale = 1.0 / data.n
        self.nfev = 0

    def theta(self, x) -> ModelParams:
        return ModelParams.from_vector(np.exp(x), self.J, self.equal, self.dependent)

    def value_grad(self, x):
        self.nfev += 1
        v = np.exp(x)
        J = self.J
        nu = v[-1] if self.dependent else 0.0
        ll, g = _kernels.loglik_grad(self.L, self.d, self.nrisk, v[:J], v[J], nu, self.dependent)
        if not math.isfinite(ll):
            return 1e100, np.zeros_like(x)
        return -ll * self.scale, -g * v * self.scale

    def value(self, x):
        if self.equal:
            return self.value_grad(x)[0]
        self.nfev += 1
        if np.any(np.abs(x) > 50):
            return 1e100
        ll = log_likelihood(self.data, self.theta(x))
        return -ll * self.scale if math.isfinite(ll) else 1e100


def _bounds(dependent, equal, J):
    b = [LOG_BOUNDS] * (J + (1 if equal else J))
    if dependent:
        b.append(LOG_NU_BOUNDS)
    return b


def _local_fit(obj: _Objective, x0, bounds, tol, polish):
    if obj.equal:
        res = optimize.minimize(
            obj.value_grad, x0, jac=True, method="L-BFGS-B", bounds=bounds,
            options={"ftol": tol * 1e-2, "gtol": 1e-10, "maxiter": 2000},
        )
    else:
        res = optimize.minimize(
            obj.value, x0, method="L-BFGS-B", bounds=bounds,
            options={"ftol": tol * 1e-2, "gtol": 1e-9, "maxiter": 500},
        )
    x, f = res.x, res.fun
    if polish:
        nm = optimize.minimize(
            obj.value, x, method="Nelder-Mead",
            options={"xatol": 1e-9, "fatol": tol * obj.scale, "maxiter": 4000, "adaptive": True},
        )
        if nm.fun <= f:
            x, f = np.clip(nm.x, *np.array(bounds).T), nm.fun
    ok = f < 1e99 and (res.success or polish)
    return x, f, ok


@dataclass(frozen=True)
class FitResult:
    params: ModelParams
    variant: str
    loglik: float
    k: int
    n_units: int
    aic: float
    bic: float
    cov: np.ndarray | None
    se: dict
    converged: bool
    independence_limit: bool = False
    message: str = ""
    nfev: int = 0
    restarts: int = 0
    extras: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "params": self.params.to_dict(),
            "se": self.se,
            "loglik": self.loglik,
            "aic": self.aic,
            "bic": self.bic,
            "k": self.k,
            "n_units": self.n_units,
            "converged": self.converged,
            "independence_limit": self.independence_limit,
            "message": self.message,
        }


def _standard_errors(data, theta):
    try:
        info = information_from_weights(data.at_risk.astype(float), data.scheme.L, theta)
        cov = pd_factor(info).inverse()
    except (DesignSingularError, ConditioningError):
        return None, {name: math.nan for name in theta.param_names}
    return cov, dict(zip(theta.param_names, np.sqrt(np.diag(cov)).tolist()))


def fit_mle(
    data: ObservedData,
    variant="dependent-equal",
    restarts: int = 5,
    seed: int = 0,
    tol: float = 1e-8,
    polish: bool = True,
    x0=None,
) -> FitResult:
    """Maximum-likelihood fit of one model variant.

    Works in log coordinates. Each start runs a bounded quasi-Newton search
    (analytic gradient for common shapes), optionally polished by Nelder-Mead.
    The first start is ``initial_guess``; the others jitter it. If a dependent
    fit drives ``nu`` below 1e-6 the independent model is refitted and the
    result is flagged as the independence limit.
    """
    dependent, equal = _parse_variant(variant)
    if restarts < 1:
        raise ParameterDomainError("restarts must be >= 1")
    J = data.J
    s = J + (1 if equal else J) + (1 if dependent else 0)
    informative = int(np.sum(data.d.sum(axis=1) > 0))
    if data.M < s or informative < min(s, data.M) - 1 or data.d.sum() == 0:
        raise ConvergenceError(
            f"data cannot identify {s} parameters: M={data.M}, intervals with failures={informative}"
        )
    obj = _Objective(data, dependent, equal)
    bounds = _bounds(dependent, equal, J)
    start = initial_guess(data, dependent, equal) if x0 is None else np.asarray(x0, dtype=float)
    rng = np.random.default_rng(seed)
    best = None
    n_ok = 0
    for k in range(restarts):
        x_init = start if k == 0 else start + rng.normal(0.0, 0.5, size=start.size)
        x_init = np.clip(x_init, *np.array(bounds).T)
        x, f, ok = _local_fit(obj, x_init, bounds, tol, polish)
        n_ok += ok
        if ok and (best is None or f < best[1]):
            best = (x, f)
    if best is None:
        raise ConvergenceError(f"likelihood maximisation failed from all {restarts} starts")
    x, f = best
    theta = obj.theta(x)
    if dependent and theta.nu < NU_BOUNDARY:
        ind = fit_mle(data, (False, equal), restarts, seed, tol, polish, x0=x[:-1])
        return FitResult(
            **{**ind.__dict__, "independence_limit": True,
               "message": "frailty variance at the boundary; reported as the independent model",
               "nfev": ind.nfev + obj.nfev, "variant": _variant_name(True, equal)}
        )
    ll = -f / obj.scale
    cov, se = _standard_errors(data, theta)
    k = theta.n_params
    return FitResult(
        params=theta,
        variant=_variant_name(dependent, equal),
        loglik=float(ll),
        k=k,
        n_units=data.n,
        aic=-2 * ll + 2 * k,
        bic=-2 * ll + k * math.log(data.n),
        cov=cov,
        se=se,
        converged=True,
        message="" if cov is not None else "information singular at the estimate; standard errors unavailable",
        nfev=obj.nfev,
        restarts=restarts,
        extras={"starts_converged": n_ok},
    )


def estimate_reliability(fit: FitResult, t0: float) -> tuple[float, float]:
    """Plug-in R(t0) and its delta-method standard error."""
    if t0 < 0:
        raise ParameterDomainError(f"t0 must be >= 0, got {t0}")
    if t0 == 0:
        return 1.0, 0.0
    est = float(reliability(t0, fit.params))
    if fit.cov is None:
        raise DesignSingularError("no covariance available for this fit")
    ct = grad_reliability(t0, fit.params)
    return est, float(math.sqrt(max(ct @ fit.cov @ ct, 0.0)))
