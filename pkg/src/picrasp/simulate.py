"""Count-level simulation of PIC-I competing-risks tests and Monte Carlo plan evaluation."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConditioningError, ConvergenceError, DesignSingularError, ParameterDomainError
from .fisher import std_variance
from .inference import ObservedData, fit_mle
from .model import ModelParams, cause_mass, interval_probs, reliability
from .plans import PlanResult
from .scheme import PicScheme

__all__ = ["simulate_dataset", "simulation_probs", "rng_for", "MCSummary", "mc_evaluate"]

# S^2 at an estimate is only reported when the information there is this far from singular
ESTIMATE_PIVOT_RTOL = 1e-8


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for one (seed, key...) cell; independent of scheduling."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, key)])))


def simulation_probs(scheme: PicScheme, theta: ModelParams) -> np.ndarray:
    """M x (J+1) matrix of per-interval outcome probabilities: causes 1..J, then survival.

    Unlike ``interval_probs`` this tolerates degenerate intervals: a zero failure
    probability is allowed and an underflowed survivor means certain failure.
    """
    if theta.equal_shape:
        _, _, q, *_ = _kernels.interval_terms(
            scheme.times, np.asarray(theta.eta), theta.gamma, theta.nu, theta.dependent
        )
        q = np.where(np.isfinite(q), np.clip(q, 0.0, 1.0), 1.0)
        qij = q[:, None] * np.exp(-cause_mass(theta))[None, :]
    else:
        qij, q = interval_probs(scheme.L, theta)
    probs = np.column_stack([qij, 1.0 - q])
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum(axis=1, keepdims=True)


def _draw(probs, p, n, seed, key):
    M, K = probs.shape
    d = np.zeros((M, K - 1), dtype=np.int64)
    r = np.zeros(M, dtype=np.int64)
    at_risk = int(n)
    for i in range(M):
        if at_risk == 0:
            break
        counts = rng_for(seed, *key, i).multinomial(at_risk, probs[i])
        d[i] = counts[:-1]
        surv = int(counts[-1])
        r[i] = surv if i == M - 1 else int(math.floor(p[i] * surv))
        at_risk = surv - r[i]
    return d, r


def simulate_dataset(theta: ModelParams, scheme: PicScheme, n: int, seed: int, replicate: int = 0) -> ObservedData:
    """One PIC-I dataset: multinomial failures per interval, then floor(p_i * survivors) withdrawn."""
    if int(n) != n or n < 1:
        raise ParameterDomainError(f"n must be a positive integer, got {n}")
    d, r = _draw(simulation_probs(scheme, theta), scheme.p, n, seed, (replicate,))
    return ObservedData(scheme, d, r)


@dataclass(frozen=True)
class MCSummary:
    reps: int
    avg_r0: float
    rmsd_r0: float
    avg_s2: float
    rmsd_s2: float
    alpha_hat: float
    beta_hat: float
    avg_r1: float
    rmsd_r1: float
    pi0: float
    pi1: float
    s2_true: float
    failures_h0: int
    failures_h1: int
    boundary_fits: int
    s2_undefined: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _one_rep(args):
    """Simulate and fit one replicate.

    Returns ``(R_hat, S2_hat, boundary)`` or None if the fit fails. ``S2_hat``
    is NaN when the information at the estimate is numerically singular, which
    happens when the likelihood keeps rising along a ridge with no interior
    maximum; R_hat is still well defined there and is kept.
    """
    theta, scheme, n, seed, key, probs, variant, t0, restarts = args
    d, r = _draw(probs, scheme.p, n, seed, key)
    data = ObservedData(scheme, d, r)
    try:
        fit = fit_mle(data, variant, restarts=restarts, polish=False)
        r_hat = float(reliability(t0, fit.params))
    except (ConvergenceError, ConditioningError, ParameterDomainError):
        return None
    try:
        s2_hat = std_variance(scheme, fit.params, t0, rtol=ESTIMATE_PIVOT_RTOL)
    except (DesignSingularError, ConditioningError):
        s2_hat = math.nan
    return r_hat, s2_hat, fit.independence_limit


def _run_block(args):
    return [_one_rep(a) for a in args]


def _simulate_hypothesis(theta, plan, t0, reps, seed, stream, variant, workers, restarts):
    probs = simulation_probs(plan.scheme, theta)
    tasks = [(theta, plan.scheme, plan.n_star, seed, (stream, k), probs, variant, t0, restarts) for k in range(reps)]
    if workers > 1:
        chunks = [tasks[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_block, chunks))
        out = [None] * reps
        for w, part in enumerate(parts):
            out[w::workers] = part
        return out
    return _run_block(tasks)


def _fmean(x):
    return math.fsum(x) / len(x) if len(x) else math.nan


def mc_evaluate(
    plan: PlanResult,
    theta0: ModelParams,
    theta1: ModelParams,
    t0: float | None = None,
    reps: int = 5000,
    seed: int = 0,
    variant: str | None = None,
    workers: int = 1,
    restarts: int = 3,
    max_failure_rate: float = 0.01,
) -> MCSummary:
    """Monte Carlo operating performance of a plan.

    ``reps`` datasets of size ``n_star`` are drawn under each hypothesis and
    fitted with ``variant`` (dependent or independent common-shape model,
    following ``theta0``). Averages use exact summation, so the summary does
    not depend on ``workers``. Replicates whose fit fails are excluded; if they
    exceed ``max_failure_rate`` of either arm a ConvergenceError is raised.
    S^2 averages skip estimates with a singular information matrix; their
    number is reported as ``s2_undefined``.
    """
    if reps < 1:
        raise ParameterDomainError(f"reps must be >= 1, got {reps}")
    t0 = plan.t0 if t0 is None else t0
    if variant is None:
        variant = "dependent-equal" if theta0.dependent else "independent-equal"
    res0 = _simulate_hypothesis(theta0, plan, t0, reps, seed, 0, variant, workers, restarts)
    res1 = _simulate_hypothesis(theta1, plan, t0, reps, seed, 1, variant, workers, restarts)
    ok0 = [x for x in res0 if x is not None]
    ok1 = [x for x in res1 if x is not None]
    f0, f1 = reps - len(ok0), reps - len(ok1)
    if max(f0, f1) > max_failure_rate * reps:
        raise ConvergenceError(f"too many failed fits: {f0} under H0 and {f1} under H1 out of {reps} each")
    pi0 = float(reliability(t0, theta0))
    pi1 = float(reliability(t0, theta1))
    s2_true = std_variance(plan.scheme, theta0, t0)
    r0 = [x[0] for x in ok0]
    s2 = [x[1] for x in ok0 if math.isfinite(x[1])]
    r1 = [x[0] for x in ok1]
    return MCSummary(
        reps=reps,
        avg_r0=_fmean(r0),
        rmsd_r0=math.sqrt(_fmean([(x - pi0) ** 2 for x in r0])),
        avg_s2=_fmean(s2),
        rmsd_s2=math.sqrt(_fmean([(x - s2_true) ** 2 for x in s2])),
        alpha_hat=sum(x <= plan.pi_c for x in r0) / len(r0),
        beta_hat=sum(x > plan.pi_c for x in r1) / len(r1),
        avg_r1=_fmean(r1),
        rmsd_r1=math.sqrt(_fmean([(x - pi1) ** 2 for x in r1])),
        pi0=pi0,
        pi1=pi1,
        s2_true=s2_true,
        failures_h0=f0,
        failures_h1=f1,
        boundary_fits=sum(x[2] for x in ok0) + sum(x[2] for x in ok1),
        s2_undefined=len(ok0) - len(s2),
    )
