"""Expected Fisher information for PIC-I data and the standardized variance of R(t0)."""
from __future__ import annotations

import numpy as np
from scipy import linalg

from . import _kernels
from .errors import DesignSingularError, ParameterDomainError
from .model import ModelParams, _raise_bad, grad_interval_probs, grad_reliability, interval_probs
from .scheme import PicScheme, expected_counts

__all__ = [
    "information_from_weights",
    "fisher_information",
    "unit_information",
    "std_variance",
    "asymptotic_covariance",
    "pd_factor",
    "PDFactor",
]

PIVOT_RTOL = 1e-12


def information_from_weights(weights, L, theta: ModelParams) -> np.ndarray:
    """Sum over intervals of ``w_i`` times the multinomial information of interval i.

    ``weights`` are expected (or observed) numbers at risk per interval.
    """
    weights = np.asarray(weights, dtype=float)
    qij, q = interval_probs(L, theta)
    dqij, dq = grad_interval_probs(L, theta)
    if theta.equal_shape:
        return _kernels.information(weights, q, qij, dq, dqij)
    return _kernels._information_np(weights, q, qij, dq, dqij)


def _check_identifiable(scheme: PicScheme, theta: ModelParams):
    s = theta.n_params
    if scheme.M < s:
        raise ParameterDomainError(f"M must be >= s: scheme has M={scheme.M} but the model has s={s} parameters")


def fisher_information(n: float, scheme: PicScheme, theta: ModelParams) -> np.ndarray:
    """Expected information of a PIC-I test on ``n`` units; linear in ``n``."""
    _check_identifiable(scheme, theta)
    if not n > 0:
        raise ParameterDomainError(f"n must be positive, got {n}")
    if theta.equal_shape:
        # single kernel pass: probabilities, gradients and at-risk weights together
        L = scheme.times
        bad, logs, q, _, qij, dq, dqij, *_ = _kernels.interval_terms(
            L, np.asarray(theta.eta), theta.gamma, theta.nu, theta.dependent
        )
        if bad >= 0:
            _raise_bad(bad, logs)
        stay = (1.0 - q) * (1.0 - scheme.withdrawals)
        e_n = n * np.concatenate([[1.0], np.cumprod(stay)[:-1]])
        return _kernels.information(e_n, q, qij, dq, dqij)
    ec = expected_counts(n, scheme, theta)
    return information_from_weights(ec.e_n, scheme.L, theta)


def unit_information(scheme: PicScheme, theta: ModelParams) -> np.ndarray:
    return fisher_information(1.0, scheme, theta)


class PDFactor:
    """Cholesky factor of a diagonally equilibrated SPD matrix.

    The matrix is rescaled to unit diagonal before factorization, so the
    singularity test does not depend on the units of the parameters.
    """

    def __init__(self, info: np.ndarray, rtol: float = PIVOT_RTOL):
        info = np.asarray(info, dtype=float)
        diag = np.diag(info)
        if not np.all(np.isfinite(info)) or np.any(diag <= 0):
            raise DesignSingularError("information matrix is not finite or has a non-positive diagonal")
        self.scale = 1.0 / np.sqrt(diag)
        eq = info * self.scale[:, None] * self.scale[None, :]
        try:
            self.chol = linalg.cholesky(eq, lower=True)
        except linalg.LinAlgError:
            raise DesignSingularError("information matrix is not positive definite") from None
        pivots = np.diag(self.chol) ** 2
        if pivots.min() <= rtol:
            raise DesignSingularError(f"information matrix is numerically singular (pivot {pivots.min():.3g})")

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        sc = self.scale if b.ndim == 1 else self.scale[:, None]
        return sc * linalg.cho_solve((self.chol, True), sc * b)

    def inverse(self):
        inv = self.solve(np.eye(self.scale.size))
        return 0.5 * (inv + inv.T)

    def quad_inv(self, c) -> float:
        """c' A^{-1} c."""
        z = linalg.solve_triangular(self.chol, self.scale * np.asarray(c, dtype=float), lower=True)
        return float(z @ z)


def pd_factor(info: np.ndarray, rtol: float = PIVOT_RTOL) -> PDFactor:
    """Factor ``info`` or raise DesignSingularError.

    A pivot below ``rtol`` (relative to the unit diagonal after equilibration)
    counts as singular; nothing is regularised.
    """
    return PDFactor(info, rtol)


def std_variance(scheme: PicScheme, theta: ModelParams, t0: float, rtol: float = PIVOT_RTOL) -> float:
    """S^2 = grad R(t0)' (I/n)^{-1} grad R(t0); does not depend on n."""
    if not t0 > 0:
        raise ParameterDomainError(f"t0 must be > 0, got {t0}")
    return pd_factor(unit_information(scheme, theta), rtol).quad_inv(grad_reliability(t0, theta))


def asymptotic_covariance(n: float, scheme: PicScheme, theta: ModelParams) -> np.ndarray:
    return pd_factor(fisher_information(n, scheme, theta)).inverse()
