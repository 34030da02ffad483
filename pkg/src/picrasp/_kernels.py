"""Hot numeric kernels for the gamma-frailty Weibull competing-risks model.

Each kernel exists twice: a loop version compiled with numba and a vectorised
numpy version. ``_accel.BACKEND`` decides which one the public names bind to.
Both versions work in log-survival form so that interval probabilities stay
accurate deep in the tail.

Parameter vector layout (equal shapes): ``(eta_1..eta_J, gamma[, nu])``.
Layout for unequal shapes: ``(eta_1..eta_J, gamma_1..gamma_J[, nu])``.
"""
import math

import numpy as np

from ._accel import HAS_NUMBA, njit

# below this nu*Delta the frailty log-survivor uses its power series
NU_SERIES = 1e-4
# below this nu*Delta the nu-derivative uses its power series (cancellation)
NU_DERIV_SERIES = 1e-3
# exp() underflows to zero below this
LOG_TINY = -745.0

# --------------------------------------------------------------------------
# numba loop kernels
# --------------------------------------------------------------------------


@njit(cache=True)
def _dlogs_dnu_nb(delta, nu):
    u = nu * delta
    if u < NU_DERIV_SERIES:
        return delta * delta * (0.5 - 2.0 * u / 3.0 + 0.75 * u * u - 0.8 * u**3 + 5.0 * u**4 / 6.0 - 6.0 * u**5 / 7.0)
    return (math.log1p(u) - u / (1.0 + u)) / (nu * nu)


@njit(cache=True)
def _log_survival_nb(t, eta, shapes, nu, equal, dependent):
    J = eta.shape[0]
    K = t.shape[0]
    ns = J + (1 if equal else J) + (1 if dependent else 0)
    logs = np.zeros(K)
    grad = np.zeros((K, ns))
    x = np.empty(J)
    lr = np.empty(J)
    for k in range(K):
        tk = t[k]
        if tk <= 0.0:
            continue
        delta = 0.0
        for j in range(J):
            lr[j] = math.log(tk) - math.log(eta[j])
            x[j] = math.exp(shapes[j] * lr[j])
            delta += x[j]
        if dependent:
            u = nu * delta
            if u < NU_SERIES:
                logs[k] = -delta * (1.0 - u / 2.0 + u * u / 3.0 - u**3 / 4.0)
            else:
                logs[k] = -math.log1p(nu * delta) / nu
            scale = 1.0 / (1.0 + nu * delta)
        else:
            logs[k] = -delta
            scale = 1.0
        for j in range(J):
            grad[k, j] = shapes[j] / eta[j] * x[j] * scale
            if equal:
                grad[k, J] -= x[j] * lr[j] * scale
            else:
                grad[k, J + j] = -x[j] * lr[j] * scale
        if dependent:
            grad[k, ns - 1] = _dlogs_dnu_nb(delta, nu)
    return logs, grad


@njit(cache=True)
def _cause_mass_nb(eta, gamma, ns):
    J = eta.shape[0]
    psi = np.empty(J)
    w = np.empty(J)
    dpsi = np.zeros((J, ns))
    le = np.log(eta)
    tmp = np.empty(J)
    for j in range(J):
        m = -np.inf
        for k in range(J):
            tmp[k] = gamma * (le[j] - le[k])
            if tmp[k] > m:
                m = tmp[k]
        tot = 0.0
        for k in range(J):
            tmp[k] = math.exp(tmp[k] - m)
            tot += tmp[k]
        psi[j] = m + math.log(tot)
        dg = 0.0
        for k in range(J):
            wk = tmp[k] / tot
            if k == j:
                dpsi[j, k] = gamma / eta[j] * (1.0 - wk)
            else:
                dpsi[j, k] = -gamma / eta[k] * wk
            dg += wk * (le[j] - le[k])
        dpsi[j, J] = dg
        w[j] = math.exp(-psi[j])
    return psi, w, dpsi


@njit(cache=True)
def _interval_terms_nb(L, eta, gamma, nu, dependent):
    J = eta.shape[0]
    M = L.shape[0]
    ns = J + 1 + (1 if dependent else 0)
    shapes = np.full(J, gamma)
    logs_in, g_in = _log_survival_nb(L, eta, shapes, nu, True, dependent)
    psi, w, dpsi = _cause_mass_nb(eta, gamma, ns)
    logs = np.zeros(M + 1)
    G = np.zeros((M + 1, ns))
    logs[1:] = logs_in
    G[1:, :] = g_in
    q = np.empty(M)
    log1mq = np.empty(M)
    qij = np.empty((M, J))
    dq = np.empty((M, ns))
    dqij = np.empty((M, J, ns))
    bad = -1
    for i in range(M):
        a = logs[i + 1] - logs[i]
        log1mq[i] = a
        q[i] = -math.expm1(a)
        if bad < 0 and (logs[i] < LOG_TINY or not (q[i] > 0.0 and q[i] < 1.0)):
            bad = i
        for u in range(ns):
            dq[i, u] = (1.0 - q[i]) * (G[i, u] - G[i + 1, u])
        for j in range(J):
            qij[i, j] = w[j] * q[i]
            for u in range(ns):
                dqij[i, j, u] = w[j] * dq[i, u] - qij[i, j] * dpsi[j, u]
    return bad, logs, q, log1mq, qij, dq, dqij, psi, dpsi, G


@njit(cache=True)
def _loglik_grad_nb(L, d, nrisk, eta, gamma, nu, dependent):
    J = eta.shape[0]
    M = L.shape[0]
    ns = J + 1 + (1 if dependent else 0)
    bad, logs, q, log1mq, qij, dq, dqij, psi, dpsi, G = _interval_terms_nb(L, eta, gamma, nu, dependent)
    grad = np.zeros(ns)
    ll = 0.0
    for i in range(M):
        dplus = 0.0
        for j in range(J):
            dplus += d[i, j]
        surv = nrisk[i] - dplus
        if dplus > 0.0:
            if not q[i] > 0.0:
                return -np.inf, grad
            logq = math.log(q[i])
            odds = (1.0 - q[i]) / q[i]
            for j in range(J):
                if d[i, j] > 0.0:
                    ll += d[i, j] * (logq - psi[j])
                    for u in range(ns):
                        grad[u] += d[i, j] * (odds * (G[i, u] - G[i + 1, u]) - dpsi[j, u])
        if surv > 0.0:
            ll += surv * log1mq[i]
            for u in range(ns):
                grad[u] += surv * (G[i + 1, u] - G[i, u])
    return ll, grad


@njit(cache=True)
def _information_nb(weights, q, qij, dq, dqij):
    M, J, ns = dqij.shape
    info = np.zeros((ns, ns))
    for i in range(M):
        wi = weights[i]
        c = wi / (1.0 - q[i])
        for u in range(ns):
            for v in range(u, ns):
                acc = c * dq[i, u] * dq[i, v]
                for j in range(J):
                    acc += wi * dqij[i, j, u] * dqij[i, j, v] / qij[i, j]
                info[u, v] += acc
    for u in range(ns):
        for v in range(u):
            info[u, v] = info[v, u]
    return info


# --------------------------------------------------------------------------
# numpy fallbacks
# --------------------------------------------------------------------------


def _dlogs_dnu_np(delta, nu):
    u = nu * delta
    series = delta * delta * (0.5 - 2.0 * u / 3.0 + 0.75 * u * u - 0.8 * u**3 + 5.0 * u**4 / 6.0 - 6.0 * u**5 / 7.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (np.log1p(u) - u / (1.0 + u)) / (nu * nu)
    return np.where(u < NU_DERIV_SERIES, series, direct)


def _log_survival_np(t, eta, shapes, nu, equal, dependent):
    t = np.asarray(t, dtype=float)
    J = eta.shape[0]
    ns = J + (1 if equal else J) + (1 if dependent else 0)
    pos = t > 0.0
    tt = np.where(pos, t, 1.0)
    lr = np.log(tt)[:, None] - np.log(eta)[None, :]
    x = np.exp(shapes[None, :] * lr) * pos[:, None]
    delta = x.sum(axis=1)
    if dependent:
        u = nu * delta
        with np.errstate(divide="ignore", invalid="ignore"):
            direct = -np.log1p(u) / nu
        logs = np.where(u < NU_SERIES, -delta * (1.0 - u / 2.0 + u * u / 3.0 - u**3 / 4.0), direct)
        scale = 1.0 / (1.0 + nu * delta)
    else:
        logs = -delta
        scale = np.ones_like(delta)
    grad = np.zeros((t.shape[0], ns))
    grad[:, :J] = shapes / eta * x * scale[:, None]
    if equal:
        grad[:, J] = -(x * lr).sum(axis=1) * scale
    else:
        grad[:, J : 2 * J] = -x * lr * scale[:, None]
    if dependent:
        grad[:, ns - 1] = np.where(pos, _dlogs_dnu_np(delta, nu), 0.0)
    return logs, grad


def _cause_mass_np(eta, gamma, ns):
    J = eta.shape[0]
    le = np.log(eta)
    z = gamma * (le[:, None] - le[None, :])
    m = z.max(axis=1, keepdims=True)
    e = np.exp(z - m)
    tot = e.sum(axis=1, keepdims=True)
    psi = (m + np.log(tot))[:, 0]
    wk = e / tot
    dpsi = np.zeros((J, ns))
    dpsi[:, :J] = -gamma / eta[None, :] * wk
    diag = np.arange(J)
    dpsi[diag, diag] = gamma / eta * (1.0 - wk[diag, diag])
    dpsi[:, J] = (wk * (le[:, None] - le[None, :])).sum(axis=1)
    return psi, np.exp(-psi), dpsi


def _interval_terms_np(L, eta, gamma, nu, dependent):
    J = eta.shape[0]
    M = L.shape[0]
    ns = J + 1 + (1 if dependent else 0)
    logs_in, g_in = _log_survival_np(L, eta, np.full(J, gamma), nu, True, dependent)
    psi, w, dpsi = _cause_mass_np(eta, gamma, ns)
    logs = np.concatenate([[0.0], logs_in])
    G = np.vstack([np.zeros((1, ns)), g_in])
    log1mq = np.diff(logs)
    q = -np.expm1(log1mq)
    dq = (1.0 - q)[:, None] * (G[:-1] - G[1:])
    qij = q[:, None] * w[None, :]
    dqij = w[None, :, None] * dq[:, None, :] - qij[:, :, None] * dpsi[None, :, :]
    badmask = (logs[:-1] < LOG_TINY) | ~((q > 0.0) & (q < 1.0))
    bad = int(np.argmax(badmask)) if badmask.any() else -1
    return bad, logs, q, log1mq, qij, dq, dqij, psi, dpsi, G


def _loglik_grad_np(L, d, nrisk, eta, gamma, nu, dependent):
    bad, logs, q, log1mq, qij, dq, dqij, psi, dpsi, G = _interval_terms_np(L, eta, gamma, nu, dependent)
    dplus = d.sum(axis=1)
    surv = nrisk - dplus
    if np.any((dplus > 0) & ~(q > 0)):
        return -np.inf, np.zeros(G.shape[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        logq = np.where(dplus > 0, np.log(q), 0.0)
        odds = np.where(dplus > 0, (1.0 - q) / q, 0.0)
    ll = float((d * (logq[:, None] - psi[None, :])).sum() + (surv * log1mq).sum())
    dG = G[:-1] - G[1:]
    grad = (dplus * odds) @ dG - d.sum(axis=0) @ dpsi - surv @ dG
    return ll, grad


def _information_np(weights, q, qij, dq, dqij):
    a = np.einsum("i,iju,ijv->uv", weights, dqij / qij[:, :, None], dqij)
    b = np.einsum("i,iu,iv->uv", weights / (1.0 - q), dq, dq)
    info = a + b
    return 0.5 * (info + info.T)


if HAS_NUMBA:
    log_survival = _log_survival_nb
    interval_terms = _interval_terms_nb
    loglik_grad = _loglik_grad_nb
    information = _information_nb
else:
    log_survival = _log_survival_np
    interval_terms = _interval_terms_np
    loglik_grad = _loglik_grad_np
    information = _information_np
