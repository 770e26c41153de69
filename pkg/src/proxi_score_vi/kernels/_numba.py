"""Loop-based numba kernels; same contracts as ``_numpy``."""
import math

import numba as nb
import numpy as np

VAR_FLOOR = 1e-8
LOG_2PI = math.log(2.0 * math.pi)

jit = nb.njit(cache=True, nogil=True)


# ---------------------------------------------------------------- numerics

@jit
def cholesky_factor(a):
    n = a.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        s = a[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > 0.0:
            return np.zeros((n, n)), False
        ljj = math.sqrt(s)
        L[j, j] = ljj
        for i in range(j + 1, n):
            t = a[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / ljj
    return L, True


@jit
def _forward(l, b):
    n = l.shape[0]
    x = np.empty(n)
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= l[i, k] * x[k]
        x[i] = s / l[i, i]
    return x


@jit
def _backward_t(l, b):
    # solves l^T x = b
    n = l.shape[0]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        s = b[i]
        for k in range(i + 1, n):
            s -= l[k, i] * x[k]
        x[i] = s / l[i, i]
    return x


@jit
def _solve_lower_2d(l, b):
    out = np.empty_like(b)
    for j in range(b.shape[1]):
        out[:, j] = _forward(l, np.ascontiguousarray(b[:, j]))
    return out


def solve_lower(l, b):
    l = np.ascontiguousarray(l, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if b.ndim == 1:
        return _forward(l, np.ascontiguousarray(b))
    return _solve_lower_2d(l, np.ascontiguousarray(b))


# ------------------------------------------------------- gaussian families

@jit
def gauss_diag_prox(th, prev, tgt, m, rho, alpha):
    S, d = th.shape
    gm = np.zeros(d)
    grho = np.zeros(d)
    loss = 0.0
    c = 2.0 / S
    for j in range(d):
        e2 = math.exp(2.0 * rho[j])
        var = e2 + VAR_FLOOR
        for i in range(S):
            diff = th[i, j] - m[j]
            g = -diff / var
            dp = g - prev[i, j]
            dt = g - tgt[i, j]
            loss += alpha * dp * dp + dt * dt
            res = (1.0 + alpha) * g - alpha * prev[i, j] - tgt[i, j]
            gm[j] += c * res / var
            grho[j] += c * res * diff / (var * var) * 2.0 * e2
    return loss / S, gm, grho


@jit
def gauss_full_prox(th, prev, tgt, m, L, dldiag, alpha):
    S, d = th.shape
    gm = np.zeros(d)
    M = np.zeros((d, d))
    loss = 0.0
    c = 2.0 / S
    for i in range(S):
        diff = th[i] - m
        g = -_backward_t(L, _forward(L, diff))
        res = np.empty(d)
        for j in range(d):
            dp = g[j] - prev[i, j]
            dt = g[j] - tgt[i, j]
            loss += alpha * dp * dp + dt * dt
            res[j] = (1.0 + alpha) * g[j] - alpha * prev[i, j] - tgt[i, j]
        a = _backward_t(L, _forward(L, res))
        for j in range(d):
            gm[j] += c * a[j]
            for k in range(d):
                M[j, k] += g[j] * a[k] + a[j] * g[k]
    gL = np.zeros((d, d))
    for r in range(d):
        for q in range(r + 1):
            s = 0.0
            for k in range(q, d):
                s += M[r, k] * L[k, q]
            gL[r, q] = -c * s
        gL[r, r] *= dldiag[r]
    return loss / S, gm, gL


# ------------------------------------------------------- mixture families

@jit
def _log_weights(logits):
    K = logits.shape[0]
    mx = logits.max()
    s = 0.0
    for k in range(K):
        s += math.exp(logits[k] - mx)
    lse = mx + math.log(s)
    out = np.empty(K)
    for k in range(K):
        out[k] = logits[k] - lse
    return out


@jit
def mixture_diag_eval(th, logits, means, rho):
    S, d = th.shape
    K = logits.shape[0]
    logw = _log_weights(logits)
    var = np.exp(2.0 * rho) + VAR_FLOOR
    logq = np.empty(S)
    score = np.zeros((S, d))
    lp = np.empty(K)
    for i in range(S):
        for k in range(K):
            acc = logw[k] - 0.5 * d * LOG_2PI
            for j in range(d):
                df = th[i, j] - means[k, j]
                acc -= 0.5 * (df * df / var[k, j] + math.log(var[k, j]))
            lp[k] = acc
        mx = lp.max()
        s = 0.0
        for k in range(K):
            s += math.exp(lp[k] - mx)
        lse = mx + math.log(s)
        logq[i] = lse
        for k in range(K):
            r = math.exp(lp[k] - lse)
            for j in range(d):
                score[i, j] -= r * (th[i, j] - means[k, j]) / var[k, j]
    return logq, score


@jit
def mixture_diag_prox(th, prev, tgt, logits, means, rho, alpha):
    S, d = th.shape
    K = logits.shape[0]
    logw = _log_weights(logits)
    e2 = np.exp(2.0 * rho)
    var = e2 + VAR_FLOOR
    glog = np.zeros(K)
    gmeans = np.zeros((K, d))
    grho = np.zeros((K, d))
    lp = np.empty(K)
    r = np.empty(K)
    ck = np.empty(K)
    g = np.empty(d)
    res = np.empty(d)
    loss = 0.0
    c = 2.0 / S
    for i in range(S):
        for k in range(K):
            acc = logw[k] - 0.5 * d * LOG_2PI
            for j in range(d):
                df = th[i, j] - means[k, j]
                acc -= 0.5 * (df * df / var[k, j] + math.log(var[k, j]))
            lp[k] = acc
        mx = lp.max()
        s = 0.0
        for k in range(K):
            s += math.exp(lp[k] - mx)
        lse = mx + math.log(s)
        for k in range(K):
            r[k] = math.exp(lp[k] - lse)
        for j in range(d):
            acc = 0.0
            for k in range(K):
                acc -= r[k] * (th[i, j] - means[k, j]) / var[k, j]
            g[j] = acc
        for j in range(d):
            dp = g[j] - prev[i, j]
            dt = g[j] - tgt[i, j]
            loss += alpha * dp * dp + dt * dt
            res[j] = (1.0 + alpha) * g[j] - alpha * prev[i, j] - tgt[i, j]
        cbar = 0.0
        for k in range(K):
            acc = 0.0
            for j in range(d):
                acc -= res[j] * (th[i, j] - means[k, j]) / var[k, j]
            ck[k] = acc
            cbar += r[k] * acc
        for k in range(K):
            e = r[k] * (ck[k] - cbar)
            glog[k] += c * e
            for j in range(d):
                df = th[i, j] - means[k, j]
                v = var[k, j]
                gmeans[k, j] += c * (e * df / v + r[k] * res[j] / v)
                dlogn = -0.5 / v + 0.5 * df * df / (v * v)
                grho[k, j] += c * (e * dlogn + r[k] * res[j] * df / (v * v)) * 2.0 * e2[k, j]
    return loss / S, glog, gmeans, grho


@jit
def mixture_full_eval(th, logw, means, chols):
    S, d = th.shape
    K = logw.shape[0]
    logp = np.empty(S)
    score = np.zeros((S, d))
    lp = np.empty(K)
    comp = np.empty((K, d))
    halflogdet = np.zeros(K)
    for k in range(K):
        for j in range(d):
            halflogdet[k] += math.log(chols[k, j, j])
    for i in range(S):
        for k in range(K):
            Lk = chols[k]
            u = _forward(Lk, th[i] - means[k])
            q = 0.0
            for j in range(d):
                q += u[j] * u[j]
            lp[k] = logw[k] - 0.5 * q - halflogdet[k] - 0.5 * d * LOG_2PI
            comp[k] = -_backward_t(Lk, u)
        mx = lp.max()
        s = 0.0
        for k in range(K):
            s += math.exp(lp[k] - mx)
        lse = mx + math.log(s)
        logp[i] = lse
        for k in range(K):
            rk = math.exp(lp[k] - lse)
            for j in range(d):
                score[i, j] += rk * comp[k, j]
    return logp, score


# ------------------------------------------------------------ planar flow

@jit
def _solve_alpha(a, c, tol, maxit):
    lo = a - abs(c)
    hi = a + abs(c)
    x = a
    scale = max(1.0, abs(a))
    for _ in range(maxit):
        t = math.tanh(x)
        f = x + c * t - a
        if abs(f) <= tol * scale:
            return x, True
        if f < 0.0:
            lo = x
        elif f > 0.0:
            hi = x
        fp = 1.0 + c * (1.0 - t * t)
        xn = x - f / fp
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        x = xn
    return x, False


@jit
def planar_invert(th, uhat, w, b, tol, maxit):
    S, d = th.shape
    c = 0.0
    for j in range(d):
        c += w[j] * uhat[j]
    z = np.empty((S, d))
    al = np.empty(S)
    ok = True
    for i in range(S):
        a = b
        for j in range(d):
            a += w[j] * th[i, j]
        x, conv = _solve_alpha(a, c, tol, maxit)
        ok = ok and conv
        al[i] = x
        t = math.tanh(x)
        for j in range(d):
            z[i, j] = th[i, j] - uhat[j] * t
    return z, al, ok


@jit
def planar_eval(th, uhat, w, b, tol, maxit):
    S, d = th.shape
    z, al, ok = planar_invert(th, uhat, w, b, tol, maxit)
    c = 0.0
    for j in range(d):
        c += w[j] * uhat[j]
    logq = np.empty(S)
    score = np.empty((S, d))
    for i in range(S):
        h = math.tanh(al[i])
        hp = 1.0 - h * h
        det = 1.0 + c * hp
        uz = 0.0
        zz = 0.0
        for j in range(d):
            uz += uhat[j] * z[i, j]
            zz += z[i, j] * z[i, j]
        kappa = hp * uz / det + 2.0 * c * h * hp / (det * det)
        for j in range(d):
            score[i, j] = -z[i, j] + kappa * w[j]
        logq[i] = -0.5 * zz - 0.5 * d * LOG_2PI - math.log(det)
    return logq, score, ok


@jit
def planar_prox(th, prev, tgt, uhat, w, b, alpha, tol, maxit):
    S, d = th.shape
    z, al, ok = planar_invert(th, uhat, w, b, tol, maxit)
    c = 0.0
    uu = 0.0
    for j in range(d):
        c += w[j] * uhat[j]
        uu += uhat[j] * uhat[j]
    gu = np.zeros(d)
    gw = np.zeros(d)
    gb = 0.0
    loss = 0.0
    cc = 2.0 / S
    g = np.empty(d)
    res = np.empty(d)
    for i in range(S):
        h = math.tanh(al[i])
        hp = 1.0 - h * h
        det = 1.0 + c * hp
        det2 = det * det
        uz = 0.0
        for j in range(d):
            uz += uhat[j] * z[i, j]
        kappa = hp * uz / det + 2.0 * c * h * hp / det2
        f_h = 0.0
        g_k = 0.0
        for j in range(d):
            g[j] = -z[i, j] + kappa * w[j]
            dp = g[j] - prev[i, j]
            dt = g[j] - tgt[i, j]
            loss += alpha * dp * dp + dt * dt
            res[j] = (1.0 + alpha) * g[j] - alpha * prev[i, j] - tgt[i, j]
            f_h += res[j] * uhat[j]
            g_k += res[j] * w[j]
        g_s1 = g_k * hp / det
        g_det = g_k * (-hp * uz / det2 - 4.0 * c * h * hp / (det2 * det))
        g_hp = g_k * (uz / det + 2.0 * c * h / det2) + g_det * c
        g_c = g_k * 2.0 * h * hp / det2 + g_det * hp
        g_h = f_h + g_k * 2.0 * c * hp / det2 - g_s1 * uu - 2.0 * h * g_hp
        g_al = g_h * hp
        g_a = g_al / det
        g_c -= g_al * h / det
        for j in range(d):
            gu[j] += cc * (h * res[j] + g_s1 * (th[i, j] - 2.0 * h * uhat[j]) + g_c * w[j])
            gw[j] += cc * (kappa * res[j] + g_c * uhat[j] + g_a * th[i, j])
        gb += cc * g_a
    return loss / S, gu, gw, gb, ok


# ---------------------------------------------------------------- targets

@jit
def mlp_loss_grad(theta, X, Y, hidden, classes):
    n, p = X.shape
    o1 = p * hidden
    o2 = o1 + hidden
    o3 = o2 + hidden * classes
    grad = np.zeros(theta.shape[0])
    hvec = np.empty(hidden)
    logits = np.empty(classes)
    dl = np.empty(classes)
    loss = 0.0
    for i in range(n):
        for h in range(hidden):
            acc = theta[o1 + h]
            for q in range(p):
                acc += X[i, q] * theta[q * hidden + h]
            hvec[h] = math.tanh(acc)
        for k in range(classes):
            acc = theta[o3 + k]
            for h in range(hidden):
                acc += hvec[h] * theta[o2 + h * classes + k]
            logits[k] = acc
        mx = logits.max()
        s = 0.0
        for k in range(classes):
            s += math.exp(logits[k] - mx)
        lse = mx + math.log(s)
        loss += lse - logits[Y[i]]
        for k in range(classes):
            dl[k] = math.exp(logits[k] - lse)
        dl[Y[i]] -= 1.0
        for k in range(classes):
            grad[o3 + k] += dl[k]
        for h in range(hidden):
            back = 0.0
            for k in range(classes):
                grad[o2 + h * classes + k] += hvec[h] * dl[k]
                back += dl[k] * theta[o2 + h * classes + k]
            back *= 1.0 - hvec[h] * hvec[h]
            grad[o1 + h] += back
            for q in range(p):
                grad[q * hidden + h] += X[i, q] * back
    return loss, grad


# ---------------------------------------------------------------- metrics

@jit
def ece_bins(conf, correct, m_bins):
    counts = np.zeros(m_bins)
    acc = np.zeros(m_bins)
    cs = np.zeros(m_bins)
    for i in range(conf.shape[0]):
        k = int(conf[i] * m_bins)
        if k >= m_bins:
            k = m_bins - 1
        if k < 0:
            k = 0
        counts[k] += 1.0
        acc[k] += correct[i]
        cs[k] += conf[i]
    return counts, acc, cs
