"""Vectorized numpy implementations of the hot kernels.

Every function here has a loop-based twin in ``_numba`` with the same
signature and return layout. Arrays are float64; sample batches are (S, d).
"""
import numpy as np
from scipy.linalg import solve_triangular

VAR_FLOOR = 1e-8
LOG_2PI = np.log(2.0 * np.pi)


# ---------------------------------------------------------------- numerics

def cholesky_factor(a):
    """Return (L, ok). ``ok`` is False when a pivot is not strictly positive."""
    try:
        return np.linalg.cholesky(a), True
    except np.linalg.LinAlgError:
        return np.zeros_like(a), False


def solve_lower(l, b):
    return solve_triangular(l, b, lower=True, check_finite=False)


# ------------------------------------------------------- gaussian families

def gauss_diag_prox(th, prev, tgt, m, rho, alpha):
    e2 = np.exp(2.0 * rho)
    var = e2 + VAR_FLOOR
    diff = th - m
    g = -diff / var
    S = th.shape[0]
    loss = (alpha * np.sum((g - prev) ** 2) + np.sum((g - tgt) ** 2)) / S
    res = (1.0 + alpha) * g - alpha * prev - tgt
    c = 2.0 / S
    gm = c * np.sum(res / var, axis=0)
    grho = c * np.sum(res * diff / var**2, axis=0) * 2.0 * e2
    return loss, gm, grho


def gauss_full_prox(th, prev, tgt, m, L, dldiag, alpha):
    """Proximal loss gradient for N(m, L L^T).

    ``dldiag`` is dL_ii/d(log-diag parameter); the returned lower-triangular
    gradient already has its diagonal expressed in that parameter.
    """
    S = th.shape[0]
    diff = th - m
    u = solve_triangular(L, diff.T, lower=True, check_finite=False)
    g = -solve_triangular(L, u, lower=True, trans="T", check_finite=False).T
    loss = (alpha * np.sum((g - prev) ** 2) + np.sum((g - tgt) ** 2)) / S
    res = (1.0 + alpha) * g - alpha * prev - tgt
    v = solve_triangular(L, res.T, lower=True, check_finite=False)
    a = solve_triangular(L, v, lower=True, trans="T", check_finite=False).T
    c = 2.0 / S
    gm = c * a.sum(axis=0)
    M = g.T @ a
    gL = -c * np.tril((M + M.T) @ L)
    idx = np.arange(L.shape[0])
    gL[idx, idx] *= dldiag
    return loss, gm, gL


# ------------------------------------------------------- mixture families

def _logsumexp_rows(x):
    mx = np.max(x, axis=1, keepdims=True)
    return (mx + np.log(np.sum(np.exp(x - mx), axis=1, keepdims=True)))[:, 0]


def mixture_diag_eval(th, logits, means, rho):
    """log q and its theta-score for a diagonal Gaussian mixture."""
    d = th.shape[1]
    logw = logits - _logsumexp_rows(logits[None, :])[0]
    var = np.exp(2.0 * rho) + VAR_FLOOR          # (K, d)
    diff = th[:, None, :] - means[None, :, :]   # (S, K, d)
    lp = (logw[None, :] - 0.5 * np.sum(diff**2 / var, axis=2)
          - 0.5 * np.sum(np.log(var), axis=1)[None, :] - 0.5 * d * LOG_2PI)
    lse = _logsumexp_rows(lp)
    r = np.exp(lp - lse[:, None])
    score = -np.einsum("sk,skd->sd", r, diff / var)
    return lse, score


def mixture_diag_prox(th, prev, tgt, logits, means, rho, alpha):
    S, d = th.shape
    logw = logits - _logsumexp_rows(logits[None, :])[0]
    e2 = np.exp(2.0 * rho)
    var = e2 + VAR_FLOOR
    diff = th[:, None, :] - means[None, :, :]
    lp = (logw[None, :] - 0.5 * np.sum(diff**2 / var, axis=2)
          - 0.5 * np.sum(np.log(var), axis=1)[None, :] - 0.5 * d * LOG_2PI)
    r = np.exp(lp - _logsumexp_rows(lp)[:, None])  # (S, K)
    gk = -diff / var                                # (S, K, d)
    g = np.einsum("sk,skd->sd", r, gk)
    loss = (alpha * np.sum((g - prev) ** 2) + np.sum((g - tgt) ** 2)) / S
    res = (1.0 + alpha) * g - alpha * prev - tgt
    ck = np.einsum("sd,skd->sk", res, gk)
    e = r * (ck - np.sum(r * ck, axis=1, keepdims=True))
    c = 2.0 / S
    glog = c * e.sum(axis=0)
    gmeans = c * (np.einsum("sk,skd->kd", e, diff / var)
                  + np.einsum("sk,sd->kd", r, res) / var)
    dlogn_dvar = -0.5 / var + 0.5 * diff**2 / var**2
    dg_dvar = np.einsum("sk,sd,skd->kd", r, res, diff) / var**2
    grho = c * (np.einsum("sk,skd->kd", e, dlogn_dvar) + dg_dvar) * 2.0 * e2
    return loss, glog, gmeans, grho


def mixture_full_eval(th, logw, means, chols):
    """log density and score of a full-covariance mixture (target side)."""
    S, d = th.shape
    K = logw.shape[0]
    lp = np.empty((S, K))
    comp_scores = np.empty((S, K, d))
    for k in range(K):
        Lk = chols[k]
        diff = (th - means[k]).T
        u = solve_triangular(Lk, diff, lower=True, check_finite=False)
        lp[:, k] = (logw[k] - 0.5 * np.sum(u**2, axis=0)
                    - np.sum(np.log(np.diag(Lk))) - 0.5 * d * LOG_2PI)
        comp_scores[:, k, :] = -solve_triangular(
            Lk, u, lower=True, trans="T", check_finite=False).T
    lse = _logsumexp_rows(lp)
    r = np.exp(lp - lse[:, None])
    return lse, np.einsum("sk,skd->sd", r, comp_scores)


# ------------------------------------------------------------ planar flow

def planar_invert(th, uhat, w, b, tol, maxit):
    """Solve a + c*tanh(a) = w.theta + b per row; return (z, alpha, ok)."""
    c = float(w @ uhat)
    a = th @ w + b
    lo = a - abs(c)
    hi = a + abs(c)
    x = a.copy()
    ok = False
    for _ in range(maxit):
        t = np.tanh(x)
        f = x + c * t - a
        if np.all(np.abs(f) <= tol * np.maximum(1.0, np.abs(a))):
            ok = True
            break
        lo = np.where(f < 0.0, x, lo)
        hi = np.where(f > 0.0, x, hi)
        fp = 1.0 + c * (1.0 - t * t)
        xn = x - f / fp
        bad = (xn <= lo) | (xn >= hi) | ~np.isfinite(xn)
        x = np.where(bad, 0.5 * (lo + hi), xn)
    z = th - np.outer(np.tanh(x), uhat)
    return z, x, ok


def planar_eval(th, uhat, w, b, tol, maxit):
    """log q, theta-score and convergence flag for a single planar layer."""
    d = th.shape[1]
    z, al, ok = planar_invert(th, uhat, w, b, tol, maxit)
    c = float(w @ uhat)
    h = np.tanh(al)
    hp = 1.0 - h * h
    det = 1.0 + c * hp
    uz = z @ uhat
    kappa = hp * uz / det + 2.0 * c * h * hp / det**2
    score = -z + np.outer(kappa, w)
    logq = -0.5 * np.sum(z * z, axis=1) - 0.5 * d * LOG_2PI - np.log(det)
    return logq, score, ok


def planar_prox(th, prev, tgt, uhat, w, b, alpha, tol, maxit):
    """Loss and gradients w.r.t. (uhat, w, b) holding theta fixed."""
    S, d = th.shape
    z, al, ok = planar_invert(th, uhat, w, b, tol, maxit)
    c = float(w @ uhat)
    uu = float(uhat @ uhat)
    h = np.tanh(al)
    hp = 1.0 - h * h
    det = 1.0 + c * hp
    uz = z @ uhat
    kappa = hp * uz / det + 2.0 * c * h * hp / det**2
    g = -z + np.outer(kappa, w)
    loss = (alpha * np.sum((g - prev) ** 2) + np.sum((g - tgt) ** 2)) / S
    res = (1.0 + alpha) * g - alpha * prev - tgt

    f_h = res @ uhat
    g_k = res @ w
    g_s1 = g_k * hp / det
    g_det = g_k * (-hp * uz / det**2 - 4.0 * c * h * hp / det**3)
    g_hp = g_k * (uz / det + 2.0 * c * h / det**2) + g_det * c
    g_c = g_k * 2.0 * h * hp / det**2 + g_det * hp
    g_h = f_h + g_k * 2.0 * c * hp / det**2 - g_s1 * uu - 2.0 * h * g_hp
    g_al = g_h * hp
    g_a = g_al / det
    g_c = g_c - g_al * h / det

    cc = 2.0 / S
    gu = cc * (h @ res + g_s1 @ th - 2.0 * np.sum(g_s1 * h) * uhat + np.sum(g_c) * w)
    gw = cc * (kappa @ res + np.sum(g_c) * uhat + g_a @ th)
    gb = cc * np.sum(g_a)
    return loss, gu, gw, gb, ok


# ---------------------------------------------------------------- targets

def mlp_loss_grad(theta, X, Y, hidden, classes):
    """Summed cross-entropy of a one-hidden-layer tanh MLP and its gradient.

    Parameter layout: W1 (p, hidden), b1 (hidden), W2 (hidden, classes), b2.
    """
    n, p = X.shape
    o1 = p * hidden
    o2 = o1 + hidden
    o3 = o2 + hidden * classes
    W1 = theta[:o1].reshape(p, hidden)
    b1 = theta[o1:o2]
    W2 = theta[o2:o3].reshape(hidden, classes)
    b2 = theta[o3:]
    H = np.tanh(X @ W1 + b1)
    logits = H @ W2 + b2
    mx = logits.max(axis=1, keepdims=True)
    lse = mx[:, 0] + np.log(np.exp(logits - mx).sum(axis=1))
    loss = float(np.sum(lse - logits[np.arange(n), Y]))
    P = np.exp(logits - lse[:, None])
    P[np.arange(n), Y] -= 1.0
    gW2 = H.T @ P
    gb2 = P.sum(axis=0)
    dH = (P @ W2.T) * (1.0 - H * H)
    gW1 = X.T @ dH
    gb1 = dH.sum(axis=0)
    return loss, np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2])


# ---------------------------------------------------------------- metrics

def ece_bins(conf, correct, m_bins):
    """Per-bin (count, sum of correctness, sum of confidence), equal-width bins."""
    idx = np.minimum((conf * m_bins).astype(np.int64), m_bins - 1)
    idx = np.maximum(idx, 0)
    counts = np.bincount(idx, minlength=m_bins).astype(np.float64)
    acc = np.bincount(idx, weights=correct, minlength=m_bins)
    cs = np.bincount(idx, weights=conf, minlength=m_bins)
    return counts, acc, cs
