"""Closed-form proximal step inside the Gaussian family for a Gaussian target."""
import numpy as np

from ..numerics import cholesky
from .gaussian import GaussianFull


def _inv_spd(a):
    L = cholesky(a)
    Li = np.linalg.inv(L)
    return Li.T @ Li


def gaussian_projection(prev, target_mean, target_cov, alpha):
    """Exact minimizer of the proximal score-matching objective.

    With b = alpha / (1 + alpha) the optimum has precision
    b V^-1 + (1 - b) Sigma^-1 and mean V' (b V^-1 m + (1 - b) Sigma^-1 mu),
    i.e. its score is b * score(prev) + (1 - b) * score(target) everywhere.
    """
    b = alpha / (1.0 + alpha)
    mu = np.asarray(target_mean, dtype=np.float64)
    if b == 0.0:
        return GaussianFull.from_moments(mu, target_cov)
    Pv = _inv_spd(prev.covariance)
    Ps = _inv_spd(np.asarray(target_cov, dtype=np.float64))
    P = b * Pv + (1.0 - b) * Ps
    P = 0.5 * (P + P.T)
    V_new = _inv_spd(P)
    V_new = 0.5 * (V_new + V_new.T)
    m_new = V_new @ (b * Pv @ prev.mean + (1.0 - b) * Ps @ mu)
    return GaussianFull.from_moments(m_new, V_new)
