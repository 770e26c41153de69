import numpy as np
from scipy.linalg import solve_triangular

from .. import kernels
from ..numerics import cholesky
from .base import VariationalFamily

VAR_FLOOR = kernels.VAR_FLOOR
LOG_2PI = np.log(2.0 * np.pi)


def _log_scale_from_var(v):
    # inverse of v = exp(2 r) + floor
    v = np.asarray(v, dtype=np.float64)
    return 0.5 * np.log(np.maximum(v - VAR_FLOOR, 1e-300))


class GaussianDiag(VariationalFamily):
    """N(m, diag(exp(2 r) + floor)); parameters [m, r]."""

    name = "gauss_diag"

    def __init__(self, mean, log_std):
        mean = np.asarray(mean, dtype=np.float64)
        super().__init__(mean.size, np.concatenate([mean, np.asarray(log_std, dtype=np.float64)]))

    @classmethod
    def from_moments(cls, mean, var):
        return cls(mean, _log_scale_from_var(var))

    def _refresh(self):
        d = self.dim
        self.mean = self._params[:d]
        self.log_std = self._params[d:]
        self._e2 = np.exp(2.0 * self.log_std)
        self.var = self._e2 + VAR_FLOOR
        self.std = np.sqrt(self.var)

    @property
    def covariance(self):
        return np.diag(self.var)

    def sample(self, s, rng):
        return self.mean + self.std * rng.generator.standard_normal((s, self.dim))

    def _log_density(self, th):
        diff = th - self.mean
        return (-0.5 * np.sum(diff**2 / self.var, axis=1)
                - 0.5 * np.sum(np.log(self.var)) - 0.5 * self.dim * LOG_2PI)

    def _score(self, th):
        return -(th - self.mean) / self.var

    def proximal_loss_grad(self, batch, alpha):
        loss, gm, gr = kernels.gauss_diag_prox(batch.thetas, batch.prev_scores, batch.target_scores,
                                               self.mean, self.log_std, float(alpha))
        return float(loss), np.concatenate([gm, gr])

    def advi_sample(self, s, rng):
        eps = rng.generator.standard_normal((s, self.dim))
        return self.mean + self.std * eps, eps

    def advi_grad(self, eps, target_scores):
        s = np.atleast_2d(target_scores)
        dstd = self._e2 / self.std
        gm = -s.mean(axis=0)
        gr = -self._e2 / self.var - np.mean(s * eps, axis=0) * dstd
        return np.concatenate([gm, gr])


class GaussianFull(VariationalFamily):
    """N(m, L L^T) with L lower triangular; diagonal stored as log-scale.

    Realized diagonal is sqrt(exp(2 l) + floor), so every variance stays
    above the floor. Parameters are [m, tril(L) row-major].
    """

    name = "gauss_full"

    def __init__(self, mean, tril_params):
        mean = np.asarray(mean, dtype=np.float64)
        d = mean.size
        self._tri = np.tril_indices(d)
        self._diag_pos = np.array([i * (i + 1) // 2 + i for i in range(d)])
        super().__init__(d, np.concatenate([mean, np.asarray(tril_params, dtype=np.float64)]))

    @classmethod
    def from_moments(cls, mean, cov):
        mean = np.asarray(mean, dtype=np.float64)
        L = cholesky(np.asarray(cov, dtype=np.float64))
        d = mean.size
        L = L.copy()
        idx = np.arange(d)
        L[idx, idx] = _log_scale_from_var(np.diag(L) ** 2)
        return cls(mean, L[np.tril_indices(d)])

    def _refresh(self):
        d = self.dim
        self.mean = self._params[:d]
        L = np.zeros((d, d))
        L[self._tri] = self._params[d:]
        idx = np.arange(d)
        self._e2 = np.exp(2.0 * L[idx, idx])
        diag = np.sqrt(self._e2 + VAR_FLOOR)
        L[idx, idx] = diag
        self.chol = L
        self._dldiag = self._e2 / diag

    @property
    def covariance(self):
        return self.chol @ self.chol.T

    def sample(self, s, rng):
        return self.mean + rng.generator.standard_normal((s, self.dim)) @ self.chol.T

    def _whiten(self, th):
        return solve_triangular(self.chol, (th - self.mean).T, lower=True, check_finite=False)

    def _log_density(self, th):
        u = self._whiten(th)
        return (-0.5 * np.sum(u * u, axis=0) - np.sum(np.log(np.diag(self.chol)))
                - 0.5 * self.dim * LOG_2PI)

    def _score(self, th):
        u = self._whiten(th)
        return -solve_triangular(self.chol, u, lower=True, trans="T", check_finite=False).T

    def proximal_loss_grad(self, batch, alpha):
        loss, gm, gL = kernels.gauss_full_prox(batch.thetas, batch.prev_scores, batch.target_scores,
                                               self.mean, self.chol, self._dldiag, float(alpha))
        return float(loss), np.concatenate([gm, gL[self._tri]])

    def advi_sample(self, s, rng):
        eps = rng.generator.standard_normal((s, self.dim))
        return self.mean + eps @ self.chol.T, eps

    def advi_grad(self, eps, target_scores):
        s = np.atleast_2d(target_scores)
        S = s.shape[0]
        gm = -s.mean(axis=0)
        gL = -np.tril(s.T @ eps) / S
        idx = np.arange(self.dim)
        gL[idx, idx] = (gL[idx, idx] - 1.0 / np.diag(self.chol)) * self._dldiag
        return np.concatenate([gm, gL[self._tri]])
