import numpy as np

from .. import kernels
from .base import VariationalFamily

VAR_FLOOR = kernels.VAR_FLOOR
LOG_2PI = np.log(2.0 * np.pi)


def _softmax(x, axis=-1):
    e = np.exp(x - np.max(x, axis=axis, keepdims=True))
    return e / np.sum(e, axis=axis, keepdims=True)


class GaussianMixtureDiag(VariationalFamily):
    """Mixture of K diagonal Gaussians; parameters [logits, means, log_stds].

    ``gumbel_temperature`` only affects the reparametrized ADVI sampler.
    """

    name = "gauss_mixture"

    def __init__(self, logits, means, log_stds, gumbel_temperature=0.05):
        logits = np.asarray(logits, dtype=np.float64)
        means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        log_stds = np.broadcast_to(np.asarray(log_stds, dtype=np.float64), means.shape)
        self.order = logits.size
        if means.shape[0] != self.order:
            raise ValueError("logits and means disagree on the number of components")
        if not gumbel_temperature > 0:
            raise ValueError("gumbel temperature must be positive")
        self.gumbel_temperature = float(gumbel_temperature)
        super().__init__(means.shape[1], np.concatenate([logits, means.ravel(), log_stds.ravel()]))

    def _refresh(self):
        K, d = self.order, self.dim
        p = self._params
        self.logits = p[:K]
        self.means = p[K:K + K * d].reshape(K, d)
        self.log_stds = p[K + K * d:].reshape(K, d)
        self._e2 = np.exp(2.0 * self.log_stds)
        self.var = self._e2 + VAR_FLOOR
        self.std = np.sqrt(self.var)
        self.weights = _softmax(self.logits)

    def sample(self, s, rng):
        g = rng.generator
        comp = g.choice(self.order, size=s, p=self.weights)
        return self.means[comp] + self.std[comp] * g.standard_normal((s, self.dim))

    def _log_density(self, th):
        return kernels.mixture_diag_eval(th, self.logits, self.means, self.log_stds)[0]

    def _score(self, th):
        return kernels.mixture_diag_eval(th, self.logits, self.means, self.log_stds)[1]

    def responsibilities(self, theta):
        th, _ = self._batch(theta)
        diff = th[:, None, :] - self.means[None]
        lp = (np.log(self.weights)[None] - 0.5 * np.sum(diff**2 / self.var, axis=2)
              - 0.5 * np.sum(np.log(self.var), axis=1)[None])
        return _softmax(lp, axis=1)

    def proximal_loss_grad(self, batch, alpha):
        loss, gl, gmu, grho = kernels.mixture_diag_prox(
            batch.thetas, batch.prev_scores, batch.target_scores,
            self.logits, self.means, self.log_stds, float(alpha))
        return float(loss), np.concatenate([gl, gmu.ravel(), grho.ravel()])

    def advi_sample(self, s, rng):
        """Gumbel-softmax relaxed draw: theta = sum_k y_k (m_k + sd_k * eps_k)."""
        g = rng.generator
        gum = g.gumbel(size=(s, self.order))
        y = _softmax((self.logits + gum) / self.gumbel_temperature, axis=1)
        eps = g.standard_normal((s, self.order, self.dim))
        thk = self.means[None] + self.std[None] * eps
        theta = np.einsum("sk,skd->sd", y, thk)
        return theta, (theta, y, eps, thk)

    def advi_grad(self, aux, target_scores):
        theta, y, eps, thk = aux
        s = np.atleast_2d(target_scores)
        S = s.shape[0]
        r = self.responsibilities(theta)
        diff = theta[:, None, :] - self.means[None]
        v = self.score_theta(theta) - s

        gl = np.mean(r - self.weights, axis=0)
        gmu = np.einsum("sk,skd->kd", r, diff / self.var) / S
        dlogn = (-0.5 / self.var + 0.5 * diff**2 / self.var**2) * 2.0 * self._e2
        grho = np.einsum("sk,skd->kd", r, dlogn) / S

        vk = np.einsum("sd,skd->sk", v, thk)
        gl += np.mean(y * (vk - np.sum(y * vk, axis=1, keepdims=True)), axis=0) / self.gumbel_temperature
        gmu += np.einsum("sk,sd->kd", y, v) / S
        grho += np.einsum("sk,sd,skd->kd", y, v, eps) / S * (self._e2 / self.std)
        return np.concatenate([gl, gmu.ravel(), grho.ravel()])
