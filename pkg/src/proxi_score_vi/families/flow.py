import numpy as np

from .. import kernels
from ..errors import FlowInversionFailed
from .base import VariationalFamily

INVERT_TOL = 1e-13
INVERT_MAXIT = 200
# keeps w.u_hat strictly above -1 once softplus underflows
CONSTRAINT_MARGIN = 1e-6


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class PlanarFlow(VariationalFamily):
    """Single planar layer theta = z + u_hat * tanh(w.z + b) over z ~ N(0, I).

    u_hat is the invertibility-constrained version of u_raw, which makes
    w.u_hat = -1 + softplus(w.u_raw) + margin > -1. Parameters are [u_raw, w, b].
    """

    name = "planar_flow"

    def __init__(self, u_raw, w, b):
        u_raw = np.asarray(u_raw, dtype=np.float64)
        super().__init__(u_raw.size, np.concatenate([u_raw, np.asarray(w, dtype=np.float64), [float(b)]]))

    @classmethod
    def from_uhat(cls, u_hat, w, b):
        """Build the flow whose constrained vector equals ``u_hat`` (needs w.u_hat > -1)."""
        u_hat = np.asarray(u_hat, dtype=np.float64)
        w = np.asarray(w, dtype=np.float64)
        nw = w @ w
        if nw == 0.0:
            return cls(u_hat, w, b)
        c = w @ u_hat
        if not c > -1.0 + CONSTRAINT_MARGIN:
            raise ValueError("w . u_hat must exceed -1 + CONSTRAINT_MARGIN")
        t = np.log(np.expm1(c + 1.0 - CONSTRAINT_MARGIN))
        return cls(u_hat + (t - c) * w / nw, w, b)

    def _refresh(self):
        d = self.dim
        p = self._params
        self.u_raw = p[:d]
        self.w = p[d:2 * d]
        self.b = float(p[2 * d])
        nw = float(self.w @ self.w)
        self._nw = nw
        t = float(self.w @ self.u_raw)
        self._t = t
        if nw > 0.0:
            self.u_hat = self.u_raw + (-1.0 + CONSTRAINT_MARGIN + _softplus(t) - t) * self.w / nw
        else:
            self.u_hat = self.u_raw.copy()

    def _uhat_vjp(self, G):
        """Pull a gradient w.r.t. u_hat back to (u_raw, w)."""
        if self._nw == 0.0:
            return G, np.zeros(self.dim)
        nw, t, w, u = self._nw, self._t, self.w, self.u_raw
        mt = -1.0 + CONSTRAINT_MARGIN + _softplus(t) - t
        dmt = _sigmoid(t) - 1.0
        gw_dot = float(G @ w)
        g_u = G + (gw_dot / nw) * dmt * w
        g_w = (mt / nw) * G + gw_dot * (dmt * u / nw - 2.0 * mt * w / nw**2)
        return g_u, g_w

    def forward(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        return z + np.outer(np.tanh(z @ self.w + self.b), self.u_hat)

    def invert(self, theta):
        th, single = self._batch(theta)
        z, _, ok = kernels.planar_invert(th, self.u_hat, self.w, self.b, INVERT_TOL, INVERT_MAXIT)
        if not ok:
            raise FlowInversionFailed("scalar solve did not converge")
        return z[0] if single else z

    def sample(self, s, rng):
        return self.forward(rng.generator.standard_normal((s, self.dim)))

    def _eval(self, th):
        logq, score, ok = kernels.planar_eval(th, self.u_hat, self.w, self.b, INVERT_TOL, INVERT_MAXIT)
        if not ok:
            raise FlowInversionFailed("scalar solve did not converge")
        return logq, score

    def _log_density(self, th):
        return self._eval(th)[0]

    def _score(self, th):
        return self._eval(th)[1]

    def proximal_loss_grad(self, batch, alpha):
        loss, gu, gw, gb, ok = kernels.planar_prox(
            batch.thetas, batch.prev_scores, batch.target_scores,
            self.u_hat, self.w, self.b, float(alpha), INVERT_TOL, INVERT_MAXIT)
        if not ok:
            raise FlowInversionFailed("scalar solve did not converge")
        g_u, g_w = self._uhat_vjp(gu)
        return float(loss), np.concatenate([g_u, gw + g_w, [gb]])

    def advi_sample(self, s, rng):
        z = rng.generator.standard_normal((s, self.dim))
        return self.forward(z), z

    def advi_grad(self, z, target_scores):
        s = np.atleast_2d(target_scores)
        S = s.shape[0]
        c = float(self.w @ self.u_hat)
        al = z @ self.w + self.b
        h = np.tanh(al)
        hp = 1.0 - h * h
        det = 1.0 + c * hp
        g_c = -hp / det
        g_al = 2.0 * c * h * hp / det - (s @ self.u_hat) * hp
        G_uhat = (-(h @ s) + np.sum(g_c) * self.w) / S
        gw = (np.sum(g_c) * self.u_hat + g_al @ z) / S
        gb = np.sum(g_al) / S
        g_u, g_w = self._uhat_vjp(G_uhat)
        return np.concatenate([g_u, gw + g_w, [gb]])
