from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch


@dataclass(frozen=True)
class SampleBatch:
    """Samples from q_t with their frozen score fields for one outer iteration."""

    thetas: np.ndarray
    prev_scores: np.ndarray
    target_scores: np.ndarray
    aux: object = None

    def __post_init__(self):
        for name in ("thetas", "prev_scores", "target_scores"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=np.float64, order="C"))
        if not (self.thetas.shape == self.prev_scores.shape == self.target_scores.shape):
            raise DimensionMismatch("thetas, prev_scores and target_scores must share a shape")
        for a in (self.thetas, self.prev_scores, self.target_scores):
            a.setflags(write=False)


class VariationalFamily:
    """Parametric density q_lambda over R^d with a flat parameter vector.

    Subclasses implement sampling, log density, theta-score, the proximal
    loss gradient (theta held fixed) and a reparametrized ADVI gradient.
    """

    name = None

    def __init__(self, dim, params):
        self.dim = int(dim)
        self._params = np.array(params, dtype=np.float64)
        self._refresh()

    @property
    def n_params(self):
        return self._params.size

    def get_params(self):
        return self._params.copy()

    def set_params(self, flat):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != self._params.shape:
            raise DimensionMismatch(f"expected {self._params.shape} parameters, got {flat.shape}")
        self._params = flat.copy()
        self._refresh()

    def copy(self):
        new = object.__new__(type(self))
        new.__dict__.update(self.__dict__)
        new._params = self._params.copy()
        new._refresh()
        return new

    def _refresh(self):
        """Recompute cached derived quantities after a parameter change."""

    def _batch(self, theta):
        th = np.asarray(theta, dtype=np.float64)
        single = th.ndim == 1
        th = np.ascontiguousarray(np.atleast_2d(th))
        if th.shape[1] != self.dim:
            raise DimensionMismatch(f"expected dim {self.dim}, got {th.shape[1]}")
        return th, single

    def log_density(self, theta):
        th, single = self._batch(theta)
        out = self._log_density(th)
        return float(out[0]) if single else out

    def score_theta(self, theta):
        th, single = self._batch(theta)
        out = self._score(th)
        return out[0] if single else out

    def proximal_loss(self, batch, alpha):
        """Batch-mean of alpha*|g - prev|^2 + |g - target|^2 with g the theta-score."""
        g = self.score_theta(batch.thetas)
        S = batch.thetas.shape[0]
        return float((alpha * np.sum((g - batch.prev_scores) ** 2)
                      + np.sum((g - batch.target_scores) ** 2)) / S)

    def sample(self, s, rng):
        raise NotImplementedError

    def proximal_loss_grad(self, batch, alpha):
        raise NotImplementedError

    def advi_sample(self, s, rng):
        """Reparametrized draw: returns (thetas, aux) where aux feeds ``advi_grad``."""
        raise NotImplementedError

    def advi_grad(self, aux, target_scores):
        """Gradient of mean_i[log q(theta_i(lambda)) - log Phi(theta_i(lambda))].

        The Phi part enters only through the supplied (possibly noisy) scores.
        """
        raise NotImplementedError
