"""Target distributions with exact, noisy and mini-batch score oracles.

Every target counts its score evaluations: one per theta, so a batch of S
thetas adds S. Log-potential and log-density evaluations are free.
"""
import threading
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (DimensionMismatch, EmptyBatch, GenerationFailed,
                     NotApplicable, NotSamplable)
from .numerics import cholesky

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class NoiseConfig:
    beta: float = 0.0

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError("noise level beta must be nonnegative")


def inject_noise(s, noise, rng):
    """s + beta * ||s||_inf * N(0, I), row-wise for a batch of scores."""
    beta = noise.beta if isinstance(noise, NoiseConfig) else float(noise)
    s = np.asarray(s, dtype=np.float64)
    if beta == 0.0:
        return s.copy()
    eps = rng.generator.standard_normal(s.shape)
    scale = np.max(np.abs(s), axis=-1, keepdims=True)
    return s + beta * scale * eps


class TargetOracle:
    kind = None
    samplable = False

    def __init__(self, dim):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = int(dim)
        self._calls = 0
        self._lock = threading.Lock()

    @property
    def score_calls(self):
        return self._calls

    def reset_counter(self):
        with self._lock:
            self._calls = 0

    def _count(self, n):
        with self._lock:
            self._calls += int(n)

    def _as_batch(self, theta):
        th = np.asarray(theta, dtype=np.float64)
        single = th.ndim == 1
        th = np.atleast_2d(th)
        if th.ndim != 2 or th.shape[1] != self.dim:
            raise DimensionMismatch(f"expected theta of dim {self.dim}, got shape {np.shape(theta)}")
        return np.ascontiguousarray(th), single

    def score(self, theta):
        """Exact gradient of log potential; theta may be (d,) or (S, d)."""
        th, single = self._as_batch(theta)
        self._count(th.shape[0])
        s = self._score(th)
        return s[0] if single else s

    def log_potential(self, theta):
        th, single = self._as_batch(theta)
        lp = self._log_potential(th)
        return float(lp[0]) if single else lp

    def minibatch_score(self, theta, batch, rng=None):
        raise NotApplicable(f"{self.kind} target has no data to mini-batch")

    def noisy_score(self, theta, noise, rng, batch_size=None):
        """Score oracle as seen by the optimizers: optional mini-batch, then noise."""
        if batch_size is not None:
            s = self.minibatch_score(theta, batch_size, rng)
        else:
            s = self.score(theta)
        return inject_noise(s, noise, rng)

    def sample(self, n, rng):
        raise NotSamplable(f"{self.kind} target cannot be sampled")

    def log_density(self, theta):
        raise NotSamplable(f"{self.kind} target has no normalized density")

    def _score(self, th):
        raise NotImplementedError

    def _log_potential(self, th):
        raise NotImplementedError


# --------------------------------------------------------------- synthetic

@dataclass
class GaussianTargetParams:
    mean: np.ndarray
    covariance: np.ndarray
    cholesky_cache: np.ndarray = None

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.covariance = np.asarray(self.covariance, dtype=np.float64)
        self.cholesky_cache = cholesky(self.covariance)


@dataclass
class MixtureTargetParams:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    choleskys: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        self.covariances = np.asarray(self.covariances, dtype=np.float64)
        if self.covariances.ndim == 2:
            self.covariances = self.covariances[None]
        if abs(self.weights.sum() - 1.0) > 1e-12 or np.any(self.weights <= 0):
            raise ValueError("mixture weights must be positive and sum to 1")
        K = self.weights.shape[0]
        if self.means.shape[0] != K or self.covariances.shape[0] != K:
            raise ValueError("weights, means and covariances disagree on the order")
        self.choleskys = np.stack([cholesky(c) for c in self.covariances])

    @property
    def order(self):
        return self.weights.shape[0]


class GaussianTarget(TargetOracle):
    """N(mean, cov); the potential drops the normalizer."""

    kind = "gaussian"
    samplable = True

    def __init__(self, params):
        if not isinstance(params, GaussianTargetParams):
            raise TypeError("expected GaussianTargetParams")
        super().__init__(params.mean.shape[0])
        self.params = params
        L = params.cholesky_cache
        self._logw = np.zeros(1)
        self._means = params.mean[None, :].copy()
        self._chols = np.ascontiguousarray(L[None])
        self.log_normalizer = 0.5 * self.dim * LOG_2PI + float(np.sum(np.log(np.diag(L))))

    @classmethod
    def from_moments(cls, mean, cov):
        return cls(GaussianTargetParams(mean, cov))

    def _eval(self, th):
        return kernels.mixture_full_eval(th, self._logw, self._means, self._chols)

    def _score(self, th):
        return self._eval(th)[1]

    def _log_potential(self, th):
        return self._eval(th)[0] + self.log_normalizer

    def log_density(self, theta):
        th, single = self._as_batch(theta)
        lp = self._eval(th)[0]
        return float(lp[0]) if single else lp

    def sample(self, n, rng):
        eps = rng.generator.standard_normal((n, self.dim))
        return self.params.mean + eps @ self.params.cholesky_cache.T


class MixtureTarget(TargetOracle):
    """Full-covariance Gaussian mixture; potential equals the normalized density."""

    kind = "gaussian_mixture"
    samplable = True
    log_normalizer = 0.0

    def __init__(self, params):
        if not isinstance(params, MixtureTargetParams):
            raise TypeError("expected MixtureTargetParams")
        super().__init__(params.means.shape[1])
        self.params = params
        self._logw = np.log(params.weights)
        self._means = np.ascontiguousarray(params.means)
        self._chols = np.ascontiguousarray(params.choleskys)

    def _eval(self, th):
        return kernels.mixture_full_eval(th, self._logw, self._means, self._chols)

    def _score(self, th):
        return self._eval(th)[1]

    def _log_potential(self, th):
        return self._eval(th)[0]

    def log_density(self, theta):
        th, single = self._as_batch(theta)
        lp = self._eval(th)[0]
        return float(lp[0]) if single else lp

    def sample(self, n, rng, return_components=False):
        g = rng.generator
        comp = g.choice(self.params.order, size=n, p=self.params.weights)
        eps = g.standard_normal((n, self.dim))
        out = self._means[comp] + np.einsum("nij,nj->ni", self._chols[comp], eps)
        return (out, comp) if return_components else out


def make_random_mixture(dim, order, rng, max_attempts=1000):
    """Random mixture: N(0,1) means, I + a X X^T covariances, softmax(1 + b) weights."""
    if dim < 1 or order < 1:
        raise ValueError("dim and order must be >= 1")
    g = rng.generator
    means = g.standard_normal((order, dim))
    covs = []
    for _ in range(order):
        for _attempt in range(max_attempts):
            X = g.standard_normal((dim, dim))
            a = g.normal(0.0, 0.3)
            cov = np.eye(dim) + a * (X @ X.T)
            cov = 0.5 * (cov + cov.T)
            if np.linalg.eigvalsh(cov)[0] > 1e-6:
                break
        else:
            raise GenerationFailed(f"no positive-definite covariance after {max_attempts} draws")
        covs.append(cov)
    logits = 1.0 + g.normal(0.0, 0.3, size=order)
    w = np.exp(logits - logits.max())
    w /= w.sum()
    return MixtureTargetParams(w, means, np.stack(covs))


def make_random_gaussian(dim, rng):
    p = make_random_mixture(dim, 1, rng)
    return GaussianTargetParams(p.means[0], p.covariances[0])


# ---------------------------------------------------------------- bayesian

@dataclass
class BayesDataset:
    inputs: np.ndarray
    labels: np.ndarray
    prior_variance: float = 1.0
    likelihood_temperature: float = 1.0
    test_inputs: np.ndarray = None
    test_labels: np.ndarray = None

    def __post_init__(self):
        self.inputs = np.ascontiguousarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.inputs.ndim != 2 or self.inputs.shape[0] < 1:
            raise ValueError("inputs must be an (n, p) matrix with n >= 1")
        if self.labels.shape[0] != self.inputs.shape[0]:
            raise ValueError("labels and inputs disagree on n")
        if not (self.prior_variance > 0 and self.likelihood_temperature > 0):
            raise ValueError("prior variance and temperature must be positive")

    @property
    def n(self):
        return self.inputs.shape[0]


class _BayesTarget(TargetOracle):
    """Posterior with Gaussian prior N(0, s2 I) and a tempered likelihood."""

    n_classes = None

    def __init__(self, dim, data):
        super().__init__(dim)
        self.data = data

    def _loglik_grad(self, theta, X, Y):
        """(log p(B|theta), its gradient) for a data subset."""
        raise NotImplementedError

    def predict_proba(self, theta, X):
        raise NotImplementedError

    def _prior(self, th):
        s2 = self.data.prior_variance
        lp = -0.5 * np.sum(th * th, axis=1) / s2 - 0.5 * self.dim * np.log(2 * np.pi * s2)
        return lp, -th / s2

    def _log_potential(self, th):
        lp, _ = self._prior(th)
        X, Y = self.data.inputs, self.data.labels
        return lp + np.array([self._loglik_grad(t, X, Y)[0] for t in th])

    def _score(self, th):
        _, g = self._prior(th)
        X, Y = self.data.inputs, self.data.labels
        return g + np.stack([self._loglik_grad(t, X, Y)[1] for t in th])

    def likelihood_score(self, theta):
        """Gradient of the full-data log likelihood only (not counted)."""
        return self._loglik_grad(np.asarray(theta, dtype=np.float64),
                                 self.data.inputs, self.data.labels)[1]

    def minibatch_score(self, theta, batch, rng=None):
        """Prior score + (|D|/|B|) * batch likelihood score.

        ``batch`` is an index array, or an int size drawn uniformly without
        replacement from ``rng`` (one fresh batch per theta row).
        """
        th, single = self._as_batch(theta)
        n = self.data.n
        if np.isscalar(batch):
            size = int(batch)
            if size < 1:
                raise EmptyBatch("batch size must be >= 1")
            if size > n:
                raise ValueError("batch larger than the dataset")
            batches = [rng.generator.choice(n, size=size, replace=False) for _ in range(th.shape[0])]
        else:
            idx = np.asarray(batch, dtype=np.int64)
            if idx.size == 0:
                raise EmptyBatch("empty mini-batch")
            batches = [idx] * th.shape[0]
        self._count(th.shape[0])
        _, g = self._prior(th)
        out = np.empty_like(th)
        for i, (t, idx) in enumerate(zip(th, batches)):
            lg = self._loglik_grad(t, self.data.inputs[idx], self.data.labels[idx])[1]
            out[i] = g[i] + (n / idx.size) * lg
        return out[0] if single else out


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


class BayesLogisticTarget(_BayesTarget):
    kind = "bayes_logistic"
    n_classes = 2

    def __init__(self, data):
        super().__init__(data.inputs.shape[1], data)
        self.data.labels = self.data.labels.astype(np.float64)

    def _loglik_grad(self, theta, X, Y):
        z = X @ theta
        tau = self.data.likelihood_temperature
        ll = np.sum(Y * _log_sigmoid(z) + (1.0 - Y) * _log_sigmoid(-z)) / tau
        p = np.exp(_log_sigmoid(z))
        return float(ll), X.T @ (Y - p) / tau

    def predict_proba(self, theta, X):
        p1 = np.exp(_log_sigmoid(np.asarray(X) @ theta))
        return np.column_stack([1.0 - p1, p1])


class BayesMLPTarget(_BayesTarget):
    """One-hidden-layer tanh classifier with p(D|theta) = exp(-CE(theta; D) / tau)."""

    kind = "bayes_mlp"

    def __init__(self, data, hidden_dim, classes):
        p = data.inputs.shape[1]
        self.input_dim = p
        self.hidden_dim = int(hidden_dim)
        self.n_classes = int(classes)
        super().__init__((p + 1) * hidden_dim + (hidden_dim + 1) * classes, data)
        self.data.labels = self.data.labels.astype(np.int64)

    def _loglik_grad(self, theta, X, Y):
        loss, g = kernels.mlp_loss_grad(np.ascontiguousarray(theta), np.ascontiguousarray(X),
                                        np.ascontiguousarray(Y), self.hidden_dim, self.n_classes)
        tau = self.data.likelihood_temperature
        return -loss / tau, -g / tau

    def predict_proba(self, theta, X):
        p, h, K = self.input_dim, self.hidden_dim, self.n_classes
        o1, o2, o3 = p * h, p * h + h, p * h + h + h * K
        H = np.tanh(np.asarray(X) @ theta[:o1].reshape(p, h) + theta[o1:o2])
        logits = H @ theta[o2:o3].reshape(h, K) + theta[o3:]
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=1, keepdims=True)


def make_bayes_logistic(n, p, rng, prior_variance=1.0, n_test=None, tau=1.0):
    if n < 2 or p < 1:
        raise ValueError("need n >= 2 and p >= 1")
    g = rng.generator
    n_test = n if n_test is None else n_test
    w_true = g.standard_normal(p)
    X = g.standard_normal((n + n_test, p))
    y = (g.random(n + n_test) < 1.0 / (1.0 + np.exp(-(X @ w_true)))).astype(np.float64)
    data = BayesDataset(X[:n], y[:n], prior_variance, tau, X[n:], y[n:])
    target = BayesLogisticTarget(data)
    target.true_weights = w_true
    return target, data


def make_bayes_mlp(n, input_dim, hidden_dim, classes, tau, rng, prior_variance=1.0,
                   n_test=None, spread=2.0):
    """Gaussian-blob classification data with a tanh-MLP posterior."""
    if min(n, input_dim, hidden_dim, classes) < 1 or not tau > 0:
        raise ValueError("counts must be >= 1 and tau > 0")
    g = rng.generator
    n_test = n if n_test is None else n_test
    centers = spread * g.standard_normal((classes, input_dim))
    y = g.permutation(np.arange(n + n_test) % classes)
    X = centers[y] + g.standard_normal((n + n_test, input_dim))
    data = BayesDataset(X[:n], y[:n], prior_variance, tau, X[n:], y[n:])
    return BayesMLPTarget(data, hidden_dim, classes), data
