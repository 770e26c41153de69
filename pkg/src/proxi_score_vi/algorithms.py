"""Proximal score-matching VI, the ADVI baseline, and their optimizers."""
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteLoss, ShapeMismatch
from .families import GaussianFull, SampleBatch, gaussian_projection
from .metrics import MetricEvaluator, MetricSchedule, MetricTrace
from .targets import NoiseConfig

# child stream ids inside one run
_STREAM_Q, _STREAM_SCORE, _STREAM_METRIC = 1, 2, 3


# ---------------------------------------------------------------- schedules

@dataclass(frozen=True)
class Schedule:
    kind: str = "linear"
    constant: float = 0.5

    def __post_init__(self):
        if self.kind not in ("linear", "constant", "zero"):
            raise ValueError(f"unknown schedule {self.kind!r}")
        if self.kind == "constant" and not self.constant >= 0:
            raise ValueError("constant schedule value must be >= 0")

    def __call__(self, t, T):
        return alpha_schedule(self, t, T)


def alpha_schedule(kind, t, total):
    if isinstance(kind, str):
        kind = Schedule(kind)
    if not 0 <= t < total:
        raise ValueError(f"need 0 <= t < T, got t={t}, T={total}")
    if kind.kind == "linear":
        return t / total
    if kind.kind == "constant":
        return float(kind.constant)
    return 0.0


def telescoped_gamma(schedule, T):
    """prod_{t<T} alpha_t / (1 + alpha_t)."""
    if T < 1:
        raise ValueError("T must be >= 1")
    g = 1.0
    for t in range(T):
        a = alpha_schedule(schedule, t, T)
        g *= a / (1.0 + a)
    return g


# ---------------------------------------------------------------- optimizers

@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum: float = 0.0

    def build(self, n):
        if self.kind == "adam":
            return Adam(n, self.beta1, self.beta2, self.eps)
        if self.kind == "sgd":
            return SGD(n, self.momentum)
        raise ValueError(f"unknown optimizer {self.kind!r}")


class Adam:
    def __init__(self, n, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.n = n
        self.reset()

    def reset(self):
        self.m = np.zeros(self.n)
        self.v = np.zeros(self.n)
        self.t = 0

    def step(self, params, grad, eta):
        if params.shape != (self.n,) or grad.shape != (self.n,):
            raise ShapeMismatch(f"optimizer built for {self.n} parameters")
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        mhat = self.m / (1.0 - self.beta1**self.t)
        vhat = self.v / (1.0 - self.beta2**self.t)
        return params - eta * mhat / (np.sqrt(vhat) + self.eps)


class SGD:
    def __init__(self, n, momentum=0.0):
        self.momentum = momentum
        self.n = n
        self.reset()

    def reset(self):
        self.velocity = np.zeros(self.n)
        self.t = 0

    def step(self, params, grad, eta):
        if params.shape != (self.n,) or grad.shape != (self.n,):
            raise ShapeMismatch(f"optimizer built for {self.n} parameters")
        self.t += 1
        self.velocity = self.momentum * self.velocity + grad
        return params - eta * self.velocity


def optimizer_step(state, lambda_flat, grad, eta):
    return state.step(np.asarray(lambda_flat, dtype=np.float64), np.asarray(grad, dtype=np.float64), eta)


# ---------------------------------------------------------------- configs

@dataclass(frozen=True)
class ProximalConfig:
    outer_iterations: int = 500
    inner_steps: int = 20
    mc_samples: int = 1
    learning_rate: float = 1e-2
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    schedule: Schedule = field(default_factory=Schedule)
    reset_inner_optimizer: bool = False

    def __post_init__(self):
        if self.outer_iterations < 1 or self.mc_samples < 1:
            raise ValueError("T and S must be >= 1")
        if self.inner_steps < 0:
            raise ValueError("N must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")


@dataclass(frozen=True)
class AdviConfig:
    iterations: int = 500
    mc_samples: int = 1
    learning_rate: float = 1e-2
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if self.iterations < 1 or self.mc_samples < 1:
            raise ValueError("iterations and S must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")


# ---------------------------------------------------------------- runners

def _record(trace, evaluator, family, t, calls, loss=None):
    for name, value in evaluator.evaluate(family, t, loss).items():
        trace.record(t, calls, name, value)


def _check_finite(loss, params, trace, where):
    if not (np.isfinite(loss) and np.all(np.isfinite(params))):
        err = NonFiniteLoss(f"non-finite loss or parameters at {where}")
        err.trace = trace
        raise err


def run_proximal(target, family, cfg, noise=None, metrics=None, rng=None, trace=None,
                 batch_size=None):
    """Proximal stochastic-gradient score matching.

    Each outer iteration draws S samples from the current q, queries the
    (noisy / mini-batch) target score once per sample, freezes
    prev_scores = grad log q_t at those samples and takes N optimizer steps
    on the proximal loss with alpha_t. ``family`` is updated in place.
    """
    if family.dim != target.dim:
        raise ValueError("family and target dimensions differ")
    noise = noise or NoiseConfig()
    metrics = metrics or MetricSchedule(which=())
    trace = trace if trace is not None else MetricTrace(algo="proximal_sm", family=family.name,
                                                        target=target.kind)
    q_rng, s_rng = rng.child(_STREAM_Q), rng.child(_STREAM_SCORE)
    evaluator = MetricEvaluator(metrics, target, rng.child(_STREAM_METRIC))
    calls0 = target.score_calls
    T, N, S = cfg.outer_iterations, cfg.inner_steps, cfg.mc_samples
    opt = cfg.optimizer.build(family.n_params)
    _record(trace, evaluator, family, 0, 0)
    if N == 0:
        return trace
    lam = family.get_params()
    loss = float("nan")
    for t in range(T):
        alpha = alpha_schedule(cfg.schedule, t, T)
        thetas = family.sample(S, q_rng)
        s_hat = target.noisy_score(thetas, noise, s_rng, batch_size)
        batch = SampleBatch(thetas, family.score_theta(thetas), s_hat)
        if cfg.reset_inner_optimizer:
            opt.reset()
        for step in range(N):
            loss, grad = family.proximal_loss_grad(batch, alpha)
            _check_finite(loss, grad, trace, f"outer {t}, step {step}")
            lam = opt.step(lam, grad, cfg.learning_rate)
            _check_finite(loss, lam, trace, f"outer {t}, step {step}")
            family.set_params(lam)
        if evaluator.due(t + 1, T):
            _record(trace, evaluator, family, t + 1, target.score_calls - calls0, loss)
    return trace


def run_advi(target, family, cfg, noise=None, metrics=None, rng=None, trace=None,
             batch_size=None):
    """Reparametrized Monte Carlo descent on the negative ELBO.

    The log-potential gradient enters only via the (noisy) target score at
    the reparametrized samples.
    """
    if family.dim != target.dim:
        raise ValueError("family and target dimensions differ")
    noise = noise or NoiseConfig()
    metrics = metrics or MetricSchedule(which=())
    trace = trace if trace is not None else MetricTrace(algo="advi", family=family.name,
                                                        target=target.kind)
    q_rng, s_rng = rng.child(_STREAM_Q), rng.child(_STREAM_SCORE)
    evaluator = MetricEvaluator(metrics, target, rng.child(_STREAM_METRIC))
    want_loss = "loss" in metrics.which
    calls0 = target.score_calls
    T, S = cfg.iterations, cfg.mc_samples
    opt = cfg.optimizer.build(family.n_params)
    _record(trace, evaluator, family, 0, 0)
    lam = family.get_params()
    for t in range(T):
        thetas, aux = family.advi_sample(S, q_rng)
        s_hat = target.noisy_score(thetas, noise, s_rng, batch_size)
        grad = family.advi_grad(aux, s_hat)
        loss = 0.0
        if want_loss:
            loss = float(np.mean(family.log_density(thetas) - target.log_potential(thetas)))
        _check_finite(loss, grad, trace, f"iteration {t}")
        lam = opt.step(lam, grad, cfg.learning_rate)
        _check_finite(loss, lam, trace, f"iteration {t}")
        family.set_params(lam)
        if evaluator.due(t + 1, T):
            _record(trace, evaluator, family, t + 1, target.score_calls - calls0,
                    loss if want_loss else None)
    return trace


def run_perfect_minimization(target, init, schedule, T, return_path=False):
    """Iterate the exact Gaussian proximal step T times (idealized algorithm)."""
    mean = np.asarray(target.mean)
    cov = np.asarray(target.covariance)
    q = init if isinstance(init, GaussianFull) else GaussianFull.from_moments(init.mean, init.covariance)
    path = [q]
    for t in range(T):
        q = gaussian_projection(q, mean, cov, alpha_schedule(schedule, t, T))
        path.append(q)
    return path if return_path else q
