"""Divergence and predictive-uncertainty metrics, plus the run trace container.

None of these touch a target's score counter: they use log densities,
log potentials and predictive probabilities only.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import EmptyInput, FamilyMismatch, NotApplicable, NotSamplable

METRIC_NAMES = ("fkl", "nelbo", "param_err", "ece", "nll", "loss")


@dataclass(frozen=True)
class MetricSchedule:
    which: tuple = ("fkl",)
    every_k_outer: int = 1
    fkl_samples: int = 500
    nelbo_samples: int = 1000
    ece_bins: int = 10
    posterior_predictive_samples: int = 5

    def __post_init__(self):
        object.__setattr__(self, "which", tuple(self.which))
        bad = [m for m in self.which if m not in METRIC_NAMES]
        if bad:
            raise ValueError(f"unknown metrics {bad}; expected a subset of {METRIC_NAMES}")
        for k in ("every_k_outer", "fkl_samples", "nelbo_samples", "ece_bins",
                  "posterior_predictive_samples"):
            if getattr(self, k) < 1:
                raise ValueError(f"{k} must be >= 1")


@dataclass
class MetricTrace:
    run_id: str = ""
    algo: str = ""
    target: str = ""
    family: str = ""
    seed: int = 0
    rows: list = field(default_factory=list)

    def record(self, outer_t, score_calls, metric, value):
        if self.rows and score_calls < self.rows[-1][1]:
            raise ValueError("score_calls must be non-decreasing")
        self.rows.append((int(outer_t), int(score_calls), metric, float(value)))

    def metrics(self):
        return sorted({r[2] for r in self.rows})

    def series(self, metric):
        """(outer_t, score_calls, value) arrays for one metric."""
        rows = [r for r in self.rows if r[2] == metric]
        if not rows:
            return np.zeros(0, int), np.zeros(0, int), np.zeros(0)
        t, c, _, v = zip(*rows)
        return np.array(t), np.array(c), np.array(v)

    def final(self, metric):
        _, _, v = self.series(metric)
        return float(v[-1]) if v.size else float("nan")

    def final_metrics(self):
        return {m: self.final(m) for m in self.metrics()}


def forward_kl(target, family, n, rng):
    """Monte Carlo KL(pi || q) from n target draws."""
    if not target.samplable:
        raise NotSamplable(f"forward KL needs a samplable target, got {target.kind}")
    x = target.sample(n, rng)
    return float(np.mean(target.log_density(x) - family.log_density(x)))


def negative_elbo(target, family, n, rng):
    """Monte Carlo E_q[log q - log Phi] from n draws of q."""
    x = family.sample(n, rng)
    return float(np.mean(family.log_density(x) - target.log_potential(x)))


def param_error(family, truth):
    """|m - m_true|_2 + |V - V_true|_F for a Gaussian family."""
    if not hasattr(family, "covariance") or not hasattr(family, "mean"):
        raise FamilyMismatch("parameter error needs a Gaussian variational family")
    mean = getattr(truth, "mean")
    cov = getattr(truth, "covariance")
    return float(np.linalg.norm(family.mean - mean) + np.linalg.norm(family.covariance - cov))


def ece(confidences, labels, m_bins=10):
    """Calibration error over all (example, class) confidences.

    Each p(y=j|x) goes into one of ``m_bins`` equal-width bins on [0, 1];
    an entry counts as accurate when j is the true label. Combined as
    (1/M) * sum_m binsize[m] / (N*K) * |acc[m] - conf[m]|, with acc and
    conf averaged within each bin.
    """
    P = np.asarray(confidences, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if P.size == 0 or y.size == 0:
        raise EmptyInput("ece needs at least one prediction")
    P = np.atleast_2d(P)
    N, K = P.shape
    if y.shape[0] != N:
        raise ValueError("labels and confidences disagree on N")
    if np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("each probability vector must sum to 1")
    correct = np.zeros((N, K))
    correct[np.arange(N), y] = 1.0
    counts, acc, cs = kernels.ece_bins(np.ascontiguousarray(P.ravel()),
                                       np.ascontiguousarray(correct.ravel()), int(m_bins))
    nz = counts > 0
    gap = np.abs(acc[nz] / counts[nz] - cs[nz] / counts[nz])
    return float(np.sum(counts[nz] / (N * K) * gap) / m_bins)


def predictive_probs(target, posterior_samples, inputs):
    if not hasattr(target, "predict_proba"):
        raise NotApplicable(f"{target.kind} target has no predictive model")
    thetas = np.atleast_2d(posterior_samples)
    if thetas.shape[0] < 1:
        raise EmptyInput("need at least one posterior sample")
    return np.mean([target.predict_proba(t, inputs) for t in thetas], axis=0)


def predictive_nll(target, posterior_samples, test_inputs, test_labels):
    """Mean of -log (1/R) sum_r p(y*|x*, theta_r) over test points."""
    P = predictive_probs(target, posterior_samples, test_inputs)
    y = np.asarray(test_labels, dtype=np.int64)
    return float(-np.mean(np.log(np.maximum(P[np.arange(y.size), y], 1e-300))))


class MetricEvaluator:
    """Evaluates the scheduled metrics for one run.

    Each evaluation at outer iteration t draws from its own child stream,
    so the metric schedule never perturbs the optimization trajectory.
    """

    def __init__(self, schedule, target, rng):
        self.schedule = schedule
        self.target = target
        self.rng = rng
        if "fkl" in schedule.which and not target.samplable:
            raise NotSamplable("fkl requested for a target without samples")
        if ("ece" in schedule.which or "nll" in schedule.which):
            data = getattr(target, "data", None)
            if data is None or data.test_inputs is None:
                raise NotApplicable("ece/nll need a Bayesian target with held-out data")

    def due(self, t, T):
        return t % self.schedule.every_k_outer == 0 or t == T

    def evaluate(self, family, t, loss=None):
        sch = self.schedule
        rng = self.rng.child(t)
        out = {}
        for name in sch.which:
            r = rng.child(METRIC_NAMES.index(name))
            if name == "fkl":
                out[name] = forward_kl(self.target, family, sch.fkl_samples, r)
            elif name == "nelbo":
                out[name] = negative_elbo(self.target, family, sch.nelbo_samples, r)
            elif name == "param_err":
                out[name] = param_error(family, self.target.params)
            elif name in ("ece", "nll"):
                data = self.target.data
                thetas = family.sample(sch.posterior_predictive_samples, r)
                P = predictive_probs(self.target, thetas, data.test_inputs)
                y = np.asarray(data.test_labels, dtype=np.int64)
                if name == "nll":
                    out[name] = float(-np.mean(np.log(np.maximum(P[np.arange(y.size), y], 1e-300))))
                else:
                    out[name] = ece(P / P.sum(axis=1, keepdims=True), y, sch.ece_bins)
            elif name == "loss" and loss is not None:
                out[name] = loss
        return out
