"""Experiment matrix execution.

One run is a (seed, beta, algorithm, schedule, S) combination. Every run
derives its random streams from its own seed only, so results do not depend
on how many workers execute the matrix or in which order.
"""
import hashlib
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..algorithms import (AdviConfig, OptimizerConfig, ProximalConfig, Schedule, run_advi,
                          run_perfect_minimization, run_proximal)
from ..errors import NonFiniteLoss
from ..families import make_family
from ..metrics import MetricEvaluator, MetricSchedule, MetricTrace
from ..numerics import SeededRng
from ..targets import (GaussianTarget, MixtureTarget, NoiseConfig, make_bayes_logistic,
                       make_bayes_mlp, make_random_gaussian, make_random_mixture)

THREADS_ENV = "PROXI_SCORE_VI_THREADS"

# child streams of a run's root generator
_RNG_TARGET, _RNG_INIT, _RNG_ALGO = 0, 1, 2


@dataclass(frozen=True)
class Variant:
    algo: str
    schedule: str
    S: int
    beta: float
    seed: int

    @property
    def group(self):
        """Key shared by all seeds of one setting."""
        return (self.algo, self.schedule, self.S, self.beta)


@dataclass
class RunResult:
    run_id: str
    variant: Variant
    trace: MetricTrace
    status: str = "completed"
    final_metrics: dict = field(default_factory=dict)
    elapsed: float = 0.0
    message: str = ""


def default_parallelism():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def expand_variants(cfg):
    """All runs of a config in a fixed order; axes that do not apply collapse to '-'."""
    out, seen = [], set()
    for seed in cfg.run.seeds:
        for beta in cfg.noise.beta:
            for algo in cfg.algo.algo:
                for sched in cfg.algo.schedule:
                    for S in cfg.algo.S:
                        if algo == "advi":
                            v = Variant(algo, "-", S, beta, seed)
                        elif algo == "perfect_min":
                            v = Variant(algo, sched, 0, 0.0, seed)
                        else:
                            v = Variant(algo, sched, S, beta, seed)
                        if v not in seen:
                            seen.add(v)
                            out.append(v)
    return out


def run_id_for(cfg, variant):
    key = f"{cfg.canonical()}|{variant.algo}|{variant.schedule}|{variant.S}|{variant.beta!r}|{variant.seed}"
    return hashlib.sha256(key.encode()).hexdigest()[:16]


def build_target(cfg, seed):
    t = cfg.target
    rng = SeededRng(t.data_seed if t.data_seed is not None else seed).child(_RNG_TARGET)
    if t.kind == "gaussian":
        return GaussianTarget(make_random_gaussian(t.dim, rng))
    if t.kind == "gaussian_mixture":
        return MixtureTarget(make_random_mixture(t.dim, t.order, rng))
    if t.kind == "bayes_logistic":
        return make_bayes_logistic(t.n, t.features, rng, prior_variance=t.prior_variance,
                                   n_test=t.n_test, tau=t.tau)[0]
    return make_bayes_mlp(t.n, t.features, t.hidden_dim, t.classes, t.tau, rng,
                          prior_variance=t.prior_variance, n_test=t.n_test)[0]


def build_family(cfg, dim, seed):
    f = cfg.family
    return make_family(f.family, dim, SeededRng(seed).child(_RNG_INIT), init=f.init,
                       small_eig_value=f.small_eig_value, K=f.K,
                       gumbel_temperature=f.gumbel_temperature)


def _schedule(cfg, name):
    return Schedule(name, cfg.algo.schedule_constant)


def _optimizer(cfg):
    a = cfg.algo
    return OptimizerConfig(a.optimizer, a.beta1, a.beta2, a.eps, a.momentum)


def _metric_schedule(cfg):
    m = cfg.metrics
    return MetricSchedule(m.which, m.every_k_outer, m.fkl_samples, m.nelbo_samples,
                          m.ece_bins, m.posterior_predictive_samples)


def _run_perfect(cfg, variant, target, family, trace):
    sched = _schedule(cfg, variant.schedule)
    path = run_perfect_minimization(target.params, family, sched, cfg.algo.T, return_path=True)
    ms = _metric_schedule(cfg)
    ev = MetricEvaluator(ms, target, SeededRng(variant.seed).child(_RNG_ALGO).child(3))
    for t, q in enumerate(path):
        if ev.due(t, cfg.algo.T) or t == 0:
            for name, value in ev.evaluate(q, t).items():
                trace.record(t, 0, name, value)
    return trace


def execute(cfg, variant):
    """Run one matrix cell; never raises."""
    rid = run_id_for(cfg, variant)
    trace = MetricTrace(run_id=rid, algo=variant.algo, target=cfg.target.kind,
                        family=cfg.family.family, seed=variant.seed)
    start = time.perf_counter()
    status, message = "completed", ""
    try:
        target = build_target(cfg, variant.seed)
        family = build_family(cfg, target.dim, variant.seed)
        rng = SeededRng(variant.seed).child(_RNG_ALGO)
        noise = NoiseConfig(variant.beta)
        ms = _metric_schedule(cfg)
        a = cfg.algo
        if variant.algo == "proximal_sm":
            pc = ProximalConfig(a.T, a.N, variant.S, a.learning_rate, _optimizer(cfg),
                                _schedule(cfg, variant.schedule), a.reset_inner_optimizer)
            run_proximal(target, family, pc, noise, ms, rng, trace, cfg.target.batch_size)
        elif variant.algo == "advi":
            ac = AdviConfig(a.T, variant.S, a.advi_learning_rate or a.learning_rate, _optimizer(cfg))
            run_advi(target, family, ac, noise, ms, rng, trace, cfg.target.batch_size)
        else:
            _run_perfect(cfg, variant, target, family, trace)
    except NonFiniteLoss as exc:
        status, message = "aborted_nonfinite", str(exc)
    except Exception as exc:  # isolation: a broken run must not take the matrix down
        status = "failed"
        message = f"{type(exc).__name__}: {exc}"
    elapsed = time.perf_counter() - start
    return RunResult(rid, variant, trace, status, trace.final_metrics(), elapsed, message)


def _execute_packed(args):
    return execute(*args)


def run_matrix(cfg, parallelism=None, variants=None):
    """Execute every run of ``cfg``; results come back in expand_variants order."""
    variants = expand_variants(cfg) if variants is None else list(variants)
    workers = default_parallelism() if parallelism is None else int(parallelism)
    if workers < 1:
        raise ValueError("parallelism must be >= 1")
    jobs = [(cfg, v) for v in variants]
    if workers == 1 or len(jobs) <= 1:
        return [execute(c, v) for c, v in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_execute_packed, jobs))


def summarize(results, metric):
    """Per-group (mean, std, n) of the final value of ``metric`` over completed seeds."""
    groups = {}
    for r in results:
        if r.status == "completed" and metric in r.final_metrics:
            groups.setdefault(r.variant.group, []).append(r.final_metrics[metric])
    return {g: (float(np.mean(v)), float(np.std(v)), len(v)) for g, v in groups.items()}
