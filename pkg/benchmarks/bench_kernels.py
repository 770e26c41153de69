"""Time the hot kernels under each available backend.

    python benchmarks/bench_kernels.py [--repeat 5] [--number 200]

Each case calls the public family/target method, so the measurement covers
the same dispatch path an optimization run uses. The first call per backend
is made before timing so numba compilation is excluded.
"""
import argparse
import timeit

import numpy as np

from proxi_score_vi import kernels
from proxi_score_vi.algorithms import ProximalConfig, run_proximal
from proxi_score_vi.families import SampleBatch, make_family
from proxi_score_vi.metrics import ece
from proxi_score_vi.numerics import SeededRng
from proxi_score_vi.targets import MixtureTarget, make_bayes_mlp, make_random_mixture


def _batch(family, S, seed=0):
    g = np.random.default_rng(seed)
    th = family.sample(S, SeededRng(seed))
    return SampleBatch(th, g.standard_normal(th.shape), g.standard_normal(th.shape))


def build_cases(dim, S):
    rng = SeededRng(1)
    fams = {name: make_family(name, dim, rng.child(i), K=5)
            for i, name in enumerate(("gauss_diag", "gauss_full", "gauss_mixture", "planar_flow"))}
    batches = {name: _batch(f, S) for name, f in fams.items()}
    mix = MixtureTarget(make_random_mixture(dim, 5, rng.child(9)))
    thetas = mix.sample(S, rng.child(10))
    mlp = make_bayes_mlp(200, 4, 16, 3, 1.0, rng.child(11))[0]
    w = np.random.default_rng(2).standard_normal(mlp.dim) * 0.3
    P = np.random.default_rng(3).dirichlet(np.ones(10), size=1000)
    y = np.random.default_rng(4).integers(0, 10, size=1000)

    cases = {f"prox_grad/{n}": (lambda f=f, b=batches[n]: f.proximal_loss_grad(b, 0.5))
             for n, f in fams.items()}
    cases["mixture_target_score"] = lambda: mix.score(thetas)
    cases["mlp_score"] = lambda: mlp.score(w)
    cases["ece"] = lambda: ece(P, y, 15)
    return cases


def end_to_end():
    target = MixtureTarget(make_random_mixture(3, 5, SeededRng(0)))
    q = make_family("gauss_mixture", 3, SeededRng(1), K=5)
    run_proximal(target, q, ProximalConfig(50, 20, 1, 1e-2), rng=SeededRng(2))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--number", type=int, default=200, help="calls per timing sample")
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--samples", type=int, default=10, help="S, rows per batch")
    args = p.parse_args(argv)

    previous = kernels.backend_name()
    table = {}
    for backend in kernels.available_backends():
        kernels.use_backend(backend)
        cases = build_cases(args.dim, args.samples)
        cases["run_proximal(T=50,N=20)"] = end_to_end
        for name, fn in cases.items():
            fn()  # warm-up / compile
            n = max(1, args.number // 100) if name.startswith("run_") else args.number
            best = min(timeit.repeat(fn, number=n, repeat=args.repeat)) / n
            table.setdefault(name, {})[backend] = best
    kernels.use_backend(previous)

    backends = kernels.available_backends()
    print(f"{'case':28s}" + "".join(f"{b:>14s}" for b in backends)
          + ("    speedup" if "numba" in backends else ""))
    for name, row in table.items():
        line = f"{name:28s}" + "".join(f"{row[b] * 1e6:12.1f}us" for b in backends)
        if "numba" in row:
            line += f"   {row['numpy'] / row['numba']:7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
