"""The numba and numpy backends must agree on every kernel."""
import numpy as np
import pytest

from oracles import random_spd
from proxi_score_vi import kernels

pytestmark = pytest.mark.skipif(not kernels.NUMBA_AVAILABLE, reason="numba not installed")

TOL = dict(rtol=1e-10, atol=1e-10)


@pytest.fixture
def pair():
    return kernels.get_backend("numba"), kernels.get_backend("numpy")


def _close(a, b):
    if isinstance(a, tuple):
        assert len(a) == len(b)
        for x, y in zip(a, b):
            _close(x, y)
    elif isinstance(a, (bool, np.bool_)):
        assert bool(a) == bool(b)
    else:
        np.testing.assert_allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), **TOL)


def test_cholesky_and_solve(pair):
    nb, npb = pair
    rng = np.random.default_rng(0)
    a = random_spd(rng, 6)
    _close(nb.cholesky_factor(a), npb.cholesky_factor(a))
    L = npb.cholesky_factor(a)[0]
    b = rng.standard_normal(6)
    B = rng.standard_normal((6, 4))
    _close(nb.solve_lower(L, b), npb.solve_lower(L, b))
    _close(nb.solve_lower(L, B), npb.solve_lower(L, B))


def test_cholesky_failure_flag(pair):
    nb, npb = pair
    a = np.array([[1.0, 2.0], [2.0, 1.0]])
    assert not nb.cholesky_factor(a)[1]
    assert not npb.cholesky_factor(a)[1]


def test_gaussian_prox(pair):
    nb, npb = pair
    rng = np.random.default_rng(1)
    S, d = 7, 4
    th, prev, tgt = (rng.standard_normal((S, d)) for _ in range(3))
    m, rho = rng.standard_normal(d), 0.3 * rng.standard_normal(d)
    _close(nb.gauss_diag_prox(th, prev, tgt, m, rho, 0.4), npb.gauss_diag_prox(th, prev, tgt, m, rho, 0.4))
    L = np.tril(0.3 * rng.standard_normal((d, d))) + np.eye(d)
    dl = rng.uniform(0.5, 1.5, d)
    _close(nb.gauss_full_prox(th, prev, tgt, m, L, dl, 0.7), npb.gauss_full_prox(th, prev, tgt, m, L, dl, 0.7))


def test_mixture_kernels(pair):
    nb, npb = pair
    rng = np.random.default_rng(2)
    S, d, K = 6, 3, 4
    th, prev, tgt = (rng.standard_normal((S, d)) for _ in range(3))
    logits = rng.standard_normal(K)
    means = rng.standard_normal((K, d))
    rho = 0.2 * rng.standard_normal((K, d))
    _close(nb.mixture_diag_eval(th, logits, means, rho), npb.mixture_diag_eval(th, logits, means, rho))
    _close(nb.mixture_diag_prox(th, prev, tgt, logits, means, rho, 0.3),
           npb.mixture_diag_prox(th, prev, tgt, logits, means, rho, 0.3))
    logw = np.log(rng.dirichlet(np.ones(K)))
    chols = np.stack([np.linalg.cholesky(random_spd(rng, d)) for _ in range(K)])
    _close(nb.mixture_full_eval(th, logw, means, chols), npb.mixture_full_eval(th, logw, means, chols))


def test_planar_kernels(pair):
    nb, npb = pair
    rng = np.random.default_rng(3)
    S, d = 8, 3
    th, prev, tgt = (rng.standard_normal((S, d)) for _ in range(3))
    w = rng.standard_normal(d)
    u = rng.standard_normal(d)
    u = u + (0.5 - w @ u) * w / (w @ w)  # w.u = 0.5 > -1
    args = (u, w, 0.2, 1e-13, 200)
    _close(nb.planar_invert(th, *args), npb.planar_invert(th, *args))
    _close(nb.planar_eval(th, *args), npb.planar_eval(th, *args))
    _close(nb.planar_prox(th, prev, tgt, u, w, 0.2, 0.6, 1e-13, 200),
           npb.planar_prox(th, prev, tgt, u, w, 0.2, 0.6, 1e-13, 200))


def test_mlp_loss_grad(pair):
    nb, npb = pair
    rng = np.random.default_rng(4)
    p, h, K, n = 3, 5, 4, 11
    theta = rng.standard_normal(p * h + h + h * K + K)
    X = rng.standard_normal((n, p))
    Y = rng.integers(0, K, n)
    _close(nb.mlp_loss_grad(theta, X, Y, h, K), npb.mlp_loss_grad(theta, X, Y, h, K))


def test_ece_bins(pair):
    nb, npb = pair
    rng = np.random.default_rng(5)
    conf = np.concatenate([rng.random(200), [0.0, 1.0, 0.1, 0.5]])
    correct = (rng.random(conf.size) < 0.5).astype(float)
    _close(nb.ece_bins(conf, correct, 10), npb.ece_bins(conf, correct, 10))


def test_use_backend_switch_sets_env():
    import os
    prev = kernels.backend_name()
    try:
        kernels.use_backend("numpy")
        assert kernels.backend_name() == "numpy"
        assert os.environ[kernels.ENV_FLAG] == "numpy"
        with pytest.raises(ValueError):
            kernels.use_backend("fortran")
    finally:
        kernels.use_backend(prev)
