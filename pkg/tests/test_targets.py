import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from oracles import central_diff, random_spd, rel_err
from proxi_score_vi.errors import (DimensionMismatch, EmptyBatch, NotApplicable,
                                   NotSamplable)
from proxi_score_vi.numerics import SeededRng
from proxi_score_vi.targets import (BayesDataset, BayesLogisticTarget, BayesMLPTarget,
                                    GaussianTarget, MixtureTarget, MixtureTargetParams,
                                    NoiseConfig, inject_noise, make_bayes_logistic,
                                    make_bayes_mlp, make_random_gaussian, make_random_mixture)

# -2 / (1 + e^2), evaluated by hand from the two responsibilities
MIX_SCORE_AT_ONE = -0.23840584404423515


def symmetric_mixture_1d():
    return MixtureTarget(MixtureTargetParams([0.5, 0.5], [[-1.0], [1.0]], [[[1.0]], [[1.0]]]))


def tiny_logistic(n=4, p=3, seed=0, **kw):
    return make_bayes_logistic(n, p, SeededRng(seed), **kw)[0]


def tiny_mlp(n=4, seed=0, tau=1.0):
    return make_bayes_mlp(n, 2, 3, 3, tau, SeededRng(seed))[0]


def all_targets():
    rng = SeededRng(11)
    return {
        "gaussian": GaussianTarget(make_random_gaussian(3, rng.child(0))),
        "mixture": MixtureTarget(make_random_mixture(3, 3, rng.child(1))),
        "logistic": tiny_logistic(n=30, p=4),
        "mlp": make_bayes_mlp(20, 3, 4, 3, 1.0, rng.child(2))[0],
    }


# ---------------------------------------------------------------- scores

def test_gaussian_score_is_precision_times_residual(backend):
    g = np.random.default_rng(0)
    m, V = g.standard_normal(4), random_spd(g, 4)
    t = GaussianTarget.from_moments(m, V)
    th = g.standard_normal((5, 4))
    expected = -np.linalg.solve(V, (th - m).T).T
    np.testing.assert_allclose(t.score(th), expected, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(t.score(m), 0.0, atol=1e-12)


def test_mixture_score_hand_example(backend):
    t = symmetric_mixture_1d()
    assert t.score(np.array([1.0]))[0] == pytest.approx(MIX_SCORE_AT_ONE, rel=1e-12)
    fd = central_diff(t.log_potential, np.array([1.0]))
    assert fd[0] == pytest.approx(MIX_SCORE_AT_ONE, rel=1e-8)
    np.testing.assert_allclose(t.score(np.zeros(1)), 0.0, atol=1e-15)


def test_symmetric_mixture_score_vanishes_at_origin(backend):
    m = np.array([0.7, -1.2, 0.3])
    t = MixtureTarget(MixtureTargetParams([0.5, 0.5], [m, -m], [np.eye(3), np.eye(3)]))
    np.testing.assert_allclose(t.score(np.zeros(3)), 0.0, atol=1e-14)


def test_single_component_mixture_matches_gaussian(backend):
    g = np.random.default_rng(3)
    m, V = g.standard_normal(3), random_spd(g, 3)
    mix = MixtureTarget(MixtureTargetParams([1.0], [m], [V]))
    gauss = GaussianTarget.from_moments(m, V)
    th = g.standard_normal((7, 3))
    np.testing.assert_allclose(mix.score(th), gauss.score(th), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(mix.log_density(th), gauss.log_density(th), rtol=1e-12)


def test_mixture_score_survives_far_tail(backend):
    t = symmetric_mixture_1d()
    s = t.score(np.array([[400.0], [-400.0]]))
    # far right is owned entirely by the +1 component
    np.testing.assert_allclose(s[:, 0], [-399.0, 399.0], rtol=1e-12)


@pytest.mark.parametrize("name", ["gaussian", "mixture", "logistic", "mlp"])
def test_score_matches_finite_differences_of_potential(name, backend):
    t = all_targets()[name]
    g = np.random.default_rng(5)
    for _ in range(20):
        th = 0.7 * g.standard_normal(t.dim)
        fd = central_diff(t.log_potential, th)
        assert rel_err(t.score(th), fd, floor=1e-3) <= 1e-4


def test_dimension_mismatch():
    t = all_targets()["gaussian"]
    with pytest.raises(DimensionMismatch):
        t.score(np.zeros(2))


# ---------------------------------------------------------------- accounting

def test_call_counter_counts_each_theta():
    t = all_targets()["mixture"]
    t.reset_counter()
    t.score(np.zeros(3))
    t.score(np.zeros((5, 3)))
    t.log_potential(np.zeros((4, 3)))
    t.log_density(np.zeros(3))
    assert t.score_calls == 6
    t.reset_counter()
    assert t.score_calls == 0


def test_minibatch_counts_like_score():
    t = tiny_logistic(n=10)
    t.reset_counter()
    t.minibatch_score(np.zeros((3, t.dim)), 4, SeededRng(0))
    t.noisy_score(np.zeros(t.dim), NoiseConfig(1.0), SeededRng(1), batch_size=2)
    assert t.score_calls == 4


# ---------------------------------------------------------------- mini-batches

@pytest.mark.parametrize("make", [tiny_logistic, tiny_mlp])
def test_enumerated_minibatches_average_to_full_score(make):
    t = make()
    th = np.random.default_rng(2).standard_normal(t.dim)
    full = t.score(th)
    avg = np.mean([t.minibatch_score(th, np.array(b)) for b in itertools.combinations(range(4), 2)],
                  axis=0)
    np.testing.assert_allclose(avg, full, rtol=0, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(2, 8), size=st.integers(1, 8), seed=st.integers(0, 10_000))
def test_minibatch_unbiased_over_all_batches(n, size, seed):
    size = min(size, n)
    t = tiny_logistic(n=n, p=2, seed=seed)
    th = np.random.default_rng(seed).standard_normal(2)
    avg = np.mean([t.minibatch_score(th, np.array(b)) for b in itertools.combinations(range(n), size)],
                  axis=0)
    np.testing.assert_allclose(avg, t.score(th), rtol=0, atol=1e-11)


def test_full_batch_equals_score():
    t = tiny_mlp(n=6)
    th = np.random.default_rng(4).standard_normal(t.dim)
    np.testing.assert_allclose(t.minibatch_score(th, np.arange(6)), t.score(th), atol=1e-13)


def test_minibatch_errors():
    t = tiny_logistic()
    th = np.zeros(t.dim)
    with pytest.raises(EmptyBatch):
        t.minibatch_score(th, np.array([], dtype=int))
    with pytest.raises(EmptyBatch):
        t.minibatch_score(th, 0, SeededRng(0))
    with pytest.raises(NotApplicable):
        all_targets()["gaussian"].minibatch_score(np.zeros(3), 2, SeededRng(0))


def test_drawn_minibatches_are_without_replacement():
    t = tiny_logistic(n=5)
    th = np.random.default_rng(0).standard_normal(t.dim)
    # a batch of the full size drawn without replacement is the full data set
    np.testing.assert_allclose(t.minibatch_score(th, 5, SeededRng(3)), t.score(th), atol=1e-12)


# ---------------------------------------------------------------- noise

def test_noise_free_and_zero_score_cases():
    s = np.array([1.5, -2.0])
    np.testing.assert_array_equal(inject_noise(s, NoiseConfig(0.0), SeededRng(0)), s)
    np.testing.assert_array_equal(inject_noise(np.zeros(3), NoiseConfig(5.0), SeededRng(0)), 0.0)


def test_noise_is_unbiased():
    s = np.tile([3.0, -4.0], (100_000, 1))
    noisy = inject_noise(s, NoiseConfig(1.0), SeededRng(7))
    assert np.all(np.abs(noisy.mean(axis=0) - [3.0, -4.0]) <= 0.05)
    # the noise scale is beta * ||s||_inf = 4
    np.testing.assert_allclose(noisy.std(axis=0), 4.0, rtol=0.02)


def test_negative_beta_rejected():
    with pytest.raises(ValueError):
        NoiseConfig(-0.1)


# ---------------------------------------------------------------- sampling

def test_gaussian_sample_mean_clt():
    g = np.random.default_rng(1)
    m, V = g.standard_normal(2), random_spd(g, 2)
    x = GaussianTarget.from_moments(m, V).sample(100_000, SeededRng(2))
    bound = 3 * np.sqrt(np.diag(V) / 1e5)
    assert np.all(np.abs(x.mean(axis=0) - m) <= bound)


def test_mixture_component_frequencies():
    t = MixtureTarget(make_random_mixture(2, 4, SeededRng(9)))
    n = 50_000
    _, comp = t.sample(n, SeededRng(10), return_components=True)
    w = t.params.weights
    freq = np.bincount(comp, minlength=4) / n
    assert np.all(np.abs(freq - w) <= 3 * np.sqrt(w * (1 - w) / n))


def test_empty_sample_and_bayes_not_samplable():
    assert all_targets()["mixture"].sample(0, SeededRng(0)).shape == (0, 3)
    t = tiny_logistic()
    with pytest.raises(NotSamplable):
        t.sample(3, SeededRng(0))
    with pytest.raises(NotSamplable):
        t.log_density(np.zeros(t.dim))


def test_densities_normalize_in_one_dimension():
    gauss = GaussianTarget.from_moments([0.3], [[2.5]])
    mix = MixtureTarget(make_random_mixture(1, 3, SeededRng(4)))
    for t in (gauss, mix):
        mass = integrate.quad(lambda x: np.exp(t.log_density(np.array([x]))), -40, 40, limit=200)[0]
        assert mass == pytest.approx(1.0, abs=1e-8)
    # the Gaussian potential is unnormalized; its integral is exp(log_normalizer)
    z = integrate.quad(lambda x: np.exp(gauss.log_potential(np.array([x]))), -40, 40)[0]
    assert np.log(z) == pytest.approx(gauss.log_normalizer, abs=1e-8)


# ---------------------------------------------------------------- generators

def test_random_mixture_is_valid_and_deterministic():
    a = make_random_mixture(3, 2, SeededRng(5))
    b = make_random_mixture(3, 2, SeededRng(5))
    np.testing.assert_array_equal(a.means, b.means)
    np.testing.assert_array_equal(a.covariances, b.covariances)
    np.testing.assert_array_equal(a.weights, b.weights)
    assert abs(a.weights.sum() - 1) <= 1e-12
    for c in a.covariances:
        assert np.linalg.eigvalsh(c)[0] > 1e-6
        np.testing.assert_array_equal(c, c.T)
    assert make_random_mixture(4, 1, SeededRng(0)).weights.tolist() == [1.0]


@settings(max_examples=25, deadline=None)
@given(dim=st.integers(1, 6), order=st.integers(1, 5), seed=st.integers(0, 2**31))
def test_random_mixture_always_positive_definite(dim, order, seed):
    p = make_random_mixture(dim, order, SeededRng(seed))
    assert p.choleskys.shape == (order, dim, dim)
    assert np.all(p.weights > 0)


def test_mixture_params_reject_bad_weights():
    with pytest.raises(ValueError):
        MixtureTargetParams([0.6, 0.6], [[0.0], [1.0]], [[[1.0]], [[1.0]]])


# ---------------------------------------------------------------- bayesian

def test_logistic_score_at_zero():
    t, data = make_bayes_logistic(40, 3, SeededRng(6))
    X, y = data.inputs, data.labels
    expected = ((y - 0.5)[:, None] * X).sum(axis=0)
    np.testing.assert_allclose(t.score(np.zeros(3)), expected, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(central_diff(t.log_potential, np.zeros(3)), expected, rtol=1e-7)


def test_tiny_prior_variance_dominates():
    t = tiny_logistic(n=30, p=3, prior_variance=1e-6)
    th = np.random.default_rng(0).standard_normal(3)
    resid = t.score(th) + th / 1e-6
    assert np.linalg.norm(resid) <= np.linalg.norm(t.likelihood_score(th)) + 1e-6


def test_mlp_output_bias_gradient_at_zero():
    n, p, h, K, tau = 9, 2, 3, 3, 0.5
    labels = np.array([0, 0, 0, 0, 1, 1, 2, 2, 2])
    data = BayesDataset(np.zeros((n, p)), labels, 1.0, tau)
    t = BayesMLPTarget(data, h, K)
    lik = t.likelihood_score(np.zeros(t.dim))
    onehot_mean = np.bincount(labels, minlength=K) / n
    # derivative of sum_i log softmax(b2)[y_i] / tau at b2 = 0
    expected = (n / tau) * (onehot_mean - 1.0 / K)
    np.testing.assert_allclose(lik[-K:], expected, atol=1e-12)
    fd = central_diff(lambda th: t.log_potential(th), np.zeros(t.dim))
    np.testing.assert_allclose(fd[-K:], expected, atol=1e-6)
    np.testing.assert_allclose(lik[:-K], 0.0, atol=1e-12)


def test_mlp_score_finite_differences_and_dim():
    t = make_bayes_mlp(25, 3, 5, 4, 1.0, SeededRng(8))[0]
    assert t.dim == (3 + 1) * 5 + (5 + 1) * 4
    g = np.random.default_rng(8)
    for _ in range(5):
        th = 0.5 * g.standard_normal(t.dim)
        assert rel_err(t.score(th), central_diff(t.log_potential, th), floor=1e-3) <= 1e-4


def test_mlp_temperature_scales_likelihood():
    t1 = make_bayes_mlp(15, 2, 3, 3, 1.0, SeededRng(2))[0]
    t2 = make_bayes_mlp(15, 2, 3, 3, 2.0, SeededRng(2))[0]
    th = np.random.default_rng(1).standard_normal(t1.dim)
    np.testing.assert_allclose(t2.likelihood_score(th), 0.5 * t1.likelihood_score(th), rtol=1e-13)


def test_predict_proba_rows_sum_to_one():
    for t in (tiny_logistic(n=10), tiny_mlp(n=10)):
        th = np.random.default_rng(0).standard_normal(t.dim)
        P = t.predict_proba(th, t.data.inputs)
        assert P.shape == (10, t.n_classes)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)


def test_dataset_validation():
    with pytest.raises(ValueError):
        BayesDataset(np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        BayesDataset(np.zeros((3, 2)), np.zeros(3), prior_variance=0.0)
    assert isinstance(tiny_logistic(), BayesLogisticTarget)
