import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import random_spd
from proxi_score_vi.errors import NotPositiveDefinite, SingularMatrix
from proxi_score_vi.numerics import (SeededRng, cholesky, is_symmetric, sample_standard_normal,
                                     solve_lower_triangular)


def test_cholesky_known_factor(backend):
    a = np.array([[4.0, 2.0], [2.0, 5.0]])
    L = cholesky(a)
    # by hand: L11 = 2, L21 = 1, L22 = sqrt(5 - 1) = 2
    np.testing.assert_allclose(L, [[2.0, 0.0], [1.0, 2.0]], atol=1e-15)


def test_cholesky_rejects_indefinite(backend):
    with pytest.raises(NotPositiveDefinite):
        cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_cholesky_rejects_asymmetric():
    with pytest.raises(ValueError):
        cholesky(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_cholesky_jitter_rescues_semidefinite(backend):
    v = np.array([1.0, 2.0, 3.0])
    a = np.outer(v, v) + np.diag([0.0, 0.0, 0.0])
    a = a + 1e-14 * np.eye(3)
    L = cholesky(a)
    assert np.allclose(L @ L.T, a, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(d=st.integers(1, 8), seed=st.integers(0, 2**31 - 1))
def test_cholesky_reconstructs_spd(d, seed):
    a = random_spd(np.random.default_rng(seed), d)
    L = cholesky(a)
    assert np.allclose(np.triu(L, 1), 0.0)
    assert np.all(np.diag(L) > 0)
    np.testing.assert_allclose(L @ L.T, a, rtol=1e-10, atol=1e-10)


def test_solve_lower_matches_dense(backend):
    rng = np.random.default_rng(0)
    L = np.tril(rng.standard_normal((5, 5))) + 3 * np.eye(5)
    b = rng.standard_normal(5)
    np.testing.assert_allclose(solve_lower_triangular(L, b), np.linalg.solve(L, b), rtol=1e-12)
    B = rng.standard_normal((5, 3))
    np.testing.assert_allclose(solve_lower_triangular(L, B), np.linalg.solve(L, B), rtol=1e-12)


def test_solve_lower_singular():
    L = np.array([[1.0, 0.0], [3.0, 0.0]])
    with pytest.raises(SingularMatrix):
        solve_lower_triangular(L, np.ones(2))


def test_is_symmetric():
    assert is_symmetric(np.eye(3))
    assert not is_symmetric(np.array([[1.0, 1e-3], [0.0, 1.0]]))


def test_seeded_rng_reproducible_and_children_independent():
    a = SeededRng(7).generator.standard_normal(5)
    b = SeededRng(7).generator.standard_normal(5)
    np.testing.assert_array_equal(a, b)
    r = SeededRng(7)
    r.generator.standard_normal(100)  # consuming the parent must not move children
    np.testing.assert_array_equal(r.child(3).generator.standard_normal(4),
                                  SeededRng(7).child(3).generator.standard_normal(4))
    assert not np.allclose(SeededRng(7).child(1).generator.standard_normal(4),
                           SeededRng(7).child(2).generator.standard_normal(4))
    assert not np.allclose(SeededRng(7, stream_id=1).generator.standard_normal(4),
                           SeededRng(7, stream_id=2).generator.standard_normal(4))


def test_standard_normal_moments():
    x = sample_standard_normal(SeededRng(1), 200000)
    assert abs(x.mean()) < 4 / np.sqrt(200000)
    assert abs(x.var() - 1.0) < 0.02
