"""Linear algebra and random-number primitives.

Matrices are plain float64 ndarrays. Random streams come from numpy's
PCG64 seeded through ``SeedSequence(seed, spawn_key=(stream_id, ...))``,
so the pair (seed, stream_id) fully determines a stream and distinct
stream ids never overlap.
"""
import numpy as np

from . import kernels
from .errors import NotPositiveDefinite, SingularMatrix

SYMMETRY_RTOL = 1e-12
SINGULAR_PIVOT = 1e-14


def is_symmetric(a, rtol=SYMMETRY_RTOL):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return bool(np.all(np.abs(a - a.T) <= rtol * np.maximum(1.0, np.abs(a))))


def cholesky(a):
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    On failure one retry is made with diagonal jitter ``1e-10 * trace(a)/d``.
    Raises NotPositiveDefinite if that also fails.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not is_symmetric(a):
        raise ValueError("matrix is not symmetric")
    L, ok = kernels.cholesky_factor(a)
    if ok:
        return L
    d = a.shape[0]
    jitter = 1e-10 * np.trace(a) / d
    if jitter > 0:
        L, ok = kernels.cholesky_factor(a + jitter * np.eye(d))
        if ok:
            return L
    raise NotPositiveDefinite("matrix is not positive definite")


def solve_lower_triangular(l, b):
    l = np.ascontiguousarray(l, dtype=np.float64)
    diag = np.abs(np.diag(l))
    if np.any(diag < SINGULAR_PIVOT):
        raise SingularMatrix(f"diagonal entry of magnitude {diag.min():.3g} < {SINGULAR_PIVOT}")
    return kernels.solve_lower(l, np.asarray(b, dtype=np.float64))


class SeededRng:
    """Single-owner random stream keyed by (seed, stream_id)."""

    def __init__(self, seed, stream_id=0, _path=()):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._path = tuple(_path)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,) + self._path)
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, key):
        """Deterministic sub-stream; independent of how much this stream was consumed."""
        return SeededRng(self.seed, self.stream_id, self._path + (int(key),))

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, stream_id={self.stream_id}, path={self._path})"


def sample_standard_normal(rng, n):
    if n < 0:
        raise ValueError("n must be nonnegative")
    return rng.generator.standard_normal(n)
