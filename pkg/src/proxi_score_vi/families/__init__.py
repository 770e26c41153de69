"""Variational families and the analytic Gaussian projection."""
import numpy as np

from ..kernels import VAR_FLOOR
from .base import SampleBatch, VariationalFamily
from .flow import PlanarFlow
from .gaussian import GaussianDiag, GaussianFull
from .mixture import GaussianMixtureDiag
from .projection import gaussian_projection

FAMILY_NAMES = ("gauss_diag", "gauss_full", "gauss_mixture", "planar_flow")


def make_family(name, dim, rng, init="random", small_eig_value=1e-4, K=2,
                gumbel_temperature=0.05):
    """Initial q for a run.

    ``random``: mean ~ N(0, 1) elementwise with identity covariance;
    ``small_eig``: same mean with covariance ``small_eig_value * I``.
    Flows start near the identity map.
    """
    g = rng.generator
    if init not in ("random", "small_eig"):
        raise ValueError(f"unknown init {init!r}")
    var = small_eig_value if init == "small_eig" else 1.0
    if name == "gauss_diag":
        return GaussianDiag.from_moments(g.standard_normal(dim), np.full(dim, var))
    if name == "gauss_full":
        return GaussianFull.from_moments(g.standard_normal(dim), var * np.eye(dim))
    if name == "gauss_mixture":
        means = g.standard_normal((K, dim))
        log_std = np.full((K, dim), 0.5 * np.log(var - VAR_FLOOR))
        return GaussianMixtureDiag(np.zeros(K), means, log_std, gumbel_temperature)
    if name == "planar_flow":
        w = 0.5 * g.standard_normal(dim)
        u = 0.1 * g.standard_normal(dim)
        return PlanarFlow(u, w, 0.0)
    raise ValueError(f"unknown family {name!r}; expected one of {FAMILY_NAMES}")


__all__ = [
    "SampleBatch", "VariationalFamily", "GaussianDiag", "GaussianFull",
    "GaussianMixtureDiag", "PlanarFlow", "gaussian_projection", "make_family",
    "FAMILY_NAMES",
]
