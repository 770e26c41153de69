"""Proximal score-matching variational inference.

Subpackages: ``kernels`` (numba / numpy hot loops), ``families`` (variational
densities), and ``harness`` (configs, experiment matrix, CSV/SVG output).
"""
from . import kernels
from .algorithms import (AdviConfig, OptimizerConfig, ProximalConfig, Schedule, alpha_schedule,
                         run_advi, run_perfect_minimization, run_proximal, telescoped_gamma)
from .families import (GaussianDiag, GaussianFull, GaussianMixtureDiag, PlanarFlow,
                       gaussian_projection, make_family)
from .metrics import MetricSchedule, MetricTrace, ece, forward_kl, negative_elbo, param_error
from .numerics import SeededRng
from .targets import (GaussianTarget, MixtureTarget, NoiseConfig, make_bayes_logistic,
                      make_bayes_mlp, make_random_gaussian, make_random_mixture)

__version__ = "0.1.0"
