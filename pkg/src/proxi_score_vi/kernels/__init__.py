"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import from ``PROXI_SCORE_VI_BACKEND``
("numba" or "numpy"). When unset, numba is used if it imports cleanly.
``use_backend`` switches at runtime; callers always go through the
module-level names below, which look up the active implementation per call.
"""
import logging
import os

from . import _numpy

logger = logging.getLogger(__name__)

ENV_FLAG = "PROXI_SCORE_VI_BACKEND"
VAR_FLOOR = _numpy.VAR_FLOOR

_BACKENDS = {"numpy": _numpy}
try:
    from . import _numba

    _BACKENDS["numba"] = _numba
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - depends on environment
    NUMBA_AVAILABLE = False

_active = None


def use_backend(name):
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {sorted(_BACKENDS)}")
    _active = _BACKENDS[name]
    os.environ[ENV_FLAG] = name  # inherited by worker processes


def backend_name():
    return "numba" if _active is _BACKENDS.get("numba") else "numpy"


def get_backend(name):
    return _BACKENDS[name]


def available_backends():
    return sorted(_BACKENDS)


def _initial():
    wanted = os.environ.get(ENV_FLAG, "").strip().lower()
    if wanted == "numpy":
        return _numpy
    if wanted == "numba" and not NUMBA_AVAILABLE:
        logger.warning("%s=numba but numba is not importable; using numpy", ENV_FLAG)
    return _BACKENDS.get("numba", _numpy)


_active = _initial()


def cholesky_factor(a):
    return _active.cholesky_factor(a)


def solve_lower(l, b):
    return _active.solve_lower(l, b)


def gauss_diag_prox(th, prev, tgt, m, rho, alpha):
    return _active.gauss_diag_prox(th, prev, tgt, m, rho, alpha)


def gauss_full_prox(th, prev, tgt, m, L, dldiag, alpha):
    return _active.gauss_full_prox(th, prev, tgt, m, L, dldiag, alpha)


def mixture_diag_eval(th, logits, means, rho):
    return _active.mixture_diag_eval(th, logits, means, rho)


def mixture_diag_prox(th, prev, tgt, logits, means, rho, alpha):
    return _active.mixture_diag_prox(th, prev, tgt, logits, means, rho, alpha)


def mixture_full_eval(th, logw, means, chols):
    return _active.mixture_full_eval(th, logw, means, chols)


def planar_invert(th, uhat, w, b, tol, maxit):
    return _active.planar_invert(th, uhat, w, b, tol, maxit)


def planar_eval(th, uhat, w, b, tol, maxit):
    return _active.planar_eval(th, uhat, w, b, tol, maxit)


def planar_prox(th, prev, tgt, uhat, w, b, alpha, tol, maxit):
    return _active.planar_prox(th, prev, tgt, uhat, w, b, alpha, tol, maxit)


def mlp_loss_grad(theta, X, Y, hidden, classes):
    return _active.mlp_loss_grad(theta, X, Y, hidden, classes)


def ece_bins(conf, correct, m_bins):
    return _active.ece_bins(conf, correct, m_bins)
