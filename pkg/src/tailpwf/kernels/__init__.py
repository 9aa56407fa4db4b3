"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly, unless the environment
variable ``TAILPWF_DISABLE_NUMBA`` is set to a truthy value (``1``, ``true``,
``yes``).  Both backends expose the same functions with the same signatures:

``nig_logpdf(x, alpha, beta, mu, delta)``
    Log-density of the NIG law at every entry of ``x``.
``nig_loglik_grad(x, alpha, beta, mu, delta)``
    Total log-likelihood and its gradient in ``(alpha, beta, mu, delta)``.
``nig_integrate(a, b, alpha, beta, mu, delta, tol)``
    Adaptive Gauss-Kronrod integrals of the NIG density over ``[a_i, b_i]``.
``batch_cvar(returns, weights, confidence)``
    VaR level and CVaR (loss space) for each row of ``weights``.
"""
from __future__ import annotations

import os

from . import _numpy

_FLAG = "TAILPWF_DISABLE_NUMBA"


def numba_requested() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() not in {"1", "true", "yes", "on"}


def _load_backend():
    if numba_requested():
        try:
            from . import _numba
        except ImportError:  # numba missing or broken
            return _numpy, "numpy"
        return _numba, "numba"
    return _numpy, "numpy"


_backend, BACKEND = _load_backend()

nig_logpdf = _backend.nig_logpdf
nig_loglik_grad = _backend.nig_loglik_grad
nig_integrate = _backend.nig_integrate
batch_cvar = _backend.batch_cvar

__all__ = [
    "BACKEND",
    "batch_cvar",
    "nig_integrate",
    "nig_loglik_grad",
    "nig_logpdf",
    "numba_requested",
]
