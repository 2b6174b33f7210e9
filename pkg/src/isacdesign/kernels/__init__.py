"""Shift-structured kernels shared by the feasibility search and the BSUM sweep.

The compiled ``_core`` extension is used when it was built; otherwise (or when
``ISACDESIGN_PURE=1`` is set) the numpy implementations in ``_fallback`` are
used. Both expose the same four functions with identical contracts.
"""

import os

import numpy as np

from . import _fallback

BACKEND = "numpy"
_impl = _fallback

if os.environ.get("ISACDESIGN_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"


def _c(a):
    return np.ascontiguousarray(a, dtype=np.complex128)


def _lags(lags):
    return np.ascontiguousarray(lags, dtype=np.int_)


def lag_products(X, F, lags):
    """Stack of ``X J_k F^H`` over ``lags``, shape ``(nlag, n_tx, n_rx)``."""
    return _impl.lag_products(_c(X), _c(F), _lags(lags))


def shifted_gram_sum(G, lags):
    """``sum_k J_k^T G J_k``; equals ``sum_k J_k G J_k^T`` for a symmetric lag set."""
    return _impl.shifted_gram_sum(_c(G), _lags(lags))


def adjoint_f(W, X, lags):
    """``sum_k W_k^H X J_k``, shape ``(n_rx, T)``."""
    return _impl.adjoint_f(_c(W), _c(X), _lags(lags))


def adjoint_x(W, F, lags):
    """``sum_k W_k F J_k^T``, shape ``(n_tx, T)``."""
    return _impl.adjoint_x(_c(W), _c(F), _lags(lags))


__all__ = ["BACKEND", "lag_products", "shifted_gram_sum", "adjoint_f", "adjoint_x"]
