"""Pure-numpy versions of the shift-structured kernels.

Every kernel exploits ``X @ J_k == np.roll(X, k, axis=1)``; no ``T x T`` shift
matrix is ever formed.
"""

import numpy as np


def _gather(A, lags, sign):
    T = A.shape[1]
    idx = (np.arange(T)[None, :] - sign * np.asarray(lags)[:, None]) % T
    return A[:, idx]  # (rows, nlag, T)


def lag_products(X, F, lags):
    """``out[l] = X @ J_{lags[l]} @ F^H``, shape ``(nlag, n_tx, n_rx)``."""
    nt, T = X.shape
    Xs = _gather(X, lags, 1).transpose(1, 0, 2).reshape(-1, T)
    return (Xs @ F.conj().T).reshape(len(lags), nt, F.shape[0])


def shifted_gram_sum(G, lags):
    """``sum_l J_k^T G J_k`` for a ``T x T`` matrix ``G``."""
    T = G.shape[0]
    idx = (np.arange(T)[None, :] - np.asarray(lags)[:, None]) % T
    return G[idx[:, :, None], idx[:, None, :]].sum(axis=0)


def adjoint_f(W, X, lags):
    """``sum_l W_l^H X J_k``, shape ``(n_rx, T)``."""
    nl, nt, nr = W.shape
    Xs = _gather(X, lags, 1).transpose(1, 0, 2).reshape(nl * nt, -1)
    return W.conj().transpose(2, 0, 1).reshape(nr, nl * nt) @ Xs


def adjoint_x(W, F, lags):
    """``sum_l W_l F J_k^T``, shape ``(n_tx, T)``."""
    nl, nt, nr = W.shape
    Fs = _gather(F, lags, -1).transpose(1, 0, 2).reshape(nl * nr, -1)
    return W.transpose(1, 0, 2).reshape(nt, nl * nr) @ Fs
