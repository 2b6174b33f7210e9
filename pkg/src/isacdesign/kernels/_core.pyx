# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True, language_level=3
"""Compiled shift-structured kernels; same contracts as ``_fallback``.

The shifted copies are gathered in C and the products handed to BLAS
``zgemm``; the shifted Gram sum is a plain wrapped accumulation.
"""

import numpy as np

from scipy.linalg.cython_blas cimport zgemm


cdef inline Py_ssize_t _wrap(long k, Py_ssize_t T) noexcept nogil:
    cdef long s = k % T
    if s < 0:
        s += T
    return s


def lag_products(X, F, const long[::1] lags):
    cdef Py_ssize_t nt = X.shape[0], T = X.shape[1], nr = F.shape[0], nl = lags.shape[0]
    cdef const double complex[:, ::1] x = X
    cdef const double complex[:, ::1] f = F
    # shifted copies of X stacked row-wise, then one BLAS product with F^H
    stack = np.empty((nl * nt, T), dtype=np.complex128)
    cdef double complex[:, ::1] xs = stack
    out = np.empty((nl, nt, nr), dtype=np.complex128)
    cdef double complex[:, :, ::1] o = out
    cdef Py_ssize_t l, i, t, s
    cdef int m = <int>nr, n = <int>(nl * nt), k = <int>T, ld_c = <int>nr
    cdef double complex one = 1.0, zero = 0.0
    with nogil:
        for l in range(nl):
            s = _wrap(lags[l], T)
            for i in range(nt):
                for t in range(s, T):
                    xs[l * nt + i, t] = x[i, t - s]
                for t in range(s):
                    xs[l * nt + i, t] = x[i, t - s + T]
        if n > 0 and m > 0:
            # column-major view: out^T (nr x nl*nt) = conj(F) (nr x T) @ stack^T (T x nl*nt)
            zgemm("C", "N", &m, &n, &k, &one, <double complex*>&f[0, 0], &k,
                  &xs[0, 0], &k, &zero, &o[0, 0, 0], &ld_c)
    return out


def shifted_gram_sum(G, const long[::1] lags):
    cdef Py_ssize_t T = G.shape[0], nl = lags.shape[0]
    cdef const double complex[:, ::1] g = np.ascontiguousarray(G, dtype=np.complex128)
    out = np.zeros((T, T), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef Py_ssize_t l, a, b, s, ia
    with nogil:
        for l in range(nl):
            s = _wrap(lags[l], T)
            for a in range(T):
                ia = a - s
                if ia < 0:
                    ia = ia + T
                for b in range(s, T):
                    o[a, b] = o[a, b] + g[ia, b - s]
                for b in range(s):
                    o[a, b] = o[a, b] + g[ia, b - s + T]
    return out


def adjoint_f(W, X, const long[::1] lags):
    cdef Py_ssize_t nl = W.shape[0], nt = W.shape[1], nr = W.shape[2], T = X.shape[1]
    cdef const double complex[:, :, ::1] w = W
    cdef const double complex[:, ::1] x = X
    stack = np.empty((nl * nt, T), dtype=np.complex128)
    cdef double complex[:, ::1] xs = stack
    out = np.empty((nr, T), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef Py_ssize_t l, i, t, s
    cdef int m = <int>T, n = <int>nr, k = <int>(nl * nt), ld_b = <int>nr
    cdef double complex one = 1.0, zero = 0.0
    with nogil:
        for l in range(nl):
            s = _wrap(lags[l], T)
            for i in range(nt):
                for t in range(s, T):
                    xs[l * nt + i, t] = x[i, t - s]
                for t in range(s):
                    xs[l * nt + i, t] = x[i, t - s + T]
        if k > 0:
            # column-major view: out^T (T x nr) = stack^T (T x nl*nt) @ conj(W as nl*nt x nr)
            zgemm("N", "C", &m, &n, &k, &one, &xs[0, 0], &m,
                  <double complex*>&w[0, 0, 0], &ld_b, &zero, &o[0, 0], &m)
        else:
            for i in range(nr):
                for t in range(T):
                    o[i, t] = 0
    return out


def adjoint_x(W, F, const long[::1] lags):
    cdef Py_ssize_t nl = W.shape[0], nt = W.shape[1], nr = W.shape[2], T = F.shape[1]
    cdef const double complex[:, :, ::1] w = W
    cdef const double complex[:, ::1] f = F
    # F J_k^T [r, t] = F[r, t + k]
    stack = np.empty((nl * nr, T), dtype=np.complex128)
    cdef double complex[:, ::1] fs = stack
    wt = np.empty((nt, nl * nr), dtype=np.complex128)
    cdef double complex[:, ::1] wx = wt
    out = np.empty((nt, T), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef Py_ssize_t l, i, r, t, s
    cdef int m = <int>T, n = <int>nt, k = <int>(nl * nr)
    cdef double complex one = 1.0, zero = 0.0
    with nogil:
        for l in range(nl):
            s = _wrap(lags[l], T)
            for r in range(nr):
                for t in range(T - s):
                    fs[l * nr + r, t] = f[r, t + s]
                for t in range(T - s, T):
                    fs[l * nr + r, t] = f[r, t + s - T]
            for i in range(nt):
                for r in range(nr):
                    wx[i, l * nr + r] = w[l, i, r]
        if k > 0:
            # column-major view: out^T (T x nt) = stack^T (T x nl*nr) @ wt^T (nl*nr x nt)
            zgemm("N", "N", &m, &n, &k, &one, &fs[0, 0], &m, &wx[0, 0], &k, &zero, &o[0, 0], &m)
        else:
            for i in range(nt):
                for t in range(T):
                    o[i, t] = 0
    return out
