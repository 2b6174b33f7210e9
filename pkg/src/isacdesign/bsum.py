"""Block successive upper-bound minimization of the augmented Lagrangian.

One sweep updates, in order, every auxiliary block ``C_k`` (proximal step
projected on the ``xi`` ball), the filter ``F`` (quadratic majorizer minimized
on the power sphere) and the waveform ``X`` (quadratic majorizer minimized on
the unimodular set). Each block update is a closed form; none increases the
augmented Lagrangian.

Multipliers ``U`` and auxiliaries ``C`` are stacked arrays of shape
``(nlag, n_tx, n_rx)`` ordered like ``data.lags``.

Gradients returned by the ``grad_*`` helpers are with respect to the
conjugate variable, ``dL/dRe + 1j dL/dIm`` halved, i.e. ``dL/dZ*``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .feasibility import induced_one_norm, unimodular
from .model import ProblemData

log = logging.getLogger(__name__)

# strict margin on the induced-1-norm majorization constants
LAMBDA_MARGIN = 1e-6


class DegenerateDirectionError(ArithmeticError):
    """The filter-update direction vanished; the caller keeps the previous ``F``."""


@dataclass
class DesignState:
    C: np.ndarray  # (nlag, n_tx, n_rx)
    F: np.ndarray  # (n_rx, T)
    X: np.ndarray  # (n_tx, T)

    def copy(self) -> "DesignState":
        return DesignState(self.C.copy(), self.F.copy(), self.X.copy())

    def check(self, data: ProblemData, tol: float = 1e-10) -> None:
        """Raise ``AssertionError`` if a constraint is violated."""
        cfg = data.cfg
        cn = np.linalg.norm(self.C, axis=(1, 2))
        assert np.all(cn <= data.xi * (1 + tol)), f"C norm {cn.max()} > xi {data.xi}"
        fn = np.linalg.norm(self.F) ** 2
        assert abs(fn - cfg.p_f) <= tol * max(1.0, cfg.p_f), f"||F||^2 = {fn}"
        assert np.allclose(np.abs(self.X), cfg.p_x, rtol=0, atol=tol), "X not unimodular"


@dataclass
class InnerReport:
    iters: int = 0
    alf_trace: list = field(default_factory=list)  # initial value, then one entry per block update
    e_bound_trace: list = field(default_factory=list)  # one entry per sweep
    hit_max_inner: bool = False
    squarem_accepted: int = 0


def zero_multipliers(data: ProblemData) -> np.ndarray:
    cfg = data.cfg
    return np.zeros((len(data.lags), cfg.n_tx, cfg.n_rx), dtype=complex)


def project_ball(C: np.ndarray, xi: float) -> np.ndarray:
    """Project every ``C[l]`` onto the Frobenius ball of radius ``xi``."""
    norms = np.linalg.norm(C, axis=(1, 2))
    scale = np.where(norms > xi, xi / np.where(norms > 0, norms, 1.0), 1.0)
    return C * scale[:, None, None]


def random_state(data: ProblemData, rng: np.random.Generator) -> DesignState:
    """Random point of the constraint set: unimodular ``X``, ``F`` on the sphere, ``C`` projected."""
    cfg = data.cfg
    T = cfg.block_len
    X = unimodular(np.exp(2j * np.pi * rng.random((cfg.n_tx, T))), cfg.p_x)
    F = rng.standard_normal((cfg.n_rx, T)) + 1j * rng.standard_normal((cfg.n_rx, T))
    F *= np.sqrt(cfg.p_f) / np.linalg.norm(F)
    C = project_ball(kernels.lag_products(X, F, data.lags), data.xi)
    return DesignState(C, F, X)


# ---------------------------------------------------------------- objective


def _bp_term(F, X, data):
    D = X @ F.conj().T - data.R_d
    return float(np.vdot(D, D).real)


def _mui_from(x, HtHx, data):
    # ||Hx - s||^2 expanded so that H^H H x can be reused by the next X update
    return float(np.vdot(x, HtHx).real - 2.0 * np.vdot(x, data.Hts).real + data.s_energy)


def mui_energy(X: np.ndarray, data: ProblemData) -> float:
    r = data.H @ X.reshape(-1) - data.s
    return float(np.vdot(r, r).real)


def objective(F: np.ndarray, X: np.ndarray, data: ProblemData) -> float:
    """Weighted sum of beampattern mismatch and multi-user interference energy."""
    a = data.cfg.alpha
    return a * _bp_term(F, X, data) + (1.0 - a) * mui_energy(X, data)


def _penalty(A, C, U, rho):
    D = A - C
    return float(0.5 * rho * np.vdot(D, D).real + np.vdot(U, D).real)


def alf_value(z: DesignState, U: np.ndarray, rho: float, data: ProblemData) -> float:
    """Augmented Lagrangian ``f + sum_k rho/2 ||X J_k F^H - C_k||^2 + Re tr(U_k^H (X J_k F^H - C_k))``."""
    nl = len(data.lags)
    shp = (nl, data.cfg.n_tx, data.cfg.n_rx)
    if z.C.shape != shp or U.shape != shp:
        raise ValueError(f"C and U must have shape {shp}, got {z.C.shape} and {U.shape}")
    if z.F.shape != (data.cfg.n_rx, data.cfg.block_len) or z.X.shape != (data.cfg.n_tx, data.cfg.block_len):
        raise ValueError("F or X shape does not match the configuration")
    A = kernels.lag_products(z.X, z.F, data.lags)
    return objective(z.F, z.X, data) + _penalty(A, z.C, U, rho)


def violation(z: DesignState, data: ProblemData) -> float:
    """``sqrt(sum_k ||X J_k F^H - C_k||^2)``."""
    D = kernels.lag_products(z.X, z.F, data.lags) - z.C
    return float(np.sqrt(np.vdot(D, D).real))


# ---------------------------------------------------------------- C block


def update_c(z: DesignState, U: np.ndarray, rho: float, beta: float, xi: float,
             data: ProblemData, A: np.ndarray | None = None) -> np.ndarray:
    """Proximal update of every ``C_k``; returns the new stack.

    ``A`` may pass precomputed lag products ``X J_k F^H``. The blocks are
    independent, so updating them together equals the cyclic order.
    """
    if A is None:
        A = kernels.lag_products(z.X, z.F, data.lags)
    Ct = (rho * A + U + beta * z.C) / (rho + beta)
    return project_ball(Ct, xi)


def c_subproblem_value(Ck, Ak, Uk, Ck_prev, rho, beta) -> float:
    """Objective of the per-lag proximal problem solved by :func:`update_c`."""
    D = Ak - Ck + Uk / rho
    E = Ck - Ck_prev
    return float(0.5 * rho * np.vdot(D, D).real + 0.5 * beta * np.vdot(E, E).real)


# ---------------------------------------------------------------- F block


def f_quadratic(X: np.ndarray, rho: float, alpha: float, lags) -> np.ndarray:
    """``Q = alpha X^H X + rho/2 sum_k J_k^T X^H X J_k``."""
    G = X.conj().T @ X
    return alpha * G + 0.5 * rho * kernels.shifted_gram_sum(G, lags)


def _f_linear(z, U, rho, data):
    # B = alpha R_d^H X + 1/2 sum_k W_k^H X J_k,   W_k = rho C_k - U_k
    W = rho * z.C - U
    return data.cfg.alpha * (data.R_d.conj().T @ z.X) + 0.5 * kernels.adjoint_f(W, z.X, data.lags)


def f_surrogate_terms(z, U, rho, data):
    """``(Q, lambda_q, B)`` of the F-block quadratic ``tr(F Q F^H) - 2 Re tr(B^H F)``."""
    Q = f_quadratic(z.X, rho, data.cfg.alpha, data.lags)
    lam = induced_one_norm(Q) * (1 + LAMBDA_MARGIN)
    return Q, lam, _f_linear(z, U, rho, data)


def lf_value(F, z, U, rho, data) -> float:
    """F-block part of the augmented Lagrangian (other blocks held at ``z``)."""
    Q = f_quadratic(z.X, rho, data.cfg.alpha, data.lags)
    B = _f_linear(z, U, rho, data)
    return float(np.vdot(F, F @ Q).real - 2.0 * np.vdot(B, F).real)


def grad_lf(F, z, U, rho, data) -> np.ndarray:
    Q = f_quadratic(z.X, rho, data.cfg.alpha, data.lags)
    return F @ Q - _f_linear(z, U, rho, data)


def f_direction(z, U, rho, data, terms=None) -> tuple[np.ndarray, float]:
    """``(Xi, lambda_q)`` with ``Xi = B - F Q + lambda_q F``."""
    Q, lam, B = f_surrogate_terms(z, U, rho, data) if terms is None else terms
    return B - z.F @ Q + lam * z.F, lam


def gf_value(F, F_t, z, U, rho, data) -> float:
    """Majorizer of :func:`lf_value` built at ``F_t``, evaluated at ``F``."""
    zt = DesignState(z.C, F_t, z.X)
    Q, lam, B = f_surrogate_terms(zt, U, rho, data)
    Xi = B - F_t @ Q + lam * F_t
    const = lam * np.vdot(F_t, F_t).real - np.vdot(F_t, F_t @ Q).real
    return float(lam * np.vdot(F, F).real - 2.0 * np.vdot(Xi, F).real + const)


def update_f(z: DesignState, U: np.ndarray, rho: float, data: ProblemData, terms=None) -> np.ndarray:
    """Minimize the F majorizer on ``||F||_F^2 = P_F``: ``sqrt(P_F) Xi / ||Xi||``."""
    Xi, _ = f_direction(z, U, rho, data, terms)
    n = np.linalg.norm(Xi)
    if n == 0:
        raise DegenerateDirectionError("filter update direction is zero")
    return np.sqrt(data.cfg.p_f) * Xi / n


# ---------------------------------------------------------------- X block


def x_quadratic(F: np.ndarray, rho: float, alpha: float, lags) -> np.ndarray:
    """``P = alpha F^H F + rho/2 sum_k J_k F^H F J_k^T``."""
    G = F.conj().T @ F
    return alpha * G + 0.5 * rho * kernels.shifted_gram_sum(G, lags)


def _x_linear(z, U, rho, data):
    # A = alpha R_d F + 1/2 sum_k W_k F J_k^T
    W = rho * z.C - U
    return data.cfg.alpha * (data.R_d @ z.F) + 0.5 * kernels.adjoint_x(W, z.F, data.lags)


def lx_value(X, z, U, rho, data) -> float:
    """X-block part of the augmented Lagrangian, including the interference term."""
    a = data.cfg.alpha
    P = x_quadratic(z.F, rho, a, data.lags)
    A = _x_linear(z, U, rho, data)
    x = X.reshape(-1)
    hx = data.apply_hth(x)
    mui = np.vdot(x, hx).real - 2.0 * np.vdot(x, data.Hts).real
    return float(np.vdot(X, X @ P).real - 2.0 * np.vdot(A, X).real + (1 - a) * mui)


def grad_lx(X, z, U, rho, data) -> np.ndarray:
    a = data.cfg.alpha
    P = x_quadratic(z.F, rho, a, data.lags)
    g = (data.HtH @ X.reshape(-1) - data.Hts).reshape(X.shape)
    return X @ P - _x_linear(z, U, rho, data) + (1 - a) * g


def x_direction(z, U, rho, data, HtHx=None) -> tuple[np.ndarray, float]:
    """``(Psi, lambda_p)`` for the current iterate ``z.X``."""
    a = data.cfg.alpha
    P = x_quadratic(z.F, rho, a, data.lags)
    lam = induced_one_norm(P) * (1 + LAMBDA_MARGIN)
    x = z.X.reshape(-1)
    if HtHx is None:
        HtHx = data.apply_hth(x)
    # row-stacked x, so a C-order reshape is the matching inverse
    Phi = (HtHx - data.lam_h * x - data.Hts).reshape(z.X.shape)
    Psi = _x_linear(z, U, rho, data) - (1 - a) * Phi - z.X @ P + lam * z.X
    return Psi, lam


def gx_value(X, X_t, z, U, rho, data) -> float:
    """Majorizer of :func:`lx_value` built at ``X_t``, evaluated at ``X``."""
    a = data.cfg.alpha
    zt = DesignState(z.C, z.F, X_t)
    Psi, lam = x_direction(zt, U, rho, data)
    # constant chosen so that the majorizer touches at X_t
    ref = lx_value(X_t, zt, U, rho, data)
    c = lam + (1 - a) * data.lam_h
    touch = c * np.vdot(X_t, X_t).real - 2.0 * np.vdot(Psi, X_t).real
    return float(c * np.vdot(X, X).real - 2.0 * np.vdot(Psi, X).real + ref - touch)


def update_x(z: DesignState, U: np.ndarray, rho: float, data: ProblemData, HtHx=None) -> np.ndarray:
    """Minimize the X majorizer on the unimodular set: ``p_x exp(j arg Psi)``.

    A zero entry of ``Psi`` gets phase 0.
    """
    Psi, _ = x_direction(z, U, rho, data, HtHx)
    return unimodular(Psi, data.cfg.p_x)


# ---------------------------------------------------------------- stationarity


def epsilon_bound(z_prev: DesignState, z_new: DesignState, rho: float, data: ProblemData) -> float:
    """Upper bound on the subgradient norm after a sweep from ``z_prev`` to ``z_new``."""
    cfg = data.cfg
    a = cfg.alpha
    c = 0.5 * rho * np.sqrt(cfg.block_len) * len(data.lags)
    sPX = np.sqrt(cfg.p_total)
    sPF = np.sqrt(cfg.p_f)
    dF = np.linalg.norm(z_new.F - z_prev.F)
    dX = np.linalg.norm(z_new.X - z_prev.X)
    dC = np.linalg.norm(z_new.C - z_prev.C, axis=(1, 2)).sum()
    LF = 2.0 * sPX * (a + c)
    LX = 2.0 * (sPF * (a + c) + (1 - a) * data.hth_fro)
    JC = c * (sPF * dX + sPX * dF) + cfg.beta * dC
    return float(LF * dF + LX * dX + JC)


def explicit_subgradient(z_prev: DesignState, z_new: DesignState, U: np.ndarray, rho: float,
                         data: ProblemData) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Subgradient ``(J_C, J_F, J_X)`` certified by one sweep ``z_prev -> z_new``.

    Each block is the gradient of the block objective at the new point minus
    the gradient of the surrogate that produced it; the surrogate's optimality
    puts the negated surrogate gradient in the normal cone of the block's set.
    """
    a = data.cfg.alpha
    beta = data.cfg.beta
    # C: per-lag proximal surrogate built at (F_prev, X_prev)
    A_prev = kernels.lag_products(z_prev.X, z_prev.F, data.lags)
    A_new = kernels.lag_products(z_new.X, z_new.F, data.lags)
    J_C = -0.5 * rho * (A_new - A_prev) - 0.5 * beta * (z_new.C - z_prev.C)
    # F: surrogate built at F_prev with (C_new, X_prev)
    zf = DesignState(z_new.C, z_prev.F, z_prev.X)
    Q, lam_q, _ = f_surrogate_terms(zf, U, rho, data)
    dF = z_new.F - z_prev.F
    J_F = dF @ Q - lam_q * dF
    # X: surrogate built at X_prev with (C_new, F_new)
    P = x_quadratic(z_new.F, rho, a, data.lags)
    lam_p = induced_one_norm(P) * (1 + LAMBDA_MARGIN)
    dX = z_new.X - z_prev.X
    dx = dX.reshape(-1)
    J_X = dX @ P - lam_p * dX + (1 - a) * (data.HtH @ dx - data.lam_h * dx).reshape(dX.shape)
    return J_C, J_F, J_X


# ---------------------------------------------------------------- SQUAREM


def _squarem_step(p0, p1, p2, axis=None):
    """Minimal-residual extrapolation ``p0 - 2 a r + a^2 v`` with ``a <= -1``."""
    r = p1 - p0
    v = p2 - 2.0 * p1 + p0
    nr = np.sqrt(np.sum(np.abs(r) ** 2, axis=axis, keepdims=axis is not None))
    nv = np.sqrt(np.sum(np.abs(v) ** 2, axis=axis, keepdims=axis is not None))
    a = -np.divide(nr, nv, out=np.ones_like(nr), where=nv > 0)
    a = np.minimum(a, -1.0)
    return p0 - 2.0 * a * r + a * a * v


def _squarem_f(z, U, rho, data):
    F0 = z.F
    zz = DesignState(z.C, F0, z.X)
    F1 = update_f(zz, U, rho, data)
    zz.F = F1
    F2 = update_f(zz, U, rho, data)
    Fe = _squarem_step(F0, F1, F2)
    n = np.linalg.norm(Fe)
    if n == 0 or not np.isfinite(n):
        return F2, False
    zz.F = np.sqrt(data.cfg.p_f) * Fe / n
    Fc = update_f(zz, U, rho, data)
    if lf_value(Fc, z, U, rho, data) <= lf_value(F2, z, U, rho, data):
        return Fc, True
    return F2, False


def _squarem_x(z, U, rho, data):
    p_x = data.cfg.p_x
    X0 = z.X
    zz = DesignState(z.C, z.F, X0)
    X1 = update_x(zz, U, rho, data)
    zz.X = X1
    X2 = update_x(zz, U, rho, data)
    zz.X = unimodular(_squarem_step(X0, X1, X2, axis=1), p_x)
    Xc = update_x(zz, U, rho, data)
    if lx_value(Xc, z, U, rho, data) <= lx_value(X2, z, U, rho, data):
        return Xc, True
    return X2, False


# ---------------------------------------------------------------- driver


def solve_subproblem(z0: DesignState, U: np.ndarray, rho: float, eps_target: float,
                     data: ProblemData, max_inner: int | None = None,
                     squarem: bool | None = None) -> tuple[DesignState, InnerReport]:
    """Sweep C, F, X until the stationarity bound drops to ``eps_target``.

    ``eps_target=np.inf`` performs exactly one sweep.
    """
    cfg = data.cfg
    max_inner = cfg.max_inner if max_inner is None else max_inner
    squarem = cfg.squarem if squarem is None else squarem
    a = cfg.alpha
    lags = data.lags

    z = z0.copy()
    rep = InnerReport()
    A = kernels.lag_products(z.X, z.F, lags)
    x = z.X.reshape(-1)
    HtHx = data.apply_hth(x)
    bp = _bp_term(z.F, z.X, data)
    mui = _mui_from(x, HtHx, data)
    rep.alf_trace.append(a * bp + (1 - a) * mui + _penalty(A, z.C, U, rho))

    for it in range(1, max_inner + 1):
        prev = z.copy()
        # C blocks
        z.C = update_c(z, U, rho, cfg.beta, data.xi, data, A=A)
        rep.alf_trace.append(a * bp + (1 - a) * mui + _penalty(A, z.C, U, rho))
        # F block
        try:
            if squarem:
                F_new, acc = _squarem_f(z, U, rho, data)
                rep.squarem_accepted += acc
            else:
                F_new = update_f(z, U, rho, data)
            z.F = F_new
        except DegenerateDirectionError:
            log.warning("zero filter direction at sweep %d; keeping F", it)
        A = kernels.lag_products(z.X, z.F, lags)
        bp = _bp_term(z.F, z.X, data)
        rep.alf_trace.append(a * bp + (1 - a) * mui + _penalty(A, z.C, U, rho))
        # X block
        if squarem:
            X_new, acc = _squarem_x(z, U, rho, data)
            rep.squarem_accepted += acc
        else:
            X_new = update_x(z, U, rho, data, HtHx=HtHx)
        z.X = X_new
        x = z.X.reshape(-1)
        HtHx = data.apply_hth(x)
        A = kernels.lag_products(z.X, z.F, lags)
        bp = _bp_term(z.F, z.X, data)
        mui = _mui_from(x, HtHx, data)
        rep.alf_trace.append(a * bp + (1 - a) * mui + _penalty(A, z.C, U, rho))

        e = epsilon_bound(prev, z, rho, data)
        rep.e_bound_trace.append(e)
        rep.iters = it
        if e <= eps_target:
            break
    else:
        rep.hit_max_inner = True
    return z, rep
