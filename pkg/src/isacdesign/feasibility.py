"""Feasible starting point: unimodular X and full-power F with every lag sidelobe <= xi.

Two alternating steps, both driving the integrated sidelobe level
``sum_k ||X J_k F^H||_F^2`` down:

* an MM step in ``X`` (quadratic majorized by an induced-1-norm bound, then
  projected onto the unimodular set), and
* the exact minimizer over ``F`` on the ``||F||_F^2 = P_F`` sphere, which puts
  all filter energy on the least-sidelobe eigenvector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import ProblemConfig, ProblemData, lag_set, psl_threshold


class InfeasibleError(RuntimeError):
    """No point meeting the sidelobe bound was found; ``best`` holds the smallest max-lag level."""

    def __init__(self, message: str, best: float):
        super().__init__(message)
        self.best = best


def induced_one_norm(A: np.ndarray) -> float:
    """Maximum absolute column sum (upper-bounds the spectral radius)."""
    return float(np.abs(A).sum(axis=0).max())


def unimodular(Z: np.ndarray, p_x: float = 1.0) -> np.ndarray:
    """Entrywise projection onto ``|x| = p_x``; zero entries get phase 0."""
    mag = np.abs(Z)
    out = np.full(Z.shape, p_x, dtype=complex)
    nz = mag > 0
    out[nz] = p_x * Z[nz] / mag[nz]
    return out


def isl(X: np.ndarray, F: np.ndarray, lags) -> float:
    A = kernels.lag_products(X, F, lags)
    return float(np.vdot(A, A).real)


def lag_levels(X: np.ndarray, F: np.ndarray, lags) -> np.ndarray:
    """``||X J_k F^H||_F`` for every lag."""
    A = kernels.lag_products(X, F, lags)
    return np.sqrt(np.einsum("lij,lij->l", A.conj(), A).real)


def isl_mm_step_x(X: np.ndarray, F: np.ndarray, lags, p_x: float = 1.0) -> np.ndarray:
    """One majorize-minimize step of the sidelobe energy in ``X``; never increases it."""
    theta = kernels.shifted_gram_sum(F.conj().T @ F, lags)
    lam = induced_one_norm(theta)
    return unimodular(lam * X - X @ theta, p_x)


def isl_min_filter(X: np.ndarray, lags, p_f: float, n_rx: int) -> tuple[np.ndarray, float]:
    """Filter minimizing the sidelobe energy for fixed ``X`` on the power sphere.

    Returns ``(F, lambda_min)``; the attained sidelobe energy is ``p_f * lambda_min``.
    Only the last row of ``F`` is nonzero.
    """
    phi = kernels.shifted_gram_sum(X.conj().T @ X, lags)
    phi = 0.5 * (phi + phi.conj().T)
    w, V = np.linalg.eigh(phi)
    F = np.zeros((n_rx, X.shape[1]), dtype=complex)
    F[-1] = np.sqrt(p_f) * V[:, 0].conj()
    return F, float(max(w[0], 0.0))


@dataclass(frozen=True, eq=False)
class FeasiblePoint:
    X: np.ndarray
    F: np.ndarray
    C: np.ndarray  # (nlag, n_tx, n_rx), C[l] = X J_{lags[l]} F^H
    f: float
    rounds: int

    def with_objective(self, data: ProblemData) -> "FeasiblePoint":
        """Same point, objective re-evaluated on another problem instance."""
        from .bsum import objective

        return FeasiblePoint(self.X, self.F, self.C, objective(self.F, self.X, data), self.rounds)


def find_feasible(cfg: ProblemConfig, data: ProblemData | None = None,
                  rng: np.random.Generator | None = None, max_rounds: int | None = None,
                  sweeps: int | None = None) -> FeasiblePoint:
    """Search a point with ``max_k ||X J_k F^H||_F <= xi``.

    The search depends only on the array sizes and the threshold, so it is
    seeded with ``cfg.feas_seed`` by default and shared across problem draws.
    ``data`` is only used to evaluate the objective at the returned point.
    """
    rng = np.random.default_rng(cfg.feas_seed) if rng is None else rng
    max_rounds = cfg.feas_rounds if max_rounds is None else max_rounds
    sweeps = cfg.feas_sweeps if sweeps is None else sweeps
    lags = lag_set(cfg.k_max)
    xi = psl_threshold(cfg)
    T = cfg.block_len

    X = unimodular(np.exp(2j * np.pi * rng.random((cfg.n_tx, T))), cfg.p_x)
    F = rng.standard_normal((cfg.n_rx, T)) + 1j * rng.standard_normal((cfg.n_rx, T))
    F *= np.sqrt(cfg.p_f) / np.linalg.norm(F)

    best = np.inf
    for rnd in range(1, max_rounds + 1):
        for _ in range(sweeps):
            X = isl_mm_step_x(X, F, lags, cfg.p_x)
        peak = lag_levels(X, F, lags).max()
        best = min(best, peak)
        if peak <= xi:
            break
        F, _ = isl_min_filter(X, lags, cfg.p_f, cfg.n_rx)
        peak = lag_levels(X, F, lags).max()
        best = min(best, peak)
        if peak <= xi:
            break
    else:
        raise InfeasibleError(
            f"no feasible point after {max_rounds} rounds: best max sidelobe {best:.4g} > xi={xi:.4g}",
            best)

    C = kernels.lag_products(X, F, lags)
    f = np.nan
    if data is not None:
        from .bsum import objective

        f = objective(F, X, data)
    return FeasiblePoint(X, F, C, f, rnd)
