"""Inexact augmented-Lagrangian outer loop around the BSUM inner solver."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .bsum import (DesignState, alf_value, objective, random_state, solve_subproblem, violation,
                   zero_multipliers)
from .evaluation import beampattern_mse, sidelobe_levels, sum_rate
from .feasibility import FeasiblePoint, find_feasible
from .model import ProblemData

log = logging.getLogger(__name__)

STOP_SCALE = 1e-3


@dataclass
class DualState:
    U: np.ndarray
    rho: float
    v: float = np.inf
    e: float = np.inf
    zeta: float = np.inf


@dataclass
class OuterReport:
    outer_iters: int = 0
    v_trace: list = field(default_factory=list)
    e_trace: list = field(default_factory=list)
    rho_trace: list = field(default_factory=list)  # penalty used in each iteration
    alf_trace: list = field(default_factory=list)
    rate_trace: list = field(default_factory=list)
    bpmse_trace: list = field(default_factory=list)
    maxsl_trace: list = field(default_factory=list)
    inner_iters: list = field(default_factory=list)
    converged: bool = False
    zeta: float = np.nan
    zeta_ok: bool = True  # every accepted inner solution kept ALF <= zeta
    feasible_starts: int = 0  # inner solves restarted from the feasible point
    # largest per-block ALF increase over all inner solves, relative to max(1, |ALF|)
    max_alf_increase: float = 0.0
    wall_time: float = 0.0
    final: DesignState | None = None

    def rows(self):
        """One tuple per outer iteration: iter, alf, v, e, rho, sum_rate, bp_mse, max_sidelobe, inner."""
        return list(zip(range(1, self.outer_iters + 1), self.alf_trace, self.v_trace, self.e_trace,
                        self.rho_trace, self.rate_trace, self.bpmse_trace, self.maxsl_trace,
                        self.inner_iters))


def compute_zeta(feas: FeasiblePoint, z0: DesignState, U0: np.ndarray, rho0: float,
                 data: ProblemData) -> float:
    """Smallest admissible ALF ceiling: ``max(f(feasible point), ALF(z0))``."""
    f_feas = objective(feas.F, feas.X, data)
    return max(f_feas, alf_value(z0, U0, rho0, data))


def feasible_state(feas: FeasiblePoint) -> DesignState:
    return DesignState(feas.C.copy(), feas.F.copy(), feas.X.copy())


def pick_inner_start(feas: FeasiblePoint, z_prev: DesignState, U: np.ndarray, rho: float,
                     data: ProblemData, f_feas: float | None = None) -> DesignState:
    """Warm start unless the feasible point has a strictly lower ALF.

    At the feasible point the penalty and multiplier terms vanish, so its ALF
    is ``f``; ties keep ``z_prev``.
    """
    if f_feas is None:
        f_feas = objective(feas.F, feas.X, data)
    if f_feas < alf_value(z_prev, U, rho, data):
        return feasible_state(feas)
    return z_prev


def update_multipliers(U: np.ndarray, z_new: DesignState, rho: float, u_max: float, lags,
                       A: np.ndarray | None = None) -> np.ndarray:
    """Dual ascent step, then entrywise magnitude clip to ``u_max`` (phase kept)."""
    if A is None:
        A = kernels.lag_products(z_new.X, z_new.F, lags)
    Ut = U + rho * (A - z_new.C)
    mag = np.abs(Ut)
    over = mag > u_max
    if np.any(over):
        Ut = Ut.copy()
        Ut[over] *= u_max / mag[over]
    return Ut


def update_penalty(rho: float, v_new: float, v_prev: float, delta: float, gamma: float) -> float:
    """Grow ``rho`` by ``gamma`` unless the violation shrank by at least ``delta``."""
    return gamma * rho if v_new > delta * v_prev else rho


def stop_threshold(data: ProblemData) -> float:
    return float(np.sqrt(data.cfg.block_len) * STOP_SCALE)


def run(data: ProblemData, rng: np.random.Generator | None = None,
        feas: FeasiblePoint | None = None, z0: DesignState | None = None,
        callback=None) -> tuple[DesignState, OuterReport]:
    """Full design for one problem instance.

    ``rng`` draws the random initial point (default seeded by ``cfg.seed``).
    ``feas`` may be passed to share one feasible point across runs; otherwise
    it is searched with the configured feasibility seed. ``callback(l, z, dual)``
    is called after every outer iteration.
    """
    cfg = data.cfg
    t0 = time.perf_counter()
    if feas is None:
        feas = find_feasible(cfg, data)
    f_feas = objective(feas.F, feas.X, data)
    if rng is None:
        rng = np.random.default_rng([cfg.seed, 1])
    z = random_state(data, rng) if z0 is None else z0.copy()
    dual = DualState(U=zero_multipliers(data), rho=cfg.rho0)
    dual.zeta = compute_zeta(feas, z, dual.U, dual.rho, data)
    dual.v = violation(z, data)
    tol = stop_threshold(data)

    rep = OuterReport(zeta=dual.zeta)
    e0 = None
    for ell in range(1, cfg.max_outer + 1):
        start = pick_inner_start(feas, z, dual.U, dual.rho, data, f_feas)
        if start is not z:
            rep.feasible_starts += 1
        eps = np.inf if e0 is None else e0 / ell
        z, inner = solve_subproblem(start, dual.U, dual.rho, eps, data)
        if e0 is None:
            # the first sweep from the initial point fixes the tolerance schedule
            e0 = inner.e_bound_trace[0]
        tr = np.asarray(inner.alf_trace)
        inc = np.diff(tr) / np.maximum(1.0, np.abs(tr[:-1]))
        rep.max_alf_increase = max(rep.max_alf_increase, float(inc.max(initial=0.0)))
        alf = inner.alf_trace[-1]
        if alf > dual.zeta * (1 + 1e-12) + 1e-12:
            rep.zeta_ok = False
            log.warning("ALF %.6g exceeds zeta %.6g at outer iteration %d", alf, dual.zeta, ell)

        A = kernels.lag_products(z.X, z.F, data.lags)
        dual.e = inner.e_bound_trace[-1]
        rho_used = dual.rho
        dual.U = update_multipliers(dual.U, z, dual.rho, cfg.u_max, data.lags, A)
        D = A - z.C
        v = float(np.sqrt(np.vdot(D, D).real))
        dual.rho = update_penalty(dual.rho, v, dual.v, cfg.delta, cfg.gamma)
        dual.v = v

        rep.outer_iters = ell
        rep.alf_trace.append(alf)
        rep.v_trace.append(v)
        rep.e_trace.append(dual.e)
        rep.rho_trace.append(rho_used)
        rep.rate_trace.append(sum_rate(z.X, data))
        rep.bpmse_trace.append(beampattern_mse(z.X, z.F, data.R_d))
        rep.maxsl_trace.append(sidelobe_levels(z.X, z.F, data.lags).peak)
        rep.inner_iters.append(inner.iters)
        if callback is not None:
            callback(ell, z, dual)
        if max(dual.e, v) <= tol:
            rep.converged = True
            break

    rep.final = z
    rep.wall_time = time.perf_counter() - t0
    return z, rep
