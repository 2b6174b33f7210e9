"""Seeded batches of designs: Monte-Carlo campaigns and parameter sweeps."""

from __future__ import annotations

import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import alm
from .feasibility import FeasiblePoint, find_feasible
from .model import ProblemConfig, sample_problem

log = logging.getLogger(__name__)

TRACE_FIELDS = ("alf", "v", "e", "rho", "sum_rate", "bp_mse", "max_sidelobe")
SWEEP_AXES = ("k_max", "pslr_db", "alpha", "snr_db")


@dataclass
class SeedResult:
    seed: int
    converged: bool = False
    outer_iters: int = 0
    sum_rate: float = np.nan
    bp_mse: float = np.nan
    max_sidelobe: float = np.nan
    v: float = np.nan
    e: float = np.nan
    wall_time: float = 0.0
    zeta_ok: bool = True
    max_alf_increase: float = 0.0
    xi: float = np.nan
    error: str | None = None
    traces: dict = field(default_factory=dict)  # TRACE_FIELDS -> list
    inner_iters: list = field(default_factory=list)
    X: np.ndarray | None = None
    F: np.ndarray | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_seed(cfg: ProblemConfig, seed: int, feas: FeasiblePoint | None = None,
             keep_design: bool = False) -> SeedResult:
    """One design with fresh channel, symbols and initial point for ``seed``."""
    res = SeedResult(seed=seed)
    try:
        c = cfg.replace(seed=seed)
        data = sample_problem(c)
        res.xi = data.xi
        z, rep = alm.run(data, feas=feas)
        res.converged = rep.converged
        res.outer_iters = rep.outer_iters
        res.sum_rate = rep.rate_trace[-1]
        res.bp_mse = rep.bpmse_trace[-1]
        res.max_sidelobe = rep.maxsl_trace[-1]
        res.v = rep.v_trace[-1]
        res.e = rep.e_trace[-1]
        res.wall_time = rep.wall_time
        res.zeta_ok = rep.zeta_ok
        res.max_alf_increase = rep.max_alf_increase
        res.traces = {
            "alf": rep.alf_trace, "v": rep.v_trace, "e": rep.e_trace, "rho": rep.rho_trace,
            "sum_rate": rep.rate_trace, "bp_mse": rep.bpmse_trace, "max_sidelobe": rep.maxsl_trace,
        }
        res.inner_iters = rep.inner_iters
        if keep_design:
            res.X, res.F = z.X, z.F
    except Exception as exc:  # one failing seed must not stop the campaign
        log.error("seed %d failed: %s", seed, exc)
        res.error = f"{type(exc).__name__}: {exc}"
        log.debug("%s", traceback.format_exc())
    return res


def _job(args):
    return run_seed(*args)


def run_campaign(cfg: ProblemConfig, seeds, workers: int = 1, keep_design: bool = False) -> list:
    """Designs for every seed, sharing one feasible point; results in seed order."""
    seeds = list(seeds)
    try:
        feas = find_feasible(cfg)
    except Exception as exc:
        return [SeedResult(seed=s, error=f"{type(exc).__name__}: {exc}") for s in seeds]
    jobs = [(cfg, s, feas, keep_design) for s in seeds]
    if workers <= 1 or len(jobs) <= 1:
        return [_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_job, jobs))


def aggregate_curves(results: list) -> dict:
    """Mean and std over seeds of every trace, per outer iteration.

    Runs that stopped early contribute their final value to later
    iterations, so every curve spans the longest run.
    """
    ok = [r for r in results if r.ok and r.outer_iters > 0]
    if not ok:
        return {"iter": np.zeros(0, dtype=int)}
    n = max(r.outer_iters for r in ok)
    out = {"iter": np.arange(1, n + 1)}
    for name in TRACE_FIELDS:
        M = np.empty((len(ok), n))
        for j, r in enumerate(ok):
            t = np.asarray(r.traces[name], dtype=float)
            M[j, :t.size] = t
            M[j, t.size:] = t[-1]
        out[name + "_mean"] = M.mean(axis=0)
        out[name + "_std"] = M.std(axis=0)
    return out


def inner_histogram(results: list) -> tuple[np.ndarray, np.ndarray]:
    """``(sweeps, counts)`` over every inner solve of every successful run."""
    allv = np.concatenate([np.asarray(r.inner_iters, dtype=int) for r in results if r.ok] or
                          [np.zeros(0, dtype=int)])
    if allv.size == 0:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    sweeps = np.arange(1, allv.max() + 1)
    return sweeps, np.bincount(allv, minlength=allv.max() + 1)[1:]


def inner_fraction_within(results: list, limit: int = 10) -> float:
    sweeps, counts = inner_histogram(results)
    total = counts.sum()
    return float(counts[sweeps <= limit].sum() / total) if total else float("nan")


def apply_axis(cfg: ProblemConfig, axis: str, value: float) -> ProblemConfig:
    """Config with one sweep axis set; ``snr_db`` maps to ``sigma_n2 = 10**(-snr/10)``."""
    if axis == "k_max":
        if float(value) != int(value):
            raise ValueError(f"k_max must be an integer, got {value}")
        return cfg.replace(k_max=int(value))
    if axis == "pslr_db":
        return cfg.replace(pslr_db=float(value))
    if axis == "alpha":
        return cfg.replace(alpha=float(value))
    if axis == "snr_db":
        return cfg.replace(sigma_n2=10.0 ** (-float(value) / 10.0))
    raise ValueError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")


def run_sweep(cfg: ProblemConfig, axis: str, values, seeds, workers: int = 1) -> list:
    """``[(value, SeedResult), ...]`` for every value and seed."""
    cfgs = [(v, apply_axis(cfg, axis, v)) for v in values]  # validate all values first
    rows = []
    for v, c in cfgs:
        for r in run_campaign(c, seeds, workers):
            rows.append((v, r))
    return rows
