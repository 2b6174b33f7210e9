"""Compare the compiled and numpy kernel backends at the default problem size.

Usage::

    python benchmarks/bench_kernels.py [--repeat N] [--sweeps N]

Prints per-call times for every kernel under both backends and the time of
BSUM sweeps with each backend switched in.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from isacdesign import bsum, kernels
from isacdesign.kernels import _fallback
from isacdesign.model import ProblemConfig, sample_problem

try:
    from isacdesign.kernels import _core
except ImportError:  # extension not built
    _core = None


def _inputs(cfg: ProblemConfig, rng):
    T = cfg.block_len
    nl = 2 * cfg.k_max
    c = lambda *s: rng.standard_normal(s) + 1j * rng.standard_normal(s)
    return dict(X=c(cfg.n_tx, T), F=c(cfg.n_rx, T), G=c(T, T), W=c(nl, cfg.n_tx, cfg.n_rx),
                lags=np.ascontiguousarray(cfg.lags, dtype=np.int_))


def time_kernels(impl, a, repeat: int) -> dict:
    calls = {
        "lag_products": lambda: impl.lag_products(a["X"], a["F"], a["lags"]),
        "shifted_gram_sum": lambda: impl.shifted_gram_sum(a["G"], a["lags"]),
        "adjoint_f": lambda: impl.adjoint_f(a["W"], a["X"], a["lags"]),
        "adjoint_x": lambda: impl.adjoint_x(a["W"], a["F"], a["lags"]),
    }
    out = {}
    for name, fn in calls.items():
        fn()
        out[name] = min(timeit.repeat(fn, number=repeat, repeat=5)) / repeat
    return out


def time_sweeps(impl, data, sweeps: int) -> float:
    """Seconds per BSUM sweep with ``impl`` patched into the dispatch module."""
    saved = kernels._impl
    kernels._impl = impl
    try:
        rng = np.random.default_rng(0)
        z = bsum.random_state(data, rng)
        U = bsum.zero_multipliers(data)
        bsum.solve_subproblem(z, U, 1.0, 0.0, data, max_inner=2)
        best = np.inf
        for _ in range(3):
            t = timeit.default_timer()
            bsum.solve_subproblem(z, U, 1.0, 0.0, data, max_inner=sweeps)
            best = min(best, timeit.default_timer() - t)
        return best / sweeps
    finally:
        kernels._impl = saved


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=2000)
    p.add_argument("--sweeps", type=int, default=200)
    args = p.parse_args(argv)

    cfg = ProblemConfig()
    a = _inputs(cfg, np.random.default_rng(1))
    backends = [("numpy", _fallback)] + ([("cython", _core)] if _core is not None else [])
    if _core is None:
        print("compiled extension not built; timing numpy only")
    res = {name: time_kernels(impl, a, args.repeat) for name, impl in backends}

    print(f"kernel times at n_tx={cfg.n_tx} n_rx={cfg.n_rx} T={cfg.block_len} K={cfg.k_max} (us/call)")
    print(f"{'kernel':<18}" + "".join(f"{n:>10}" for n, _ in backends) + ("   speedup" if _core else ""))
    for k in res["numpy"]:
        row = f"{k:<18}" + "".join(f"{res[n][k] * 1e6:>10.1f}" for n, _ in backends)
        if _core is not None:
            row += f"{res['numpy'][k] / res['cython'][k]:>9.2f}x"
        print(row)

    data = sample_problem(cfg)
    print(f"\nBSUM sweep (ms/sweep over {args.sweeps} sweeps)")
    for name, impl in backends:
        print(f"{name:<18}{time_sweeps(impl, data, args.sweeps) * 1e3:>10.3f}")


if __name__ == "__main__":
    main()
