"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Campaign criteria (1-5) run full designs at the default sizes with SQUAREM
off and take several minutes in total.
"""

import itertools

import numpy as np
import pytest

from isacdesign import alm, campaign
from isacdesign.bsum import (epsilon_bound, explicit_subgradient, gf_value, grad_lf, grad_lx,
                             gx_value, lf_value, lx_value, random_state, solve_subproblem)
from isacdesign.evaluation import SceneSpec, form_image, image_snr_noise_var, simulate_echo
from isacdesign.feasibility import unimodular
from isacdesign.model import ProblemConfig, angle_grid, build_cp_channel, lag_set, sample_problem

from conftest import crandn
from test_bsum import fd_conj_grad
from test_evaluation import echo_oracle
from test_model import cp_oracle

N_SEEDS = 20
TREND_SEEDS = 10


@pytest.fixture(scope="module")
def default_runs():
    cfg = ProblemConfig(squarem=False)
    return campaign.run_campaign(cfg, range(N_SEEDS))


@pytest.fixture(scope="module")
def trend_runs(default_runs):
    """Seed-averaged metrics per K and per PSLR; the default point reuses the default-config runs."""
    base = ProblemConfig(squarem=False)
    seeds = range(TREND_SEEDS)
    shared = default_runs[:TREND_SEEDS]
    by_k = {base.k_max: shared}
    for k in (2, 4):
        by_k[k] = campaign.run_campaign(base.replace(k_max=k), seeds)
    by_p = {base.pslr_db: shared}
    for p in (20.0, 25.0):
        by_p[p] = campaign.run_campaign(base.replace(pslr_db=p), seeds)
    return by_k, by_p


def _mean(results, attr):
    return float(np.mean([getattr(r, attr) for r in results]))


def test_c01_constraint_satisfaction(default_runs, acceptance):
    assert all(r.ok for r in default_runs), [r.error for r in default_runs if not r.ok]
    met = sum(r.max_sidelobe <= r.xi * 1.01 for r in default_runs)
    worst = max(r.max_sidelobe / r.xi for r in default_runs)
    ok = acceptance(1, "constraint satisfaction", met >= 19,
                    f"{met}/{N_SEEDS} runs with max sidelobe <= 1.01 xi (worst ratio {worst:.6f})")
    assert ok


def test_c02_convergence(default_runs, acceptance):
    conv = sum(r.converged for r in default_runs)
    tol = np.sqrt(64) * alm.STOP_SCALE
    e = np.array([r.e for r in default_runs])
    v = np.array([r.v for r in default_runs])
    ok = acceptance(2, "convergence", conv >= 0.8 * N_SEEDS,
                    f"{conv}/{N_SEEDS} runs reached max(e, v) <= {tol:.3g} in 500 iterations; "
                    f"final e in [{e.min():.3g}, {e.max():.3g}], v max {v.max():.3g}")
    assert ok


def test_c03_inner_efficiency(default_runs, acceptance):
    frac = campaign.inner_fraction_within(default_runs, 10)
    n = sum(len(r.inner_iters) for r in default_runs)
    ok = acceptance(3, "inner-loop efficiency", frac >= 0.9,
                    f"{frac:.4f} of {n} inner solves finished within 10 sweeps")
    assert ok


def test_c04_trends(trend_runs, acceptance):
    by_k, by_p = trend_runs
    for group in (*by_k.values(), *by_p.values()):
        assert all(r.ok for r in group)
    bp = [_mean(by_k[k], "bp_mse") for k in (2, 4, 6)]
    rate = [_mean(by_p[p], "sum_rate") for p in (20.0, 25.0, 30.0)]
    ok = all(a <= b for a, b in zip(bp, bp[1:])) and all(a >= b for a, b in zip(rate, rate[1:]))
    acceptance(4, "trend reproduction", ok,
               "bp_mse over K=2,4,6: " + ", ".join(f"{x:.4g}" for x in bp) +
               "; sum_rate over 20,25,30 dB: " + ", ".join(f"{x:.4g}" for x in rate))
    assert ok


def test_c05_monotone_alf(default_runs, trend_runs, acceptance):
    by_k, by_p = trend_runs
    runs = {id(r): r for r in itertools.chain(default_runs, *by_k.values(), *by_p.values())}.values()
    worst = max(r.max_alf_increase for r in runs)
    ok = acceptance(5, "monotone ALF", worst <= 1e-9,
                    f"largest relative per-block increase {worst:.3g} over {len(runs)} runs")
    assert ok


def _small(n, T, k, **kw):
    return ProblemConfig(n_tx=n, n_rx=n, n_users=2, block_len=T, cp_len=1, k_max=k, p_f=2.0 * T,
                         pslr_db=10.0, **kw)


def test_c06_majorization(acceptance):
    cfg = _small(2, 8, 2)
    worst_touch, worst_bound = 0.0, -np.inf
    rng = np.random.default_rng(6)
    for i in range(1000):
        data = sample_problem(cfg, seed=i % 20)
        z = random_state(data, rng)
        U = crandn(rng, *z.C.shape)
        rho = float(10 ** rng.uniform(-3, 2))
        lf, lx = lf_value(z.F, z, U, rho, data), lx_value(z.X, z, U, rho, data)
        worst_touch = max(worst_touch, abs(gf_value(z.F, z.F, z, U, rho, data) - lf),
                          abs(gx_value(z.X, z.X, z, U, rho, data) - lx))
        # feasible points from next to the touch point out to far away
        t = 10 ** rng.uniform(-3, 1)
        F = z.F + t * crandn(rng, *z.F.shape)
        F *= np.sqrt(cfg.p_f) / np.linalg.norm(F)
        X = unimodular(z.X + t * crandn(rng, *z.X.shape))
        worst_bound = max(worst_bound,
                          lf_value(F, z, U, rho, data) - gf_value(F, z.F, z, U, rho, data),
                          lx_value(X, z, U, rho, data) - gx_value(X, z.X, z, U, rho, data))
    ok = acceptance(6, "majorization touch and bound", worst_touch <= 1e-8 and worst_bound <= 1e-8,
                    f"max touch gap {worst_touch:.3g}, max bound violation {worst_bound:.3g} over 1000 states")
    assert ok


def test_c07_gradient_oracle(acceptance):
    cfg = _small(2, 4, 1)
    rng = np.random.default_rng(7)
    worst = 0.0
    for i in range(20):
        data = sample_problem(cfg, seed=i)
        z = random_state(data, rng)
        U = crandn(rng, *z.C.shape)
        rho = float(rng.uniform(0.01, 10))
        gF = grad_lf(z.F, z, U, rho, data)
        fdF = fd_conj_grad(lambda F: lf_value(F, z, U, rho, data), z.F, h=1e-5)
        gX = grad_lx(z.X, z, U, rho, data)
        fdX = fd_conj_grad(lambda X: lx_value(X, z, U, rho, data), z.X, h=1e-5)
        worst = max(worst, np.linalg.norm(gF - fdF) / np.linalg.norm(gF),
                    np.linalg.norm(gX - fdX) / np.linalg.norm(gX))
    ok = acceptance(7, "gradient oracle", worst <= 1e-5, f"max relative error {worst:.3g}")
    assert ok


def test_c08_cp_channel(acceptance):
    rng = np.random.default_rng(8)
    worst = 0.0
    pairs = [(T, L) for T in range(1, 9) for L in range(T)]
    for T, L in pairs:
        for _ in range(50):
            taps = crandn(rng, L + 1)
            H = build_cp_channel(taps, T, L).link(0, 0)
            circ = max(np.abs(H[:, j] - np.roll(H[:, 0], j)).max() for j in range(T))
            worst = max(worst, np.abs(H - cp_oracle(taps, T, L)).max(), circ)
    ok = acceptance(8, "CP-channel oracle", worst <= 1e-12,
                    f"max deviation {worst:.3g} over {len(pairs)} (T, L) pairs x 50 tap sets")
    assert ok


def test_c09_epsilon_bound(acceptance):
    cfg = _small(2, 4, 1)
    rng = np.random.default_rng(9)
    worst = -np.inf
    for i in range(100):
        data = sample_problem(cfg, seed=i)
        z = random_state(data, rng)
        U = crandn(rng, *z.C.shape)
        rho = float(10 ** rng.uniform(-3, 2))
        new, _ = solve_subproblem(z, U, rho, np.inf, data)
        J = explicit_subgradient(z, new, U, rho, data)
        norm = np.sqrt(sum(np.linalg.norm(j) ** 2 for j in J))
        worst = max(worst, norm - epsilon_bound(z, new, rho, data))
    ok = acceptance(9, "epsilon-bound soundness", worst <= 1e-9,
                    f"max (subgradient norm - bound) {worst:.3g} over 100 sweeps")
    assert ok


def test_c10_echo_oracle(acceptance):
    rng = np.random.default_rng(10)
    worst = 0.0
    count = 0
    for T in range(3, 9):
        for k in (1, 2):
            for _ in range(20):
                n_tx, n_rx = rng.integers(1, 4, size=2)
                rows = [(int(rng.integers(-k, k + 1)), float(rng.uniform(-80, 80)),
                         complex(*rng.standard_normal(2))) for _ in range(rng.integers(1, 5))]
                scene = SceneSpec.from_rows(rows, k_scene=k)
                X = unimodular(crandn(rng, n_tx, T))
                echo = simulate_echo(scene, X, n_rx, lag_set(k))
                for i, D in echo.items():
                    worst = max(worst, np.abs(D - echo_oracle(scene, X, n_rx, lag_set(k), i)).max())
                count += 1
    ok = acceptance(10, "echo-model oracle", worst <= 1e-9, f"max deviation {worst:.3g} over {count} scenes")
    assert ok


def test_c11_image(acceptance):
    cfg = ProblemConfig(bp_centers_deg=(-30.0, 0.0, 30.0), bp_width_deg=10.0, squarem=False)
    data = sample_problem(cfg)
    z, rep = alm.run(data)
    rows = [(-2, -30.0, 1.0), (0, 0.0, 1.0), (3, 30.0, 1.0)]
    scene = SceneSpec.from_rows(rows, image_snr_noise_var(15.0, cfg.n_tx, cfg.p_x), cfg.k_max)
    echo = simulate_echo(scene, z.X, cfg.n_rx, cfg.lags, rng=np.random.default_rng([cfg.seed, 2]))
    img = form_image(echo, z.F, angle_grid())
    deg = np.rad2deg(img.angles)
    cell = deg[1] - deg[0]
    bins = list(img.bins)
    ok = True
    notes = []
    for b, a, _ in rows:
        # argmax over all range bins within +-10 degrees of the scatterer
        masked = np.where((np.abs(deg - a) <= 10.0)[:, None], img.values, -np.inf)
        gi, bj = np.unravel_index(np.argmax(masked), masked.shape)
        hit = img.bins[bj] == b and abs(deg[gi] - a) <= 2 * cell + 1e-9
        ok &= bool(hit)
        notes.append(f"({b},{a:+.0f})->({img.bins[bj]},{deg[gi]:+.0f})")
    peak = min(img.values[:, bins.index(b)].max() for b, _, _ in rows)
    empty = [j for j, b in enumerate(bins) if b not in {r[0] for r in rows}]
    ratio_db = 20 * np.log10(peak / img.values[:, empty].max())
    ok &= ratio_db >= 10.0
    acceptance(11, "image sanity", ok, " ".join(notes) + f"; peak/sidelobe {ratio_db:.1f} dB; "
               f"design converged={rep.converged}, max sidelobe/xi {rep.maxsl_trace[-1] / data.xi:.6f}")
    assert ok
