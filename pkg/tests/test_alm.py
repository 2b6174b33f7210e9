import numpy as np
import pytest

from isacdesign import alm, kernels
from isacdesign.bsum import DesignState, alf_value, objective, random_state, violation, zero_multipliers
from isacdesign.feasibility import find_feasible
from isacdesign.model import sample_problem

from conftest import crandn, small_config


@pytest.fixture(scope="module")
def small_run():
    cfg = small_config(max_outer=60)
    data = sample_problem(cfg, seed=5)
    seen = []
    z, rep = alm.run(data, callback=lambda l, z, d: seen.append((l, d.rho, np.abs(d.U).max())))
    return data, z, rep, seen


def test_zeta_is_max_of_feasible_objective_and_initial_alf(small_data, rng):
    feas = find_feasible(small_data.cfg, small_data)
    z0 = random_state(small_data, rng)
    U0 = zero_multipliers(small_data)
    want = max(objective(feas.F, feas.X, small_data), alf_value(z0, U0, 1e-3, small_data))
    assert alm.compute_zeta(feas, z0, U0, 1e-3, small_data) == want


def test_inner_start_prefers_lower_alf(small_data, rng):
    feas = find_feasible(small_data.cfg, small_data)
    U = zero_multipliers(small_data)
    f_feas = objective(feas.F, feas.X, small_data)
    # feasible point's ALF is f since its constraints hold exactly
    assert alf_value(alm.feasible_state(feas), U, 7.0, small_data) == pytest.approx(f_feas)
    z = random_state(small_data, rng)
    start = alm.pick_inner_start(feas, z, U, 1.0, small_data)
    if f_feas < alf_value(z, U, 1.0, small_data):
        assert np.array_equal(start.X, feas.X)
    else:
        assert start is z
    # a tie keeps the warm start
    same = alm.feasible_state(feas)
    assert alm.pick_inner_start(feas, same, U, 1.0, small_data) is same


def test_multiplier_update_and_clip():
    lags = [1, -1]
    X = np.ones((1, 4), dtype=complex)
    F = np.ones((1, 4), dtype=complex)
    C = np.zeros((2, 1, 1), dtype=complex)
    z = DesignState(C, F, X)
    U = np.zeros((2, 1, 1), dtype=complex)
    # X J F^H = 4 per lag; 500 * 4 = 2000 gets clipped to 1000
    out = alm.update_multipliers(U, z, 500.0, 1e3, lags)
    assert np.allclose(out, 1000.0)
    out = alm.update_multipliers(U, z, 0.5, 1e3, lags)
    assert np.allclose(out, 2.0)
    U2 = np.full((2, 1, 1), 1500j)
    out = alm.update_multipliers(U2, z, 1e-9, 1e3, lags)
    assert np.allclose(np.abs(out), 1000.0) and np.allclose(out.real / np.abs(out), 0, atol=1e-9)


def test_violation_oracle(small_data, rng):
    z = random_state(small_data, rng)
    z.C = crandn(rng, *z.C.shape)
    A = np.stack([np.roll(z.X, k, axis=1) @ z.F.conj().T for k in small_data.lags])
    assert violation(z, small_data) == pytest.approx(np.linalg.norm(A - z.C), rel=1e-12)


@pytest.mark.parametrize("v_new,v_prev,want", [(0.5, 1.0, 2.0), (0.97, 1.0, 2.2), (0.965, 1.0, 2.0),
                                                (2.0, 1.0, 2.2), (0.0, 0.0, 2.0)])
def test_penalty_rule(v_new, v_prev, want):
    assert alm.update_penalty(2.0, v_new, v_prev, 0.965, 1.1) == pytest.approx(want)


def test_stop_threshold():
    d = sample_problem(small_config(block_len=16), seed=0)
    assert alm.stop_threshold(d) == pytest.approx(4e-3)


def test_run_invariants(small_run):
    data, z, rep, seen = small_run
    n = rep.outer_iters
    assert n == len(seen)
    for tr in (rep.v_trace, rep.e_trace, rep.rho_trace, rep.alf_trace, rep.rate_trace,
               rep.bpmse_trace, rep.maxsl_trace, rep.inner_iters):
        assert len(tr) == n
    assert np.all(np.diff(rep.rho_trace) >= 0)
    assert rep.rho_trace[0] == data.cfg.rho0
    assert all(u <= data.cfg.u_max * (1 + 1e-12) for _, _, u in seen)
    assert rep.max_alf_increase <= 1e-9
    assert rep.zeta_ok
    z.check(data)
    assert rep.rows()[0][0] == 1 and len(rep.rows()) == n
    if rep.converged:
        assert max(rep.e_trace[-1], rep.v_trace[-1]) <= alm.stop_threshold(data)


def test_run_reports_first_sweep_schedule(small_run):
    _, _, rep, _ = small_run
    # the first inner solve is a single sweep
    assert rep.inner_iters[0] == 1


def test_run_deterministic():
    cfg = small_config(max_outer=15)
    a = alm.run(sample_problem(cfg, seed=1))[1]
    b = alm.run(sample_problem(cfg, seed=1))[1]
    assert a.alf_trace == b.alf_trace and a.v_trace == b.v_trace


def test_vacuous_constraint_terminates():
    # the ball never binds, so only the consensus residual must close
    cfg = small_config(alpha=1.0, pslr_db=-60.0, max_outer=300)
    data = sample_problem(cfg, seed=0)
    z, rep = alm.run(data)
    assert rep.converged
    assert rep.v_trace[-1] <= alm.stop_threshold(data)
    assert np.all(np.linalg.norm(kernels.lag_products(z.X, z.F, data.lags), axis=(1, 2)) <= data.xi)
