import numpy as np
import pytest

from isacdesign.model import ProblemConfig, sample_problem


def small_config(**kw) -> ProblemConfig:
    base = dict(n_tx=2, n_rx=2, n_users=2, block_len=8, cp_len=2, k_max=2, p_f=8.0, pslr_db=10.0)
    base.update(kw)
    return ProblemConfig(**base)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def dense_shift(T, k):
    """Shift matrix written out entry by entry: J[i, j] = 1 iff j = (i + k) mod T."""
    J = np.zeros((T, T))
    for i in range(T):
        for j in range(T):
            if j == (i + k) % T:
                J[i, j] = 1.0
    return J


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_data():
    return sample_problem(small_config(), seed=3)


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """``record(n, title, ok, detail)`` stores and prints a pass/fail line."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, {})

    def record(n, title, ok, detail=""):
        line = f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        lines[n] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
