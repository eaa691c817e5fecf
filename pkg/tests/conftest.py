import time
import warnings

import numpy as np
import pytest

warnings.filterwarnings("ignore", category=DeprecationWarning)

from vstates.continuation import BranchConfig, trace_branch  # noqa: E402
from vstates.field import StreamField  # noqa: E402
from vstates.solver import NewtonConfig, critical_frequency, newton_solve  # noqa: E402
from vstates.spectral import PatchCoeffs  # noqa: E402

DESK_M, DESK_N = 64, 1024


ACCEPTANCE_LINES: dict[int, str] = {}


def _timed_branch(cfg):
    t0 = time.perf_counter()
    summary = trace_branch(cfg)
    summary.elapsed = time.perf_counter() - t0
    return summary


@pytest.fixture(scope="session")
def desk_branch():
    """m = 3 branch at the desk step 0.005."""
    return _timed_branch(BranchConfig(m=3, delta=0.005, M=DESK_M, N=DESK_N, max_steps=40))


@pytest.fixture(scope="session")
def fine_branch():
    """m = 3 branch at step 0.001."""
    return _timed_branch(BranchConfig(m=3, delta=0.001, M=DESK_M, N=DESK_N, max_steps=40))


@pytest.fixture(scope="session")
def m4_branch():
    return trace_branch(BranchConfig(m=4, delta=0.005, M=DESK_M, N=DESK_N, max_steps=4))


def solve_near_start(m, gap, M=DESK_M, N=DESK_N):
    om = critical_frequency(m) - gap
    a = np.zeros(M)
    a[0] = np.sqrt(2 * gap)
    coeffs, rep = newton_solve(PatchCoeffs(m, a), om, NewtonConfig(preconditioner="diagonal"), N)
    return coeffs, om, rep


@pytest.fixture(scope="session")
def mid_m3():
    """A converged m = 3 solution halfway along the branch."""
    from vstates.continuation import make_record

    cfg = NewtonConfig(preconditioner="diagonal")
    om0 = critical_frequency(3)
    a = np.zeros(DESK_M)
    a[0] = np.sqrt(2 * 0.002)   # a1 ~ sqrt(2 gap); a smaller guess can land on the mirrored solution
    c = PatchCoeffs(3, a)
    for k in range(1, 9):
        c, rep = newton_solve(c, om0 - 0.002 * k, cfg, DESK_N)
    return make_record(8.0, om0 - 0.016, c, rep, DESK_N)


@pytest.fixture(scope="session")
def mid_field(mid_m3):
    return StreamField(mid_m3.coeffs, mid_m3.omega, DESK_N)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
