import numpy as np
import pytest

from qontrol import TimeGrid, default_step, integrate, make_params


@pytest.fixture(scope="session")
def control():
    return make_params(1.0, 0.0)


@pytest.fixture(scope="session")
def degenerate_period_rk4(control):
    """One full period at the default step, rk4, first order."""
    return integrate(control, TimeGrid(1.0, default_step(control)))


def trajectory_to(delta_e_over_E, t_end, method="rk4", form="first_order", **kw):
    params = make_params(1.0, delta_e_over_E)
    return integrate(params, TimeGrid(t_end, default_step(params)), method, form, **kw)


def p2_at(traj, t):
    return abs(traj.at(t).a12) ** 2


@pytest.fixture
def rng():
    return np.random.default_rng(20160825)


#: criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if passed else 'FAIL'}  {detail}")
