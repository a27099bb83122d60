import math

import pytest

from dabdyn.model import load_params
from dabdyn.optsolve import solve_operating_point, sweep_power

_ACCEPTANCE_LINES = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def params():
    return load_params()


@pytest.fixture(scope="session")
def sweep(params):
    """The -1 kW .. 1 kW sweep on 41 points."""
    return sweep_power(-1000.0, 1000.0, 41, params, seed=0)


@pytest.fixture(scope="session")
def solved(params):
    """Solved operating points keyed by power, computed on first use."""
    cache = {}

    def get(P):
        if P not in cache:
            cache[P] = solve_operating_point(float(P), params, seed=0)
        return cache[P]

    return get


def wrap(angle: float) -> float:
    return math.remainder(angle, 2 * math.pi)
