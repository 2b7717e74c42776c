import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from lorentzavg.fields import preset_field
from lorentzavg.geometry import MetricField, minkowski

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

finite = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False, allow_infinity=False)


def lift(ybar):
    ybar = np.asarray(ybar, dtype=float)
    return np.concatenate([[np.sqrt(1.0 + ybar @ ybar)], ybar])


@st.composite
def hyperboloid_states(draw, n=4, speed=1.0):
    x = np.array(draw(st.lists(finite, min_size=n, max_size=n)))
    ybar = speed * np.array(draw(st.lists(finite, min_size=n - 1, max_size=n - 1)))
    return x, lift(ybar)


@pytest.fixture(scope="session")
def mink():
    return minkowski(4)


@pytest.fixture(scope="session")
def crossed():
    return preset_field("crossed_EB", {"E0": 0.7, "B0": 1.3})


@pytest.fixture(scope="session")
def warped_2d():
    """diag(1, -a(x1)^2) with a(s) = 1 + s, with analytic derivative."""

    def func(x):
        return np.diag([1.0, -(1.0 + x[1]) ** 2])

    def deriv(x):
        d = np.zeros((2, 2, 2))
        d[1, 1, 1] = -2.0 * (1.0 + x[1])
        return d

    return MetricField(2, func, deriv, name="warped")


# one PASS/FAIL line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> str:
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
