import time

import pytest
from hypothesis import HealthCheck, settings

from sigmaspec.profiles import ProfileSpec, ground_state_profile, shoot_profile

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.function_scoped_fixture, HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE_LINES = []


def record_acceptance(number, passed, detail):
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    _ACCEPTANCE_LINES.append((number, line))
    print(line)
    return passed


@pytest.fixture
def acceptance():
    return record_acceptance


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ground():
    return ground_state_profile()


@pytest.fixture(scope="session")
def excited():
    return shoot_profile(ProfileSpec(excitation_index=1))


class Timed:
    def __init__(self, value, seconds):
        self.value, self.seconds = value, seconds


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    value = fn(*args, **kwargs)
    return Timed(value, time.perf_counter() - t0)
