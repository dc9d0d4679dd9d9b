import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st
from hypothesis.extra.numpy import arrays

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False, width=64)


def value_arrays(min_size=2, max_size=40):
    return st.integers(min_size, max_size).flatmap(lambda n: arrays(np.float64, n, elements=finite))


truncations = st.floats(0.0, 5.0, allow_nan=False)
positive_truncations = st.floats(0.01, 5.0, allow_nan=False)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_walk(rng, n, scale=1.0):
    return np.concatenate([[0.0], np.cumsum(rng.standard_normal(n - 1) * scale)])


#: one (criterion, passed, detail) entry per acceptance criterion that ran
ACCEPTANCE_LINES = []


def report_criterion(number, passed, detail):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
