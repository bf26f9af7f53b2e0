from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from nctori.algebra import ThetaMatrix, TorusElement, golden_theta

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# lines printed by the acceptance tests, echoed in the terminal summary
ACCEPTANCE_LINES: list = []


def _line_order(line: str):
    head = line.split(":", 1)[0].split()
    return (0, int(head[1])) if head[0] == "criterion" else (1, line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=_line_order):
            terminalreporter.write_line(line)


@pytest.fixture
def theta() -> ThetaMatrix:
    return golden_theta()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


def elements(theta: ThetaMatrix, max_terms: int = 6, radius: int = 4):
    """Hypothesis strategy for small torus elements."""
    key = st.tuples(*[st.integers(-radius, radius)] * theta.n)
    coef = st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False)
    return st.dictionaries(key, coef, max_size=max_terms).map(lambda d: TorusElement(theta, d))


thetas2 = st.floats(-1.0, 1.0, allow_nan=False).map(lambda t: ThetaMatrix.from_upper(2, [t]))
