import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from scarf_hirota.economy import EndowmentParams, from_params

settings.register_profile("default", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FIG1 = EndowmentParams(0.1, 0.1, 0.5, 0.0, 0.3)
SYMMETRIC = EndowmentParams(1 / 3, 1 / 3, 1 / 3, 0.0, 0.0)


@pytest.fixture
def fig1_params():
    return FIG1


@pytest.fixture
def fig1_matrix():
    return from_params(FIG1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@st.composite
def strict_params(draw, dmin=0.0):
    """Parameters with every matrix entry >= 0."""
    w = draw(st.lists(st.floats(0.01, 1.0), min_size=4, max_size=4))
    total = sum(w)
    d1, d2, d3, m = (x / total for x in w)
    if min(d1, d2, d3) < dmin:
        d1, d2, d3 = (max(x, dmin) for x in (d1, d2, d3))
        m = 1.0 - d1 - d2 - d3
        if m < 0:
            d1 = d2 = d3 = 1 / 3
            m = 0.0
    half = m + 2 * min(d1, d2, d3)
    k = draw(st.floats(-1.0, 1.0)) * half
    K = (m + k) / 2
    L = 1.0 - (d1 + d2 + d3) - K
    try:
        from_params(EndowmentParams(d1, d2, d3, K, L))
    except ValueError:
        K = L = m / 2
        L = 1.0 - (d1 + d2 + d3) - K
    return EndowmentParams(d1, d2, d3, K, L)


@st.composite
def interior_prices(draw, lo=1e-3, hi=10.0):
    return np.array([draw(st.floats(lo, hi)) for _ in range(3)])


ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
