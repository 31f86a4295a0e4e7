from fractions import Fraction

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from rotsums.cf_core import GRID

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

dyadic = st.integers(min_value=1, max_value=GRID - 1).map(lambda a: Fraction(a, GRID))


@st.composite
def proper_fractions(draw, max_den: int = 10**6):
    den = draw(st.integers(min_value=2, max_value=max_den))
    num = draw(st.integers(min_value=1, max_value=den - 1))
    return Fraction(num, den)


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
