import numpy as np
import pytest
from hypothesis import strategies as st

from rankmanova import validate


@st.composite
def tied_datasets(draw, max_a=4, max_d=3, max_n=6, levels=4):
    """Small datasets on a coarse integer grid, so ties are everywhere."""
    a = draw(st.integers(2, max_a))
    d = draw(st.integers(1, max_d))
    groups = []
    for _ in range(a):
        n = draw(st.integers(1, max_n))
        vals = draw(st.lists(st.integers(0, levels - 1), min_size=n * d, max_size=n * d))
        groups.append(np.array(vals, dtype=float).reshape(n, d))
    return validate(groups)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def small_dataset():
    return validate([[[1, 3], [2, 3], [2, 5]], [[0, 4], [2, 1]], [[4, 4], [1, 2], [3, 3], [2, 2]]])


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_record():
    """Record one pass/fail line per acceptance criterion."""

    def record(number, name, passed, detail):
        status = "PASS" if passed else "FAIL"
        if passed is None:
            status = "SKIP"
        line = f"criterion {number:>2} {status}: {name} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
