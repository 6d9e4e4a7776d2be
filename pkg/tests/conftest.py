import sys

import numpy as np
import pytest
from hypothesis import strategies as st

from gainsched import TaskSpec


@pytest.fixture
def setup_a():
    return TaskSpec([3.0, 5.0], [[3.0, 0.0], [0.0, 1.0]], 1.0)


def random_spd(gen: np.random.Generator, n: int, low: float = 0.2, high: float = 5.0) -> np.ndarray:
    q, _ = np.linalg.qr(gen.standard_normal((n, n)))
    h = (q * gen.uniform(low, high, size=n)) @ q.T
    return 0.5 * (h + h.T)


def random_task(gen: np.random.Generator, n: int | None = None) -> TaskSpec:
    n = n or int(gen.integers(1, 6))
    return TaskSpec(gen.normal(0, 3, size=n), random_spd(gen, n), float(gen.uniform(0, 2)))


seeds = st.integers(min_value=0, max_value=2**32 - 1)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "VERDICTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
