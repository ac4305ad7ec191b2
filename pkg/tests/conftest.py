import numpy as np
import pytest

from mdvrp_lab.core import Instance


def make_instance(depots, customers, demand, capacity, name="t"):
    return Instance(np.array(depots, dtype=float), np.array(customers, dtype=float),
                    np.array(demand), capacity, name)


@pytest.fixture
def square():
    """One depot at the origin, customers on the other corners of the unit square."""
    return make_instance([(0, 0)], [(1, 0), (1, 1), (0, 1)], [1, 1, 1], 10)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
