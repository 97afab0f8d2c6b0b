import numpy as np
import pytest

from tdlab import fixtures
from tdlab.mdp import Chain
from tdlab.reversible import Graph, simple_random_walk


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def triangle_walk():
    return simple_random_walk(Graph.complete(3))


@pytest.fixture
def cycle3():
    return fixtures.directed_cycle(3)


@pytest.fixture
def two_state():
    a, b = 0.2, 0.4
    return Chain([[1 - a, a], [b, 1 - b]])


@pytest.fixture
def reversible_chains():
    rng = np.random.default_rng(2024)
    return [fixtures.random_reversible_chain(rng)[0] for _ in range(50)]


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion; returns the verdict."""

    def report(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}: {title} [{detail}]"
        _CRITERIA[number] = line
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
