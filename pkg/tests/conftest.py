from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hardcore_lab.graph import complete_bipartite, hypercube, random_bipartite_with_degrees  # noqa: E402


@pytest.fixture(scope="session")
def Q2():
    return hypercube(2)


@pytest.fixture(scope="session")
def Q3():
    return hypercube(3)


@pytest.fixture(scope="session")
def Q4():
    return hypercube(4)


@pytest.fixture(scope="session")
def K22():
    return complete_bipartite(2, 2)


def biregular_instance(seed: int):
    """|X| = 9 (six of degree 3, three of degree 4), |Y| = 10 all of degree 3: delta = 4/3."""
    return random_bipartite_with_degrees([3] * 6 + [4] * 3, [3] * 10, seed=seed)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
