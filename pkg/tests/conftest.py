import numpy as np
import pytest

from spbp.topology import ConnectivityGraph, build_conflict_graph


def line_network(n, spacing=0.9):
    """Nodes on a horizontal line, neighbours linked."""
    pos = np.stack([np.arange(n) * spacing, np.zeros(n)], axis=1)
    links = np.array([(i, i + 1) for i in range(n - 1)])
    return ConnectivityGraph(pos, links)


@pytest.fixture
def path3():
    g = line_network(3)
    return g, build_conflict_graph(g, "interface")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record():
    """Record one acceptance verdict; the terminal summary lists them all."""
    def _record(number: int, passed: bool, detail: str) -> bool:
        ACCEPTANCE[number] = (bool(passed), detail)
        print(f"AC{number:<2} {'PASS' if passed else 'FAIL'}  {detail}")
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"AC{n:<2} {'PASS' if ok else 'FAIL'}  {detail}")
