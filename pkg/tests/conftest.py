import numpy as np
import pytest

from dyadic_tte.dyadic_model import DyadicParams
from dyadic_tte.graph import DirectedGraph

ACCEPTANCE_LINES: list[str] = []


def random_graph(rng: np.random.Generator, n: int, m: int, loops: bool = False) -> DirectedGraph:
    """Directed graph with ``m`` distinct non-loop edges chosen uniformly (optionally plus all loops)."""
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    m = min(m, len(pairs))
    pick = rng.choice(len(pairs), m, replace=False)
    edges = [pairs[k] for k in sorted(pick)]
    if loops:
        edges += [(i, i) for i in range(n)]
    return DirectedGraph.from_edges(n, edges, allow_self_loops=loops)


def random_params(rng: np.random.Generator, m: int, low: float = -1.0, high: float = 1.0) -> DyadicParams:
    return DyadicParams(*rng.uniform(low, high, (4, m)))


@pytest.fixture
def two_node():
    """Edge 0 -> 1 with (alpha, beta, gamma, zeta) = (1, 0.5, 1, 0.5)."""
    g = DirectedGraph.from_edges(2, [(0, 1)])
    return g, DyadicParams([1.0], [0.5], [1.0], [0.5])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
