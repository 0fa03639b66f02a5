import numpy as np
import pytest

from depthlayers.graph_model import AffinityGraph


def path3():
    """0 - 1 - 2 with unit weights; node 1 occludes node 0."""
    return AffinityGraph.from_edges(3, [(0, 1), (1, 2)], [1.0, 1.0], [[(0, 1)]])


def chain4():
    """0 - 1 - 2 - 3, weights (1, 0.5, 1), seeds 0<1 and 2<3."""
    return AffinityGraph.from_edges(4, [(0, 1), (1, 2), (2, 3)], [1.0, 0.5, 1.0],
                                    [[(0, 1)], [(2, 3)]])


def opposing():
    """Two nodes, heavy edge, seeds in both directions from different components."""
    return AffinityGraph.from_edges(2, [(0, 1)], [10.0], [[(0, 1)], [(1, 0)]])


def random_graph(rng, max_nodes=8, max_edges=12, max_components=2, max_pairs=3):
    """Random small instance: weights U[0.1, 2], seed pairs on random edges.

    At most ``max_pairs`` seed pairs overall keeps every optimal label within
    four levels, so exhaustive search over {1..4} covers the MDL variants.
    """
    n = int(rng.integers(2, max_nodes + 1))
    all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    m = int(rng.integers(1, min(max_edges, len(all_pairs)) + 1))
    pick = rng.choice(len(all_pairs), size=m, replace=False)
    edges = [all_pairs[p] for p in sorted(pick)]
    w = rng.uniform(0.1, 2.0, size=m)
    K = int(rng.integers(0, max_components + 1))
    budget = int(rng.integers(K, max_pairs + 1)) if K else 0
    comps = [[] for _ in range(K)]
    for t in range(budget):
        i, j = edges[int(rng.integers(m))]
        if rng.random() < 0.5:
            i, j = j, i
        comps[t % K].append((i, j))
    comps = [sorted(set(c)) for c in comps]
    return AffinityGraph.from_edges(n, edges, w, comps)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, repeated at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
