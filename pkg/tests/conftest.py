import numpy as np
import pytest

from sqw.graph_core import build_graph, cycle_graph, random_connected_graph, t3_graph


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def t3():
    return t3_graph()


@pytest.fixture
def triangle():
    return cycle_graph(3)


def random_graphs(count, seed, n_min=2, n_max=8):
    """Deterministic stream of small connected graphs."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(n_min, n_max + 1))
        yield random_connected_graph(n, rng, extra_edge_prob=float(rng.uniform(0.1, 0.6)))


def paper_functional_example():
    """Eight vertices s..z whose successor graph has the single cycle x→y→z→x."""
    names = ["s", "t", "u", "v", "w", "x", "y", "z"]
    idx = {c: i for i, c in enumerate(names)}
    succ = {"s": "y", "t": "x", "u": "x", "v": "t", "w": "t", "x": "y", "y": "z", "z": "x"}
    edges = sorted({tuple(sorted((idx[a], idx[b]))) for a, b in succ.items()})
    g = build_graph(edges, len(names), labels=names)
    return g, [idx[succ[c]] for c in names], idx
