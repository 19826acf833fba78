"""Finite graphs, the directed-edge basis of l²(D), and functional graphs.

A directed edge is stored as the pair ``(target, source)``, so ``(y, x)``
stands for the ket |yx⟩ pointing from ``x`` to ``y``.  Basis vectors are
grouped by target vertex, which makes every incoming block H_x^I a
contiguous index range ordered like the neighbor list of ``x``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from math import gcd
from typing import Iterable, Mapping, Sequence

import numpy as np


class GraphError(ValueError):
    """Base class for invalid graph input."""


class DisconnectedGraph(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class TooFewVertices(GraphError):
    pass


class InvalidSuccessor(GraphError):
    pass


@dataclass(frozen=True)
class Graph:
    """Simple connected graph with a fixed neighbor order per vertex."""

    vertex_count: int
    adjacency: tuple[tuple[int, ...], ...]
    labels: tuple[str, ...] | None = None

    @property
    def vertices(self) -> range:
        return range(self.vertex_count)

    def neighbors(self, x: int) -> tuple[int, ...]:
        return self.adjacency[x]

    def degree(self, x: int) -> int:
        return len(self.adjacency[x])

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    @property
    def total_degree(self) -> int:
        """Σ_x d_x, which is also the dimension |D| of l²(D)."""
        return int(self.degrees.sum())

    @property
    def edge_count(self) -> int:
        return self.total_degree // 2

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges as sorted pairs, in lexicographic order."""
        return sorted({(min(x, y), max(x, y)) for x in self.vertices for y in self.adjacency[x]})

    def adjacent(self, x: int, y: int) -> bool:
        return y in self.adjacency[x]

    def slot(self, x: int, y: int) -> int:
        """Position of neighbor ``y`` in the ordered neighbor list of ``x``."""
        return self.adjacency[x].index(y)

    def label(self, x: int) -> str:
        return self.labels[x] if self.labels is not None else str(x)

    def is_regular(self) -> bool:
        return bool(np.all(self.degrees == self.degrees[0]))

    def with_neighbor_order(self, order: Mapping[int, Sequence[int]] | Sequence[Sequence[int]]) -> "Graph":
        """Same graph with some or all neighbor lists reordered."""
        items = order.items() if isinstance(order, Mapping) else enumerate(order)
        adjacency = list(self.adjacency)
        for x, nbrs in items:
            nbrs = tuple(int(v) for v in nbrs)
            if sorted(nbrs) != sorted(adjacency[x]):
                raise GraphError(f"neighbor order at {x} is not a permutation of its neighbors")
            adjacency[x] = nbrs
        return Graph(self.vertex_count, tuple(adjacency), self.labels)

    def adjacency_matrix(self) -> np.ndarray:
        A = np.zeros((self.vertex_count, self.vertex_count), dtype=np.int64)
        for x in self.vertices:
            A[x, list(self.adjacency[x])] = 1
        return A


def build_graph(
    edges: Iterable[Sequence[int]],
    vertex_count: int | None = None,
    neighbor_order: Mapping[int, Sequence[int]] | Sequence[Sequence[int]] | None = None,
    labels: Sequence[str] | None = None,
) -> Graph:
    """Validate an edge list and return a connected simple :class:`Graph`.

    Neighbors are listed in ascending id unless ``neighbor_order`` overrides
    them.  ``vertex_count`` defaults to one more than the largest id.
    """
    pairs = [(int(a), int(b)) for a, b in edges]
    if vertex_count is None:
        vertex_count = 1 + max((max(p) for p in pairs), default=-1)
    if labels is not None and len(labels) != vertex_count:
        raise GraphError("labels must have one entry per vertex")
    if vertex_count < 2:
        raise TooFewVertices(f"need at least 2 vertices, got {vertex_count}")
    seen: set[tuple[int, int]] = set()
    nbrs: list[set[int]] = [set() for _ in range(vertex_count)]
    for a, b in pairs:
        if not (0 <= a < vertex_count and 0 <= b < vertex_count):
            raise GraphError(f"edge ({a}, {b}) references a vertex outside 0..{vertex_count - 1}")
        if a == b:
            raise SelfLoop(f"self-loop at vertex {a}")
        key = (min(a, b), max(a, b))
        if key in seen:
            raise DuplicateEdge(f"edge {key} listed twice")
        seen.add(key)
        nbrs[a].add(b)
        nbrs[b].add(a)
    g = Graph(vertex_count, tuple(tuple(sorted(s)) for s in nbrs), tuple(labels) if labels else None)
    if neighbor_order is not None:
        g = g.with_neighbor_order(neighbor_order)
    if len(_reachable(g, 0)) != vertex_count:
        raise DisconnectedGraph("graph is not connected")
    return g


def _reachable(g: Graph, root: int) -> set[int]:
    seen = {root}
    queue = deque([root])
    while queue:
        x = queue.popleft()
        for y in g.adjacency[x]:
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return seen


@dataclass(frozen=True, eq=False)
class EdgeBasis:
    """Index map for the directed-edge basis of l²(D)."""

    graph: Graph
    directed_edges: tuple[tuple[int, int], ...]
    index_of: Mapping[tuple[int, int], int]
    block_starts: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.directed_edges)

    def in_block(self, x: int) -> np.ndarray:
        """Indices of the edges (x, y) entering ``x``, in neighbor order."""
        return np.arange(self.block_starts[x], self.block_starts[x + 1])

    def out_block(self, x: int) -> np.ndarray:
        """Indices of the edges (y, x) leaving ``x``, in neighbor order."""
        return np.array([self.index_of[(y, x)] for y in self.graph.adjacency[x]], dtype=np.int64)

    def in_slice(self, x: int) -> slice:
        return slice(int(self.block_starts[x]), int(self.block_starts[x + 1]))

    def vertex_of_index(self) -> np.ndarray:
        """Target vertex of every basis index."""
        return np.repeat(np.arange(self.graph.vertex_count), self.graph.degrees)

    def label(self, i: int) -> str:
        t, s = self.directed_edges[i]
        return f"|{self.graph.label(t)}{self.graph.label(s)}>"


@lru_cache(maxsize=256)
def edge_basis(g: Graph) -> EdgeBasis:
    directed = tuple((x, y) for x in g.vertices for y in g.adjacency[x])
    starts = np.concatenate([[0], np.cumsum(g.degrees)]).astype(np.int64)
    return EdgeBasis(g, directed, {e: i for i, e in enumerate(directed)}, starts)


def bipartition(g: Graph) -> np.ndarray | None:
    """0/1 coloring if ``g`` is bipartite, else None."""
    color = -np.ones(g.vertex_count, dtype=np.int64)
    color[0] = 0
    queue = deque([0])
    while queue:
        x = queue.popleft()
        for y in g.adjacency[x]:
            if color[y] < 0:
                color[y] = 1 - color[x]
                queue.append(y)
            elif color[y] == color[x]:
                return None
    return color


def has_odd_cycle(g: Graph) -> bool:
    return bipartition(g) is None


@dataclass(frozen=True)
class FunctionalGraph:
    """Digraph of a successor map N with N(x) adjacent to x."""

    successor: tuple[int, ...]
    components: tuple[tuple[int, ...], ...]
    cycles: tuple[tuple[int, ...], ...]
    component_of: tuple[int, ...]

    def cycle_of(self, component: int) -> tuple[int, ...]:
        return self.cycles[component]

    @property
    def on_cycle(self) -> frozenset[int]:
        return frozenset(v for c in self.cycles for v in c)


def functional_graph(g: Graph, successor: Mapping[int, int] | Sequence[int]) -> FunctionalGraph:
    """Split the successor digraph into components, each with its unique cycle.

    Cycles are listed starting from their smallest vertex and following N.
    """
    n = g.vertex_count
    succ = tuple(int(successor[x]) for x in range(n))
    for x, y in enumerate(succ):
        if not g.adjacent(x, y):
            raise InvalidSuccessor(f"N({x}) = {y} is not a neighbor of {x}")
    # Weak components of the successor digraph.
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for x, y in enumerate(succ):
        parent[find(x)] = find(y)
    roots = sorted({find(x) for x in range(n)}, key=lambda r: min(v for v in range(n) if find(v) == r))
    comp_index = {r: i for i, r in enumerate(roots)}
    component_of = tuple(comp_index[find(x)] for x in range(n))
    components = tuple(tuple(v for v in range(n) if component_of[v] == i) for i in range(len(roots)))
    cycles = []
    for members in components:
        x = members[0]
        for _ in range(n):
            x = succ[x]
        cyc = [x]
        y = succ[x]
        while y != x:
            cyc.append(y)
            y = succ[y]
        start = cyc.index(min(cyc))
        cycles.append(tuple(cyc[start:] + cyc[:start]))
    return FunctionalGraph(succ, components, tuple(cycles), component_of)


def period_of_digraph(adj: np.ndarray, members: Sequence[int]) -> int:
    """Period of a strongly connected digraph restricted to ``members``.

    Uses BFS levels: the period is the gcd of level[u] + 1 - level[v] over arcs.
    """
    members = list(members)
    inside = np.zeros(adj.shape[0], dtype=bool)
    inside[members] = True
    level = {members[0]: 0}
    queue = deque([members[0]])
    p = 0
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(adj[u] & inside):
            v = int(v)
            if v not in level:
                level[v] = level[u] + 1
                queue.append(v)
            else:
                p = gcd(p, abs(level[u] + 1 - level[v]))
    return p


# ----- standard families of graphs -----


def path_graph(n: int) -> Graph:
    return build_graph([(i, i + 1) for i in range(n - 1)], n)


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise GraphError("a simple cycle needs at least 3 vertices")
    return build_graph([(i, (i + 1) % n) for i in range(n)], n)


def star_graph(n: int) -> Graph:
    """Center 0 joined to leaves 1..n."""
    return build_graph([(0, j) for j in range(1, n + 1)], n + 1)


def complete_graph(n: int) -> Graph:
    return build_graph([(i, j) for i in range(n) for j in range(i + 1, n)], n)


def t3_graph() -> Graph:
    """Path x - y - z with ids 0, 1, 2."""
    return build_graph([(0, 1), (1, 2)], 3, labels=("x", "y", "z"))


def torus_coords(sides: Sequence[int]) -> np.ndarray:
    """Coordinates of every torus vertex, row-major (last axis fastest)."""
    return np.array(list(np.ndindex(*sides)), dtype=np.int64).reshape(-1, len(sides))


def torus_index(sides: Sequence[int], coord: Sequence[int]) -> int:
    return int(np.ravel_multi_index(tuple(int(c) % s for c, s in zip(coord, sides)), tuple(sides)))


def torus_graph(sides: Sequence[int]) -> Graph:
    """Periodic truncation of Z^d with the given side lengths (each ≥ 3)."""
    sides = [int(s) for s in sides]
    if not sides or min(sides) < 3:
        raise GraphError("torus sides must all be at least 3")
    edges = set()
    for c in torus_coords(sides):
        a = torus_index(sides, c)
        for k in range(len(sides)):
            e = np.zeros(len(sides), dtype=np.int64)
            e[k] = 1
            b = torus_index(sides, c + e)
            edges.add((min(a, b), max(a, b)))
    return build_graph(sorted(edges), int(np.prod(sides)))


def complement_graph_edges(g: Graph) -> list[tuple[int, int]]:
    n = g.vertex_count
    return [(i, j) for i in range(n) for j in range(i + 1, n) if not g.adjacent(i, j)]


def random_connected_graph(n: int, rng: np.random.Generator, extra_edge_prob: float = 0.3) -> Graph:
    """Random spanning tree plus independent extra edges."""
    if n < 2:
        raise TooFewVertices("need at least 2 vertices")
    order = rng.permutation(n)
    edges = {tuple(sorted((int(order[i]), int(order[rng.integers(i)])))) for i in range(1, n)}
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in edges and rng.random() < extra_edge_prob:
                edges.add((i, j))
    return build_graph(sorted(edges), n)


# ----- JSON -----


def graph_from_json(obj: Mapping) -> Graph:
    if "edges" not in obj:
        raise GraphError("graph JSON needs an 'edges' array")
    labels = obj.get("vertices")
    n = len(labels) if labels is not None else None
    return build_graph(
        obj["edges"],
        n,
        neighbor_order=obj.get("neighbor_order"),
        labels=[str(v) for v in labels] if labels is not None else None,
    )


def graph_to_json(g: Graph) -> dict:
    return {
        "vertices": list(g.labels) if g.labels else list(range(g.vertex_count)),
        "edges": [list(e) for e in g.edges()],
        "neighbor_order": [list(a) for a in g.adjacency],
    }
