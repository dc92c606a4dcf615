"""Undirected simple graphs, line graphs, bounded BFS and the edge-list format.

Node ids are dense integers ``0..n-1``. Edges are identified by their
position in :meth:`Graph.edges`, which lists ``(u, v)`` pairs with ``u < v``
in lexicographic order; every module that talks about "edge ids" uses that
numbering.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Graph",
    "GraphError",
    "LineGraphMap",
    "ParseError",
    "MalformedLineError",
    "NodeRangeError",
    "NegativeWeightError",
    "DuplicateEdgeError",
    "SelfLoopError",
    "parse_edge_list",
    "to_edge_list",
    "read_edge_list",
    "line_graph",
    "bounded_bfs",
    "all_pairs_distances",
]


class GraphError(ValueError):
    pass


class ParseError(GraphError):
    """Raised for malformed edge-list input; ``lineno`` is 1-based."""

    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class MalformedLineError(ParseError):
    pass


class NodeRangeError(ParseError):
    pass


class NegativeWeightError(ParseError):
    pass


class DuplicateEdgeError(ParseError):
    pass


class SelfLoopError(ParseError):
    pass


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected simple graph with optional node weights."""

    n: int
    adjacency: tuple[tuple[int, ...], ...]
    node_weights: tuple[float, ...] | None = None
    _edges: tuple[tuple[int, int], ...] = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 0:
            raise GraphError("node count must be non-negative")
        if len(self.adjacency) != self.n:
            raise GraphError(f"adjacency has {len(self.adjacency)} rows, expected {self.n}")
        edges = []
        for u, nbrs in enumerate(self.adjacency):
            if list(nbrs) != sorted(set(nbrs)):
                raise GraphError(f"neighbors of {u} must be sorted and unique")
            for v in nbrs:
                if not 0 <= v < self.n:
                    raise GraphError(f"neighbor {v} of {u} out of range")
                if v == u:
                    raise GraphError(f"self-loop at {u}")
                if u < v:
                    edges.append((u, v))
                # symmetric adjacency; membership check on a sorted tuple is fine at this scale
                if u not in self.adjacency[v]:
                    raise GraphError(f"adjacency not symmetric for {{{u}, {v}}}")
        if self.node_weights is not None:
            if len(self.node_weights) != self.n:
                raise GraphError(f"expected {self.n} node weights, got {len(self.node_weights)}")
            for v, w in enumerate(self.node_weights):
                if not (w >= 0 and math.isfinite(w)):
                    raise GraphError(f"weight of node {v} must be finite and >= 0, got {w}")
        object.__setattr__(self, "_edges", tuple(edges))

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[tuple[int, int]],
        node_weights: Sequence[float] | None = None,
    ) -> "Graph":
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge {{{u}, {v}}} has an endpoint outside 0..{n - 1}")
            if u == v:
                raise GraphError(f"self-loop at {u}")
            if v in nbrs[u]:
                raise GraphError(f"duplicate edge {{{u}, {v}}}")
            nbrs[u].add(v)
            nbrs[v].add(u)
        weights = None if node_weights is None else tuple(float(w) for w in node_weights)
        return cls(n, tuple(tuple(sorted(s)) for s in nbrs), weights)

    def edges(self) -> tuple[tuple[int, int], ...]:
        return self._edges

    @property
    def m(self) -> int:
        return len(self._edges)

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    @property
    def weighted(self) -> bool:
        return self.node_weights is not None

    def weights_array(self) -> np.ndarray:
        """Node weights as a float array; unit weights when the graph is unweighted."""
        if self.node_weights is None:
            return np.ones(self.n)
        return np.asarray(self.node_weights, dtype=float)

    def with_weights(self, node_weights: Sequence[float] | None) -> "Graph":
        weights = None if node_weights is None else tuple(float(w) for w in node_weights)
        return Graph(self.n, self.adjacency, weights)

    def edge_index(self) -> dict[tuple[int, int], int]:
        return {e: i for i, e in enumerate(self._edges)}

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.n, self.adjacency, self.node_weights) == (
            other.n,
            other.adjacency,
            other.node_weights,
        )

    def __hash__(self):
        return hash((self.n, self.adjacency, self.node_weights))


@dataclass(frozen=True)
class LineGraphMap:
    """Line graph ``lg`` whose node ``i`` is base edge ``edge_index[i]``."""

    lg: Graph
    edge_index: tuple[tuple[int, int], ...]


def _ints(tokens: list[str], lineno: int) -> list[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise MalformedLineError(lineno, f"expected integers, got {' '.join(tokens)!r}") from None


def parse_edge_list(text: str | bytes) -> Graph:
    """Parse ``"n m [weighted]"`` followed by ``m`` edge lines and optional weight lines.

    Blank lines are ignored. Weight lines are ``"v w(v)"`` and must cover every
    node exactly once.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = [(i + 1, ln.split()) for i, ln in enumerate(text.split("\n"))]
    lines = [(i, toks) for i, toks in lines if toks]
    if not lines:
        raise MalformedLineError(1, "empty input, expected header 'n m [weighted]'")

    lineno, header = lines[0]
    if len(header) not in (2, 3) or (len(header) == 3 and header[2] != "weighted"):
        raise MalformedLineError(lineno, "header must be 'n m' or 'n m weighted'")
    n, m = _ints(header[:2], lineno)
    if n < 0 or m < 0:
        raise MalformedLineError(lineno, "n and m must be non-negative")
    weighted = len(header) == 3

    expected = 1 + m + (n if weighted else 0)
    if len(lines) != expected:
        raise MalformedLineError(
            lines[min(len(lines), expected) - 1][0],
            f"expected {expected - 1} body lines, found {len(lines) - 1}",
        )

    nbrs: list[set[int]] = [set() for _ in range(n)]
    for lineno, toks in lines[1 : 1 + m]:
        if len(toks) != 2:
            raise MalformedLineError(lineno, "edge line must be 'u v'")
        u, v = _ints(toks, lineno)
        for x in (u, v):
            if not 0 <= x < n:
                raise NodeRangeError(lineno, f"node id {x} outside 0..{n - 1}")
        if u == v:
            raise SelfLoopError(lineno, f"self-loop at node {u}")
        if v in nbrs[u]:
            raise DuplicateEdgeError(lineno, f"duplicate edge {{{u}, {v}}}")
        nbrs[u].add(v)
        nbrs[v].add(u)

    weights = None
    if weighted:
        found: dict[int, float] = {}
        for lineno, toks in lines[1 + m :]:
            if len(toks) != 2:
                raise MalformedLineError(lineno, "weight line must be 'v w'")
            (v,) = _ints(toks[:1], lineno)
            try:
                w = float(toks[1])
            except ValueError:
                raise MalformedLineError(lineno, f"bad weight {toks[1]!r}") from None
            if not 0 <= v < n:
                raise NodeRangeError(lineno, f"node id {v} outside 0..{n - 1}")
            if not math.isfinite(w):
                raise MalformedLineError(lineno, f"weight must be finite, got {toks[1]!r}")
            if w < 0:
                raise NegativeWeightError(lineno, f"negative weight {w} for node {v}")
            if v in found:
                raise MalformedLineError(lineno, f"weight for node {v} given twice")
            found[v] = w
        weights = tuple(found[v] for v in range(n))

    return Graph(n, tuple(tuple(sorted(s)) for s in nbrs), weights)


def to_edge_list(g: Graph) -> str:
    """Canonical edge-list text: sorted edges, weights in node order, trailing newline."""
    head = f"{g.n} {g.m}" + (" weighted" if g.weighted else "")
    out = [head]
    out.extend(f"{u} {v}" for u, v in g.edges())
    if g.node_weights is not None:
        out.extend(f"{v} {w!r}" for v, w in enumerate(g.node_weights))
    return "\n".join(out) + "\n"


def read_edge_list(path) -> Graph:
    with open(path, "rb") as fh:
        return parse_edge_list(fh.read())


def line_graph(g: Graph) -> LineGraphMap:
    edges = g.edges()
    index = g.edge_index()
    nbrs: list[set[int]] = [set() for _ in edges]
    for v in range(g.n):
        incident = [index[(min(v, x), max(v, x))] for x in g.neighbors(v)]
        for i in incident:
            nbrs[i].update(incident)
    for i, s in enumerate(nbrs):
        s.discard(i)
    lg = Graph(len(edges), tuple(tuple(sorted(s)) for s in nbrs))
    return LineGraphMap(lg, edges)


def bounded_bfs(g: Graph, sources: Iterable[int], limit: int) -> list[float]:
    """Multi-source hop distances; nodes farther than ``limit`` get ``math.inf``."""
    dist = [math.inf] * g.n
    queue = deque()
    for s in sources:
        if dist[s] != 0:
            dist[s] = 0
            queue.append(s)
    while queue:
        u = queue.popleft()
        d = dist[u]
        if d >= limit:
            continue
        for v in g.adjacency[u]:
            if dist[v] == math.inf:
                dist[v] = d + 1
                queue.append(v)
    return dist


def all_pairs_distances(g: Graph) -> np.ndarray:
    """Dense hop-distance matrix with ``inf`` for disconnected pairs."""
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import shortest_path

    if g.n == 0:
        return np.zeros((0, 0))
    rows = [u for u, nbrs in enumerate(g.adjacency) for _ in nbrs]
    cols = [v for nbrs in g.adjacency for v in nbrs]
    adj = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(g.n, g.n))
    return shortest_path(adj, method="D", unweighted=True, directed=False)
