"""Exact branch-and-bound solvers for small instances.

Both solvers refuse instances beyond :class:`OracleLimits` instead of
degrading to heuristics.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

from .graph import Graph

__all__ = ["OracleLimits", "OracleLimitError", "exact_max_matching", "exact_min_wvc"]


class OracleLimitError(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleLimits:
    max_nodes_vc: int = 24
    max_edges_matching: int = 40
    time_budget: float | None = 120.0


DEFAULT_LIMITS = OracleLimits()


class _Clock:
    def __init__(self, budget):
        self.deadline = None if budget is None else time.monotonic() + budget

    def check(self):
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise OracleLimitError("oracle time budget exhausted")


def exact_max_matching(g: Graph, limits: OracleLimits = DEFAULT_LIMITS) -> tuple[int, list[tuple[int, int]]]:
    """Maximum cardinality matching size and one witness.

    Branches on an edge with a highest-degree endpoint (take it, or delete it),
    pruning with ``min(remaining edges, floor(non-isolated nodes / 2))``.
    """
    if g.m > limits.max_edges_matching:
        raise OracleLimitError(f"{g.m} edges exceeds the matching oracle limit {limits.max_edges_matching}")
    clock = _Clock(limits.time_budget)

    best: list[tuple[int, int]] = _greedy_matching(g.edges())

    def upper(edges):
        nodes = {x for e in edges for x in e}
        return min(len(edges), len(nodes) // 2)

    def search(edges: list[tuple[int, int]], chosen: list[tuple[int, int]]):
        nonlocal best
        clock.check()
        if len(chosen) + upper(edges) <= len(best):
            return
        if not edges:
            best = list(chosen)
            return
        deg: dict[int, int] = {}
        for u, v in edges:
            deg[u] = deg.get(u, 0) + 1
            deg[v] = deg.get(v, 0) + 1
        e = max(edges, key=lambda uv: (max(deg[uv[0]], deg[uv[1]]), -uv[0], -uv[1]))
        u, v = e
        search([f for f in edges if u not in f and v not in f], chosen + [e])
        search([f for f in edges if f != e], chosen)

    search(list(g.edges()), [])
    return len(best), sorted(best)


def _greedy_matching(edges):
    used: set[int] = set()
    out = []
    for u, v in edges:
        if u not in used and v not in used:
            used.update((u, v))
            out.append((u, v))
    return out


def exact_min_wvc(g: Graph, limits: OracleLimits = DEFAULT_LIMITS, rel_tol: float = 1e-12) -> tuple[float, list[int]]:
    """Minimum weight vertex cover and the lexicographically smallest optimal witness.

    The optimum comes from a branch-and-bound over a highest-degree endpoint
    ``u`` of an uncovered edge: ``u`` in the cover, or ``u`` out and all its
    neighbours in. Pruning uses a disjoint-edge lower bound
    ``sum min(w_u, w_v)``. The witness is then fixed node by node in id order,
    keeping a node only if some optimal cover extends the choice so far (one
    constrained solve per node). Ties within ``rel_tol`` count as optimal, so
    zero-weight nodes can appear in the witness. Unweighted graphs use unit
    weights.
    """
    if g.n > limits.max_nodes_vc:
        raise OracleLimitError(f"{g.n} nodes exceeds the vertex cover oracle limit {limits.max_nodes_vc}")
    clock = _Clock(limits.time_budget)
    weight = [float(x) for x in g.weights_array()]
    adj = [frozenset(a) for a in g.adjacency]

    best = _min_cover_weight(weight, adj, frozenset(), frozenset(), clock)
    tol = rel_tol * max(1.0, abs(best))

    chosen: list[int] = []
    out: set[int] = set()
    for v in range(g.n):
        inside = frozenset(chosen)
        # stopping here (every later node out) is the smallest continuation
        if _min_cover_weight(weight, adj, inside, frozenset(out) | frozenset(range(v, g.n)), clock) <= best + tol:
            break
        if _min_cover_weight(weight, adj, inside | {v}, frozenset(out), clock) <= best + tol:
            chosen.append(v)
        else:
            out.add(v)
    return best, chosen


def _min_cover_weight(weight, adj, forced_in: frozenset, forced_out: frozenset, clock: _Clock) -> float:
    """Least cover weight with ``forced_in`` inside and ``forced_out`` outside (inf if impossible)."""
    cover = set(forced_in)
    for x in forced_out:
        if x in forced_in or adj[x] & forced_out:
            return math.inf
        cover |= adj[x]
    best = math.inf

    def lower_bound(live_edges):
        used: set[int] = set()
        lb = 0.0
        for u, v in sorted(live_edges, key=lambda e: -min(weight[e[0]], weight[e[1]])):
            if u not in used and v not in used:
                used.update((u, v))
                lb += min(weight[u], weight[v])
        return lb

    def search(cover: frozenset, excluded: frozenset, cost: float):
        nonlocal best
        clock.check()
        live = [(u, v) for u in range(len(adj)) if u not in cover for v in adj[u] if u < v and v not in cover]
        if not live:
            best = min(best, cost)
            return
        if cost + lower_bound(live) >= best:
            return
        deg: dict[int, int] = {}
        for u, v in live:
            deg[u] = deg.get(u, 0) + 1
            deg[v] = deg.get(v, 0) + 1
        # excluded nodes have every neighbour in the cover, so they never touch a live edge
        u = max(deg, key=lambda x: (deg[x], -x))
        nbrs = [x for x in adj[u] if x not in cover]
        branches = [
            (cover | {u}, excluded, cost + weight[u]),
            (cover | set(nbrs), excluded | {u}, cost + sum(weight[x] for x in nbrs)),
        ]
        if any(x in forced_out for x in nbrs):
            branches = branches[:1]
        elif weight[u] > sum(weight[x] for x in nbrs):
            branches.reverse()
        for b in branches:
            if b[1] & b[0]:
                continue
            search(*b)

    search(frozenset(cover), frozenset(forced_out), sum(weight[x] for x in cover))
    return best
