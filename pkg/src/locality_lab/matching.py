"""Approximate maximum matching by cluster-driven fractional matching.

The edges are clustered (random-shift partition of the line graph). Each
node keeps a cap per adjacent edge-cluster; every cluster periodically
rescales its edge weights and greedily raises them against the caps of
both endpoints, and nodes raise or cut caps depending on whether the
cluster met them. Every second round each active edge self-nominates with
probability equal to its weight, and an edge with no nominating neighbour
joins the matching.

The simulator executes rounds as collect-then-commit steps, so no update
inside a round can see another update of the same round.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import ConvergenceWarning

from .decomposition import Clustering, PolyTail, default_alpha, partition, sample_shifts
from .graph import Graph, line_graph
from .utils.validation import check_graph, check_positive, check_seed

__all__ = [
    "MatchingParams",
    "CapValidation",
    "CapValidationError",
    "MatchingResult",
    "ApproximationReport",
    "validate_params",
    "run_cluster_matching",
    "run_baseline_framework",
    "verify_matching",
    "is_maximal",
    "approximation_report",
    "ClusterMatching",
    "FrameworkMatching",
]

REL_TOL = 1e-9


class CapValidationError(ValueError):
    pass


@dataclass
class MatchingParams:
    b: float = 4.0
    alpha: float | None = None
    K: float = 2.0
    rounds: int = 10_000
    eps: float = 0.5
    seed: int | None = None
    fixed_point_mode: bool = True
    scale_caps: bool = True

    def __post_init__(self):
        if not self.K > 1:
            raise ValueError(f"K must be > 1, got {self.K}")
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        check_positive("eps", self.eps)
        if self.eps > 1:
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        if self.alpha is not None:
            check_positive("alpha", self.alpha)

    def resolved_alpha(self, n: int) -> float:
        return self.alpha if self.alpha is not None else default_alpha(n, self.b)


@dataclass
class CapValidation:
    """Initial cap sums against ``K**-3 / 4``; ``scale`` shrinks caps to fit."""

    valid: bool
    threshold: float
    max_initial_sum: float
    scale: float
    initial_sums: list[float]


def _edge_cluster_layout(g: Graph, lgc: Clustering):
    """Cluster ids (line-graph centers), their edges, and node -> adjacent clusters."""
    edges = g.edges()
    edge_cluster = [int(c) for c in lgc.center_of]
    cluster_edges: dict[int, list[int]] = {}
    for e, c in enumerate(edge_cluster):
        cluster_edges.setdefault(c, []).append(e)
    node_clusters: list[set[int]] = [set() for _ in range(g.n)]
    for e, (u, v) in enumerate(edges):
        node_clusters[u].add(edge_cluster[e])
        node_clusters[v].add(edge_cluster[e])
    return edge_cluster, cluster_edges, [sorted(s) for s in node_clusters]


def validate_params(g: Graph, p: MatchingParams, lgc: Clustering) -> CapValidation:
    """Check ``sum_C exp(-4 alpha / (1 + r_C)) <= K**-3 / 4`` at every node."""
    alpha = p.resolved_alpha(g.n)
    threshold = 0.25 * p.K**-3
    _, _, node_clusters = _edge_cluster_layout(g, lgc)
    sums = [
        math.fsum(math.exp(-4.0 * alpha / (1 + lgc.radius_of[c])) for c in cs)
        for cs in node_clusters
    ]
    worst = max(sums, default=0.0)
    valid = worst <= threshold
    return CapValidation(
        valid=valid,
        threshold=threshold,
        max_initial_sum=worst,
        scale=1.0 if valid else threshold / worst,
        initial_sums=sums,
    )


@dataclass
class MatchingResult:
    matched: list[tuple[int, int]]
    rounds_used: int
    completed: bool
    active_remaining: int
    violations: dict[str, int]
    stalled_updates: int
    trace: list[dict] = field(default_factory=list)
    validation: CapValidation | None = None
    edge_clustering: Clustering | None = None
    alpha: float | None = None

    def to_dict(self) -> dict:
        return {
            "matched_edges": [list(e) for e in self.matched],
            "size": len(self.matched),
            "rounds_used": self.rounds_used,
            "completed": self.completed,
            "active_remaining": self.active_remaining,
            "violations": dict(sorted(self.violations.items())),
            "stalled_updates": self.stalled_updates,
            "alpha": self.alpha,
            "cap_scale": None if self.validation is None else self.validation.scale,
        }


def _nominate(rng, w, active, lg_adj, matched, t):
    """Self-nomination step; returns ids of edges that joined the matching."""
    draws = rng.random(len(w))
    nominated = active & (draws < w)
    winners = []
    for e in np.flatnonzero(nominated):
        if not any(nominated[f] for f in lg_adj[e]):
            winners.append(int(e))
    for e in winners:
        matched.append(e)
        active[e] = False
        w[e] = 0.0
        for f in lg_adj[e]:
            active[f] = False
            w[f] = 0.0
    return winners


def run_cluster_matching(g: Graph, p: MatchingParams, audit: bool = True, record_trace: bool = True) -> MatchingResult:
    """Simulate the cluster-driven matching for at most ``p.rounds`` rounds.

    Round ``t`` runs three steps in order: clusters whose period ends at ``t``
    deliver weights and nodes update caps; on even ``t`` edges self-nominate;
    clusters whose period starts at ``t`` snapshot caps and compute weights.
    Cluster ``C`` has period ``2 (r_C + 1)`` starting at round 0.
    """
    rng = check_seed(p.seed)
    alpha = p.resolved_alpha(g.n)
    lgm = line_graph(g)
    lg = lgm.lg
    lgc = partition(lg, sample_shifts(PolyTail(alpha), lg.n, rng), alpha=alpha)
    validation = validate_params(g, p, lgc)
    if not validation.valid and not p.scale_caps:
        raise CapValidationError(
            f"initial cap sum {validation.max_initial_sum:.3g} exceeds {validation.threshold:.3g}; "
            "enable scale_caps to shrink initial caps"
        )

    K = p.K
    low_cap = 0.25 * K**-3
    cap_ceiling = 0.25 / K
    edges = g.edges()
    m = len(edges)
    edge_cluster, cluster_edges, node_clusters = _edge_cluster_layout(g, lgc)
    radius = lgc.radius_of
    period = {c: 2 * (radius[c] + 1) for c in cluster_edges}
    cluster_nodes = {c: sorted({x for e in es for x in edges[e]}) for c, es in cluster_edges.items()}

    kappa: dict[tuple[int, int], float] = {}
    for u, cs in enumerate(node_clusters):
        for c in cs:
            kappa[(u, c)] = validation.scale * math.exp(-4.0 * alpha / (1 + radius[c]))

    w = np.zeros(m)
    active = np.ones(m, dtype=bool)
    ends = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    lg_adj = lg.adjacency
    matched: list[int] = []
    pending: dict[int, list[tuple[int, dict[int, float], set[int]]]] = {}
    violations = {"matching": 0, "cap_sum": 0, "weight_sum": 0, "pivotal": 0, "negative": 0}
    stalled = 0
    trace: list[dict] = []

    t = 0
    while t < p.rounds and active.any():
        round_violations: list[str] = []

        # 1. deliveries and cap responses, decided on pre-round cap sums
        due = pending.pop(t, [])
        if due:
            pre_sum = {}
            updates: dict[tuple[int, int], float] = {}
            for c, new_w, bound in due:
                for e, x in new_w.items():
                    if active[e]:
                        w[e] = x
                for u in cluster_nodes[c]:
                    if u not in pre_sum:
                        pre_sum[u] = math.fsum(kappa[(u, x)] for x in node_clusters[u])
                    k = kappa[(u, c)]
                    if u in bound:
                        if pre_sum[u] <= low_cap:
                            updates[(u, c)] = K * K * k
                        else:
                            stalled += 1
                    else:
                        updates[(u, c)] = k / K
            if audit:
                for c, _, _ in due:
                    for e in cluster_edges[c]:
                        if not active[e]:
                            continue
                        u, v = edges[e]
                        before = kappa[(u, c)] * kappa[(v, c)]
                        after = updates.get((u, c), kappa[(u, c)]) * updates.get((v, c), kappa[(v, c)])
                        if not (pre_sum[u] > low_cap or pre_sum[v] > low_cap or after >= K * before * (1 - REL_TOL)):
                            violations["pivotal"] += 1
                            round_violations.append(f"pivotal:{e}")
            kappa.update(updates)

        # 2. self-nomination on even rounds
        if t % 2 == 0:
            _nominate(rng, w, active, lg_adj, matched, t)

        # 3. period starts: rescale, then greedy raise in edge-id order
        for c, es in cluster_edges.items():
            if t % period[c]:
                continue
            live = [e for e in es if active[e]]
            load: dict[int, float] = {}
            new_w: dict[int, float] = {}
            for e in live:
                x = w[e] / K
                new_w[e] = x
                for y in edges[e]:
                    load[y] = load.get(y, 0.0) + x
            bound: set[int] = set()
            for e in live:
                u, v = edges[e]
                su = kappa[(u, c)] - load[u]
                sv = kappa[(v, c)] - load[v]
                inc = max(0.0, min(su, sv))
                new_w[e] += inc
                load[u] += inc
                load[v] += inc
                if su <= sv:
                    bound.add(u)
                if sv <= su:
                    bound.add(v)
            pending.setdefault(t + period[c] - 1, []).append((c, new_w, bound))

        # 4. audits
        record = {"round": t, "active_edges": int(active.sum()), "matched": len(matched)}
        if audit:
            cap_sums = np.zeros(g.n)
            for (u, _), k in kappa.items():
                cap_sums[u] += k
                if k < 0:
                    violations["negative"] += 1
            weight_sums = np.zeros(g.n)
            if m:
                np.add.at(weight_sums, ends[:, 0], w)
                np.add.at(weight_sums, ends[:, 1], w)
            if (w < 0).any():
                violations["negative"] += 1
                round_violations.append("negative_weight")
            cap_max = float(cap_sums.max(initial=0.0))
            weight_max = float(weight_sums.max(initial=0.0))
            if cap_max > cap_ceiling * (1 + REL_TOL):
                violations["cap_sum"] += 1
                round_violations.append("cap_sum")
            if weight_max > 0.25 * (1 + REL_TOL):
                violations["weight_sum"] += 1
                round_violations.append("weight_sum")
            if not _is_matching_ids(ends, matched):
                violations["matching"] += 1
                round_violations.append("matching")
            record.update(cap_sums_max=cap_max, weight_sums_max=weight_max)
        record["violations"] = round_violations
        if record_trace:
            trace.append(record)
        t += 1

    remaining = int(active.sum())
    return MatchingResult(
        matched=sorted(edges[e] for e in matched),
        rounds_used=t,
        completed=remaining == 0,
        active_remaining=remaining,
        violations=violations,
        stalled_updates=stalled,
        trace=trace,
        validation=validation,
        edge_clustering=lgc,
        alpha=alpha,
    )


def run_baseline_framework(g: Graph, K: float, rounds: int, seed=None, record_trace: bool = True) -> MatchingResult:
    """Edge-local framework: weights start at ``1/(2 Delta)`` and grow by ``K``
    every two rounds while both endpoint sums are at most ``1/(2K)``."""
    if not K > 1:
        raise ValueError(f"K must be > 1, got {K}")
    rng = check_seed(seed)
    edges = g.edges()
    m = len(edges)
    ends = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    lg_adj = line_graph(g).lg.adjacency
    delta = g.max_degree()
    w = np.full(m, 1.0 / (2 * delta) if delta else 0.0)
    active = np.ones(m, dtype=bool)
    matched: list[int] = []
    violations = {"matching": 0, "weight_sum": 0}
    trace = []
    t = 0
    while t < rounds and active.any():
        if t % 2 == 0:
            sums = np.zeros(g.n)
            np.add.at(sums, ends[:, 0], w)
            np.add.at(sums, ends[:, 1], w)
            ok = active & (sums[ends[:, 0]] <= 1 / (2 * K)) & (sums[ends[:, 1]] <= 1 / (2 * K))
            w[ok] *= K
            _nominate(rng, w, active, lg_adj, matched, t)
            sums = np.zeros(g.n)
            np.add.at(sums, ends[:, 0], w)
            np.add.at(sums, ends[:, 1], w)
            if sums.max(initial=0.0) > 0.5 * (1 + REL_TOL):
                violations["weight_sum"] += 1
            if not _is_matching_ids(ends, matched):
                violations["matching"] += 1
        if record_trace:
            trace.append({"round": t, "active_edges": int(active.sum()), "matched": len(matched)})
        t += 1
    remaining = int(active.sum())
    return MatchingResult(
        matched=sorted(edges[e] for e in matched),
        rounds_used=t,
        completed=remaining == 0,
        active_remaining=remaining,
        violations=violations,
        stalled_updates=0,
        trace=trace,
    )


def _is_matching_ids(ends: np.ndarray, ids) -> bool:
    if not ids:
        return True
    used = ends[list(ids)].ravel()
    return len(np.unique(used)) == len(used)


def verify_matching(g: Graph, M) -> bool:
    """True iff no two edges of ``M`` share an endpoint."""
    seen: set[int] = set()
    for u, v in M:
        if u in seen or v in seen or u == v:
            return False
        seen.update((u, v))
    return True


def is_maximal(g: Graph, M) -> bool:
    covered = {x for e in M for x in e}
    return all(u in covered or v in covered for u, v in g.edges())


@dataclass
class ApproximationReport:
    size: int
    opt: int
    eps: float
    ratio: float
    passes: bool

    def to_dict(self):
        return asdict(self)


def approximation_report(g: Graph, M, eps: float, oracle_opt: int) -> ApproximationReport:
    """Check ``|M| >= OPT / (2 + eps)``; ``ratio`` is ``|M| / OPT`` (1.0 when OPT is 0)."""
    size = len(M)
    ratio = 1.0 if oracle_opt == 0 else size / oracle_opt
    return ApproximationReport(size, oracle_opt, eps, ratio, size * (2 + eps) >= oracle_opt)


class ClusterMatching(BaseEstimator):
    """Cluster-driven approximate maximum matching.

    Parameters mirror :class:`MatchingParams`; ``random_state`` seeds both the
    edge clustering and the self-nominations.

    Attributes
    ----------
    matching_ : list of (u, v)
    matched_mask_ : ndarray of bool, one entry per edge of ``graph_.edges()``
    converged_ : bool
        No active edge remained when the run stopped.
    n_rounds_ : int
    result_ : MatchingResult
    """

    def __init__(self, b=4.0, alpha=None, K=2.0, rounds=10_000, eps=0.5, fixed_point=True,
                 scale_caps=True, audit=True, record_trace=False, random_state=None):
        self.b = b
        self.alpha = alpha
        self.K = K
        self.rounds = rounds
        self.eps = eps
        self.fixed_point = fixed_point
        self.scale_caps = scale_caps
        self.audit = audit
        self.record_trace = record_trace
        self.random_state = random_state

    def fit(self, X, y=None):
        g = check_graph(X)
        params = MatchingParams(
            b=self.b, alpha=self.alpha, K=self.K, rounds=self.rounds, eps=self.eps,
            seed=self.random_state, fixed_point_mode=self.fixed_point, scale_caps=self.scale_caps,
        )
        res = run_cluster_matching(g, params, audit=self.audit, record_trace=self.record_trace)
        _store(self, g, res)
        if self.fixed_point and not res.completed:
            warnings.warn(
                f"{res.active_remaining} edges still active after {res.rounds_used} rounds",
                ConvergenceWarning,
            )
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).matched_mask_


class FrameworkMatching(BaseEstimator):
    """Edge-local fractional-matching framework, kept as a reference and ablation."""

    def __init__(self, K=2.0, rounds=10_000, record_trace=False, random_state=None):
        self.K = K
        self.rounds = rounds
        self.record_trace = record_trace
        self.random_state = random_state

    def fit(self, X, y=None):
        g = check_graph(X)
        res = run_baseline_framework(g, self.K, self.rounds, self.random_state, self.record_trace)
        _store(self, g, res)
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).matched_mask_


def _store(est, g, res):
    index = g.edge_index()
    mask = np.zeros(g.m, dtype=bool)
    for e in res.matched:
        mask[index[e]] = True
    est.graph_ = g
    est.result_ = res
    est.matching_ = res.matched
    est.matched_mask_ = mask
    est.converged_ = res.completed
    est.n_rounds_ = res.rounds_used
    est.trace_ = res.trace
