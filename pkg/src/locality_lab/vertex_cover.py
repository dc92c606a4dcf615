"""Staged two-phase approximate minimum weighted vertex cover.

Nodes repeatedly ask the clusters of their neighbours to place weight on
shared edges; each placement lowers the residual weight of both endpoints
by the same amount and is logged per edge, so the logged edge weights form
a local-ratio certificate. A node joins the cover once its residual weight
is at most ``eps' * w0`` with ``eps' = eps / (2 + eps)``, and leaves it out
only when every neighbour is already in.

Each stage has two phases. Phase 1 runs until no edge joins two active
nodes, with clusters holding back a reserve on their members. Phase 2 lets
the surviving active nodes drain their (inactive) neighbours without a
reserve until no node is active.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import ConvergenceWarning

from .decomposition import Clustering, PolyTail, default_alpha, partition, sample_shifts
from .graph import Graph
from .utils.validation import check_graph, check_positive, check_seed

__all__ = [
    "NodeState",
    "VCParams",
    "PhaseError",
    "CoverRun",
    "CoverResult",
    "LocalRatioReport",
    "run_mwvc",
    "phase1",
    "phase2",
    "verify_cover",
    "local_ratio_audit",
    "LocalRatioVertexCover",
]

NEG_TOL = 1e-12
REL_TOL = 1e-9


class NodeState(enum.IntEnum):
    ACTIVE = 0
    INACTIVE = 1
    IN_COVER = 2
    NOT_IN_COVER = 3

    @property
    def terminal(self) -> bool:
        return self >= NodeState.IN_COVER


class PhaseError(RuntimeError):
    pass


@dataclass
class VCParams:
    """Run parameters.

    ``log_n`` is the value substituted for "log n" in every threshold; by
    default ``max(ln n, e)``. The per-stage decay threshold is
    ``log_n**-decay_exp``, phase-1/phase-2 request denominators are
    ``log_n**request_exp1`` / ``log_n**request_exp2``, and the progress audit
    uses ``log_n**-progress_weight_exp`` and ``log_n**-progress_degree_exp``.
    ``scale_requests`` shrinks phase-1 requests until the reserve covers every
    node's worst-case in-flight drain.
    """

    eps: float = 0.5
    alpha: float | None = None
    b: float = 2.0
    log_n: float | None = None
    decay_exp: float = 0.1
    request_exp1: float = 0.3
    request_exp2: float = 0.2
    progress_weight_exp: float = 0.7
    progress_degree_exp: float = 0.4
    phase_round_budget: int = 100_000
    stage_cap: int | None = None
    seed: int | None = None
    fixed_point_mode: bool = True
    scale_requests: bool = True
    radius_cap: float | None = None

    def __post_init__(self):
        check_positive("eps", self.eps)
        if self.eps > 1:
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        if self.alpha is not None:
            check_positive("alpha", self.alpha)
        if self.log_n is not None and not self.log_n > 1:
            raise ValueError(f"log_n must be > 1, got {self.log_n}")
        for name in ("decay_exp", "request_exp1", "request_exp2"):
            check_positive(name, getattr(self, name), strict=False)
        if self.decay_exp == 0:
            raise ValueError("decay_exp must be > 0, otherwise stages never shrink weights")
        if self.phase_round_budget < 1:
            raise ValueError("phase_round_budget must be >= 1")

    @classmethod
    def asymptotic_profile(cls, **overrides) -> "VCParams":
        """Unscaled requests and ``b = 30`` shift exponent with ``log_n = ln n``."""
        base = dict(b=30.0, scale_requests=False)
        base.update(overrides)
        return cls(**base)

    @property
    def eps_prime(self) -> float:
        return self.eps / (2 + self.eps)

    def resolved_log_n(self, n: int) -> float:
        if self.log_n is not None:
            return self.log_n
        return max(math.log(max(n, 1)), math.e)

    def resolved_alpha(self, n: int) -> float:
        return self.alpha if self.alpha is not None else default_alpha(n, self.b)

    def decay(self, n: int) -> float:
        return self.resolved_log_n(n) ** -self.decay_exp

    def resolved_stage_cap(self, n: int) -> int:
        if self.stage_cap is not None:
            return self.stage_cap
        return 1 + math.ceil(math.log(1 / self.eps_prime) / -math.log(self.decay(n)))


@dataclass
class CoverRun:
    """Mutable run state plus the audit records that ``local_ratio_audit`` reads."""

    graph: Graph
    eps_prime: float
    w0: np.ndarray
    w: np.ndarray
    state: list[NodeState]
    clustering: Clustering
    delta_ledger: np.ndarray  # per edge id
    w_stage: np.ndarray = None
    w_phase2: np.ndarray = None
    round: int = 0
    join_weight: dict[int, float] = field(default_factory=dict)
    not_in_cover_ok: dict[int, bool] = field(default_factory=dict)
    transitions: list[tuple[int, int, int, int]] = field(default_factory=list)  # (round, v, old, new)
    min_weight: float = math.inf
    violations: dict[str, int] = field(default_factory=lambda: {
        "negative_weight": 0, "phase1_exit": 0, "phase2_exit": 0, "stage_decay": 0,
    })
    # deliveries where neither the weight-drop nor the degree-shrink branch held;
    # only expected to be zero with asymptotic parameters, so kept apart from violations
    progress_misses: int = 0
    trace: list[dict] | None = None
    request_scale: float = 1.0

    @classmethod
    def start(cls, g: Graph, eps_prime: float, clustering: Clustering, record_trace=False) -> "CoverRun":
        w0 = g.weights_array()
        return cls(
            graph=g,
            eps_prime=eps_prime,
            w0=w0.copy(),
            w=w0.copy(),
            state=[NodeState.ACTIVE] * g.n,
            clustering=clustering,
            delta_ledger=np.zeros(g.m),
            trace=[] if record_trace else None,
        )

    def set_state(self, v: int, new: NodeState):
        old = self.state[v]
        if old.terminal:
            raise PhaseError(f"node {v} tried to leave terminal state {old.name}")
        if old != new:
            self.transitions.append((self.round, v, int(old), int(new)))
            self.state[v] = new

    def cover(self) -> list[int]:
        return [v for v, s in enumerate(self.state) if s == NodeState.IN_COVER]

    def active_active_edges(self) -> int:
        A = NodeState.ACTIVE
        return sum(1 for u, v in self.graph.edges() if self.state[u] == A and self.state[v] == A)

    def count(self, s: NodeState) -> int:
        return sum(1 for x in self.state if x == s)


def phase1_drain_factor(g: Graph, c: Clustering) -> int:
    """Worst case, over nodes, of own-request deliveries that can land while one
    period of the node's own cluster is in flight, plus one outstanding request
    per radius class."""
    worst = 0
    for v in range(g.n):
        own = 2 * (c.radius_of_node(v) + 1)
        classes = {c.radius_of_node(y) for y in g.adjacency[v]}
        worst = max(worst, sum(math.ceil(own / (2 * (r + 1))) + 1 for r in classes))
    return worst


@dataclass
class _Pending:
    due: int
    cluster: int
    budgets: dict[tuple[int, int], float]  # directed incidence (u, v) -> budget
    requests: dict[int, float]


def _neighbour_classes(run: CoverRun, v: int, targets) -> dict[int, set[int]]:
    """Radius class -> clusters holding a neighbour whose visible state is in ``targets``."""
    c = run.clustering
    out: dict[int, set[int]] = {}
    for y in run.graph.adjacency[v]:
        if run.state[y] in targets:
            cc = int(c.center_of[y])
            out.setdefault(c.radius_of[cc], set()).add(cc)
    return out


def _run_phase(run: CoverRun, p: VCParams, which: int) -> dict:
    g = run.graph
    c = run.clustering
    L = p.resolved_log_n(g.n)
    rho = L**-p.decay_exp
    reserve_factor = rho if which == 1 else 0.0
    if which == 1:
        base = run.w_stage * (L**-p.request_exp1) * run.request_scale
        targets = (NodeState.ACTIVE,)
    else:
        base = run.w_phase2 * (L**-p.request_exp2)
        targets = (NodeState.ACTIVE, NodeState.INACTIVE)
    eps_w0 = run.eps_prime * run.w0
    edge_id = g.edge_index()
    members = c.cluster_members
    periods = {cc: 2 * (r + 1) for cc, r in c.radius_of.items()}
    class_periods = sorted({2 * (r + 1) for r in c.radius_of.values()})
    progress_drop = run.w_stage * L**-p.progress_weight_exp
    progress_shrink = L**-p.progress_degree_exp

    pending: dict[int, list[_Pending]] = {}
    outstanding = np.zeros(g.n)
    watches: dict[int, list[tuple[int, int, float, int]]] = {}  # due -> (v, r, w_start, d_start)
    rounds = 0
    reached = False
    # phase 2 also needs a round in which every non-terminal node re-checked its
    # exit rules and nothing changed, otherwise drained inactive nodes linger
    quiet = which == 1

    def postcondition():
        if which == 1:
            return run.active_active_edges() == 0
        return run.count(NodeState.ACTIVE) == 0

    for t in range(p.phase_round_budget):
        if p.fixed_point_mode and quiet and not pending and postcondition():
            reached = True
            break

        # sends (even rounds): requests queue at the addressed cluster
        inbox: dict[int, dict[int, float]] = {}
        if t % 2 == 0:
            for v in range(g.n):
                if run.state[v] != NodeState.ACTIVE:
                    continue
                classes = _neighbour_classes(run, v, targets)
                sends = []
                for r, clusters in classes.items():
                    if t % (2 * (r + 1)):
                        continue
                    amount = base[v] / len(clusters)
                    sends.extend((r, cc, amount) for cc in clusters)
                if which == 2 and sends:
                    available = max(run.w[v] - outstanding[v], 0.0)
                    total = sum(a for _, _, a in sends)
                    if total > available:
                        scale = available / total
                        sends = [(r, cc, a * scale) for r, cc, a in sends]
                for r, cc, amount in sends:
                    inbox.setdefault(cc, {})[v] = amount
                    outstanding[v] += amount
                for r, clusters in classes.items():
                    if t % (2 * (r + 1)) == 0:
                        watches.setdefault(t + 2 * (r + 1) - 1, []).append((v, r, run.w[v], len(clusters)))

        # period starts: budget sweep over directed incidences in (u, v) order
        if t % 2 == 0:
            for cc, reqs in inbox.items():
                if t % periods[cc]:
                    raise AssertionError("request addressed outside the cluster's period start")
                snap = {v: run.w[v] for v in members[cc]}
                incidences = sorted(
                    (u, v)
                    for v in members[cc]
                    if not run.state[v].terminal
                    for u in g.adjacency[v]
                    if u in reqs
                )
                given_u: dict[int, float] = {}
                taken_v: dict[int, float] = {}
                budgets: dict[tuple[int, int], float] = {}
                for u, v in incidences:
                    room_u = reqs[u] - given_u.get(u, 0.0)
                    room_v = snap[v] - reserve_factor * run.w_stage[v] - taken_v.get(v, 0.0)
                    amount = max(0.0, min(room_u, room_v))
                    if amount > 0:
                        budgets[(u, v)] = amount
                        given_u[u] = given_u.get(u, 0.0) + amount
                        taken_v[v] = taken_v.get(v, 0.0) + amount
                due = t + periods[cc] - 1
                pending.setdefault(due, []).append(_Pending(due, cc, budgets, reqs))

        # deliveries (odd rounds): both endpoints lose the budget, the edge logs it
        for item in pending.pop(t, []):
            for (u, v), amount in item.budgets.items():
                # a shortfall at rounding level (sequential float subtraction) is trimmed
                # so the endpoint lands on exactly 0; real overdraws are left visible
                for x in (u, v):
                    if run.w[x] < amount <= run.w[x] + REL_TOL * max(1.0, run.w0[x]):
                        amount = max(run.w[x], 0.0)
                run.w[u] -= amount
                run.w[v] -= amount
                run.delta_ledger[edge_id[(min(u, v), max(u, v))]] += amount
            for u, amount in item.requests.items():
                outstanding[u] -= amount

        # state checks against states visible at the start of the round
        changes: list[tuple[int, NodeState]] = []
        for v in range(g.n):
            s = run.state[v]
            if s.terminal:
                continue
            if which == 1:
                if s == NodeState.ACTIVE and run.w[v] <= rho * run.w_stage[v]:
                    changes.append((v, NodeState.INACTIVE))
            else:
                if run.w[v] <= eps_w0[v]:
                    changes.append((v, NodeState.IN_COVER))
                    run.join_weight[v] = float(run.w[v])
                elif all(run.state[y].terminal for y in g.adjacency[v]):
                    changes.append((v, NodeState.NOT_IN_COVER))
                    run.not_in_cover_ok[v] = all(run.state[y] == NodeState.IN_COVER for y in g.adjacency[v])
        for v, s in changes:
            run.set_state(v, s)
        quiet = which == 1 or not changes

        # progress dichotomy at each class delivery to a still-active node
        for v, r, w_start, d_start in watches.pop(t, []):
            if run.state[v] != NodeState.ACTIVE:
                continue
            d_now = len(_neighbour_classes(run, v, targets).get(r, ()))
            if not (w_start - run.w[v] >= progress_drop[v] or d_now <= d_start * progress_shrink):
                run.progress_misses += 1

        lowest = float(run.w.min(initial=math.inf))
        run.min_weight = min(run.min_weight, lowest)
        if lowest < -NEG_TOL:
            run.violations["negative_weight"] += 1
        if run.trace is not None:
            run.trace.append({
                "round": run.round,
                "phase": which,
                "phase_round": t,
                "active": run.count(NodeState.ACTIVE),
                "inactive": run.count(NodeState.INACTIVE),
                "in_cover": run.count(NodeState.IN_COVER),
                "not_in_cover": run.count(NodeState.NOT_IN_COVER),
                "min_weight": lowest,
            })
        run.round += 1
        rounds = t + 1
    else:
        reached = postcondition() and (quiet or not p.fixed_point_mode)

    # undelivered budgets are dropped whole: neither endpoint nor the ledger saw them
    return {"rounds": rounds, "fixed_point": reached}


def phase1(run: CoverRun, p: VCParams) -> dict:
    """Run phase 1; afterwards (in fixed-point mode) no edge joins two active nodes."""
    info = _run_phase(run, p, 1)
    info["active_active_edges"] = run.active_active_edges()
    if p.fixed_point_mode and info["active_active_edges"]:
        run.violations["phase1_exit"] += 1
    return info


def phase2(run: CoverRun, p: VCParams) -> dict:
    """Run phase 2; afterwards (in fixed-point mode) no node is active.

    Raises :class:`PhaseError` when entered with an edge between active nodes.
    """
    if run.active_active_edges():
        raise PhaseError("phase 2 entered with an edge between two active nodes")
    info = _run_phase(run, p, 2)
    info["active_nodes"] = run.count(NodeState.ACTIVE)
    if p.fixed_point_mode and info["active_nodes"]:
        run.violations["phase2_exit"] += 1
    return info


@dataclass
class CoverResult:
    cover: list[int]
    total_weight: float
    completed: bool
    stages_used: int
    stage_cap: int
    rounds_used: int
    stages: list[dict]
    run: CoverRun
    alpha: float
    log_n: float
    request_scale: float

    @property
    def violations(self) -> dict[str, int]:
        return self.run.violations

    def to_dict(self) -> dict:
        return {
            "cover": self.cover,
            "total_weight": self.total_weight,
            "completed": self.completed,
            "stages_used": self.stages_used,
            "stage_cap": self.stage_cap,
            "rounds_used": self.rounds_used,
            "min_weight": self.run.min_weight if self.run.graph.n else None,
            "violations": dict(sorted(self.run.violations.items())),
            "progress_misses": self.run.progress_misses,
            "unterminated": [v for v, s in enumerate(self.run.state) if not s.terminal],
            "alpha": self.alpha,
            "log_n": self.log_n,
            "request_scale": self.request_scale,
            "stages": self.stages,
        }


def run_mwvc(g: Graph, p: VCParams, record_trace: bool = False) -> CoverResult:
    """Cluster the nodes, then run stages of phase 1 + phase 2 until every node
    is terminal or the stage cap is hit (reported through ``completed``)."""
    if g.node_weights is None:
        raise ValueError("run_mwvc needs node weights")
    rng = check_seed(p.seed)
    alpha = p.resolved_alpha(g.n)
    shifts = sample_shifts(PolyTail(alpha), g.n, rng)
    if p.radius_cap is not None:
        shifts = np.minimum(shifts, p.radius_cap)
    clustering = partition(g, shifts, alpha=alpha)
    run = CoverRun.start(g, p.eps_prime, clustering, record_trace)

    L = p.resolved_log_n(g.n)
    rho = L**-p.decay_exp
    if p.scale_requests:
        need = L**-p.request_exp1 * phase1_drain_factor(g, clustering)
        run.request_scale = min(1.0, rho / need) if need > 0 else 1.0

    cap = p.resolved_stage_cap(g.n)
    stages = []
    for i in range(1, cap + 1):
        if all(s.terminal for s in run.state):
            break
        run.w_stage = run.w.copy()
        for v, s in enumerate(run.state):
            if not s.terminal:
                run.set_state(v, NodeState.ACTIVE)
        info1 = phase1(run, p)
        run.w_phase2 = run.w.copy()
        info2 = phase2(run, p)
        for v, s in enumerate(run.state):
            if s == NodeState.INACTIVE and run.w[v] > rho * run.w_stage[v] * (1 + REL_TOL):
                run.violations["stage_decay"] += 1
        stages.append({
            "stage": i,
            "phase1_rounds": info1["rounds"],
            "phase1_fixed_point": info1["fixed_point"],
            "phase2_rounds": info2["rounds"],
            "phase2_fixed_point": info2["fixed_point"],
            "in_cover": run.count(NodeState.IN_COVER),
            "not_in_cover": run.count(NodeState.NOT_IN_COVER),
            "inactive": run.count(NodeState.INACTIVE),
        })

    cover = run.cover()
    return CoverResult(
        cover=cover,
        total_weight=math.fsum(run.w0[v] for v in cover),
        completed=all(s.terminal for s in run.state),
        stages_used=len(stages),
        stage_cap=cap,
        rounds_used=run.round,
        stages=stages,
        run=run,
        alpha=alpha,
        log_n=L,
        request_scale=run.request_scale,
    )


def verify_cover(g: Graph, S) -> bool:
    """True iff every edge has an endpoint in ``S``."""
    S = set(S)
    return all(u in S or v in S for u, v in g.edges())


@dataclass
class LocalRatioReport:
    overdrawn: list[int]  # nodes whose logged edge weight exceeds w0
    early_joins: list[int]  # joined the cover above eps' * w0
    bad_exclusions: list[int]  # left out while a neighbour was not in the cover
    conservation: list[int]  # w != w0 - logged edge weight

    @property
    def clean(self) -> bool:
        return not (self.overdrawn or self.early_joins or self.bad_exclusions or self.conservation)

    def to_dict(self):
        return {
            "overdrawn": self.overdrawn,
            "early_joins": self.early_joins,
            "bad_exclusions": self.bad_exclusions,
            "conservation": self.conservation,
            "clean": self.clean,
        }


def local_ratio_audit(run: CoverRun) -> LocalRatioReport:
    g = run.graph
    load = np.zeros(g.n)
    for e, (u, v) in enumerate(g.edges()):
        load[u] += run.delta_ledger[e]
        load[v] += run.delta_ledger[e]
    scale = np.maximum(1.0, np.abs(run.w0))
    overdrawn = [v for v in range(g.n) if load[v] > run.w0[v] + REL_TOL * scale[v]]
    if (run.delta_ledger < 0).any():
        overdrawn.extend(
            v for e, (a, b) in enumerate(g.edges()) if run.delta_ledger[e] < 0 for v in (a, b)
        )
    early = [
        v for v, s in enumerate(run.state)
        if s == NodeState.IN_COVER
        and not run.join_weight.get(v, math.inf) <= run.eps_prime * run.w0[v] + REL_TOL * scale[v]
    ]
    bad = [
        v for v, s in enumerate(run.state)
        if s == NodeState.NOT_IN_COVER and not run.not_in_cover_ok.get(v, False)
    ]
    conservation = [v for v in range(g.n) if abs(run.w[v] - (run.w0[v] - load[v])) > REL_TOL * scale[v]]
    return LocalRatioReport(sorted(set(overdrawn)), early, bad, conservation)


class LocalRatioVertexCover(BaseEstimator):
    """Approximate minimum weighted vertex cover.

    Node weights come from ``sample_weight`` or from a weighted :class:`Graph`;
    ``unit_weights=True`` falls back to all-ones.

    Attributes
    ----------
    cover_ : list of int
    cover_mask_ : ndarray of bool
    total_weight_ : float
    converged_ : bool
        Every node reached a terminal state within the stage cap.
    n_stages_, n_rounds_ : int
    audit_ : LocalRatioReport
    result_ : CoverResult
    """

    def __init__(self, eps=0.5, profile="desk", alpha=None, b=None, log_n=None, decay_exp=0.1,
                 request_exps=(0.3, 0.2), phase_round_budget=100_000, stage_cap=None,
                 fixed_point=True, scale_requests=None, unit_weights=False, record_trace=False,
                 random_state=None):
        self.eps = eps
        self.profile = profile
        self.alpha = alpha
        self.b = b
        self.log_n = log_n
        self.decay_exp = decay_exp
        self.request_exps = request_exps
        self.phase_round_budget = phase_round_budget
        self.stage_cap = stage_cap
        self.fixed_point = fixed_point
        self.scale_requests = scale_requests
        self.unit_weights = unit_weights
        self.record_trace = record_trace
        self.random_state = random_state

    def _params(self) -> VCParams:
        kw = dict(
            eps=self.eps, alpha=self.alpha, log_n=self.log_n, decay_exp=self.decay_exp,
            request_exp1=self.request_exps[0], request_exp2=self.request_exps[1],
            phase_round_budget=self.phase_round_budget, stage_cap=self.stage_cap,
            seed=self.random_state, fixed_point_mode=self.fixed_point,
        )
        if self.b is not None:
            kw["b"] = self.b
        if self.scale_requests is not None:
            kw["scale_requests"] = self.scale_requests
        if self.profile == "asymptotic":
            return VCParams.asymptotic_profile(**kw)
        if self.profile == "desk":
            return VCParams(**kw)
        raise ValueError(f"unknown profile {self.profile!r}")

    def fit(self, X, y=None, sample_weight=None):
        g = check_graph(X, sample_weight=sample_weight)
        if g.node_weights is None:
            if not self.unit_weights:
                raise ValueError("node weights required: pass sample_weight, a weighted graph, or unit_weights=True")
            g = g.with_weights([1.0] * g.n)
        res = run_mwvc(g, self._params(), record_trace=self.record_trace)
        self.graph_ = g
        self.result_ = res
        self.cover_ = res.cover
        mask = np.zeros(g.n, dtype=bool)
        mask[res.cover] = True
        self.cover_mask_ = mask
        self.total_weight_ = res.total_weight
        self.converged_ = res.completed
        self.n_stages_ = res.stages_used
        self.n_rounds_ = res.rounds_used
        self.audit_ = local_ratio_audit(res.run)
        self.trace_ = res.run.trace
        if not res.completed:
            warnings.warn(
                f"{sum(not s.terminal for s in res.run.state)} nodes unterminated after {res.stages_used} stages",
                ConvergenceWarning,
            )
        return self

    def fit_predict(self, X, y=None, sample_weight=None):
        return self.fit(X, sample_weight=sample_weight).cover_mask_
