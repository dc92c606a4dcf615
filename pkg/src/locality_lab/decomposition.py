"""Random-shift clustering with arbitrary shift distributions.

Every node draws a shift ``delta_v`` and joins the cluster of the node ``u``
maximising ``delta_u - dist(u, v)``. Heavy-tailed polynomial shifts
(``G(x) = (1 + x)**-alpha``) keep radii sublogarithmic while bounding the
number of large clusters next to any node. The helpers here compute the
tail quantities that drive those bounds and audit them empirically.
"""

from __future__ import annotations

import heapq
import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from .graph import Graph, all_pairs_distances
from .utils.validation import check_graph, check_positive, check_seed

__all__ = [
    "ShiftDistribution",
    "PolyTail",
    "Exponential",
    "parse_distribution",
    "default_alpha",
    "sample_shifts",
    "Clustering",
    "partition",
    "radius_tail_bound",
    "tail_ratio_sup",
    "MomentExponent",
    "moment_exponent",
    "ClusterStats",
    "cluster_stats",
    "window_counts",
    "ClusteringReport",
    "verify_clustering",
    "MomentEstimate",
    "moment_estimate",
    "ShiftedPartition",
]


class ShiftDistribution(ABC):
    """Continuous distribution on ``[0, inf)`` with ``F(0) = 0``."""

    @abstractmethod
    def cdf(self, x): ...

    @abstractmethod
    def pdf(self, x): ...

    @abstractmethod
    def inverse_cdf(self, u): ...

    @abstractmethod
    def descriptor(self) -> str: ...

    def tail(self, x):
        return 1.0 - self.cdf(x)

    def tail_inverse(self, p: float) -> float:
        """The ``x`` with ``G(x) = p``."""
        return float(self.inverse_cdf(1.0 - p))

    def __repr__(self):
        return f"{type(self).__name__}({self.descriptor()!r})"

    def __eq__(self, other):
        return type(self) is type(other) and self.descriptor() == other.descriptor()

    def __hash__(self):
        return hash(self.descriptor())


class PolyTail(ShiftDistribution):
    """``F(x) = 1 - (1 + x)**-alpha``."""

    def __init__(self, alpha: float):
        self.alpha = float(check_positive("alpha", alpha))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return -np.expm1(-self.alpha * np.log1p(x))

    def tail(self, x):
        return np.power(1.0 + np.asarray(x, dtype=float), -self.alpha)

    def pdf(self, x):
        return self.alpha * np.power(1.0 + np.asarray(x, dtype=float), -self.alpha - 1.0)

    def inverse_cdf(self, u):
        return np.power(1.0 - np.asarray(u, dtype=float), -1.0 / self.alpha) - 1.0

    def tail_inverse(self, p: float) -> float:
        # (1+x)^-alpha = p  without the 1-(1-p) round trip
        return p ** (-1.0 / self.alpha) - 1.0

    def descriptor(self) -> str:
        return f"poly:{self.alpha!r}"


class Exponential(ShiftDistribution):
    """``F(x) = 1 - exp(-lam * x)``; ``lam = 0`` is the degenerate all-infinite limit."""

    def __init__(self, lam: float):
        self.lam = float(check_positive("lam", lam, strict=False))

    def cdf(self, x):
        return -np.expm1(-self.lam * np.asarray(x, dtype=float))

    def tail(self, x):
        return np.exp(-self.lam * np.asarray(x, dtype=float))

    def pdf(self, x):
        return self.lam * np.exp(-self.lam * np.asarray(x, dtype=float))

    def inverse_cdf(self, u):
        if self.lam == 0:
            raise ValueError("cannot sample from exponential(0)")
        return -np.log1p(-np.asarray(u, dtype=float)) / self.lam

    def tail_inverse(self, p: float) -> float:
        if self.lam == 0:
            raise ValueError("exponential(0) has no finite quantiles")
        return -math.log(p) / self.lam

    def descriptor(self) -> str:
        return f"exp:{self.lam!r}"


def parse_distribution(text: str) -> ShiftDistribution:
    """``"poly:ALPHA"`` or ``"exp:LAMBDA"``."""
    name, _, arg = text.partition(":")
    try:
        value = float(arg)
    except ValueError:
        raise ValueError(f"bad distribution {text!r}; expected poly:ALPHA or exp:LAMBDA") from None
    if name == "poly":
        return PolyTail(value)
    if name == "exp":
        return Exponential(value)
    raise ValueError(f"unknown distribution {name!r}")


def default_alpha(n: int, b: float) -> float:
    """``b * ln n / ln ln n`` with natural logs; ``n`` is floored at 3 so ``ln ln n > 0``."""
    n = max(n, 3)
    return b * math.log(n) / math.log(math.log(n))


def sample_shifts(dist: ShiftDistribution, n: int, seed=None) -> np.ndarray:
    """I.i.d. shifts by inversion of uniforms drawn from ``[0, 1)``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = check_seed(seed)
    return np.asarray(dist.inverse_cdf(rng.random(n)), dtype=float)


@dataclass
class Clustering:
    shifts: np.ndarray
    center_of: np.ndarray
    cluster_members: dict[int, list[int]]
    radius_of: dict[int, int]
    dist_to_center: np.ndarray
    round_bound: int
    alpha: float | None = None

    @property
    def n(self) -> int:
        return len(self.center_of)

    @property
    def centers(self) -> list[int]:
        return sorted(self.cluster_members)

    @property
    def max_radius(self) -> int:
        return max(self.radius_of.values(), default=0)

    def radius_of_node(self, v: int) -> int:
        return self.radius_of[int(self.center_of[v])]

    def to_dict(self) -> dict:
        return {
            "shifts": [float(x) for x in self.shifts],
            "center_of": [int(c) for c in self.center_of],
            "radii": {str(c): r for c, r in sorted(self.radius_of.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, g: Graph, text: str) -> "Clustering":
        """Rebuild from serialized shifts; the assignment is recomputed and checked."""
        doc = json.loads(text)
        c = partition(g, doc["shifts"])
        if [int(x) for x in doc["center_of"]] != c.center_of.tolist():
            raise ValueError("serialized assignment does not match its shifts")
        return c


def partition(g: Graph, shifts: Sequence[float], alpha: float | None = None) -> Clustering:
    """Exact argmax assignment by a multi-source priority-first search.

    Keys are ``delta_u - dist(u, v)``; equal keys go to the smaller center id.
    The search never expands past ``ceil(max delta)`` hops, since beyond that a
    node's own non-negative shift always wins.
    """
    delta = [float(x) for x in shifts]
    if len(delta) != g.n:
        raise ValueError(f"expected {g.n} shifts, got {len(delta)}")
    for v, d in enumerate(delta):
        if not d >= 0 or math.isinf(d):
            raise ValueError(f"shift of node {v} must be finite and >= 0, got {d}")

    n = g.n
    limit = math.ceil(max(delta)) if n else 0
    center = [-1] * n
    dist = [0] * n
    heap = [(-delta[v], v, v, 0) for v in range(n)]
    heapq.heapify(heap)
    adjacency = g.adjacency
    while heap:
        _, c, v, d = heapq.heappop(heap)
        if center[v] >= 0:
            continue
        center[v] = c
        dist[v] = d
        if d + 1 > limit:
            continue
        value = delta[c] - (d + 1)
        if value < 0:
            continue
        for y in adjacency[v]:
            if center[y] < 0:
                heapq.heappush(heap, (-value, c, y, d + 1))

    members: dict[int, list[int]] = {}
    radius: dict[int, int] = {}
    for v in range(n):
        c = center[v]
        members.setdefault(c, []).append(v)
        radius[c] = max(radius.get(c, 0), dist[v])
    return Clustering(
        shifts=np.asarray(delta, dtype=float),
        center_of=np.asarray(center, dtype=np.int64),
        cluster_members=members,
        radius_of=radius,
        dist_to_center=np.asarray(dist, dtype=np.int64),
        round_bound=limit,
        alpha=alpha,
    )


def radius_tail_bound(dist: ShiftDistribution, n: int) -> float:
    """Shift value exceeded with probability exactly ``n**-3`` per node."""
    if n < 2:
        raise ValueError("radius_tail_bound needs n >= 2")
    return dist.tail_inverse(float(n) ** -3)


def tail_ratio_sup(dist: ShiftDistribution, q: float, window: int = 2) -> float:
    """``sup_{x >= q} G(x) / G(x + window) - 1`` in closed form.

    Only the width-2 window is defined; other widths raise ``ValueError``.
    """
    if window != 2:
        raise ValueError("only window=2 is supported")
    if q < 0:
        raise ValueError("q must be >= 0")
    if isinstance(dist, PolyTail):
        # ((x+3)/(x+1))**alpha decreases in x, so the sup sits at x = q
        return ((q + 3.0) / (q + 1.0)) ** dist.alpha - 1.0
    if isinstance(dist, Exponential):
        return math.expm1(2.0 * dist.lam)
    raise TypeError(f"no closed form for {dist!r}")


class MomentExponent(NamedTuple):
    gamma: float
    lhs: float
    rhs: float
    premise_holds: bool


def moment_exponent(alpha: float, q: float) -> MomentExponent:
    """``gamma(q) = exp(-2 alpha / (1 + q)) / 6`` and the premise ``e**gamma - 1 <= F(1) / (2 pi(q))``."""
    check_positive("alpha", alpha)
    if q < 0:
        raise ValueError("q must be >= 0")
    gamma = math.exp(-2.0 * alpha / (1.0 + q)) / 6.0
    dist = PolyTail(alpha)
    pi = tail_ratio_sup(dist, q)
    lhs = math.expm1(gamma)
    rhs = math.inf if pi == 0 else float(dist.cdf(1.0)) / (2.0 * pi)
    return MomentExponent(gamma, lhs, rhs, lhs <= rhs)


@dataclass
class ClusterStats:
    q_values: list[int]
    counts: np.ndarray  # shape (n, len(q_values))
    max_radius: int
    n_clusters: int
    size_histogram: dict[int, int]
    window_counts: np.ndarray | None = None

    def max_counts(self) -> dict[int, int]:
        if self.counts.size == 0:
            return {q: 0 for q in self.q_values}
        return {q: int(self.counts[:, j].max()) for j, q in enumerate(self.q_values)}

    def rows(self):
        """``(node, q, count)`` triples in node-major order."""
        for v in range(self.counts.shape[0]):
            for j, q in enumerate(self.q_values):
                yield v, q, int(self.counts[v, j])


def _adjacent_foreign_radii(g: Graph, c: Clustering) -> list[list[int]]:
    out = []
    center = c.center_of
    for v in range(g.n):
        own = center[v]
        foreign = {int(center[y]) for y in g.adjacency[v]} - {int(own)}
        out.append([c.radius_of[x] for x in foreign])
    return out


def cluster_stats(g: Graph, c: Clustering, q_values, audit: bool = False) -> ClusterStats:
    """Per node and threshold ``q``: distinct neighbouring foreign clusters of radius ``>= q``."""
    q_values = sorted(int(q) for q in q_values)
    radii = _adjacent_foreign_radii(g, c)
    counts = np.zeros((g.n, len(q_values)), dtype=np.int64)
    for v, rs in enumerate(radii):
        if rs:
            rs = np.asarray(rs)
            counts[v] = [(rs >= q).sum() for q in q_values]
    sizes: dict[int, int] = {}
    for members in c.cluster_members.values():
        sizes[len(members)] = sizes.get(len(members), 0) + 1
    return ClusterStats(
        q_values=q_values,
        counts=counts,
        max_radius=c.max_radius,
        n_clusters=len(c.cluster_members),
        size_histogram=dict(sorted(sizes.items())),
        window_counts=window_counts(g, c, q_values) if audit else None,
    )


def window_counts(g: Graph, c: Clustering, q_values, width: int = 2) -> np.ndarray:
    """Raw shifted-window counts: nodes ``w != v`` with
    ``delta_w >= max(delta_CC(v) - d_CC(v) - width + d_w, q)``.

    Needs all-pairs distances, so it is meant for audits on small graphs.
    """
    q_values = sorted(int(q) for q in q_values)
    D = all_pairs_distances(g)
    delta = c.shifts
    out = np.zeros((g.n, len(q_values)), dtype=np.int64)
    for v in range(g.n):
        cc = int(c.center_of[v])
        win = delta[cc] - D[cc, v] - width
        others = np.arange(g.n) != v
        for j, q in enumerate(q_values):
            ok = others & (delta >= np.maximum(win + D[:, v], q))
            out[v, j] = int(ok.sum())
    return out


@dataclass
class ClusteringReport:
    n: int
    alpha: float
    b: float | None
    max_radius: int
    radius_bound: float
    radius_ok: bool
    count_bounds: dict[int, float]
    max_counts: dict[int, int]
    violations: list[tuple[int, int, int]] = field(default_factory=list)  # (node, q, count)

    @property
    def ok(self) -> bool:
        return self.radius_ok and not self.violations


def verify_clustering(g: Graph, c: Clustering, alpha: float, b: float | None = None) -> ClusteringReport:
    """Check the radius bound and ``count <= exp(3 alpha / (q + 1))`` for every node and q."""
    bound = radius_tail_bound(PolyTail(alpha), g.n) if g.n >= 2 else math.inf
    qs = list(range(c.max_radius + 1))
    stats = cluster_stats(g, c, qs)
    count_bounds = {q: math.exp(3.0 * alpha / (q + 1)) for q in qs}
    violations = [
        (v, q, cnt) for v, q, cnt in stats.rows() if cnt > count_bounds[q]
    ]
    return ClusteringReport(
        n=g.n,
        alpha=alpha,
        b=b,
        max_radius=c.max_radius,
        radius_bound=bound,
        radius_ok=c.max_radius <= bound,
        count_bounds=count_bounds,
        max_counts=stats.max_counts(),
        violations=violations,
    )


@dataclass
class MomentEstimate:
    node: int
    mean: float
    stderr: float
    max_mean: float
    max_node: int
    max_stderr: float
    trials: int


def _batched_assignment(D: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Brute-force argmax centers for a batch of shift vectors ``S`` (trials x n)."""
    # values[t, v, u] = S[t, u] - D[u, v]; argmax takes the first, i.e. smallest, u on ties
    values = S[:, None, :] - D.T[None, :, :]
    return values.argmax(axis=2)


def _batched_counts(D, adj, labels, q, window: bool, S=None):
    """C_{q,2} per (trial, node) for a batch of assignments."""
    T, n = labels.shape
    rows = np.arange(T)[:, None]
    dist_to_center = D[labels, np.arange(n)[None, :]]
    radius = np.zeros((T, n))
    np.maximum.at(radius, (np.repeat(rows, n, axis=1), labels), dist_to_center)
    if window:
        win = S[rows, labels] - dist_to_center - 2  # (T, v)
        thresh = np.maximum(win[:, :, None] + D.T[None, :, :], q)  # (T, v, w)
        hit = S[:, None, :] >= thresh
        hit[:, np.arange(n), np.arange(n)] = False
        return hit.sum(axis=2)
    onehot = np.zeros((T, n, n), dtype=bool)
    onehot[rows, np.arange(n)[None, :], labels] = True
    touching = np.einsum("vy,tyc->tvc", adj, onehot.astype(np.int32)) > 0
    touching[rows, np.arange(n)[None, :], labels] = False
    big = radius >= q  # (T, c)
    return (touching & big[:, None, :]).sum(axis=2)


def moment_estimate(
    g: Graph,
    dist: ShiftDistribution,
    q: int,
    gamma: float,
    trials: int,
    seed=None,
    node: int = 0,
    window: bool = False,
    batch: int = 500,
) -> MomentEstimate:
    """Monte Carlo sample mean of ``exp(gamma * C_{q,2})`` with standard errors.

    ``window=True`` uses the raw shifted-window count instead of the adjacency
    count. Trials are evaluated in dense batches over all-pairs distances.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if g.n == 0:
        raise ValueError("graph has no nodes")
    rng = check_seed(seed)
    D = all_pairs_distances(g)
    adj = np.zeros((g.n, g.n), dtype=np.int32)
    for u, v in g.edges():
        adj[u, v] = adj[v, u] = 1
    total = np.zeros(g.n)
    total_sq = np.zeros(g.n)
    done = 0
    while done < trials:
        t = min(batch, trials - done)
        S = np.asarray(dist.inverse_cdf(rng.random((t, g.n))), dtype=float)
        labels = _batched_assignment(D, S)
        C = _batched_counts(D, adj, labels, q, window, S)
        X = np.exp(gamma * C)
        total += X.sum(axis=0)
        total_sq += (X**2).sum(axis=0)
        done += t
    mean = total / trials
    var = np.maximum(total_sq / trials - mean**2, 0.0) * (trials / max(trials - 1, 1))
    se = np.sqrt(var / trials)
    top = int(np.argmax(mean))
    return MomentEstimate(
        node=node,
        mean=float(mean[node]),
        stderr=float(se[node]),
        max_mean=float(mean[top]),
        max_node=top,
        max_stderr=float(se[top]),
        trials=trials,
    )


class ShiftedPartition(ClusterMixin, BaseEstimator):
    """Random-shift clustering of a graph's nodes.

    Parameters
    ----------
    distribution : {"poly", "exp"}
        Polynomial-tail shifts ``G(x) = (1+x)**-alpha`` or exponential shifts.
    alpha : float, optional
        Tail exponent for ``"poly"``. Defaults to ``b * ln n / ln ln n``.
    b : float
        Constant in the default ``alpha``.
    lam : float
        Rate for ``"exp"``.
    radius_cap : float, optional
        Clip shifts to this value before clustering, which caps every radius.
    random_state : int, Generator or None

    Attributes
    ----------
    labels_ : ndarray of shape (n,)
        Cluster center of every node.
    clustering_ : Clustering
    alpha_ : float or None
    """

    def __init__(self, distribution="poly", alpha=None, b=4.0, lam=1.0, radius_cap=None, random_state=None):
        self.distribution = distribution
        self.alpha = alpha
        self.b = b
        self.lam = lam
        self.radius_cap = radius_cap
        self.random_state = random_state

    def _distribution(self, n):
        if self.distribution == "poly":
            alpha = self.alpha if self.alpha is not None else default_alpha(n, self.b)
            return PolyTail(alpha), alpha
        if self.distribution == "exp":
            return Exponential(self.lam), None
        raise ValueError(f"unknown distribution {self.distribution!r}")

    def fit(self, X, y=None):
        g = check_graph(X)
        dist, alpha = self._distribution(g.n)
        shifts = sample_shifts(dist, g.n, self.random_state)
        if self.radius_cap is not None:
            shifts = np.minimum(shifts, check_positive("radius_cap", self.radius_cap, strict=False))
        self.clustering_ = partition(g, shifts, alpha=alpha)
        self.graph_ = g
        self.distribution_ = dist
        self.alpha_ = alpha
        self.labels_ = self.clustering_.center_of
        self.shifts_ = self.clustering_.shifts
        self.radii_ = dict(self.clustering_.radius_of)
        return self

    def stats(self, q_values, audit=False) -> ClusterStats:
        check_is_fitted(self, "clustering_")
        return cluster_stats(self.graph_, self.clustering_, q_values, audit=audit)

    def verify(self) -> ClusteringReport:
        check_is_fitted(self, "clustering_")
        if self.alpha_ is None:
            raise ValueError("guarantee check applies to polynomial-tail shifts only")
        return verify_clustering(self.graph_, self.clustering_, self.alpha_, self.b)
