import math

import numpy as np
import pytest
from scipy import integrate, stats
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from locality_lab.decomposition import (
    Clustering,
    Exponential,
    PolyTail,
    ShiftedPartition,
    cluster_stats,
    default_alpha,
    moment_estimate,
    moment_exponent,
    parse_distribution,
    partition,
    radius_tail_bound,
    sample_shifts,
    tail_ratio_sup,
    verify_clustering,
    window_counts,
)
from locality_lab.generators import complete, erdos_renyi, path, star
from locality_lab.graph import Graph

from conftest import bfs_distances, random_graph


# ----------------------------------------------------------- distributions


def test_poly_tail_inverse_at_three_quarters():
    assert PolyTail(1).inverse_cdf(0.75) == pytest.approx(3.0, rel=1e-15)


def test_poly_tail_inverse_near_zero():
    for alpha in (0.5, 2.0, 9.0):
        assert PolyTail(alpha).inverse_cdf(1e-14) == pytest.approx(0.0, abs=1e-12)


def test_exponential_inverse():
    assert Exponential(1).inverse_cdf(1 - math.exp(-2)) == pytest.approx(2.0, rel=1e-12)


@pytest.mark.parametrize("dist", [PolyTail(0.7), PolyTail(4), Exponential(0.5), Exponential(3)])
def test_distribution_shape(dist):
    xs = np.linspace(0, 50, 501)
    F = dist.cdf(xs)
    assert F[0] == 0.0
    assert np.all(np.diff(F) >= 0)
    assert dist.cdf(1e12) == pytest.approx(1.0)
    assert np.allclose(dist.tail(xs), 1 - F)
    for x in (0.3, 2.0, 7.5):
        area, _ = integrate.quad(dist.pdf, 0, x)
        assert area == pytest.approx(float(dist.cdf(x)), rel=1e-9)
        # via the tail: 1 - F(x) loses digits once F(x) is close to 1
        assert dist.tail_inverse(float(dist.tail(x))) == pytest.approx(x, rel=1e-12)
    assert dist.inverse_cdf(dist.cdf(0.3)) == pytest.approx(0.3, rel=1e-9)


def test_parse_distribution():
    assert parse_distribution("poly:4") == PolyTail(4)
    assert parse_distribution("exp:1.5") == Exponential(1.5)
    for bad in ("poly:-1", "poly", "gauss:1", "exp:x", "poly:0"):
        with pytest.raises(ValueError):
            parse_distribution(bad)


def test_default_alpha_uses_natural_logs():
    assert default_alpha(500, 4) == pytest.approx(4 * math.log(500) / math.log(math.log(500)))


def test_poly_tail_samples_follow_cdf():
    dist = PolyTail(3.0)
    sample = sample_shifts(dist, 100_000, seed=7)
    assert stats.kstest(sample, dist.cdf).statistic < 0.02


def test_sample_shifts_deterministic_and_nonnegative():
    a = sample_shifts(PolyTail(2), 1000, seed=3)
    assert np.array_equal(a, sample_shifts(PolyTail(2), 1000, seed=3))
    assert (a >= 0).all()
    assert len(sample_shifts(PolyTail(2), 0, seed=3)) == 0


# ------------------------------------------------------------- partition


def test_partition_path_example():
    c = partition(path(3), [2.0, 0.5, 0.1])
    assert c.center_of.tolist() == [0, 0, 2]
    assert c.radius_of == {0: 1, 2: 0}
    assert c.cluster_members == {0: [0, 1], 2: [2]}
    assert c.round_bound == 2


def test_zero_shifts_give_singletons(rng):
    g = random_graph(rng, 9, 0.5)
    c = partition(g, [0.0] * 9)
    assert c.center_of.tolist() == list(range(9))
    assert set(c.radius_of.values()) == {0}


def test_single_node_one_cluster():
    c = partition(Graph.from_edges(1, []), [5.5])
    assert c.centers == [0] and c.radius_of == {0: 0}


def test_partition_rejects_bad_shifts():
    with pytest.raises(ValueError):
        partition(path(3), [1.0, -0.1, 0.0])
    with pytest.raises(ValueError):
        partition(path(3), [1.0, 0.0])
    with pytest.raises(ValueError):
        partition(path(3), [1.0, math.nan, 0.0])


def _brute(g, shifts):
    D = [bfs_distances(g, u) for u in range(g.n)]
    out = []
    for v in range(g.n):
        vals = [(shifts[u] - D[u][v], -u) for u in range(g.n) if D[u][v] < math.inf]
        out.append(-max(vals)[1])
    return out


def test_partition_matches_brute_force_argmax(rng):
    for i in range(1000):
        n = int(rng.integers(1, 13))
        g = random_graph(rng, n, float(rng.uniform(0.05, 0.8)))
        if i % 3 == 0:
            shifts = rng.integers(0, 4, n).astype(float)
        else:
            shifts = sample_shifts(PolyTail(float(rng.uniform(1, 6))), n, rng)
        c = partition(g, shifts)
        assert c.center_of.tolist() == _brute(g, list(shifts))


def test_radius_never_exceeds_center_shift(rng):
    for _ in range(200):
        g = random_graph(rng, 15, 0.2)
        c = partition(g, sample_shifts(PolyTail(1.5), 15, rng))
        for center, r in c.radius_of.items():
            assert r <= c.shifts[center]
        for v in range(15):
            assert bfs_distances(g, int(c.center_of[v]))[v] == c.dist_to_center[v]


def test_clustering_json_round_trip():
    g = erdos_renyi(20, 0.2, seed=4)
    c = partition(g, sample_shifts(PolyTail(2), 20, seed=4))
    doc = c.to_json()
    back = Clustering.from_json(g, doc)
    assert back.to_json() == doc
    assert set(c.to_dict()) == {"shifts", "center_of", "radii"}
    tampered = c.to_dict()
    tampered["center_of"] = [0] * 20
    import json

    with pytest.raises(ValueError):
        Clustering.from_json(g, json.dumps(tampered))


# ------------------------------------------------------- closed-form bounds


def test_radius_tail_bound_examples():
    assert radius_tail_bound(PolyTail(3), 10) == pytest.approx(9.0, rel=1e-12)
    assert radius_tail_bound(Exponential(1), math.e) == pytest.approx(3.0, rel=1e-12)
    n, t = 1000, 5.0
    assert radius_tail_bound(PolyTail(3 * math.log(n) / math.log(t)), n) == pytest.approx(t - 1, rel=1e-12)
    for dist, n in ((PolyTail(2.5), 40), (Exponential(0.3), 17)):
        assert dist.tail(radius_tail_bound(dist, n)) == pytest.approx(n**-3.0, rel=1e-9)
    with pytest.raises(ValueError):
        radius_tail_bound(PolyTail(3), 1)


def test_tail_ratio_sup_examples():
    assert tail_ratio_sup(PolyTail(1), 0) == pytest.approx(2.0, rel=1e-15)
    assert tail_ratio_sup(PolyTail(2), 1) == pytest.approx(3.0, rel=1e-15)
    assert tail_ratio_sup(Exponential(0), 0) == 0.0
    with pytest.raises(ValueError):
        tail_ratio_sup(PolyTail(2), 0, window=3)


@pytest.mark.parametrize("dist", [PolyTail(0.5), PolyTail(1), PolyTail(4), PolyTail(12), Exponential(0.2), Exponential(2)])
@pytest.mark.parametrize("q", [0.0, 0.5, 1.0, 3.0, 10.0])
def test_tail_ratio_sup_matches_grid(dist, q):
    xs = np.linspace(q, q + 100, 200_001)
    numeric = float(np.max(dist.tail(xs) / dist.tail(xs + 2) - 1))
    assert tail_ratio_sup(dist, q) == pytest.approx(numeric, rel=1e-9)


def test_moment_exponent_examples():
    assert moment_exponent(1e-300, 0).gamma == pytest.approx(1 / 6, rel=1e-12)
    me = moment_exponent(5, 0)
    assert me.gamma == pytest.approx(math.exp(-10) / 6, rel=1e-15)
    lhs = math.expm1(math.exp(-10) / 6)
    rhs = (1 - 2**-5) / (2 * (3**5 - 1))
    assert me.lhs == pytest.approx(lhs, rel=1e-12)
    assert me.rhs == pytest.approx(rhs, rel=1e-12)
    assert me.premise_holds == (lhs <= rhs)


# ---------------------------------------------------------------- stats


def test_cluster_stats_singletons_on_triangle():
    c = partition(complete(3), [0.0, 0.0, 0.0])
    s = cluster_stats(complete(3), c, [0, 1])
    assert s.counts[:, 0].tolist() == [2, 2, 2]
    assert s.counts[:, 1].tolist() == [0, 0, 0]


def test_cluster_stats_path_example():
    g = path(3)
    c = partition(g, [2.0, 0.5, 0.1])
    s = cluster_stats(g, c, [0])
    assert s.counts[1, 0] == 1
    assert s.n_clusters == 2 and s.max_radius == 1
    assert s.size_histogram == {1: 1, 2: 1}
    assert list(s.rows())[0] == (0, 0, int(s.counts[0, 0]))


def test_cluster_stats_monotone_and_bounded(rng):
    for _ in range(50):
        g = random_graph(rng, 14, 0.3)
        c = partition(g, sample_shifts(PolyTail(1.2), 14, rng))
        s = cluster_stats(g, c, [0, 1, 2, 3])
        assert (np.diff(s.counts, axis=1) <= 0).all()
        for v in range(g.n):
            foreign = {int(c.center_of[y]) for y in g.adjacency[v]} - {int(c.center_of[v])}
            assert s.counts[v, 0] == len(foreign)


def test_window_counts_audit_flag():
    g = erdos_renyi(15, 0.3, seed=2)
    c = partition(g, sample_shifts(PolyTail(2), 15, seed=2))
    s = cluster_stats(g, c, [0, 1], audit=True)
    assert s.window_counts.shape == (15, 2)
    assert np.array_equal(s.window_counts, window_counts(g, c, [0, 1]))
    assert (np.diff(s.window_counts, axis=1) <= 0).all()


def test_verify_clustering_trivial_cases():
    g = complete(5)
    assert verify_clustering(g, partition(g, [0.0] * 5), alpha=3).ok
    one = Graph.from_edges(1, [])
    assert verify_clustering(one, partition(one, [0.3]), alpha=3).ok


def test_verify_clustering_flags_excess_counts():
    g = star(6)
    c = partition(g, [0.0] * 6)
    report = verify_clustering(g, c, alpha=0.3)  # bound exp(0.9) < 5 foreign neighbours at the center
    assert (0, 0, 5) in report.violations and not report.ok


def test_moment_estimate_trivial_cases():
    assert moment_estimate(erdos_renyi(20, 0.3, seed=1), PolyTail(2), 0, 0.0, 50, seed=1).mean == 1.0
    assert moment_estimate(Graph.from_edges(1, []), PolyTail(2), 0, 0.5, 50, seed=1).mean == 1.0


def test_moment_estimate_on_complete_graph_within_bound():
    gamma = moment_exponent(4, 0).gamma
    est = moment_estimate(complete(8), PolyTail(4), 0, gamma, 10_000, seed=11)
    assert est.mean <= 2 * math.e + 3 * est.stderr
    assert est.max_mean <= 2 * math.e + 3 * est.max_stderr


def test_moment_estimate_agrees_with_direct_simulation():
    g = erdos_renyi(12, 0.3, seed=5)
    dist, q, gamma, trials = PolyTail(1.5), 1, 0.4, 400
    est = moment_estimate(g, dist, q, gamma, trials, seed=8, node=3)
    rng = np.random.default_rng(8)
    vals = []
    for _ in range(trials):
        c = partition(g, dist.inverse_cdf(rng.random(g.n)))
        vals.append(math.exp(gamma * cluster_stats(g, c, [q]).counts[3, 0]))
    assert est.mean == pytest.approx(np.mean(vals), rel=1e-12)


# -------------------------------------------------------------- estimator


def test_shifted_partition_estimator():
    g = erdos_renyi(40, 0.1, seed=1)
    est = ShiftedPartition(alpha=2.0, random_state=5)
    labels = est.fit_predict(g)
    assert labels.shape == (40,)
    again = clone(est).fit(g)
    assert np.array_equal(again.labels_, labels)
    assert est.alpha_ == 2.0
    assert est.get_params()["alpha"] == 2.0
    assert est.stats([0, 1]).counts.shape == (40, 2)
    assert est.verify().n == 40


def test_shifted_partition_accepts_adjacency_matrix():
    A = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    est = ShiftedPartition(random_state=0).fit(A)
    assert est.graph_ == path(3)


def test_shifted_partition_radius_cap_and_exp():
    est = ShiftedPartition(distribution="exp", lam=0.05, radius_cap=1.0, random_state=2).fit(erdos_renyi(30, 0.2, seed=2))
    assert max(est.radii_.values()) <= 1
    with pytest.raises(ValueError):
        est.verify()


def test_shifted_partition_requires_fit():
    with pytest.raises(NotFittedError):
        ShiftedPartition().stats([0])
