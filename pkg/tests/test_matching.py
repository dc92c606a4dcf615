import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.exceptions import ConvergenceWarning

from locality_lab.decomposition import partition
from locality_lab.generators import complete, erdos_renyi, path, random_regular, star
from locality_lab.graph import Graph, line_graph
from locality_lab.matching import (
    CapValidationError,
    ClusterMatching,
    FrameworkMatching,
    MatchingParams,
    approximation_report,
    is_maximal,
    run_baseline_framework,
    run_cluster_matching,
    validate_params,
    verify_matching,
)
from locality_lab.oracles import exact_max_matching

from conftest import random_graph


def _singleton_edge_clustering(g):
    lg = line_graph(g).lg
    return partition(lg, [0.0] * lg.n)


def test_validate_params_edgeless_graph():
    g = Graph.from_edges(4, [])
    assert validate_params(g, MatchingParams(), _singleton_edge_clustering(g)).valid


def test_validate_params_single_edge():
    g = path(2)
    v = validate_params(g, MatchingParams(alpha=40, K=2), _singleton_edge_clustering(g))
    assert v.valid and v.scale == 1.0
    assert v.threshold == pytest.approx(1 / 32)
    assert v.max_initial_sum == pytest.approx(math.exp(-160))


def test_validate_params_dense_small_graph_reports_scale():
    g = complete(6)
    v = validate_params(g, MatchingParams(alpha=0.5, K=2), _singleton_edge_clustering(g))
    assert not v.valid
    assert v.max_initial_sum == pytest.approx(5 * math.exp(-2))
    assert v.scale == pytest.approx((1 / 32) / (5 * math.exp(-2)))
    assert v.scale * v.max_initial_sum == pytest.approx(v.threshold)


def test_unscaled_invalid_caps_raise():
    with pytest.raises(CapValidationError):
        run_cluster_matching(complete(6), MatchingParams(alpha=0.5, scale_caps=False, seed=1))


@pytest.mark.parametrize("kw", [dict(K=1.0), dict(rounds=0), dict(eps=0.0), dict(eps=1.5), dict(alpha=-1.0)])
def test_params_validation(kw):
    with pytest.raises(ValueError):
        MatchingParams(**kw)


def test_no_edges_means_empty_matching():
    res = run_cluster_matching(Graph.from_edges(5, []), MatchingParams(seed=1))
    assert res.matched == [] and res.rounds_used == 0 and res.completed


def test_single_edge_is_matched_at_fixed_point():
    for seed in range(10):
        res = run_cluster_matching(path(2), MatchingParams(seed=seed))
        assert res.completed and res.matched == [(0, 1)]


def test_triangle_matches_exactly_one_edge():
    for seed in range(10):
        res = run_cluster_matching(complete(3), MatchingParams(seed=seed))
        assert res.completed and len(res.matched) == 1


def test_trace_records():
    res = run_cluster_matching(erdos_renyi(15, 0.3, seed=1), MatchingParams(seed=2))
    assert len(res.trace) == res.rounds_used
    keys = {"round", "active_edges", "matched", "cap_sums_max", "weight_sums_max", "violations"}
    assert all(keys <= set(r) for r in res.trace)
    assert [r["round"] for r in res.trace] == list(range(res.rounds_used))
    assert all(r["cap_sums_max"] <= 0.25 / 2 * (1 + 1e-9) for r in res.trace)
    assert all(r["weight_sums_max"] <= 0.25 * (1 + 1e-9) for r in res.trace)


def test_cluster_matching_is_deterministic():
    g = random_regular(30, 3, seed=4)
    a = run_cluster_matching(g, MatchingParams(seed=77)).to_dict()
    b = run_cluster_matching(g, MatchingParams(seed=77)).to_dict()
    assert a == b


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 25), st.floats(0.05, 0.6), st.integers(0, 2**32 - 1), st.sampled_from([1.5, 2.0, 4.0]))
def test_fuzz_matching_invariants(n, p, seed, K):
    g = erdos_renyi(n, p, seed=seed)
    res = run_cluster_matching(g, MatchingParams(K=K, seed=seed, alpha=float(1 + seed % 7)))
    assert verify_matching(g, res.matched)
    assert not any(res.violations.values()), res.violations
    if res.completed:
        assert is_maximal(g, res.matched)


def test_cluster_matching_within_factor_of_optimum(rng):
    for i in range(40):
        g = random_graph(rng, int(rng.integers(2, 10)), 0.4)
        res = run_cluster_matching(g, MatchingParams(eps=1.0, seed=i))
        opt, _ = exact_max_matching(g)
        assert res.completed
        assert approximation_report(g, res.matched, 1.0, opt).passes


def test_baseline_single_edge_success_rate():
    hits = sum(len(run_baseline_framework(path(2), 2.0, rounds=1, seed=s).matched) for s in range(800))
    # one nomination at weight 1/2 with no competitor
    assert abs(hits / 800 - 0.5) <= 4 * math.sqrt(0.25 / 800)


def test_baseline_two_edge_star_first_round():
    # both edges start at 1/(2 * 2); exactly one nominating edge wins: 2 * 1/4 * 3/4
    hits = sum(len(run_baseline_framework(star(3), 2.0, rounds=1, seed=s).matched) for s in range(2000))
    p = 3 / 8
    assert abs(hits / 2000 - p) <= 4 * math.sqrt(p * (1 - p) / 2000)


def test_baseline_empty_and_fuzz(rng):
    assert run_baseline_framework(Graph.from_edges(3, []), 2.0, 100, seed=1).matched == []
    for i in range(30):
        g = random_graph(rng, 12, 0.3)
        res = run_baseline_framework(g, 2.0, 5000, seed=i)
        assert verify_matching(g, res.matched) and not any(res.violations.values())
        if res.completed:
            assert is_maximal(g, res.matched)
    with pytest.raises(ValueError):
        run_baseline_framework(path(3), 1.0, 10)


def test_verify_matching_examples():
    g = path(3)
    assert verify_matching(g, [])
    assert not verify_matching(g, [(0, 1), (1, 2)])
    assert verify_matching(g, [(0, 1)])


def test_approximation_report_examples():
    assert approximation_report(Graph.from_edges(2, []), [], 0.5, 0).passes
    assert approximation_report(path(3), [(0, 1)], 1.0, 1).passes
    r = approximation_report(complete(4), [(0, 1)], 0.5, 2)
    assert r.passes and r.ratio == 0.5
    assert not approximation_report(complete(6), [(0, 1)], 0.5, 3).passes


def test_cluster_matching_estimator():
    g = erdos_renyi(20, 0.25, seed=3)
    est = ClusterMatching(random_state=4)
    mask = est.fit_predict(g)
    assert mask.shape == (g.m,) and mask.sum() == len(est.matching_)
    assert est.converged_
    twin = clone(est).fit(g)
    assert twin.matching_ == est.matching_
    with pytest.warns(ConvergenceWarning):
        ClusterMatching(rounds=1, random_state=0).fit(complete(8))


def test_framework_matching_estimator():
    est = FrameworkMatching(random_state=1).fit(np.ones((4, 4)) - np.eye(4))
    assert verify_matching(est.graph_, est.matching_)
    assert est.get_params()["K"] == 2.0
