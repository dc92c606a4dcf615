import numpy as np
import pytest
import scipy.sparse as sp

from locality_lab.generators import path
from locality_lab.graph import GraphError
from locality_lab.parallel import map_trials, worker_count
from locality_lab.utils.validation import check_graph, check_positive, check_seed


def test_check_seed_variants():
    assert check_seed(5).random() == np.random.default_rng(5).random()
    g = np.random.default_rng(1)
    assert check_seed(g) is g
    assert isinstance(check_seed(None), np.random.Generator)
    assert isinstance(check_seed(np.random.SeedSequence(3)), np.random.Generator)
    check_seed(2**64 - 1)
    with pytest.raises(ValueError):
        check_seed(-1)
    with pytest.raises(ValueError):
        check_seed(2**64)
    with pytest.raises(TypeError):
        check_seed("7")
    with pytest.raises(TypeError):
        check_seed(True)


def test_check_graph_inputs():
    A = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    assert check_graph(A) == path(3)
    assert check_graph(sp.csr_matrix(A)) == path(3)
    assert check_graph(A, sample_weight=[1, 2, 3]).node_weights == (1.0, 2.0, 3.0)
    with pytest.raises(GraphError):
        check_graph(np.array([[0, 1], [0, 0]]))
    with pytest.raises(GraphError):
        check_graph(np.eye(2))
    with pytest.raises(GraphError):
        check_graph(np.zeros((2, 3)))
    with pytest.raises(GraphError):
        check_graph(path(3), require_weights=True)
    with pytest.raises(TypeError):
        check_graph("path")


def test_check_positive():
    assert check_positive("x", 2.0) == 2.0
    assert check_positive("x", 0.0, strict=False) == 0.0
    for bad in (0.0, -1.0, float("nan"), float("inf"), None):
        with pytest.raises(ValueError):
            check_positive("x", bad)
    with pytest.raises(ValueError):
        check_positive("x", 3.0, upper=3.0)


def _square(x):
    return x * x


def test_map_trials_order(monkeypatch):
    monkeypatch.setenv("LOCALITY_LAB_THREADS", "3")
    assert worker_count() == 3
    assert map_trials(_square, range(20)) == [x * x for x in range(20)]
    monkeypatch.setenv("LOCALITY_LAB_THREADS", "-1")
    with pytest.raises(ValueError):
        worker_count()
    monkeypatch.delenv("LOCALITY_LAB_THREADS")
    assert worker_count() == 0
