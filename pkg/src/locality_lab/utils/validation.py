"""Input checks shared by the estimators and the functional API."""

from __future__ import annotations

import numbers

import numpy as np
import scipy.sparse as sp

from ..graph import Graph, GraphError


def check_seed(seed) -> np.random.Generator:
    """Turn ``None``, an int, a SeedSequence or a Generator into a Generator.

    Ints must fit in 64 unsigned bits; the same int always yields the same stream.
    """
    if seed is None:
        return np.random.default_rng()
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    if isinstance(seed, numbers.Integral) and not isinstance(seed, bool):
        if not 0 <= int(seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        return np.random.default_rng(int(seed))
    raise TypeError(f"cannot seed a generator from {seed!r}")


def check_graph(X, sample_weight=None, require_weights: bool = False) -> Graph:
    """Accept a :class:`Graph` or a symmetric 0/1 adjacency matrix (dense or sparse).

    ``sample_weight`` overrides node weights; with ``require_weights`` a graph
    without weights is rejected.
    """
    if isinstance(X, Graph):
        g = X
    elif sp.issparse(X) or isinstance(X, (np.ndarray, list)):
        A = sp.csr_matrix(X)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise GraphError(f"adjacency matrix must be square, got shape {A.shape}")
        if A.diagonal().any():
            raise GraphError("adjacency matrix has self-loops")
        if (A != A.T).nnz:
            raise GraphError("adjacency matrix must be symmetric")
        coo = sp.triu(A, k=1).tocoo()
        g = Graph.from_edges(A.shape[0], zip(coo.row.tolist(), coo.col.tolist()))
    else:
        raise TypeError(f"expected a Graph or adjacency matrix, got {type(X).__name__}")

    if sample_weight is not None:
        w = np.asarray(sample_weight, dtype=float).ravel()
        g = g.with_weights(w.tolist())
    if require_weights and g.node_weights is None:
        raise GraphError("node weights are required (pass sample_weight or a weighted graph)")
    return g


def check_positive(name: str, value, *, strict: bool = True, upper=None):
    if value is None or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite number, got {value!r}")
    if (strict and value <= 0) or (not strict and value < 0):
        raise ValueError(f"{name} must be {'>' if strict else '>='} 0, got {value}")
    if upper is not None and value >= upper:
        raise ValueError(f"{name} must be < {upper}, got {value}")
    return value
