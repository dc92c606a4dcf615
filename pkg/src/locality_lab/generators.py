"""Seeded test-instance generators and the ``name:param[:param]`` mini-syntax."""

from __future__ import annotations

import itertools

import numpy as np

from .graph import Graph, GraphError
from .utils.validation import check_seed

__all__ = [
    "empty",
    "path",
    "star",
    "complete",
    "complete_bipartite",
    "erdos_renyi",
    "random_regular",
    "generate",
    "GENERATORS",
]


def empty(n: int) -> Graph:
    _check_n(n)
    return Graph.from_edges(n, [])


def path(n: int) -> Graph:
    _check_n(n)
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star(n: int) -> Graph:
    """Node 0 joined to nodes ``1..n-1``."""
    _check_n(n)
    return Graph.from_edges(n, [(0, i) for i in range(1, n)])


def complete(n: int) -> Graph:
    _check_n(n)
    return Graph.from_edges(n, itertools.combinations(range(n), 2))


def complete_bipartite(a: int, b: int) -> Graph:
    _check_n(a)
    _check_n(b)
    return Graph.from_edges(a + b, [(i, a + j) for i in range(a) for j in range(b)])


def erdos_renyi(n: int, p: float, seed=None) -> Graph:
    _check_n(n)
    if not 0.0 <= p <= 1.0:
        raise GraphError(f"edge probability must lie in [0, 1], got {p}")
    rng = check_seed(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return Graph.from_edges(n, zip(iu[keep].tolist(), ju[keep].tolist()))


def random_regular(n: int, d: int, seed=None, max_tries: int = 10_000) -> Graph:
    """Configuration model; the whole pairing is resampled until it is simple."""
    _check_n(n)
    if d < 0 or (n > 0 and d >= n) or (n * d) % 2:
        raise GraphError(f"no simple {d}-regular graph on {n} nodes")
    rng = check_seed(seed)
    stubs = np.repeat(np.arange(n), d)
    for _ in range(max_tries):
        pairs = rng.permutation(stubs).reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        keys = np.sort(pairs, axis=1)
        if len(np.unique(keys, axis=0)) != len(keys):
            continue
        return Graph.from_edges(n, map(tuple, keys.tolist()))
    raise GraphError(f"configuration model found no simple pairing in {max_tries} tries")


def _check_n(n: int):
    if n < 0:
        raise GraphError(f"node count must be non-negative, got {n}")


# name -> (factory, parameter casts, takes a seed)
GENERATORS = {
    "empty": (empty, (int,), False),
    "path": (path, (int,), False),
    "star": (star, (int,), False),
    "complete": (complete, (int,), False),
    "complete_bipartite": (complete_bipartite, (int, int), False),
    "er": (erdos_renyi, (int, float), True),
    "erdos_renyi": (erdos_renyi, (int, float), True),
    "regular": (random_regular, (int, int), True),
    "random_regular": (random_regular, (int, int), True),
}


def generate(model: str, seed=None) -> Graph:
    """Build a graph from ``"name:param[:param]"``, e.g. ``"er:50:0.3"`` or ``"star:6"``."""
    name, *raw = model.split(":")
    if name not in GENERATORS:
        raise GraphError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}")
    factory, casts, seeded = GENERATORS[name]
    if len(raw) != len(casts):
        raise GraphError(f"generator {name!r} takes {len(casts)} parameter(s), got {len(raw)}")
    try:
        args = [cast(x) for cast, x in zip(casts, raw)]
    except ValueError:
        raise GraphError(f"bad parameters in {model!r}") from None
    return factory(*args, seed=seed) if seeded else factory(*args)
