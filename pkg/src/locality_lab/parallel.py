"""Order-preserving trial execution bounded by ``LOCALITY_LAB_THREADS``."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

ENV_VAR = "LOCALITY_LAB_THREADS"


def worker_count() -> int:
    """Workers allowed by the environment; 0 (the default) means run in-process."""
    raw = os.environ.get(ENV_VAR, "0").strip() or "0"
    try:
        count = int(raw)
    except ValueError:
        raise ValueError(f"{ENV_VAR} must be a non-negative integer, got {raw!r}") from None
    if count < 0:
        raise ValueError(f"{ENV_VAR} must be a non-negative integer, got {raw!r}")
    return count


def map_trials(fn, items) -> list:
    """``[fn(x) for x in items]``, possibly across processes, always in input order.

    ``fn`` and the items must be picklable when workers are enabled.
    """
    items = list(items)
    workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))
