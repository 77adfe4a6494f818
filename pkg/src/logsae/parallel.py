"""Deterministic map over independent tasks.

Results are gathered in task order and reduced sequentially by the caller,
so the output is identical for any worker count.  The default worker count
comes from the ``LOGSAE_WORKERS`` environment variable (1 if unset).
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

ENV_WORKERS = "LOGSAE_WORKERS"


def resolve_workers(n_workers: int | None = None) -> int:
    if n_workers is None:
        raw = os.environ.get(ENV_WORKERS, "").strip()
        if not raw:
            return 1
        source = f"{ENV_WORKERS}"
        try:
            n_workers = int(raw)
        except ValueError:
            raise ValueError(f"{source} must be an integer, got {raw!r}") from None
    else:
        source = "n_workers"
        n_workers = int(n_workers)
    if n_workers < 1:
        raise ValueError(f"{source} must be >= 1, got {n_workers}")
    return n_workers


def ordered_map(fn, items, n_workers: int = 1) -> list:
    """Apply ``fn`` to every item, returning results in item order.

    ``fn`` and the items must be picklable when ``n_workers > 1``.
    """
    items = list(items)
    if n_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    chunk = max(1, len(items) // (n_workers * 4))
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))
