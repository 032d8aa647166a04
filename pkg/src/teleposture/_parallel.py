"""Order-preserving parallel map used wherever work items are independent."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def resolve_threads(threads: int | None) -> int:
    if threads is None or threads <= 0:
        return os.cpu_count() or 1
    return int(threads)


def parallel_map(fn, items, threads: int | None = 1) -> list:
    """``[fn(x) for x in items]``; results are assembled in input order regardless of thread count."""
    items = list(items)
    n = min(resolve_threads(threads), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
