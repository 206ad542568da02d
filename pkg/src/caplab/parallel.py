"""Sample-level thread mapping.

Work items are always independent and pure, and results are assembled in
input order, so the thread count can never change a result; it only changes
wall-clock. numpy releases the GIL inside BLAS, which is where the time goes.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: int) -> int:
    """Map the user-facing thread count to a worker count (0 means auto)."""
    threads = int(threads)
    if threads < 0:
        raise ValueError("threads must be >= 0")
    if threads == 0:
        return os.cpu_count() or 1
    return threads


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: int = 1) -> list[R]:
    """map() preserving order; runs on a thread pool when threads > 1."""
    workers = resolve_threads(threads)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
