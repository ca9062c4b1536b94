"""Splitting index ranges over a thread pool.

Kernels are numba ``nogil`` functions writing disjoint output slots, so the
result never depends on how the range is split.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
import os


def default_workers() -> int:
    env = os.environ.get("GAUSSKIN_WORKERS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"GAUSSKIN_WORKERS must be an integer, got {env!r}") from None
        if n < 1:
            raise ValueError("GAUSSKIN_WORKERS must be >= 1")
        return n
    return os.cpu_count() or 1


def run_chunks(fn, n: int, workers: int, chunks_per_worker: int = 4) -> None:
    """Call ``fn(start, end)`` over a partition of ``range(n)``."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if n == 0:
        return
    if workers == 1:
        fn(0, n)
        return
    parts = min(n, workers * chunks_per_worker)
    bounds = [n * k // parts for k in range(parts + 1)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, bounds[k], bounds[k + 1]) for k in range(parts)]
        for f in futures:
            f.result()
