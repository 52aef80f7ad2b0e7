"""Tiny ordered worker pool honoring the PIAC_WORKERS environment cap."""

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["worker_count", "pmap"]


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("PIAC_WORKERS", "1")))
    except ValueError:
        return 1


def pmap(fn, items):
    """Map preserving input order regardless of completion order."""
    items = list(items)
    w = worker_count()
    if w == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=w) as pool:
        return list(pool.map(fn, items))
