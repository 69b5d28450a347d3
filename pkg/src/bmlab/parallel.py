"""Deterministic worker-pool helpers.

Parallelism in this package is always "map over an ordered list, reduce
in list order": results are collected by input index, so reports are
byte-identical for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from threading import Lock

WORKERS_ENV = "BM_LAB_WORKERS"


def resolve_workers(requested=None) -> int:
    """Worker count: explicit request, else the env var, else the CPUs."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def parallel_map(fn, items, workers: int = 1) -> list:
    """Map preserving input order; the reduction order never depends on
    scheduling."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


class InsertOnceCache:
    """Thread-safe value cache; a key's first computed value wins."""

    def __init__(self):
        self._data: dict = {}
        self._lock = Lock()

    def get_or_compute(self, key, compute):
        hit = self._data.get(key)
        if hit is not None:
            return hit
        value = compute()
        with self._lock:
            return self._data.setdefault(key, value)

    def clear(self):
        with self._lock:
            self._data.clear()

    def __len__(self):
        return len(self._data)
