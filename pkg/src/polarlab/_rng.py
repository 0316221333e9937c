"""Seeded, scheduling-independent randomness and ordered parallel maps."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

DEFAULT_SEED = 0xC0DE
_MASK = (1 << 64) - 1


def stream(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, index)."""
    return np.random.Generator(np.random.Philox(key=[int(seed) & _MASK, int(index) & _MASK]))


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("POLARLAB_THREADS", "").strip()
        threads = int(env) if env else 1
    return max(1, int(threads))


def ordered_map(fn, items, threads: int | None = None) -> list:
    """map() whose result order never depends on the worker count."""
    items = list(items)
    n = resolve_threads(threads)
    if n == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
