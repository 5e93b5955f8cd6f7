"""Counter-based random streams and the replica map.

Every random draw in the package comes from a Philox generator keyed by
``(seed, *key)``. Replica ``r`` of a Monte Carlo run always uses the key
``(r, ...)``, so results do not depend on how replicas are scheduled.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Callable, TypeVar

import numpy as np

T = TypeVar("T")

SEED_MASK = (1 << 64) - 1


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the substream ``key`` of the master ``seed``."""
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def _run_chunk(fn, indices):
    return [fn(i) for i in indices]


def replica_map(fn: Callable[[int], T], n: int, threads: int = 1) -> list[T]:
    """Evaluate ``fn(0), ..., fn(n - 1)`` and return the results in index order.

    ``fn`` must be picklable when ``threads > 1`` (a module-level function or a
    ``functools.partial`` of one). Workers are processes; the output is
    identical for any worker count because each replica derives its own stream.
    """
    if n <= 0:
        return []
    threads = max(1, int(threads))
    if threads == 1 or n == 1:
        return [fn(i) for i in range(n)]
    chunks = np.array_split(np.arange(n), min(n, threads * 4))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        parts = pool.map(partial(_run_chunk, fn), [c.tolist() for c in chunks])
        out: list[T] = []
        for part in parts:
            out.extend(part)
    return out


def default_threads() -> int:
    return max(1, os.cpu_count() or 1)
