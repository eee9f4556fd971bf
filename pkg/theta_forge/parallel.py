"""Thread count resolution and seeded generators.

Every random stream is a Philox counter-based generator keyed by
``(seed, *key)``, so a stream depends only on its key and never on the
order in which threads pick up work.
"""
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional

import numpy as np

ENV_THREADS = "THETA_FORGE_THREADS"


def resolve_threads(threads: Optional[int] = None) -> int:
    if threads:
        return max(1, int(threads))
    env = os.environ.get(ENV_THREADS, "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {env!r}")
    return os.cpu_count() or 1


def generator(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), *[int(k) for k in key]])
    return np.random.Generator(np.random.Philox(ss))


def ordered_map(fn: Callable, items: Iterable, threads: Optional[int] = None) -> list:
    """``[fn(x) for x in items]``, spread over a thread pool; output keeps input order."""
    items = list(items)
    n = resolve_threads(threads)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
