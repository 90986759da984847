"""Deterministic fan-out over replicates.

Work items are processed in chunks by a thread pool (the compiled kernels
release the GIL) and results are reassembled by index, so output never
depends on the worker count.
"""

import os
from concurrent.futures import ThreadPoolExecutor


def default_threads() -> int:
    return int(os.environ.get("RANKGOSSIP_THREADS", "1"))


def map_ordered(fn, items, threads: int | None = None):
    items = list(items)
    threads = default_threads() if threads is None else int(threads)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
