"""Deterministic chunked execution.

Work is split into fixed-size chunks of path indices; the chunk layout
depends only on the total count, never on the worker pool, and partial
results are combined in chunk-index order with pairwise reduction.  Worker
count therefore affects wall time only.
"""

from concurrent.futures import ProcessPoolExecutor

import numpy as np

__all__ = ["chunk_ranges", "map_chunks", "tree_sum"]


def chunk_ranges(n, chunk):
    return [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]


def map_chunks(fn, n, chunk, workers, *args):
    """fn(lo, hi, *args) per chunk; results returned in chunk order.

    With workers > 1 the function and arguments must be picklable.
    """
    ranges = chunk_ranges(n, chunk)
    if workers <= 1 or len(ranges) == 1:
        return [fn(lo, hi, *args) for lo, hi in ranges]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(fn, lo, hi, *args) for lo, hi in ranges]
        return [f.result() for f in futs]


def tree_sum(arrays):
    """Pairwise-tree sum over a list in fixed order (associativity-stable)."""
    items = list(arrays)
    if not items:
        raise ValueError("nothing to reduce")
    while len(items) > 1:
        nxt = []
        for i in range(0, len(items) - 1, 2):
            nxt.append(items[i] + items[i + 1])
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]
