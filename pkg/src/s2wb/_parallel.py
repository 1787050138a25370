"""Deterministic chunked parallelism.

Work is split into fixed-size chunks with per-chunk RNG substreams derived
from (seed, family, chunk index); chunk results are merged in chunk order,
so the outcome is bit-identical for any worker count.  S2WB_THREADS
overrides the worker flag.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

CHUNK = 4096


def resolve_workers(requested=None) -> int:
    env = os.environ.get("S2WB_THREADS", "").strip()
    if env:
        value = int(env)
    elif requested is None:
        value = 1
    else:
        value = int(requested)
    if value < 1:
        raise ValueError("worker count must be >= 1")
    return value


def chunk_sizes(total: int, chunk: int = CHUNK):
    """[(chunk_index, size), ...] covering `total` samples."""
    out = []
    idx = 0
    left = total
    while left > 0:
        size = min(chunk, left)
        out.append((idx, size))
        idx += 1
        left -= size
    return out


def ordered_map(fn, items, workers: int):
    """Map preserving input order; a thread pool when workers > 1."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
