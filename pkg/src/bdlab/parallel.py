"""Deterministic chunked execution for the big enumeration scans.

Enumeration ranges are split into fixed chunks; chunk results are reduced in
chunk order, so the outcome is identical whether chunks run on one thread or
several.  The worker count is capped by the BDLAB_THREADS environment
variable (default 1; the chunk workers are numpy-bound and release the GIL).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    try:
        n = int(os.environ.get("BDLAB_THREADS", "1"))
    except ValueError:
        return 1
    return max(1, n)


def run_chunks(fn, ranges):
    """Apply fn to every (start, stop) range; return results in range order."""
    ranges = list(ranges)
    workers = min(worker_count(), len(ranges)) if ranges else 1
    if workers <= 1:
        return [fn(a, b) for a, b in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, a, b) for a, b in ranges]
        return [f.result() for f in futures]


def chunk_ranges(total: int, chunk: int):
    for start in range(0, total, chunk):
        yield start, min(start + chunk, total)
