"""Deterministic block-parallel execution.

Work is partitioned into fixed-size blocks that do not depend on the worker
count, and results are consumed in block order. Together with single-threaded
BLAS (enforced by callers via threadpoolctl) this makes every reduction
bitwise reproducible regardless of ``MVGHASH_THREADS``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV_VAR = "MVGHASH_THREADS"


def thread_count(requested: int | None = None) -> int:
    """Worker thread cap: explicit argument, else MVGHASH_THREADS (0 = auto)."""
    if requested is None:
        raw = os.environ.get(THREADS_ENV_VAR, "0")
        try:
            requested = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from None
    if requested < 0:
        raise ValueError(f"thread count must be >= 0, got {requested}")
    if requested == 0:
        return os.cpu_count() or 1
    return requested


def block_ranges(n: int, block: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + block, n)) for lo in range(0, n, block)]


def map_blocks(fn, n: int, block: int, threads: int | None = None):
    """Yield fn((lo, hi)) for each block of range(n), always in block order."""
    spans = block_ranges(n, block)
    workers = min(thread_count(threads), len(spans))
    if workers <= 1:
        for span in spans:
            yield fn(span)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(fn, spans)
