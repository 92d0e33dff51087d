"""Ordered fan-out of independent per-mode work."""

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count(requested=None) -> int:
    """Worker count from the argument, else ``DIFFUSLS_THREADS`` (0 = auto)."""
    if requested is None:
        raw = os.environ.get("DIFFUSLS_THREADS", "0").strip() or "0"
        try:
            requested = int(raw)
        except ValueError:
            raise ValueError(f"DIFFUSLS_THREADS must be an integer, got {raw!r}") from None
    if requested < 0:
        raise ValueError("thread count must be >= 0")
    if requested == 0:
        requested = os.cpu_count() or 1
    return max(1, requested)


def map_modes(fn, items, threads=None) -> list:
    """``[fn(x) for x in items]``, possibly concurrent, always in input order."""
    items = list(items)
    n = min(thread_count(threads), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
