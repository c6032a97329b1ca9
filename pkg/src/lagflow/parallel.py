"""Ordered parallel map capped by the ``LF_THREADS`` environment variable."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def thread_count() -> int:
    """Worker cap from ``LF_THREADS``; 0 or unset means one per CPU."""
    raw = os.environ.get("LF_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"LF_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("LF_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def map_ordered(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """``[fn(x) for x in items]``, possibly computed on several threads.

    Results come back in input order and each item is computed exactly as in
    the sequential loop, so outputs do not depend on the worker count.
    """
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
