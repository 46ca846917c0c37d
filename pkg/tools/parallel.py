"""
Ordered thread-pool map for per-frame stages.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional, TypeVar

from config.settings import settings

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> list[R]:
    """Apply `fn` to every item; results come back in input order for any thread count."""
    items = list(items)
    workers = max(1, threads if threads is not None else settings.threads)
    if workers == 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
