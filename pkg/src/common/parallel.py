"""Ordered fan-out of independent cells over a bounded thread pool."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

from src.shared import build_thread_cap

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """Apply fn to every item, at most EQUISCORE_THREADS at a time; results keep input order."""
    items = list(items)
    workers = min(threads or build_thread_cap(), max(len(items), 1))
    if workers <= 1:
        return [fn(item) for item in items]
    logger.debug("Running %d cells on %d threads", len(items), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
