"""Ordered worker pool.

Results come back in submission order, so any reduction over them is
independent of the number of workers.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> list[R]:
    """Apply *fn* to every item, in parallel when ``workers > 1``."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    logger.debug("Dispatching %d work items to %d workers", len(items), workers)
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="powerspec-worker") as pool:
        futures = [pool.submit(fn, item) for item in items]
        return [future.result() for future in futures]
