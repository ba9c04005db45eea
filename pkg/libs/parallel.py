"""
Ordered batch execution.

Batches are mapped either in-process or over a process pool; results are
always yielded in task order so reductions over them are deterministic.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterator, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def map_batches(
    fn: Callable[[T], R], tasks: Sequence[T], workers: int = 1
) -> Iterator[R]:
    """
    Apply fn to every task, yielding results in task order.

    fn must be a module-level function when workers > 1 (it is pickled).
    """
    if workers <= 1 or len(tasks) <= 1:
        for task in tasks:
            yield fn(task)
        return

    logger.debug(f"Mapping {len(tasks)} batches over {workers} processes")
    with ProcessPoolExecutor(max_workers=workers) as executor:
        yield from executor.map(fn, tasks)
