"""
Deterministic parallel map with ordered reduction.
"""

from concurrent.futures import ThreadPoolExecutor
from itertools import islice
from typing import Callable, Iterable, Optional, TypeVar

from config.settings import settings
from src.utils.logging_config import logger

T = TypeVar("T")
R = TypeVar("R")
A = TypeVar("A")


def ordered_map_reduce(
    fn: Callable[[T], R],
    items: Iterable[T],
    reduce: Callable[[A, R], A],
    initial: A,
    workers: Optional[int] = None
) -> A:
    """
    Map `fn` over `items` on a thread pool and fold the results left to right.

    Results are consumed in input order, so the reduction is bit-identical
    for any worker count.

    Args:
        fn: Pure function applied to each item
        items: Work items
        reduce: Accumulator update (acc, result) -> acc
        initial: Starting accumulator
        workers: Thread count (defaults to settings.workers)

    Returns:
        Final accumulator
    """
    workers = workers or settings.workers
    acc = initial

    if workers == 1:
        for item in items:
            acc = reduce(acc, fn(item))
        return acc

    # Bounded batches keep at most a few results per worker alive
    batch_size = workers * 4
    iterator = iter(items)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        try:
            while True:
                batch = list(islice(iterator, batch_size))
                if not batch:
                    break
                for result in pool.map(fn, batch):
                    acc = reduce(acc, result)
        except Exception as e:
            logger.error(f"Parallel map failed: {e}")
            raise

    return acc
