"""
Workers module.

Ordered worker pool used for example-level parallelism.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

from tqdm import tqdm

from services.logger import progress_enabled

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(
    fn: Callable[[T], R],
    items: Iterable[T],
    jobs: int = 1,
    desc: str = None,
) -> List[R]:
    """
    Apply fn to every item, returning results in input order.

    Args:
        fn: Function of one item; must not depend on scheduling
        items: Work items
        jobs: Number of worker threads (1 runs inline)
        desc: Optional progress bar label

    Returns:
        List of results aligned with items
    """
    items = list(items)
    show = desc is not None and progress_enabled() and len(items) > 1
    if jobs <= 1:
        return [fn(item) for item in tqdm(items, desc=desc, disable=not show, leave=False)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = pool.map(fn, items)
        return list(tqdm(results, total=len(items), desc=desc, disable=not show, leave=False))
