# srise/core/pool.py
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

import psutil
from tqdm import tqdm

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_workers(workers: int) -> int:
    """0 means one worker per physical core."""
    if workers < 0:
        raise ValueError(f"workers must be >= 0, got {workers}")
    if workers == 0:
        return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1
    return workers


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 1,
                desc: str = "", progress: bool = False) -> List[R]:
    """Apply ``fn`` to every item; results come back in input order."""
    items = list(items)
    workers = resolve_workers(workers)
    bar = tqdm(total=len(items), desc=desc, disable=not progress)
    try:
        if workers == 1 or len(items) < 2:
            results = []
            for item in items:
                results.append(fn(item))
                bar.update()
            return results

        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = []
            for result in executor.map(fn, items):
                results.append(result)
                bar.update()
            return results
    finally:
        bar.close()
