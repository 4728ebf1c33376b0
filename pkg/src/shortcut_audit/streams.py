"""
Seeded random streams and order-preserving parallel execution.

Every random draw in the package comes from a generator derived from
(seed, *key) so results do not depend on scheduling or thread count.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar

import numpy as np
from tqdm import tqdm

from .exceptions import InputValidationError

logger = logging.getLogger(__name__)

THREADS_ENV_VAR = "SHORTCUT_AUDIT_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def stream(seed: int, *key: int) -> np.random.Generator:
    """
    Get the generator for one unit of work.

    Args:
        seed: Run seed (non-negative)
        key: Counters identifying the unit (replicate, cell, repetition, ...)

    Returns:
        A PCG64 generator independent of every other (seed, key) pair
    """
    if seed < 0 or any(k < 0 for k in key):
        raise InputValidationError(f"seed and stream keys must be non-negative, got seed={seed} key={key}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def resolve_threads(requested: Optional[int] = None) -> int:
    """Apply the SHORTCUT_AUDIT_THREADS cap to a requested worker count."""
    raw = os.getenv(THREADS_ENV_VAR)
    threads = requested if requested is not None else 1
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise InputValidationError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}")
        threads = min(threads, cap) if requested is not None else cap
    return max(1, threads)


def ordered_map(
    func: Callable[[T], R],
    items: Sequence[T],
    threads: int = 1,
    progress: bool = False,
    desc: Optional[str] = None,
) -> List[R]:
    """
    Map func over items, returning results in input order.

    Args:
        func: Pure function of one item
        items: Work items
        threads: Worker threads (1 runs inline)
        progress: Show a tqdm progress bar
        desc: Progress bar label
    """
    threads = resolve_threads(threads)
    bar = tqdm(total=len(items), desc=desc, disable=not progress, leave=False)
    try:
        if threads == 1 or len(items) < 2:
            results = []
            for item in items:
                results.append(func(item))
                bar.update(1)
            return results

        results: List[R] = [None] * len(items)  # type: ignore[list-item]

        def run(index: int) -> None:
            results[index] = func(items[index])

        with ThreadPoolExecutor(max_workers=threads) as pool:
            for _ in pool.map(run, range(len(items))):
                bar.update(1)
        return results
    finally:
        bar.close()


def chunked(indices: Iterable[int], size: int) -> List[List[int]]:
    """Split a range of indices into contiguous chunks."""
    indices = list(indices)
    return [indices[i:i + size] for i in range(0, len(indices), size)]
