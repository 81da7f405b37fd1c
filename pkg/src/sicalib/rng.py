"""Counter-based random substreams and a replicate-group executor.

Replicates are processed in fixed-size groups; group ``g`` of stream ``tag``
draws from ``Philox(SeedSequence(seed, spawn_key=(tag, g)))``. The group
size depends only on the work per replicate, never on the worker count, so
results are identical for any number of threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

__all__ = ["MAX_SEED", "substream", "group_size", "group_bounds", "run_groups", "fresh_seed"]

MAX_SEED = 2**64 - 1
_GROUP_BUDGET = 2**21
_MAX_GROUP = 4096

T = TypeVar("T")


def substream(seed: int, tag: int, index: int) -> np.random.Generator:
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(tag, index))))


def fresh_seed() -> int:
    """Draw a master seed from OS entropy."""
    return int(np.random.SeedSequence().generate_state(1, np.uint64)[0])


def group_size(points_per_replicate: int) -> int:
    return int(np.clip(_GROUP_BUDGET // max(int(points_per_replicate), 1), 1, _MAX_GROUP))


def group_bounds(n_items: int, size: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + size, n_items)) for lo in range(0, n_items, size)]


def run_groups(
    fn: Callable[[np.random.Generator, int], T],
    n_items: int,
    points_per_replicate: int,
    seed: int,
    tag: int = 0,
    threads: int = 1,
) -> list[T]:
    """Call ``fn(rng, count)`` once per replicate group; results come back in group order."""
    bounds = group_bounds(n_items, group_size(points_per_replicate))
    tasks: Sequence = [(g, hi - lo) for g, (lo, hi) in enumerate(bounds)]
    work = lambda task: fn(substream(seed, tag, task[0]), task[1])
    if threads <= 1 or len(tasks) <= 1:
        return [work(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, tasks))
