"""
Small shared helpers: size checks, seed streams and the worker pool.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Sequence, TypeVar

import numpy as np

from .constants import KAWLAB_THREADS_ENV, TRIAL_BLOCK
from .errors import SizeError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def require_power_of_two(n: int, what: str = "length") -> int:
    if not is_power_of_two(n):
        raise SizeError(f"{what} must be a power of two, got {n}")
    return int(n)


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Generator for trial block `block`; independent of worker count."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def trial_blocks(trials: int, block_size: int = TRIAL_BLOCK) -> List[range]:
    """Split `trials` into consecutive fixed-size blocks."""
    return [range(start, min(start + block_size, trials)) for start in range(0, trials, block_size)]


def worker_count() -> int:
    """Worker cap from KAWLAB_THREADS (default 1)."""
    raw = os.environ.get(KAWLAB_THREADS_ENV, "1")
    try:
        value = int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {KAWLAB_THREADS_ENV}={raw!r}")
        return 1
    return max(1, value)


def parallel_map(fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
    """Order-preserving map over a thread pool capped by worker_count()."""
    workers = min(worker_count(), max(1, len(items)))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def as_complex_vector(x: Iterable, name: str = "vector") -> np.ndarray:
    arr = np.asarray(x, dtype=complex)
    if arr.ndim != 1 or arr.size == 0:
        raise SizeError(f"{name} must be a nonempty 1-D array, got shape {arr.shape}")
    return arr


def real_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Real inner product of complex vectors viewed in R^{2n}."""
    return float(np.real(np.vdot(a, b)))
