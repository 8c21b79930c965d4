import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

import torch

from iscat.common.errors import ConfigError

THREADS_ENV = "ISCAT_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def set_missing_environ(key, value):
    if key not in os.environ:
        os.environ[str(key)] = str(value)


def init_threads(threads: Optional[int] = None, deterministic: bool = False) -> int:
    """Resolves the worker count from the argument or ``ISCAT_THREADS``.

    The resolved value is written back to the environment so that helpers
    called later in the same process agree on it. ``deterministic`` makes
    torch refuse kernels without a reproducible implementation.
    """
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, 1))
    if threads < 1:
        raise ConfigError(f"thread count must be positive, got {threads}")

    os.environ[THREADS_ENV] = str(threads)
    torch.set_num_threads(threads)
    torch.use_deterministic_algorithms(deterministic)
    logging.debug("Using %d worker thread(s), deterministic kernels %s", threads, deterministic)

    return threads


def num_threads() -> int:
    set_missing_environ(THREADS_ENV, 1)
    return max(1, int(os.environ[THREADS_ENV]))


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """Maps ``fn`` over ``items`` and returns results in input order."""
    items = list(items)
    threads = num_threads() if threads is None else threads
    if threads == 1 or len(items) < 2:
        return [fn(x) for x in items]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
