"""Worker-count policy shared by the concurrent parts of the package."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

T = TypeVar("T")
R = TypeVar("R")

ENV_VAR = "HARDY_NLS_THREADS"


def worker_count(requested: Optional[int] = None) -> int:
    """``requested`` if given, else ``$HARDY_NLS_THREADS``, else the CPU count; never below 1."""
    if requested is None:
        env = os.environ.get(ENV_VAR, "").strip()
        if env:
            try:
                requested = int(env)
            except ValueError:
                raise ValueError(f"{ENV_VAR} must be an integer, got {env!r}") from None
        else:
            requested = os.cpu_count() or 1
    return max(1, int(requested))


def map_threads(fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """Ordered ``map`` over a thread pool (the integrator releases the GIL)."""
    items = list(items)
    n = min(worker_count(workers), max(1, len(items)))
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
