"""Fork-join helpers over a shared thread pool.

Compiled kernels release the GIL, so running them from several threads
gives real parallelism.  Only the outermost fork fans out to the pool;
calls made from inside a worker run inline, which keeps nested
divide-and-conquer free of pool deadlocks.

The worker count comes from :func:`set_num_threads`, else the
``PKD_THREADS`` environment variable, else ``os.cpu_count()``.
"""

from __future__ import annotations

import contextlib
import os
import threading
from concurrent.futures import ThreadPoolExecutor

_lock = threading.Lock()
_local = threading.local()
_pool: ThreadPoolExecutor | None = None
_pool_size = 0
_threads: int | None = None


def default_threads() -> int:
    env = os.environ.get("PKD_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"PKD_THREADS must be a positive integer, got {env!r}") from None
        if value >= 1:
            return value
    return os.cpu_count() or 1


def get_num_threads() -> int:
    return _threads if _threads is not None else default_threads()


def set_num_threads(n: int | None) -> None:
    """Bound the number of workers; ``None`` restores the default."""
    global _threads
    if n is not None and n < 1:
        raise ValueError("thread count must be >= 1")
    _threads = n


@contextlib.contextmanager
def num_threads(n: int | None):
    old = _threads
    set_num_threads(n)
    try:
        yield
    finally:
        set_num_threads(old)


def _get_pool(size: int) -> ThreadPoolExecutor:
    global _pool, _pool_size
    with _lock:
        if _pool is None or _pool_size != size:
            if _pool is not None:
                _pool.shutdown(wait=True)
            _pool = ThreadPoolExecutor(max_workers=size, thread_name_prefix="pkd")
            _pool_size = size
        return _pool


def in_worker() -> bool:
    return getattr(_local, "worker", False)


def _run_marked(fn, item):
    _local.worker = True
    try:
        return fn(item)
    finally:
        _local.worker = False


def parallel_map(fn, items, *, work: int | None = None, cutoff: int = 0) -> list:
    """``[fn(x) for x in items]``, fanned out when worthwhile.

    Runs inline when there is one thread, fewer than two items, ``work``
    is below ``cutoff``, or the caller is itself a pool worker.  Results
    keep the order of ``items``.
    """
    items = list(items)
    threads = get_num_threads()
    if (
        threads <= 1
        or len(items) < 2
        or in_worker()
        or (work is not None and work < cutoff)
    ):
        return [fn(x) for x in items]
    pool = _get_pool(threads)
    futures = [pool.submit(_run_marked, fn, x) for x in items]
    return [f.result() for f in futures]


def split_range(n: int, parts: int) -> list[tuple[int, int]]:
    """Split ``range(n)`` into at most ``parts`` contiguous non-empty pieces."""
    parts = max(1, min(parts, n))
    step, extra = divmod(n, parts)
    out, start = [], 0
    for i in range(parts):
        stop = start + step + (1 if i < extra else 0)
        out.append((start, stop))
        start = stop
    return out
