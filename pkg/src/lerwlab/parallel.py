"""Deterministic fan-out over trial chunks."""

from concurrent.futures import ThreadPoolExecutor

_threads = 1


def set_threads(n):
    global _threads
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _threads = int(n)


def get_threads():
    return _threads


def map_ordered(fn, items, threads=None):
    """``[fn(x) for x in items]``, possibly on a thread pool.

    Results always come back in input order, so reductions over them do not
    depend on scheduling.
    """
    items = list(items)
    threads = _threads if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
