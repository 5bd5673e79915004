import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "MPC_TOPO_THREADS"


def max_threads() -> int:
    """Thread cap from ``MPC_TOPO_THREADS``; defaults to the CPU count."""
    raw = os.environ.get(ENV_THREADS)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def ordered_map(fn, items, threads=None):
    """``list(map(fn, items))`` on a thread pool; output order always follows input."""
    items = list(items)
    n = max_threads() if threads is None else max(1, int(threads))
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
