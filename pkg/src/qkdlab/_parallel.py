import os
from concurrent.futures import ThreadPoolExecutor


def max_threads() -> int:
    """Thread cap from ``QKDLAB_THREADS`` (default: CPU count)."""
    raw = os.environ.get("QKDLAB_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def pmap(fn, items):
    """Order-preserving map, threaded when more than one thread is allowed."""
    items = list(items)
    n = min(max_threads(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
