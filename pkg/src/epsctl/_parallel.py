"""Order-preserving parallel map capped by ``EPSCTL_THREADS``."""

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "EPSCTL_THREADS"


def worker_count(requested=None):
    if requested is None:
        try:
            requested = int(os.environ.get(ENV_VAR, "1"))
        except ValueError:
            requested = 1
    return max(1, int(requested))


def ordered_map(fn, items, workers=None):
    items = list(items)
    workers = min(worker_count(workers), max(1, len(items)))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
