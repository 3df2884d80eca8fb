"""Worker-count policy for the embarrassingly parallel stages (dataset
generation, per-patch inference, per-shape evaluation).

PUMFA_THREADS caps the pool; default is 1 so results are easy to reason
about and BLAS keeps the cores busy on its own.
"""

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count():
    raw = os.environ.get("PUMFA_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"PUMFA_THREADS must be an integer, got {raw!r}")
    return max(1, n)


def ordered_map(fn, items):
    """Map preserving input order, threaded only when it can help."""
    items = list(items)
    workers = thread_count()
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
