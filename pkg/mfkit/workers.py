"""
workers.py | mfkit
--------------------------------------------------------------------
Ordered parallel map with a worker cap. Items are independent
(scales, sampling periods, rolling windows); each one is computed
whole by a single worker, so results do not depend on the cap.
"""

import os

from joblib import Parallel, delayed

THREADS_ENV = "MFKIT_THREADS"


def resolve_threads(requested: int = None) -> int:
    """Flag value first, then $MFKIT_THREADS, then 1."""
    if requested is not None and int(requested) > 0:
        return int(requested)
    env = os.environ.get(THREADS_ENV, "").strip()
    if env:
        try:
            value = int(env)
        except ValueError:
            return 1
        return max(1, value)
    return 1


def parallel_map(fn, items, threads: int = 1) -> list:
    """Apply `fn` to every item, returning results in input order."""
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    return Parallel(n_jobs=min(threads, len(items)), prefer="threads")(
        delayed(fn)(item) for item in items
    )
