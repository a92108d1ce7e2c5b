"""Fork-join helpers and the parallel primitives the trees are built from.

Work is split into independent tasks and run on a shared thread pool.  The
compiled kernels release the GIL, so tasks that call into them really run
concurrently.  Nesting is flattened: a task that forks again runs its children
inline, which keeps a bounded pool deadlock-free.
"""

from __future__ import annotations

import functools
import math
import operator
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Sequence, TypeVar

import numba
import numpy as np

T = TypeVar("T")

# Below this many elements every primitive runs serially.
SERIAL_CUTOFF = 1000

_lock = threading.Lock()
_local = threading.local()
_pool: ThreadPoolExecutor | None = None
_threads = os.cpu_count() or 1


def set_num_threads(n: int) -> None:
    """Cap the number of worker threads used by every parallel operation."""
    global _threads, _pool
    if n < 1:
        raise ValueError("thread count must be positive")
    with _lock:
        _threads = n
        if _pool is not None:
            _pool.shutdown(wait=True)
            _pool = None
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def get_num_threads() -> int:
    return _threads


def _get_pool() -> ThreadPoolExecutor:
    global _pool
    with _lock:
        if _pool is None:
            _pool = ThreadPoolExecutor(max_workers=_threads, thread_name_prefix="bdltree")
        return _pool


def _run_in_worker(fn):
    _local.in_worker = True
    try:
        return fn()
    finally:
        _local.in_worker = False


def fork_join(tasks: Sequence[Callable[[], T]]) -> list[T]:
    """Run ``tasks`` concurrently and return their results in order."""
    if len(tasks) <= 1 or _threads == 1 or getattr(_local, "in_worker", False):
        return [t() for t in tasks]
    pool = _get_pool()
    futures = [pool.submit(_run_in_worker, t) for t in tasks[1:]]
    first = tasks[0]()
    return [first] + [f.result() for f in futures]


def _chunks(n: int) -> list[tuple[int, int]]:
    parts = max(1, min(_threads * 4, n // SERIAL_CUTOFF))
    step = math.ceil(n / parts) if n else 1
    return [(lo, min(n, lo + step)) for lo in range(0, n, step)]


def _scan_serial(values, op, acc):
    out = []
    for v in values:
        out.append(acc)
        acc = op(acc, v)
    return out, acc


def prefix_sum(values: Sequence[T], op: Callable[[T, T], T] = operator.add, identity: Any = 0):
    """Exclusive scan of ``values`` under the associative ``op``.

    Returns ``(scan, total)`` where ``scan[i] = identity op v[0] op ... op
    v[i-1]``.  Large inputs are scanned blockwise: block totals are reduced
    in parallel, scanned serially, and then every block is rescanned from its
    offset in parallel.  NumPy ufuncs and arrays stay vectorised.
    """
    is_ufunc = isinstance(op, np.ufunc)
    if isinstance(values, np.ndarray) and is_ufunc:
        n = values.shape[0]
        if n == 0:
            return values[:0].copy(), identity
        blocks = _chunks(n)
        totals = fork_join([functools.partial(op.reduce, values[lo:hi]) for lo, hi in blocks])
        offsets, total = _scan_serial(totals, op, identity)
        out = np.empty_like(values, dtype=np.result_type(values, np.asarray(identity)))

        def scan_block(b):
            lo, hi = blocks[b]
            out[lo] = offsets[b]
            if hi - lo > 1:
                out[lo + 1 : hi] = op(offsets[b], op.accumulate(values[lo : hi - 1]))

        fork_join([functools.partial(scan_block, b) for b in range(len(blocks))])
        return out, total

    values = list(values)
    if len(values) < SERIAL_CUTOFF:
        return _scan_serial(values, op, identity)
    blocks = _chunks(len(values))
    totals = fork_join(
        [functools.partial(functools.reduce, op, values[lo:hi], identity) for lo, hi in blocks]
    )
    offsets, total = _scan_serial(totals, op, identity)
    parts = fork_join(
        [functools.partial(_scan_serial, values[lo:hi], op, offsets[b]) for b, (lo, hi) in enumerate(blocks)]
    )
    return [x for part, _ in parts for x in part], total


def partition(items: Sequence[T], predicate: Callable[[T], bool]) -> tuple[list[T], int]:
    """Reorder ``items`` so those satisfying ``predicate`` come first.

    Flags are evaluated per block in parallel, output offsets come from a
    prefix sum over per-block counts, and blocks scatter independently.
    Relative order inside each group is preserved.
    """
    items = list(items)
    n = len(items)
    blocks = _chunks(n) if n >= SERIAL_CUTOFF else [(0, n)]
    flags = fork_join([lambda lo=lo, hi=hi: [bool(predicate(x)) for x in items[lo:hi]] for lo, hi in blocks])
    counts = [sum(f) for f in flags]
    yes_off, split = prefix_sum(counts)
    no_counts = [(hi - lo) - c for (lo, hi), c in zip(blocks, counts)]
    no_off, _ = prefix_sum(no_counts)
    out: list[Any] = [None] * n

    def scatter(b):
        lo, _ = blocks[b]
        y, m = yes_off[b], split + no_off[b]
        for j, f in enumerate(flags[b]):
            if f:
                out[y] = items[lo + j]
                y += 1
            else:
                out[m] = items[lo + j]
                m += 1

    fork_join([functools.partial(scatter, b) for b in range(len(blocks))])
    return out, split


def median_partition(items: Sequence[T], key: Callable[[T], float] = float) -> tuple[list[T], int]:
    """Split ``items`` around the median key.

    The first ``ceil(n/2)`` items of the result have keys no greater than any
    key after them.  Ties with the median may fall on either side.
    """
    items = list(items)
    n = len(items)
    if n == 0:
        raise ValueError("median_partition needs at least one item")
    keys = np.fromiter((key(x) for x in items), dtype=np.float64, count=n)
    split = (n + 1) // 2
    order = np.argpartition(keys, split - 1)
    return [items[i] for i in order], split


def parallel_sort(values: np.ndarray) -> np.ndarray:
    """Sort a 1-D array by sorting blocks concurrently and merging."""
    values = np.asarray(values)
    n = values.shape[0]
    if n < SERIAL_CUTOFF or _threads == 1:
        return np.sort(values, kind="stable")
    blocks = _chunks(n)
    runs = fork_join([functools.partial(np.sort, values[lo:hi], kind="stable") for lo, hi in blocks])
    while len(runs) > 1:
        pairs = [(runs[i], runs[i + 1]) for i in range(0, len(runs) - 1, 2)]
        merged = fork_join([functools.partial(_merge, a, b) for a, b in pairs])
        if len(runs) % 2:
            merged.append(runs[-1])
        runs = merged
    return runs[0]


def _merge(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.concatenate([a, b])
    out.sort(kind="stable")  # timsort detects the two runs and merges them in linear time
    return out
