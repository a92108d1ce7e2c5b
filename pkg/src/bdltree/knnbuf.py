"""Bounded k-nearest candidate buffers.

Each buffer has room for ``2k`` candidates.  Inserts append; when the buffer
fills, a serial quickselect keeps the ``k`` nearest and drops the rest, so an
insert costs amortised O(1).  The stored threshold is the squared distance a
candidate must not exceed to be worth storing: +inf until ``k`` candidates
have been kept, then the largest of the first ``k``, then the exact k-th
smallest after each compaction.  Between compactions it can sit above the
true k-th smallest, which only costs a few extra stored candidates.  Ties are broken by smaller id, which makes results
independent of traversal order.

Buffers for a whole query batch live in flat arrays so compiled search code can
update them directly; :class:`KnnBuffer` is a one-row view for direct use.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _less(da, ia, db, ib):
    return da < db or (da == db and ia < ib)


@njit(cache=True, nogil=True)
def _select_k(ids, d2, r, n, k):
    """Reorder the first ``n`` entries of row ``r`` so the ``k`` smallest (d2, id) come first.

    Rows are indexed in place rather than sliced: views would be refcounted on
    every call, which dominates for small buffers.
    """
    lo = 0
    hi = n - 1
    target = k - 1
    while lo < hi:
        mid = (lo + hi) >> 1
        pd = d2[r, mid]
        pi = ids[r, mid]
        i = lo
        j = hi
        while i <= j:
            while _less(d2[r, i], ids[r, i], pd, pi):
                i += 1
            while _less(pd, pi, d2[r, j], ids[r, j]):
                j -= 1
            if i <= j:
                td = d2[r, i]
                d2[r, i] = d2[r, j]
                d2[r, j] = td
                ti = ids[r, i]
                ids[r, i] = ids[r, j]
                ids[r, j] = ti
                i += 1
                j -= 1
        if target <= j:
            hi = j
        elif target >= i:
            lo = i
        else:
            break


@njit(cache=True, nogil=True, inline="always")
def _buf_insert(ids, d2, count, bound, compactions, q, k, pid, dist2):
    """Offer candidate ``pid`` at squared distance ``dist2`` to buffer row ``q``."""
    if dist2 > bound[q]:
        return
    c = count[q]
    ids[q, c] = pid
    d2[q, c] = dist2
    c += 1
    if c == k and bound[q] == np.inf:
        m = d2[q, 0]
        for j in range(1, k):
            if d2[q, j] > m:
                m = d2[q, j]
        bound[q] = m
        count[q] = c
    elif c == 2 * k:
        count[q] = c
        _compact(ids, d2, count, bound, compactions, q, k)
    else:
        count[q] = c


@njit(cache=True, nogil=True)
def _compact(ids, d2, count, bound, compactions, q, k):
    """Keep the ``k`` nearest entries of row ``q`` and make the bound exact."""
    _select_k(ids, d2, q, count[q], k)
    count[q] = k
    m = d2[q, 0]
    for j in range(1, k):
        if d2[q, j] > m:
            m = d2[q, j]
    bound[q] = m
    compactions[q] += 1


@njit(cache=True, nogil=True)
def _buf_insert_many(ids, d2, count, bound, compactions, q, k, pids, dists):
    for j in range(pids.shape[0]):
        _buf_insert(ids, d2, count, bound, compactions, q, k, pids[j], dists[j])


class KnnBuffers:
    """One k-NN buffer per query point, stored as parallel arrays."""

    def __init__(self, n_queries: int, k: int):
        if k < 1:
            raise ValueError("k must be at least 1")
        self.k = k
        self.ids = np.full((n_queries, 2 * k), -1, dtype=np.int64)
        self.dist2 = np.full((n_queries, 2 * k), np.inf)
        self.count = np.zeros(n_queries, dtype=np.int64)
        self.bound = np.full(n_queries, np.inf)
        self.compactions = np.zeros(n_queries, dtype=np.int64)

    def __len__(self):
        return self.count.shape[0]

    def arrays(self):
        return self.ids, self.dist2, self.count, self.bound, self.compactions

    def finalize(self) -> "KnnResult":
        k = self.k
        n = len(self)
        width = 2 * k
        valid = np.arange(width)[None, :] < self.count[:, None]
        d2 = np.where(valid, self.dist2, np.inf)
        ids = np.where(valid, self.ids, np.iinfo(np.int64).max)
        order = np.lexsort((ids, d2), axis=-1)[:, :k]
        rows = np.arange(n)[:, None]
        out_d2 = d2[rows, order]
        out_ids = ids[rows, order]
        counts = np.minimum(self.count, k)
        pad = np.arange(k)[None, :] >= counts[:, None]
        out_ids[pad] = -1
        out_d2[pad] = np.inf
        return KnnResult(out_ids, out_d2, counts)


class KnnBuffer:
    """A single bounded buffer; a thin view over one row of :class:`KnnBuffers`."""

    def __init__(self, k: int):
        self._rows = KnnBuffers(1, k)

    @property
    def k(self) -> int:
        return self._rows.k

    @property
    def count(self) -> int:
        return int(self._rows.count[0])

    @property
    def bound(self) -> float:
        """The k-th smallest retained squared distance (+inf while under-full)."""
        c = self.count
        if c < self.k:
            return float("inf")
        return float(np.partition(self._rows.dist2[0, :c], self.k - 1)[self.k - 1])

    @property
    def threshold(self) -> float:
        """Rejection threshold used by inserts; never below :attr:`bound`."""
        return float(self._rows.bound[0])

    @property
    def compactions(self) -> int:
        return int(self._rows.compactions[0])

    def insert(self, pid: int, dist2: float) -> None:
        if dist2 < 0:
            raise ValueError("squared distance must be non-negative")
        r = self._rows
        _buf_insert(r.ids, r.dist2, r.count, r.bound, r.compactions, 0, r.k, int(pid), float(dist2))

    def insert_many(self, pids, dists) -> None:
        pids = np.ascontiguousarray(pids, dtype=np.int64)
        dists = np.ascontiguousarray(dists, dtype=np.float64)
        if dists.size and dists.min() < 0:
            raise ValueError("squared distance must be non-negative")
        r = self._rows
        _buf_insert_many(r.ids, r.dist2, r.count, r.bound, r.compactions, 0, r.k, pids, dists)

    def entries(self) -> list[tuple[int, float]]:
        """Currently stored candidates, unordered."""
        c = self.count
        return list(zip(self._rows.ids[0, :c].tolist(), self._rows.dist2[0, :c].tolist()))

    def finalize(self) -> list[tuple[int, float]]:
        return self._rows.finalize()[0]


@dataclass
class KnnResult:
    """Neighbours for a batch of queries.

    ``ids`` and ``dist2`` are ``(n_queries, k)``; row ``i`` holds ``counts[i]``
    valid entries sorted by (distance, id) and is padded with ``-1`` / ``inf``.
    """

    ids: np.ndarray
    dist2: np.ndarray
    counts: np.ndarray

    def __len__(self):
        return self.ids.shape[0]

    def __getitem__(self, i) -> list[tuple[int, float]]:
        c = int(self.counts[i])
        return list(zip(self.ids[i, :c].tolist(), self.dist2[i, :c].tolist()))

    def to_lists(self) -> list[list[tuple[int, float]]]:
        return [self[i] for i in range(len(self))]

    def __eq__(self, other):
        if not isinstance(other, KnnResult):
            return NotImplemented
        return (
            np.array_equal(self.counts, other.counts)
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.dist2, other.dist2)
        )

    def checksum(self) -> str:
        h = hashlib.sha256()
        for a in (self.counts, self.ids, self.dist2):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()[:16]
