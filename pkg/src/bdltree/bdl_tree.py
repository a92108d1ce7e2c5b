"""The log-structured batch-dynamic k-d tree.

A small heap-layout buffer tree absorbs insertion remainders; slot ``i``
holds a static vEB tree of nominal capacity ``2**i * X``.  The occupancy
bitmask ``mask`` behaves like a binary counter in units of ``X`` points:
inserting ``u`` units computes ``mask + u``, tears down every slot whose bit
was cleared by the carry, and builds every newly set slot from the gathered
points.  Deletions tombstone points in place and any slot that drops below
half of its nominal capacity is emptied and its points re-inserted.
"""

from __future__ import annotations

import functools
from typing import NamedTuple

import numpy as np

from .geometry import as_coords
from .knnbuf import KnnBuffers, KnnResult
from .parprim import fork_join
from .static_tree import LEAF_CAP, Heuristic, StaticTree, build_heap, build_veb, run_knn


class BdlStats(NamedTuple):
    total_live: int
    mask: int
    slot_live: list[int]
    buffer_live: int


def _half(capacity: int) -> int:
    return -(-capacity // 2)


class BdlTree:
    """Batch-dynamic k-d tree: a buffer tree plus static trees of doubling capacity."""

    def __init__(self, X: int = 1024, n_slots: int = 0, heuristic: Heuristic | str = Heuristic.OBJECT,
                 use_bloom: bool = True, leaf_cap: int = LEAF_CAP, dim: int | None = None):
        if X < 1:
            raise ValueError("buffer capacity X must be at least 1")
        if n_slots < 0:
            raise ValueError("n_slots must be non-negative")
        self.X = X
        self.heuristic = Heuristic(heuristic)
        self.use_bloom = use_bloom
        self.leaf_cap = leaf_cap
        self.dim = dim
        self.mask = 0
        self.slots: list[StaticTree | None] = [None] * n_slots
        self.slot_builds: list[int] = [0] * n_slots
        self.buffer: StaticTree | None = None
        self._next_id = 0

    # -- bookkeeping --------------------------------------------------------

    def capacity(self, i: int) -> int:
        return self.X << i

    @property
    def live(self) -> int:
        return self.buffer_live + sum(s.live for s in self.slots if s is not None)

    @property
    def buffer_live(self) -> int:
        return 0 if self.buffer is None else self.buffer.live

    def __len__(self):
        return self.live

    def stats(self) -> BdlStats:
        slot_live = [0 if s is None else s.live for s in self.slots]
        return BdlStats(sum(slot_live) + self.buffer_live, self.mask, slot_live, self.buffer_live)

    def check_invariants(self) -> None:
        """Raise ``AssertionError`` if any structural invariant is broken."""
        for i, s in enumerate(self.slots):
            occupied = s is not None and s.live > 0
            assert bool(self.mask >> i & 1) == occupied, f"mask bit {i} disagrees with slot contents"
            if occupied:
                cap = self.capacity(i)
                assert _half(cap) <= s.live <= cap, f"slot {i} holds {s.live} of {cap}"
        assert self.mask >> len(self.slots) == 0, "mask has bits beyond the last slot"
        assert self.buffer_live < self.X, f"buffer holds {self.buffer_live} >= X"

    def _ensure_dim(self, coords: np.ndarray) -> np.ndarray:
        coords = as_coords(coords, self.dim)
        if self.dim is None and coords.shape[0]:
            self.dim = coords.shape[1]
        return coords

    def _grow(self, n_slots: int) -> None:
        while len(self.slots) < n_slots:
            self.slots.append(None)
            self.slot_builds.append(0)

    def _buffer_points(self) -> tuple[np.ndarray, np.ndarray]:
        if self.buffer is None:
            return np.empty((0, self.dim)), np.empty(0, dtype=np.int64)
        return self.buffer.collect_live()

    def _set_buffer(self, pts: np.ndarray, ids: np.ndarray) -> None:
        if pts.shape[0] == 0:
            self.buffer = None
        else:
            self.buffer = build_heap(pts, ids, self.heuristic, self.leaf_cap)

    # -- updates ------------------------------------------------------------

    def insert(self, points, ids=None) -> None:
        """Insert a batch of points.  Ids default to a running counter."""
        coords = self._ensure_dim(points)
        m = coords.shape[0]
        if m == 0:
            return
        if ids is None:
            ids = np.arange(self._next_id, self._next_id + m, dtype=np.int64)
        else:
            ids = np.ascontiguousarray(ids, dtype=np.int64)
            if ids.shape != (m,):
                raise ValueError(f"expected {m} ids, got shape {ids.shape}")
        self._next_id = max(self._next_id, int(ids.max()) + 1)
        self._insert(coords, ids)
        self._restore_half()

    def _insert(self, coords: np.ndarray, ids: np.ndarray) -> None:
        X = self.X
        r = coords.shape[0] % X
        rest_pts, rest_ids = coords[r:], ids[r:]
        if r:
            buf_pts, buf_ids = self._buffer_points()
            buf_pts = np.concatenate([buf_pts, coords[:r]])
            buf_ids = np.concatenate([buf_ids, ids[:r]])
            if buf_pts.shape[0] >= X:
                rest_pts = np.concatenate([rest_pts, buf_pts[:X]])
                rest_ids = np.concatenate([rest_ids, buf_ids[:X]])
                buf_pts, buf_ids = buf_pts[X:], buf_ids[X:]
            self._set_buffer(buf_pts, buf_ids)
        units = rest_pts.shape[0] // X
        if units:
            self._cascade(rest_pts, rest_ids, units)

    def _cascade(self, pts: np.ndarray, ids: np.ndarray, units: int) -> None:
        old = self.mask
        new = old + units
        self._grow(new.bit_length())
        cleared = [i for i in range(len(self.slots)) if old >> i & 1 and not new >> i & 1]
        fresh = [i for i in range(len(self.slots)) if new >> i & 1 and not old >> i & 1]
        parts_pts, parts_ids = [pts], [ids]
        for i in cleared:
            p, q = self.slots[i].collect_live()
            parts_pts.append(p)
            parts_ids.append(q)
            self.slots[i] = None
        all_pts = np.concatenate(parts_pts)
        all_ids = np.concatenate(parts_ids)
        # Smaller slots are filled to nominal capacity; the largest takes the rest.
        # Under-full cleared slots all sit below it, so it stays more than half full.
        ranges, start = [], 0
        for j, i in enumerate(fresh):
            stop = all_pts.shape[0] if j == len(fresh) - 1 else start + self.capacity(i)
            ranges.append((i, start, stop))
            start = stop
        trees = fork_join([
            functools.partial(build_veb, all_pts[a:b], all_ids[a:b], self.heuristic, self.leaf_cap, self.dim)
            for _, a, b in ranges
        ])
        self.mask = new
        for (i, _, _), tree in zip(ranges, trees):
            self.slots[i] = tree
            self.slot_builds[i] += 1
            if tree.live == 0:
                self.slots[i] = None
                self.mask &= ~(1 << i)

    def _restore_half(self) -> None:
        """Empty every occupied slot below half capacity and re-insert its points."""
        while True:
            low = [i for i, s in enumerate(self.slots)
                   if s is not None and s.live < _half(self.capacity(i))]
            if not low:
                return
            parts_pts, parts_ids = [], []
            for i in low:
                p, q = self.slots[i].collect_live()
                parts_pts.append(p)
                parts_ids.append(q)
                self.slots[i] = None
                self.mask &= ~(1 << i)
            self._insert(np.concatenate(parts_pts), np.concatenate(parts_ids))

    def erase(self, points) -> int:
        """Tombstone every live point coordinate-equal to one in ``points``."""
        batch = as_coords(points, self.dim)
        if self.dim is None or batch.shape[0] == 0:
            return 0
        occupied = [i for i, s in enumerate(self.slots) if s is not None]
        tasks = [functools.partial(self.slots[i].erase, batch, self.use_bloom) for i in occupied]
        if self.buffer is not None:
            tasks.append(functools.partial(self.buffer.erase, batch))
        counts = fork_join(tasks)
        if self.buffer is not None and counts[-1]:
            self._set_buffer(*self.buffer.collect_live())
        for i in occupied:
            if self.slots[i].live == 0:
                self.slots[i] = None
                self.mask &= ~(1 << i)
        self._restore_half()
        return int(sum(counts))

    # -- queries ------------------------------------------------------------

    def trees(self) -> list[StaticTree]:
        """Occupied static trees from largest to smallest, then the buffer."""
        out = [s for s in reversed(self.slots) if s is not None]
        if self.buffer is not None:
            out.append(self.buffer)
        return out

    def knn(self, queries, k: int) -> KnnResult:
        if k < 1:
            raise ValueError("k must be at least 1")
        q = as_coords(queries, self.dim)
        buffers = KnnBuffers(q.shape[0], k)
        for tree in self.trees():
            run_knn(tree, q, buffers)
        return buffers.finalize()

    def collect_live(self) -> tuple[np.ndarray, np.ndarray]:
        parts = [t.collect_live() for t in self.trees()]
        if not parts:
            return np.empty((0, self.dim or 0)), np.empty(0, dtype=np.int64)
        return np.concatenate([p for p, _ in parts]), np.concatenate([q for _, q in parts])
