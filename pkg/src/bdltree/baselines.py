"""Comparison strategies behind the same interface as :class:`BdlTree`.

``B1Tree`` rebuilds one static tree from scratch after every batch update.
``B2Tree`` builds once and never rebuilds: inserted points are routed through
the existing splits, an overfull leaf is split locally, and deletions only
set tombstones.  Its node and point arrays grow by doubling and stale leaf
regions are never reclaimed.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .geometry import as_coords
from .knnbuf import KnnBuffers, KnnResult
from .static_tree import (
    INTERNAL,
    LEAF,
    LEAF_CAP,
    Heuristic,
    StaticTree,
    _same_point,
    _split_range,
    _write_box,
    build_heap,
    build_veb,
    run_knn,
)


def _new_ids(owner, m: int, ids) -> np.ndarray:
    if ids is None:
        ids = np.arange(owner._next_id, owner._next_id + m, dtype=np.int64)
    else:
        ids = np.ascontiguousarray(ids, dtype=np.int64)
        if ids.shape != (m,):
            raise ValueError(f"expected {m} ids, got shape {ids.shape}")
    if m:
        owner._next_id = max(owner._next_id, int(ids.max()) + 1)
    return ids


class B1Tree:
    """Rebuild a single vEB tree over the live points after every update."""

    def __init__(self, heuristic: Heuristic | str = Heuristic.OBJECT, leaf_cap: int = LEAF_CAP,
                 dim: int | None = None):
        self.heuristic = Heuristic(heuristic)
        self.leaf_cap = leaf_cap
        self.dim = dim
        self.tree: StaticTree | None = None
        self._next_id = 0

    @property
    def live(self) -> int:
        return 0 if self.tree is None else self.tree.live

    def __len__(self):
        return self.live

    def collect_live(self) -> tuple[np.ndarray, np.ndarray]:
        if self.tree is None:
            return np.empty((0, self.dim or 0)), np.empty(0, dtype=np.int64)
        return self.tree.collect_live()

    def _rebuild(self, pts, ids) -> None:
        self.tree = build_veb(pts, ids, self.heuristic, self.leaf_cap, self.dim)

    def insert(self, points, ids=None) -> None:
        coords = as_coords(points, self.dim)
        if coords.shape[0] == 0:
            return
        self.dim = coords.shape[1]
        ids = _new_ids(self, coords.shape[0], ids)
        pts, old_ids = self.collect_live()
        self._rebuild(np.concatenate([pts, coords]), np.concatenate([old_ids, ids]))

    def erase(self, points) -> int:
        batch = as_coords(points, self.dim)
        if self.tree is None or batch.shape[0] == 0:
            return 0
        removed = self.tree.erase(batch)
        self._rebuild(*self.tree.collect_live())
        return removed

    def knn(self, queries, k: int) -> KnnResult:
        if k < 1:
            raise ValueError("k must be at least 1")
        q = as_coords(queries, self.dim)
        buffers = KnnBuffers(q.shape[0], k)
        if self.tree is not None:
            run_knn(self.tree, q, buffers)
        return buffers.finalize()


# --------------------------------------------------------------------------
# B2 kernels


@njit(cache=True, nogil=True)
def _route(kind, dim, split, left, right, lo_box, hi_box, live, root, batch):
    """Send every batch point down the frozen splits, updating boxes and counts."""
    m = batch.shape[0]
    d = batch.shape[1]
    out = np.empty(m, dtype=np.int64)
    for j in range(m):
        node = root
        while True:
            live[node] += 1
            for c in range(d):
                v = batch[j, c]
                if v < lo_box[node, c]:
                    lo_box[node, c] = v
                if v > hi_box[node, c]:
                    hi_box[node, c] = v
            if kind[node] != INTERNAL:
                break
            if batch[j, dim[node]] < split[node]:
                node = left[node]
            else:
                node = right[node]
        out[j] = node
    return out


@njit(cache=True, nogil=True)
def _place(kind, dim, split, left, right, lo_box, hi_box, live, pstart, pend, depth, parent,
           pts, ids, alive, n_nodes, n_pts, leaves, group, new_pts, new_ids, leaf_cap, heuristic):
    """Rewrite each touched leaf at the end of the point store, splitting it if overfull."""
    d = pts.shape[1]
    stack = np.empty(64, dtype=np.int64)
    max_depth = 0
    for j in range(leaves.shape[0]):
        leaf = leaves[j]
        a = n_pts
        for p in range(pstart[leaf], pend[leaf]):
            pts[n_pts] = pts[p]
            ids[n_pts] = ids[p]
            alive[n_pts] = alive[p]
            n_pts += 1
        for p in range(group[j], group[j + 1]):
            pts[n_pts] = new_pts[p]
            ids[n_pts] = new_ids[p]
            alive[n_pts] = True
            n_pts += 1
        pstart[leaf] = a
        pend[leaf] = n_pts
        stack[0] = leaf
        sp = 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            pa = pstart[node]
            pb = pend[node]
            if depth[node] > max_depth:
                max_depth = depth[node]
            if pb - pa <= leaf_cap:
                continue
            mid, cc, value = _split_range(pts, ids, alive, pa, pb, depth[node] % d, heuristic)
            if mid < 0:
                continue
            kind[node] = INTERNAL
            dim[node] = cc
            split[node] = value
            for side in range(2):
                child = n_nodes
                n_nodes += 1
                if side == 0:
                    left[node] = child
                    ca, cb = pa, mid
                else:
                    right[node] = child
                    ca, cb = mid, pb
                kind[child] = LEAF
                left[child] = -1
                right[child] = -1
                pstart[child] = ca
                pend[child] = cb
                depth[child] = depth[node] + 1
                parent[child] = node
                _write_box(pts, ca, cb, lo_box, hi_box, child)
                n = 0
                for p in range(ca, cb):
                    if alive[p]:
                        n += 1
                live[child] = n
                if sp == stack.shape[0]:
                    grown = np.empty(2 * sp, dtype=np.int64)
                    grown[:sp] = stack
                    stack = grown
                stack[sp] = child
                sp += 1
    return n_nodes, n_pts, max_depth


@njit(cache=True, nogil=True)
def _tombstone(kind, split, dim, left, right, live, pstart, pend, parent, pts, alive, root, height, batch):
    """Tombstone coordinate-equal live points; points on a split go both ways."""
    stack = np.empty(2 * height + 4, dtype=np.int64)
    removed = 0
    for j in range(batch.shape[0]):
        stack[0] = root
        sp = 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if live[node] == 0:
                continue
            if kind[node] == LEAF:
                for p in range(pstart[node], pend[node]):
                    if alive[p] and _same_point(pts, p, batch, j):
                        alive[p] = False
                        removed += 1
                        up = node
                        while up >= 0:
                            live[up] -= 1
                            up = parent[up]
                continue
            v = batch[j, dim[node]]
            s = split[node]
            if v >= s:
                stack[sp] = right[node]
                sp += 1
            if v <= s:
                stack[sp] = left[node]
                sp += 1
    return removed


@njit(cache=True, nogil=True)
def _parents(kind, left, right, root, depth, parent):
    """Fill depth and parent for every reachable node; return the tree height."""
    n = kind.shape[0]
    stack = np.empty(n + 1, dtype=np.int64)
    stack[0] = root
    depth[root] = 0
    parent[root] = -1
    sp = 1
    height = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if depth[node] + 1 > height:
            height = depth[node] + 1
        if kind[node] == INTERNAL:
            for child in (left[node], right[node]):
                depth[child] = depth[node] + 1
                parent[child] = node
                stack[sp] = child
                sp += 1
    return height


def _grow_to(arr: np.ndarray, size: int, fill) -> np.ndarray:
    if arr.shape[0] >= size:
        return arr
    new_size = max(size, 2 * arr.shape[0])
    out = np.empty((new_size,) + arr.shape[1:], dtype=arr.dtype)
    out[: arr.shape[0]] = arr
    out[arr.shape[0]:] = fill
    return out


class B2Tree:
    """Keep the first partition forever; insert into it and tombstone deletions."""

    _NODE_FIELDS = ("kind", "split_dim", "split", "left", "right", "lo", "hi", "live_count", "pstart", "pend",
                    "depth", "parent")

    def __init__(self, heuristic: Heuristic | str = Heuristic.OBJECT, leaf_cap: int = LEAF_CAP,
                 dim: int | None = None):
        self.heuristic = Heuristic(heuristic)
        self.leaf_cap = leaf_cap
        self.dim = dim
        self.root = -1
        self.live = 0
        self.height = 0
        self.n_nodes = 0
        self.n_pts = 0
        self._next_id = 0

    def __len__(self):
        return self.live

    def node_arrays(self):
        return (self.kind, self.split_dim, self.split, self.left, self.right, self.lo, self.hi,
                self.live_count, self.pstart, self.pend, self.pts, self.ids, self.alive)

    def _adopt(self, tree: StaticTree) -> None:
        for name in ("kind", "split_dim", "split", "left", "right", "lo", "hi", "live_count", "pstart", "pend",
                     "pts", "ids", "alive"):
            setattr(self, name, getattr(tree, name).copy())
        self.n_nodes = tree.n_nodes
        self.n_pts = tree.pts.shape[0]
        self.root = tree.root
        self.live = tree.live
        self.depth = np.zeros(self.n_nodes, dtype=np.int64)
        self.parent = np.full(self.n_nodes, -1, dtype=np.int64)
        self.height = int(_parents(self.kind, self.left, self.right, self.root, self.depth, self.parent))

    def _reserve(self, nodes: int, points: int) -> None:
        fills = {"kind": 0, "left": -1, "right": -1, "parent": -1}
        for name in self._NODE_FIELDS:
            setattr(self, name, _grow_to(getattr(self, name), nodes, fills.get(name, 0)))
        self.pts = _grow_to(self.pts, points, 0.0)
        self.ids = _grow_to(self.ids, points, -1)
        self.alive = _grow_to(self.alive, points, False)

    def insert(self, points, ids=None) -> None:
        coords = as_coords(points, self.dim)
        m = coords.shape[0]
        if m == 0:
            return
        self.dim = coords.shape[1]
        ids = _new_ids(self, m, ids)
        if self.root < 0:
            self._adopt(build_heap(coords, ids, self.heuristic, self.leaf_cap))
            return
        leaf_of = _route(self.kind, self.split_dim, self.split, self.left, self.right, self.lo, self.hi,
                         self.live_count, self.root, coords)
        order = np.argsort(leaf_of, kind="stable")
        leaves, starts = np.unique(leaf_of[order], return_index=True)
        group = np.append(starts, m).astype(np.int64)
        moved = int((self.pend[leaves] - self.pstart[leaves]).sum()) + m
        self._reserve(self.n_nodes + 2 * moved, self.n_pts + moved)
        n_nodes, n_pts, max_depth = _place(
            self.kind, self.split_dim, self.split, self.left, self.right, self.lo, self.hi, self.live_count,
            self.pstart, self.pend, self.depth, self.parent, self.pts, self.ids, self.alive,
            self.n_nodes, self.n_pts, leaves.astype(np.int64), group, coords[order], ids[order],
            self.leaf_cap, self.heuristic.code)
        self.n_nodes, self.n_pts = int(n_nodes), int(n_pts)
        self.height = max(self.height, int(max_depth) + 1)
        self.live += m

    def erase(self, points) -> int:
        batch = as_coords(points, self.dim)
        if self.root < 0 or batch.shape[0] == 0:
            return 0
        removed = int(_tombstone(self.kind, self.split, self.split_dim, self.left, self.right, self.live_count,
                                 self.pstart, self.pend, self.parent, self.pts, self.alive, self.root,
                                 self.height, batch))
        self.live -= removed
        return removed

    def knn(self, queries, k: int) -> KnnResult:
        if k < 1:
            raise ValueError("k must be at least 1")
        q = as_coords(queries, self.dim)
        buffers = KnnBuffers(q.shape[0], k)
        if self.root >= 0:
            run_knn(self, q, buffers)
        return buffers.finalize()

    def internal_splits(self) -> list[tuple[int, int, float]]:
        """``(node, dim, value)`` for every internal node, in node order."""
        idx = np.flatnonzero(self.kind[: self.n_nodes] == INTERNAL)
        return [(int(i), int(self.split_dim[i]), float(self.split[i])) for i in idx]

    def collect_live(self) -> tuple[np.ndarray, np.ndarray]:
        if self.root < 0:
            return np.empty((0, self.dim or 0)), np.empty(0, dtype=np.int64)
        mask = np.zeros(self.n_pts, dtype=bool)
        for leaf in np.flatnonzero(self.kind[: self.n_nodes] == LEAF):
            mask[self.pstart[leaf]:self.pend[leaf]] = True
        mask &= self.alive[: self.n_pts]
        return self.pts[: self.n_pts][mask].copy(), self.ids[: self.n_pts][mask].copy()
