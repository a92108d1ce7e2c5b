"""Static k-d trees in a contiguous node array.

Trees are complete binary trees with ``floor(log2(ceil(n / leaf_cap))) + 1``
levels, so leaves hold between ``leaf_cap`` and ``2 * leaf_cap`` points for
object-median splits.  Nodes are laid out either in van Emde Boas order (the
static trees of the log structure) or in binary-heap order (the buffer tree).

The vEB builder follows the recursive top/bottom decomposition: the top
``l_t`` levels are built first, then the ``2**l_t`` bottom subtrees are built
concurrently at offsets obtained from a prefix sum.  Subtrees below the serial
cutoff are handed to a compiled kernel that walks the same layout.

Nodes store explicit child indices because deletion contracts the tree:
a subtree that loses all its points disappears and an internal node with a
single surviving child is replaced by that child.  Points live in leaf order
in ``pts``/``ids`` with a tombstone flag in ``alive``.
"""

from __future__ import annotations

import enum
import functools
import math
from typing import NamedTuple

import numba
import numpy as np
from numba import njit, prange

from .bloom import BloomFilter
from .geometry import _box_relation, as_coords
from .knnbuf import KnnBuffers, KnnResult, _buf_insert, _compact
from .parprim import SERIAL_CUTOFF, fork_join, prefix_sum

LEAF_CAP = 16

VACANT = 0
INTERNAL = 1
LEAF = 2

_SEARCH = 0
_ABSORB = 1
_SIBLING = 2


class Heuristic(str, enum.Enum):
    OBJECT = "object"
    SPATIAL = "spatial"

    @property
    def code(self) -> int:
        return 0 if self is Heuristic.OBJECT else 1


def hyperceiling(n: int) -> int:
    """Smallest power of two that is >= ``n``."""
    if n < 1:
        raise ValueError("hyperceiling is defined for n >= 1")
    return 1 << (n - 1).bit_length()


def tree_levels(n: int, leaf_cap: int = LEAF_CAP) -> int:
    segments = -(-n // leaf_cap)
    return segments.bit_length()


def split_levels(levels: int) -> tuple[int, int]:
    """(top, bottom) level counts for one step of the vEB recursion."""
    bottom = hyperceiling(-(-levels // 2))
    return levels - bottom, bottom


@functools.lru_cache(maxsize=None)
def veb_order(levels: int) -> np.ndarray:
    """Array index of every heap position of a complete tree in vEB order.

    ``order[h]`` is the offset of the node at 1-based heap position ``h``
    (children ``2h`` and ``2h+1``); ``order[0]`` is unused.
    """
    order = np.full(1 << levels, -1, dtype=np.int64)

    def place(root, l, idx):
        if l == 1:
            order[root] = idx
            return
        l_t, l_b = split_levels(l)
        place(root, l_t, idx)
        idx_b = idx + (1 << l_t) - 1
        offsets, _ = prefix_sum([(1 << l_b) - 1] * (1 << l_t))
        for j, off in enumerate(offsets):
            place((root << l_t) + j, l_b, idx_b + off)

    place(1, levels, 0)
    order.flags.writeable = False
    return order


# --------------------------------------------------------------------------
# construction kernels


@njit(cache=True, nogil=True, inline="always")
def _swap_rows(pts, ids, alive, i, j):
    for c in range(pts.shape[1]):
        t = pts[i, c]
        pts[i, c] = pts[j, c]
        pts[j, c] = t
    t2 = ids[i]
    ids[i] = ids[j]
    ids[j] = t2
    t3 = alive[i]
    alive[i] = alive[j]
    alive[j] = t3


@njit(cache=True, nogil=True)
def _select_rows(pts, ids, alive, a, b, kth, c):
    """Reorder rows in [a, b) so row ``kth`` holds that order statistic in dim ``c``."""
    lo = a
    hi = b - 1
    while lo < hi:
        mid = (lo + hi) >> 1
        # median of three keeps sorted and reversed runs linear
        x, y, z = pts[lo, c], pts[mid, c], pts[hi, c]
        if (x <= y <= z) or (z <= y <= x):
            pivot = y
        elif (y <= x <= z) or (z <= x <= y):
            pivot = x
        else:
            pivot = z
        i = lo
        j = hi
        while i <= j:
            while pts[i, c] < pivot:
                i += 1
            while pivot < pts[j, c]:
                j -= 1
            if i <= j:
                _swap_rows(pts, ids, alive, i, j)
                i += 1
                j -= 1
        if kth <= j:
            hi = j
        elif kth >= i:
            lo = i
        else:
            break


@njit(cache=True, nogil=True)
def _partition_rows(pts, ids, alive, a, b, c, value):
    """Move rows with coordinate < value to the front of [a, b); return the split."""
    i = a
    j = b - 1
    while True:
        while i <= j and pts[i, c] < value:
            i += 1
        while i <= j and not (pts[j, c] < value):
            j -= 1
        if i >= j:
            return i
        _swap_rows(pts, ids, alive, i, j)
        i += 1
        j -= 1


@njit(cache=True, nogil=True)
def _split_range(pts, ids, alive, a, b, c, heuristic):
    """Partition rows [a, b) for a split nominally in dimension ``c``.

    Returns ``(mid, dim, value)``: rows [a, mid) go left, [mid, b) right.
    ``mid == -1`` means the range cannot be split and should become a leaf.
    """
    d = pts.shape[1]
    if b - a < 2:
        return -1, c, 0.0
    if heuristic == 0:
        mid = a + (b - a + 1) // 2
        _select_rows(pts, ids, alive, a, b, mid, c)
        return mid, c, pts[mid, c]
    for step in range(d):
        cc = (c + step) % d
        mn = pts[a, cc]
        mx = mn
        for i in range(a + 1, b):
            v = pts[i, cc]
            if v < mn:
                mn = v
            elif v > mx:
                mx = v
        if mn < mx:
            value = 0.5 * mn + 0.5 * mx
            if value <= mn:
                value = mx
            mid = _partition_rows(pts, ids, alive, a, b, cc, value)
            return mid, cc, value
    return -1, c, 0.0


@njit(cache=True, nogil=True, inline="always")
def _write_box(pts, a, b, lo_box, hi_box, idx):
    d = pts.shape[1]
    for c in range(d):
        lo_box[idx, c] = np.inf
        hi_box[idx, c] = -np.inf
    for i in range(a, b):
        for c in range(d):
            v = pts[i, c]
            if v < lo_box[idx, c]:
                lo_box[idx, c] = v
            if v > hi_box[idx, c]:
                hi_box[idx, c] = v


@njit(cache=True, nogil=True, inline="always")
def _make_leaf(pts, alive, kind, live, pstart, pend, lo_box, hi_box, idx, a, b):
    kind[idx] = LEAF
    pstart[idx] = a
    pend[idx] = b
    n = 0
    for i in range(a, b):
        if alive[i]:
            n += 1
    live[idx] = n
    _write_box(pts, a, b, lo_box, hi_box, idx)


@njit(cache=True, nogil=True)
def _split_node(pts, ids, alive, kind, dim, split, live, pstart, pend, lo_box, hi_box, idx, a, b, c, heuristic):
    """Write node ``idx`` over rows [a, b); returns the split or -1 for a leaf."""
    _write_box(pts, a, b, lo_box, hi_box, idx)
    mid, cc, value = _split_range(pts, ids, alive, a, b, c, heuristic)
    if mid < 0:
        _make_leaf(pts, alive, kind, live, pstart, pend, lo_box, hi_box, idx, a, b)
        return -1
    kind[idx] = INTERNAL
    dim[idx] = cc
    split[idx] = value
    live[idx] = b - a
    return mid


@njit(cache=True, nogil=True, inline="always")
def _heap_index(root, h):
    t = 0
    while (h >> (t + 1)) > 0:
        t += 1
    return (root << t) + (h - (1 << t)) - 1


@njit(cache=True, nogil=True)
def _build_subtree(pts, ids, alive, kind, dim, split, left, right, live, pstart, pend, lo_box, hi_box,
                   a, b, base, c0, levels, order, heap_root, heuristic):
    """Build a complete ``levels``-level subtree over rows [a, b).

    Node at local heap position ``h`` goes to ``base + order[h]`` (vEB) or,
    when ``heap_root > 0``, to its global heap slot below ``heap_root``.
    """
    d = pts.shape[1]
    cap = 2 * levels + 4
    st_h = np.empty(cap, dtype=np.int64)
    st_a = np.empty(cap, dtype=np.int64)
    st_b = np.empty(cap, dtype=np.int64)
    st_h[0] = 1
    st_a[0] = a
    st_b[0] = b
    sp = 1
    while sp > 0:
        sp -= 1
        h = st_h[sp]
        lo = st_a[sp]
        hi = st_b[sp]
        t = 0
        while (h >> (t + 1)) > 0:
            t += 1
        if heap_root > 0:
            idx = _heap_index(heap_root, h)
        else:
            idx = base + order[h]
        if lo >= hi:
            continue
        if t == levels - 1:
            _make_leaf(pts, alive, kind, live, pstart, pend, lo_box, hi_box, idx, lo, hi)
            continue
        mid = _split_node(pts, ids, alive, kind, dim, split, live, pstart, pend, lo_box, hi_box,
                          idx, lo, hi, (c0 + t) % d, heuristic)
        if mid < 0:
            continue
        if heap_root > 0:
            left[idx] = _heap_index(heap_root, 2 * h)
            right[idx] = _heap_index(heap_root, 2 * h + 1)
        else:
            left[idx] = base + order[2 * h]
            right[idx] = base + order[2 * h + 1]
        st_h[sp] = 2 * h + 1
        st_a[sp] = mid
        st_b[sp] = hi
        sp += 1
        st_h[sp] = 2 * h
        st_a[sp] = lo
        st_b[sp] = mid
        sp += 1


# --------------------------------------------------------------------------
# deletion kernel


@njit(cache=True, nogil=True, inline="always")
def _same_point(pts, i, batch, j):
    for c in range(pts.shape[1]):
        if pts[i, c] != batch[j, c]:
            return False
    return True


@njit(cache=True, nogil=True)
def _partition3(w, a, b, c, value):
    """Dutch-flag partition of rows [a, b) into < value, == value, > value."""
    lt = a
    i = a
    gt = b
    d = w.shape[1]
    while i < gt:
        v = w[i, c]
        if v < value:
            if i != lt:
                for cc in range(d):
                    t = w[i, cc]
                    w[i, cc] = w[lt, cc]
                    w[lt, cc] = t
            lt += 1
            i += 1
        elif v > value:
            gt -= 1
            for cc in range(d):
                t = w[i, cc]
                w[i, cc] = w[gt, cc]
                w[gt, cc] = t
        else:
            i += 1
    return lt, gt


@njit(cache=True, nogil=True)
def _erase_subtree(kind, dim, split, left, right, live, pstart, pend, pts, alive, start, batch, height):
    """Tombstone every live point coordinate-equal to a batch row.

    Walks the subtree rooted at ``start`` post-order, partitioning the batch
    around each split (rows equal to the split value go both ways), and
    contracts the tree on the way up.  Returns ``(replacement, removed)``;
    ``replacement`` is -1 when the whole subtree emptied.
    """
    m = batch.shape[0]
    d = batch.shape[1]
    w = np.empty((max(2 * m, 16), d))
    w[:m] = batch
    wend = m
    cap = height + 2
    f_node = np.empty(cap, dtype=np.int64)
    f_lo = np.empty(cap, dtype=np.int64)
    f_hi = np.empty(cap, dtype=np.int64)
    f_rlo = np.empty(cap, dtype=np.int64)
    f_rhi = np.empty(cap, dtype=np.int64)
    f_state = np.empty(cap, dtype=np.int64)
    f_resl = np.empty(cap, dtype=np.int64)
    f_resr = np.empty(cap, dtype=np.int64)
    removed = 0
    out = start
    f_node[0] = start
    f_lo[0] = 0
    f_hi[0] = m
    f_state[0] = 0
    sp = 1
    while sp > 0:
        f = sp - 1
        node = f_node[f]
        res = -2
        if f_state[f] == 0:
            lo = f_lo[f]
            hi = f_hi[f]
            if lo == hi:
                res = node
            elif kind[node] == LEAF:
                for p in range(pstart[node], pend[node]):
                    if alive[p]:
                        for j in range(lo, hi):
                            if _same_point(pts, p, w, j):
                                alive[p] = False
                                live[node] -= 1
                                removed += 1
                                break
                if live[node] > 0:
                    res = node
                else:
                    kind[node] = VACANT
                    res = -1
            else:
                c = dim[node]
                value = split[node]
                lt, gt = _partition3(w, lo, hi, c, value)
                if lt < gt:
                    # the equal rows are needed by both children; give the right one a copy
                    need = wend + (hi - lt)
                    if need > w.shape[0]:
                        grown = np.empty((max(need, 2 * w.shape[0]), d))
                        grown[:wend] = w[:wend]
                        w = grown
                    w[wend:need] = w[lt:hi]
                    f_rlo[f] = wend
                    f_rhi[f] = need
                    wend = need
                    left_hi = gt
                else:
                    f_rlo[f] = lt
                    f_rhi[f] = hi
                    left_hi = lt
                f_state[f] = 1
                f_node[sp] = left[node]
                f_lo[sp] = lo
                f_hi[sp] = left_hi
                f_state[sp] = 0
                sp += 1
                continue
        elif f_state[f] == 1:
            f_state[f] = 2
            f_node[sp] = right[node]
            f_lo[sp] = f_rlo[f]
            f_hi[sp] = f_rhi[f]
            f_state[sp] = 0
            sp += 1
            continue
        else:
            rl = f_resl[f]
            rr = f_resr[f]
            if rl < 0 and rr < 0:
                live[node] = 0
                kind[node] = VACANT
                res = -1
            elif rl < 0:
                kind[node] = VACANT
                res = rr
            elif rr < 0:
                kind[node] = VACANT
                res = rl
            else:
                left[node] = rl
                right[node] = rr
                live[node] = live[rl] + live[rr]
                res = node
        sp -= 1
        if sp == 0:
            out = res
        elif f_state[sp - 1] == 1:
            f_resl[sp - 1] = res
        else:
            f_resr[sp - 1] = res
    return out, removed


# --------------------------------------------------------------------------
# k-NN kernels


@njit(cache=True, nogil=True, inline="always")
def _node_outside(lo_box, hi_box, node, q, r2):
    """True when the box of ``node`` lies entirely beyond squared distance ``r2``.

    Scalar indexing avoids creating (and refcounting) row views on the hot path,
    and the sum stops as soon as it exceeds ``r2``.
    """
    s = 0.0
    for c in range(q.shape[0]):
        x = q[c]
        if x < lo_box[node, c]:
            t = lo_box[node, c] - x
            s += t * t
        elif x > hi_box[node, c]:
            t = x - hi_box[node, c]
            s += t * t
        if s > r2:
            return True
    return False


@njit(cache=True, nogil=True, inline="always")
def _node_relation(lo_box, hi_box, node, q, r2):
    """``_box_relation`` for node ``node`` read straight from the box arrays."""
    if _node_outside(lo_box, hi_box, node, q, r2):
        return 0
    s = 0.0
    for c in range(q.shape[0]):
        t = max(abs(q[c] - lo_box[node, c]), abs(hi_box[node, c] - q[c]))
        s += t * t
        if s > r2:
            return 2
    return 1


@njit(cache=True, nogil=True, inline="always")
def _knn_one(kind, dim, split, left, right, lo_box, hi_box, live, pstart, pend, pts, ids, alive,
             root, q, qi, bids, bd2, bcount, bbound, bcomp, k, st_node, st_mode):
    # Entering another tree with a half-full buffer: tighten the bound to the exact
    # k-th distance first so the new tree is pruned as hard as possible.
    if bcount[qi] > k:
        _compact(bids, bd2, bcount, bbound, bcomp, qi, k)
    st_node[0] = root
    st_mode[0] = _SEARCH
    sp = 1
    d = pts.shape[1]
    while sp > 0:
        sp -= 1
        node = st_node[sp]
        mode = st_mode[sp]
        if live[node] == 0:
            continue
        if mode == _SIBLING:
            if bbound[qi] == np.inf:
                mode = _ABSORB
            else:
                rel = _node_relation(lo_box, hi_box, node, q, bbound[qi])
                if rel == 0:
                    continue
                mode = _ABSORB if rel == 1 else _SEARCH
        elif mode == _SEARCH and _node_outside(lo_box, hi_box, node, q, bbound[qi]):
            # on the way down only pruning pays off; containment is tested on siblings
            continue
        if kind[node] == LEAF:
            for p in range(pstart[node], pend[node]):
                if alive[p]:
                    s = 0.0
                    for c in range(d):
                        t = pts[p, c] - q[c]
                        s += t * t
                    _buf_insert(bids, bd2, bcount, bbound, bcomp, qi, k, ids[p], s)
            continue
        if mode == _ABSORB:
            st_node[sp] = right[node]
            st_mode[sp] = _ABSORB
            st_node[sp + 1] = left[node]
            st_mode[sp + 1] = _ABSORB
            sp += 2
            continue
        if q[dim[node]] < split[node]:
            near = left[node]
            far = right[node]
        else:
            near = right[node]
            far = left[node]
        st_node[sp] = far
        st_mode[sp] = _SIBLING
        st_node[sp + 1] = near
        st_mode[sp + 1] = _SEARCH
        sp += 2


@njit(cache=True, parallel=True)
def _knn_batch(kind, dim, split, left, right, lo_box, hi_box, live, pstart, pend, pts, ids, alive,
               root, height, queries, bids, bd2, bcount, bbound, bcomp, k, nchunks):
    # The query loop must sit in the parallel body itself: the same loop in a
    # separate serial function compiles to code about twice as slow.
    n = queries.shape[0]
    step = (n + nchunks - 1) // nchunks
    for c in prange(nchunks):
        st_node = np.empty(2 * height + 4, dtype=np.int64)
        st_mode = np.empty(2 * height + 4, dtype=np.int64)
        for qi in range(c * step, min(n, (c + 1) * step)):
            _knn_one(kind, dim, split, left, right, lo_box, hi_box, live, pstart, pend, pts, ids, alive,
                     root, queries[qi], qi, bids, bd2, bcount, bbound, bcomp, k, st_node, st_mode)


@njit(cache=True, nogil=True)
def _reachable_leaves(kind, left, right, live, root, height):
    out = np.empty(64, dtype=np.int64)
    n = 0
    stack = np.empty(height + 2, dtype=np.int64)
    stack[0] = root
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if live[node] == 0:
            continue
        if kind[node] == LEAF:
            if n == out.shape[0]:
                grown = np.empty(2 * n, dtype=np.int64)
                grown[:n] = out
                out = grown
            out[n] = node
            n += 1
        else:
            stack[sp] = right[node]
            stack[sp + 1] = left[node]
            sp += 2
    return out[:n]


@njit(cache=True, nogil=True)
def _gather_live(pts, ids, alive, pstart, pend, leaves, offsets, out_pts, out_ids):
    for j in range(leaves.shape[0]):
        o = offsets[j]
        node = leaves[j]
        for p in range(pstart[node], pend[node]):
            if alive[p]:
                out_pts[o] = pts[p]
                out_ids[o] = ids[p]
                o += 1


def run_knn(tree, queries: np.ndarray, buffers: KnnBuffers) -> None:
    """Search one node-array tree for every query, updating ``buffers`` in place."""
    if tree.root < 0 or tree.live == 0 or queries.shape[0] == 0:
        return
    args = (*tree.node_arrays(), tree.root, tree.height, queries, *buffers.arrays(), buffers.k)
    # several chunks per thread keep the load balanced when query costs vary
    _knn_batch(*args, min(queries.shape[0], 8 * numba.get_num_threads()))


# --------------------------------------------------------------------------


class Split(NamedTuple):
    value: float
    points: np.ndarray
    index: int
    dim: int


def choose_split(points, dim: int, heuristic: Heuristic | str) -> Split:
    """Partition a copy of ``points`` the way tree construction would.

    For the spatial median, a dimension whose coordinates are all equal is
    skipped in favour of the next one; if every dimension is degenerate the
    returned index equals ``len(points)`` (the points stay together in a leaf).
    """
    heuristic = Heuristic(heuristic)
    pts = as_coords(points).copy()
    if pts.shape[0] < 2:
        raise ValueError("choose_split needs at least two points")
    ids = np.arange(pts.shape[0], dtype=np.int64)
    mid, cc, value = _split_range(pts, ids, np.ones(pts.shape[0], dtype=np.bool_), 0, pts.shape[0], dim,
                                  heuristic.code)
    if mid < 0:
        return Split(float(pts[0, dim]), pts, pts.shape[0], dim)
    return Split(float(value), pts, int(mid), int(cc))


class StaticTree:
    """A static k-d tree supporting batch deletion and k-NN search."""

    def __init__(self, dim: int, heuristic: Heuristic | str = Heuristic.OBJECT, layout: str = "veb",
                 leaf_cap: int = LEAF_CAP):
        if layout not in ("veb", "heap"):
            raise ValueError(f"unknown layout {layout!r}")
        if leaf_cap < 1:
            raise ValueError("leaf_cap must be positive")
        self.dim = dim
        self.heuristic = Heuristic(heuristic)
        self.layout = layout
        self.leaf_cap = leaf_cap
        self.capacity = 0
        self.live = 0
        self.levels = 0
        self.root = -1
        self.bloom: BloomFilter | None = None
        self._alloc(0, 0)

    def _alloc(self, n_nodes, n_points):
        d = self.dim
        self.kind = np.zeros(n_nodes, dtype=np.int8)
        self.split_dim = np.zeros(n_nodes, dtype=np.int64)
        self.split = np.zeros(n_nodes)
        self.left = np.full(n_nodes, -1, dtype=np.int64)
        self.right = np.full(n_nodes, -1, dtype=np.int64)
        self.lo = np.empty((n_nodes, d))
        self.hi = np.empty((n_nodes, d))
        self.live_count = np.zeros(n_nodes, dtype=np.int64)
        self.pstart = np.zeros(n_nodes, dtype=np.int64)
        self.pend = np.zeros(n_nodes, dtype=np.int64)
        self.pts = np.empty((n_points, d))
        self.ids = np.empty(n_points, dtype=np.int64)
        self.alive = np.zeros(n_points, dtype=np.bool_)

    @property
    def height(self) -> int:
        return self.levels

    @property
    def n_nodes(self) -> int:
        return self.kind.shape[0]

    def __len__(self):
        return self.live

    def node_arrays(self):
        return (self.kind, self.split_dim, self.split, self.left, self.right, self.lo, self.hi,
                self.live_count, self.pstart, self.pend, self.pts, self.ids, self.alive)

    # -- construction -------------------------------------------------------

    @classmethod
    def build(cls, points, ids=None, heuristic: Heuristic | str = Heuristic.OBJECT, layout: str = "veb",
              leaf_cap: int = LEAF_CAP, dim: int | None = None) -> "StaticTree":
        coords = as_coords(points, dim)
        n = coords.shape[0]
        d = coords.shape[1] if n else dim
        if d is None:
            raise ValueError("dimension of an empty tree must be given")
        tree = cls(d, heuristic, layout, leaf_cap)
        if n == 0:
            return tree
        if ids is None:
            ids = np.arange(n, dtype=np.int64)
        ids = np.ascontiguousarray(ids, dtype=np.int64)
        if ids.shape != (n,):
            raise ValueError(f"expected {n} ids, got shape {ids.shape}")
        levels = tree_levels(n, leaf_cap)
        tree._alloc((1 << levels) - 1, n)
        tree.pts[:] = coords
        tree.ids[:] = ids
        tree.alive[:] = True
        tree.capacity = n
        tree.live = n
        tree.levels = levels
        tree.root = 0
        if layout == "veb":
            tree._build_veb(0, n, 0, 0, levels, False)
        else:
            tree._build_heap(0, n, 1, 0, levels)
        return tree

    def _kernel_args(self):
        return (self.pts, self.ids, self.alive, self.kind, self.split_dim, self.split, self.left, self.right,
                self.live_count, self.pstart, self.pend, self.lo, self.hi)

    def _split_at(self, idx, a, b, c):
        return _split_node(self.pts, self.ids, self.alive, self.kind, self.split_dim, self.split,
                           self.live_count, self.pstart, self.pend, self.lo, self.hi, idx, a, b, c,
                           self.heuristic.code)

    def _build_veb(self, a, b, idx, c, levels, top):
        """One call of the recursive vEB construction over rows [a, b).

        ``top`` subtrees are the upper part of an enclosing subtree: their last
        level is internal nodes whose children are laid out by the caller.
        They return the ``2**levels`` row groups for the subtrees below them
        and the indices of their last-level nodes (-1 where no split was made).
        """
        if not top and b - a < SERIAL_CUTOFF:
            _build_subtree(*self._kernel_args(), a, b, idx, c, levels, veb_order(levels), 0,
                           self.heuristic.code)
            return None
        if levels == 1:
            if not top:
                _make_leaf(self.pts, self.alive, self.kind, self.live_count, self.pstart, self.pend,
                           self.lo, self.hi, idx, a, b)
                return None
            mid = self._split_at(idx, a, b, c)
            if mid < 0:
                return [None, None], [-1]
            return [(a, mid), (mid, b)], [idx]
        l_t, l_b = split_levels(levels)
        groups, frontier = self._build_veb(a, b, idx, c, l_t, True)
        idx_b = idx + (1 << l_t) - 1
        offsets, _ = prefix_sum([(1 << l_b) - 1] * len(groups))
        roots = [idx_b + o for o in offsets]
        for j, node in enumerate(frontier):
            if node >= 0:
                self.left[node] = roots[2 * j]
                self.right[node] = roots[2 * j + 1]
        c_b = (c + l_t) % self.dim
        tasks = [functools.partial(self._build_veb, g[0], g[1], roots[i], c_b, l_b, top)
                 for i, g in enumerate(groups) if g is not None]
        results = fork_join(tasks) if b - a >= SERIAL_CUTOFF else [t() for t in tasks]
        if not top:
            return None
        out_groups, out_frontier = [], []
        done = iter(results)
        for g in groups:
            if g is None:
                out_groups += [None] * (1 << l_b)
                out_frontier += [-1] * (1 << (l_b - 1))
            else:
                sub_groups, sub_frontier = next(done)
                out_groups += sub_groups
                out_frontier += sub_frontier
        return out_groups, out_frontier

    def _build_heap(self, a, b, h, c, levels):
        if b - a < SERIAL_CUTOFF or levels == 1:
            _build_subtree(*self._kernel_args(), a, b, 0, c, levels, veb_order(1), h, self.heuristic.code)
            return
        idx = h - 1
        mid = self._split_at(idx, a, b, c)
        if mid < 0:
            return
        self.left[idx] = 2 * h - 1
        self.right[idx] = 2 * h
        c_next = (c + 1) % self.dim
        fork_join([
            functools.partial(self._build_heap, a, mid, 2 * h, c_next, levels - 1),
            functools.partial(self._build_heap, mid, b, 2 * h + 1, c_next, levels - 1),
        ])

    # -- deletion -----------------------------------------------------------

    def bloom_filter(self) -> BloomFilter:
        """The tree's bloom filter, built over its live points on first use."""
        if self.bloom is None:
            coords, _ = self.collect_live()
            self.bloom = BloomFilter.build(coords, dim=self.dim)
        return self.bloom

    def erase(self, points, use_bloom: bool = False) -> int:
        """Tombstone every live point coordinate-equal to one in ``points``."""
        batch = as_coords(points, self.dim)
        if self.root < 0 or batch.shape[0] == 0:
            return 0
        if use_bloom:
            batch = batch[self.bloom_filter().maybe_contains_many(batch)]
            if batch.shape[0] == 0:
                return 0
        new_root, removed = self._erase_from(self.root, batch)
        self.root = new_root
        self.live -= removed
        return removed

    def _erase_from(self, node, batch):
        if batch.shape[0] == 0:
            return node, 0
        if batch.shape[0] < SERIAL_CUTOFF or self.kind[node] == LEAF:
            res, removed = _erase_subtree(self.kind, self.split_dim, self.split, self.left, self.right,
                                          self.live_count, self.pstart, self.pend, self.pts, self.alive,
                                          node, batch, self.levels)
            return int(res), int(removed)
        c = self.split_dim[node]
        value = self.split[node]
        keys = batch[:, c]
        (rl, nl), (rr, nr) = fork_join([
            functools.partial(self._erase_from, int(self.left[node]), batch[keys <= value]),
            functools.partial(self._erase_from, int(self.right[node]), batch[keys >= value]),
        ])
        removed = nl + nr
        if rl < 0 and rr < 0:
            self.live_count[node] = 0
            self.kind[node] = VACANT
            return -1, removed
        if rl < 0 or rr < 0:
            self.kind[node] = VACANT
            return (rr if rl < 0 else rl), removed
        self.left[node] = rl
        self.right[node] = rr
        self.live_count[node] = self.live_count[rl] + self.live_count[rr]
        return node, removed

    # -- queries ------------------------------------------------------------

    def search(self, queries: np.ndarray, buffers: KnnBuffers) -> None:
        run_knn(self, queries, buffers)

    def knn(self, queries, k: int) -> KnnResult:
        q = as_coords(queries, self.dim)
        buffers = KnnBuffers(q.shape[0], k)
        self.search(q, buffers)
        return buffers.finalize()

    def leaves(self) -> np.ndarray:
        """Indices of reachable leaves holding live points, left to right."""
        if self.root < 0:
            return np.zeros(0, dtype=np.int64)
        return _reachable_leaves(self.kind, self.left, self.right, self.live_count, self.root, self.height)

    def collect_live(self) -> tuple[np.ndarray, np.ndarray]:
        """All live points as ``(coords, ids)``."""
        leaves = self.leaves()
        counts = self.live_count[leaves]
        offsets, total = prefix_sum(counts, np.add, 0)
        out_pts = np.empty((int(total), self.dim))
        out_ids = np.empty(int(total), dtype=np.int64)
        if leaves.shape[0]:
            _gather_live(self.pts, self.ids, self.alive, self.pstart, self.pend, leaves,
                         np.asarray(offsets, dtype=np.int64), out_pts, out_ids)
        return out_pts, out_ids


def build_veb(points, ids=None, heuristic: Heuristic | str = Heuristic.OBJECT, leaf_cap: int = LEAF_CAP,
              dim: int | None = None) -> StaticTree:
    return StaticTree.build(points, ids, heuristic, "veb", leaf_cap, dim)


def build_heap(points, ids=None, heuristic: Heuristic | str = Heuristic.OBJECT, leaf_cap: int = LEAF_CAP,
               dim: int | None = None) -> StaticTree:
    return StaticTree.build(points, ids, heuristic, "heap", leaf_cap, dim)


def erase_batch(tree: StaticTree, points) -> int:
    return tree.erase(points)


def knn_single(tree: StaticTree, query, buffer) -> None:
    """Merge the k nearest live points of ``tree`` to ``query`` into ``buffer``."""
    q = as_coords([np.asarray(query, dtype=np.float64)], tree.dim)
    rows = buffer._rows if hasattr(buffer, "_rows") else buffer
    tree.search(q, rows)


def collect_live(tree: StaticTree) -> tuple[np.ndarray, np.ndarray]:
    return tree.collect_live()


def tree_depth_bound(n: int) -> int:
    return max(1, math.ceil(math.log2(max(n, 1))) + 1)
