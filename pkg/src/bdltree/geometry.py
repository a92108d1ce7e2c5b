"""Points, axis-aligned boxes, and the box/ball relation used for pruning.

All distances are squared Euclidean distances; nothing in the package takes a
square root.  The ``_box_*`` kernels are shared with the compiled search code.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numba import njit


class Relation(enum.IntEnum):
    DISJOINT = 0
    CONTAINED = 1
    INTERSECTING = 2


@dataclass(frozen=True)
class Point:
    """A coordinate vector with a stable identity."""

    coords: tuple[float, ...]
    id: int = 0

    def __post_init__(self):
        coords = tuple(float(c) for c in self.coords)
        if not coords:
            raise ValueError("a point needs at least one coordinate")
        if not all(np.isfinite(coords)):
            raise ValueError(f"non-finite coordinate in {coords}")
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype or np.float64)


def as_coords(points, dim: int | None = None) -> np.ndarray:
    """Coerce ``points`` to a C-contiguous ``(m, d)`` float64 array.

    Accepts an array, a sequence of coordinate sequences, or a sequence of
    :class:`Point`.  Raises ``ValueError`` on ragged input, a dimension that
    differs from ``dim``, or any NaN/infinity.
    """
    if isinstance(points, np.ndarray):
        arr = points
    else:
        points = list(points)
        if points and isinstance(points[0], Point):
            arr = np.array([p.coords for p in points], dtype=np.float64)
        else:
            arr = np.array(points, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, dim or 0)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D array of points, got shape {arr.shape}")
    if dim is not None and arr.shape[0] and arr.shape[1] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {arr.shape[1]}")
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise ValueError("points must have finite coordinates")
    return arr


@njit(cache=True, nogil=True)
def _sq_dist(a, b):
    s = 0.0
    for c in range(a.shape[0]):
        t = a[c] - b[c]
        s += t * t
    return s


@njit(cache=True, nogil=True)
def _box_min_dist2(lo, hi, q):
    s = 0.0
    for c in range(q.shape[0]):
        if q[c] < lo[c]:
            t = lo[c] - q[c]
            s += t * t
        elif q[c] > hi[c]:
            t = q[c] - hi[c]
            s += t * t
    return s


@njit(cache=True, nogil=True)
def _box_max_dist2(lo, hi, q):
    s = 0.0
    for c in range(q.shape[0]):
        t = max(abs(q[c] - lo[c]), abs(hi[c] - q[c]))
        s += t * t
    return s


@njit(cache=True, nogil=True)
def _box_relation(lo, hi, q, r2):
    if _box_min_dist2(lo, hi, q) > r2:
        return 0
    if _box_max_dist2(lo, hi, q) <= r2:
        return 1
    return 2


def squared_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(_sq_dist(a, b))


@dataclass(frozen=True)
class BoundingBox:
    """Closed axis-aligned box.  The empty box has ``lo=+inf`` and ``hi=-inf``."""

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def empty(cls, dim: int) -> "BoundingBox":
        return cls(np.full(dim, np.inf), np.full(dim, -np.inf))

    @classmethod
    def of(cls, points) -> "BoundingBox":
        pts = np.asarray(points, dtype=np.float64)
        if pts.shape[0] == 0:
            return cls.empty(pts.shape[1])
        return cls(pts.min(axis=0), pts.max(axis=0))

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def is_empty(self) -> bool:
        return bool(np.any(self.lo > self.hi))

    def extend(self, point) -> "BoundingBox":
        p = np.asarray(point, dtype=np.float64)
        return BoundingBox(np.minimum(self.lo, p), np.maximum(self.hi, p))

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=np.float64)
        return bool(np.all(self.lo <= p) and np.all(p <= self.hi))


def box_sphere_relation(box: BoundingBox, center, r2: float) -> Relation:
    """Classify ``box`` against the closed ball of squared radius ``r2``."""
    q = np.asarray(center, dtype=np.float64)
    if q.shape != box.lo.shape:
        raise ValueError(f"dimension mismatch: box is {box.dim}-D, center is {q.shape}")
    if r2 < 0:
        raise ValueError("squared radius must be non-negative")
    return Relation(_box_relation(box.lo, box.hi, q, float(r2)))
