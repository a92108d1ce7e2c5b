"""Brute-force reference answers used by validation and the test suite."""

from __future__ import annotations

import numpy as np

from .knnbuf import KnnResult


def pairwise_dist2(points: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Squared distances ``(n_queries, n_points)``, summed dimension by dimension.

    Summing in coordinate order reproduces the tree kernels' floating-point
    results bit for bit.
    """
    out = np.zeros((queries.shape[0], points.shape[0]))
    for c in range(points.shape[1]):
        diff = queries[:, c, None] - points[None, :, c]
        out += diff * diff
    return out


def brute_knn(points, ids, queries, k: int, chunk: int = 512) -> KnnResult:
    """Exact k nearest neighbours ordered by (squared distance, id)."""
    points = np.asarray(points, dtype=np.float64).reshape(len(points), -1)
    queries = np.asarray(queries, dtype=np.float64).reshape(len(queries), -1)
    ids = np.asarray(ids, dtype=np.int64)
    nq = queries.shape[0]
    kk = min(k, points.shape[0])
    out_ids = np.full((nq, k), -1, dtype=np.int64)
    out_d2 = np.full((nq, k), np.inf)
    for lo in range(0, nq, chunk):
        d2 = pairwise_dist2(points, queries[lo:lo + chunk])
        order = np.lexsort((np.broadcast_to(ids, d2.shape), d2), axis=-1)[:, :kk]
        out_ids[lo:lo + chunk, :kk] = ids[order]
        out_d2[lo:lo + chunk, :kk] = np.take_along_axis(d2, order, axis=1)
    return KnnResult(out_ids, out_d2, np.full(nq, kk, dtype=np.int64))


class MultisetOracle:
    """Replays inserts and coordinate-based erases on a plain dictionary."""

    def __init__(self):
        self.points: dict[int, tuple[float, ...]] = {}
        self._next_id = 0

    def insert(self, points) -> None:
        for p in np.asarray(points, dtype=np.float64):
            self.points[self._next_id] = tuple(p.tolist())
            self._next_id += 1

    def erase(self, points) -> int:
        doomed = {tuple(p) for p in np.asarray(points, dtype=np.float64).tolist()}
        gone = [i for i, p in self.points.items() if p in doomed]
        for i in gone:
            del self.points[i]
        return len(gone)

    def arrays(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        ids = np.fromiter(self.points.keys(), dtype=np.int64, count=len(self.points))
        pts = np.array(list(self.points.values()), dtype=np.float64).reshape(len(ids), dim)
        return pts, ids

    def __len__(self):
        return len(self.points)
