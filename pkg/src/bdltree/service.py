"""HTTP service holding named in-memory indexes.

Each index is guarded by its own lock: updates need exclusive access and the
library's operations are internally parallel, so requests against one index
are serialised while different indexes proceed independently.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException

from . import __version__
from .bdl_tree import BdlTree
from .bench import make_index
from .schemas import CreateIndex, IndexInfo, KnnAnswer, KnnQuery, Neighbor, PointBatch, UpdateResult


@dataclass
class _Entry:
    spec: CreateIndex
    index: object
    lock: threading.Lock = field(default_factory=threading.Lock)

    def info(self) -> IndexInfo:
        out = IndexInfo(name=self.spec.name, dim=self.spec.dim, impl=self.spec.impl, split=self.spec.split,
                        live=self.index.live)
        if isinstance(self.index, BdlTree):
            st = self.index.stats()
            out.mask, out.slot_live, out.buffer_live = st.mask, st.slot_live, st.buffer_live
        return out


def _coords(points: list[list[float]], dim: int) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, dim)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise HTTPException(422, f"points must be {dim}-dimensional")
    if not np.isfinite(arr).all():
        raise HTTPException(422, "points must have finite coordinates")
    return arr


def create_app() -> FastAPI:
    app = FastAPI(title="bdltree", version=__version__)
    registry: dict[str, _Entry] = {}
    registry_lock = threading.Lock()

    def lookup(name: str) -> _Entry:
        with registry_lock:
            entry = registry.get(name)
        if entry is None:
            raise HTTPException(404, f"no index named {name!r}")
        return entry

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/indexes", status_code=201)
    def create(req: CreateIndex) -> IndexInfo:
        index = make_index(req.impl, req.split, req.buffer_size, req.dim)
        with registry_lock:
            if req.name in registry:
                raise HTTPException(409, f"index {req.name!r} already exists")
            entry = registry[req.name] = _Entry(req, index)
        return entry.info()

    @app.get("/indexes")
    def list_indexes() -> list[IndexInfo]:
        with registry_lock:
            entries = list(registry.values())
        return [e.info() for e in entries]

    @app.get("/indexes/{name}")
    def describe(name: str) -> IndexInfo:
        entry = lookup(name)
        with entry.lock:
            return entry.info()

    @app.delete("/indexes/{name}", status_code=204)
    def drop(name: str) -> None:
        with registry_lock:
            if registry.pop(name, None) is None:
                raise HTTPException(404, f"no index named {name!r}")

    @app.post("/indexes/{name}/insert")
    def insert(name: str, req: PointBatch) -> UpdateResult:
        entry = lookup(name)
        pts = _coords(req.points, entry.spec.dim)
        if req.ids is not None and len(req.ids) != pts.shape[0]:
            raise HTTPException(422, "ids and points differ in length")
        with entry.lock:
            entry.index.insert(pts, req.ids)
            return UpdateResult(name=name, count=pts.shape[0], live=entry.index.live)

    @app.post("/indexes/{name}/erase")
    def erase(name: str, req: PointBatch) -> UpdateResult:
        entry = lookup(name)
        pts = _coords(req.points, entry.spec.dim)
        with entry.lock:
            removed = entry.index.erase(pts)
            return UpdateResult(name=name, count=removed, live=entry.index.live)

    @app.post("/indexes/{name}/knn")
    def knn(name: str, req: KnnQuery) -> KnnAnswer:
        entry = lookup(name)
        q = _coords(req.queries, entry.spec.dim)
        with entry.lock:
            res = entry.index.knn(q, req.k)
        return KnnAnswer(k=req.k, neighbors=[[Neighbor(id=i, dist2=d) for i, d in res[j]] for j in range(len(res))])

    return app
