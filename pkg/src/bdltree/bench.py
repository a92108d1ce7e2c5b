"""Benchmark commands: construction, batch insert/delete, k-NN and the mixed workload.

Each command times ``warmup + runs`` repetitions of its body (setup such as
pre-building the structure is excluded), records the per-run seconds and
reports the median.  Non-timing columns (live count and an answer checksum)
depend only on the data, the seed and the flags.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .baselines import B1Tree, B2Tree
from .bdl_tree import BdlTree
from .oracle import brute_knn
from .parprim import set_num_threads
from .static_tree import Heuristic

IMPLS = ("bdl", "b1", "b2")
SECTIONS = ("INS0", "INS1", "INS2", "INS3", "DEL0", "DEL1", "DEL2")
VALIDATE_CAP = 50_000
BASE_COLUMNS = ("impl", "operation", "section", "dataset", "heuristic", "threads", "batch_size", "k",
                "n_runs", "warmup", "live_after", "checksum", "median_s")


class ValidationError(AssertionError):
    """A benchmark answer disagreed with the brute-force oracle."""


def make_index(impl: str, heuristic: Heuristic | str = Heuristic.OBJECT, buffer_size: int = 1024,
               dim: int | None = None):
    if impl == "bdl":
        return BdlTree(X=buffer_size, heuristic=heuristic, dim=dim)
    if impl == "b1":
        return B1Tree(heuristic=heuristic, dim=dim)
    if impl == "b2":
        return B2Tree(heuristic=heuristic, dim=dim)
    raise ValueError(f"unknown implementation {impl!r}; choose from {', '.join(IMPLS)}")


@dataclass
class BenchResult:
    impl: str
    operation: str
    dataset: str
    heuristic: str
    threads: int
    batch_size: int = 0
    k: int = 0
    runs: list[float] = field(default_factory=list)
    warmup: int = 0
    section: str = ""
    live_after: int = 0
    checksum: str = ""

    @property
    def median(self) -> float:
        return statistics.median(self.runs) if self.runs else math.nan

    def row(self) -> dict:
        out = {
            "impl": self.impl, "operation": self.operation, "section": self.section, "dataset": self.dataset,
            "heuristic": self.heuristic, "threads": self.threads, "batch_size": self.batch_size, "k": self.k,
            "n_runs": len(self.runs), "warmup": self.warmup, "live_after": self.live_after,
            "checksum": self.checksum, "median_s": repr(self.median),
        }
        for i, t in enumerate(self.runs, 1):
            out[f"run_{i}"] = repr(t)
        return out


def emit_csv(results: Iterable[BenchResult], path=None) -> str:
    """Write results as CSV (to ``path`` if given) and return the text."""
    results = list(results)
    width = max((len(r.runs) for r in results), default=0)
    columns = list(BASE_COLUMNS) + [f"run_{i}" for i in range(1, width + 1)]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, restval="", lineterminator="\n")
    writer.writeheader()
    for r in results:
        writer.writerow(r.row())
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as f:
            f.write(text)
    return text


def read_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def ids_checksum(index) -> str:
    _, ids = index.collect_live()
    return hashlib.sha256(np.sort(ids).tobytes()).hexdigest()[:16]


def _timed(setup: Callable, body: Callable, runs: int, warmup: int, threads: int):
    """Run ``body(setup())`` ``warmup + runs`` times; return timed seconds and the last output."""
    if runs < 1 or warmup < 0:
        raise ValueError("runs must be >= 1 and warmup >= 0")
    times, out = [], None
    for i in range(warmup + runs):
        set_num_threads(threads)
        state = setup()
        t0 = time.perf_counter()
        out = body(state)
        elapsed = time.perf_counter() - t0
        if i >= warmup:
            times.append(elapsed)
    return times, out


def _probe_queries(points: np.ndarray, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    count = max(1, min(count, points.shape[0]))
    return points[np.sort(rng.choice(points.shape[0], count, replace=False))]


def _validate(index, queries, k, cap, what):
    pts, ids = index.collect_live()
    if pts.shape[0] > cap:
        return
    got = index.knn(queries, k)
    want = brute_knn(pts, ids, queries, k)
    if got != want:
        raise ValidationError(f"{what}: k-NN disagrees with brute force")


@dataclass
class BenchConfig:
    impl: str = "bdl"
    heuristic: str = "object"
    threads: int = 1
    seed: int = 0
    runs: int = 3
    warmup: int = 1
    buffer_size: int = 1024
    validate: bool = False
    validate_cap: int = VALIDATE_CAP
    dataset: str = ""

    def result(self, operation: str, **kw) -> BenchResult:
        return BenchResult(self.impl, operation, self.dataset, Heuristic(self.heuristic).value, self.threads,
                           warmup=self.warmup, **kw)

    def new_index(self, dim):
        return make_index(self.impl, self.heuristic, self.buffer_size, dim)


def batch_sizes(n: int, batch_pct: float | None = None, batch_size: int | None = None) -> int:
    if batch_size is not None:
        if batch_size < 1:
            raise ValueError("batch size must be positive")
        return batch_size
    pct = 10.0 if batch_pct is None else batch_pct
    if not 0 < pct <= 100:
        raise ValueError("batch percentage must lie in (0, 100]")
    return max(1, math.ceil(n * pct / 100))


def _slices(n: int, size: int) -> list[slice]:
    return [slice(lo, min(n, lo + size)) for lo in range(0, n, size)]


def cmd_build(points: np.ndarray, cfg: BenchConfig, k: int = 5) -> BenchResult:
    """Time construction of the whole point set in one batch."""
    queries = _probe_queries(points, 100, cfg.seed)

    def body(index):
        index.insert(points, np.arange(points.shape[0]))
        return index

    times, index = _timed(lambda: cfg.new_index(points.shape[1]), body, cfg.runs, cfg.warmup, cfg.threads)
    if cfg.validate:
        _validate(index, queries, k, cfg.validate_cap, "build")
    return cfg.result("build", batch_size=points.shape[0], k=k, runs=times, live_after=index.live,
                      checksum=index.knn(queries, k).checksum())


def cmd_insert(points: np.ndarray, cfg: BenchConfig, batch_pct: float | None = None,
               batch_size: int | None = None, k: int = 5) -> BenchResult:
    """Time inserting the whole set from empty in consecutive batches."""
    n = points.shape[0]
    size = batch_sizes(n, batch_pct, batch_size)
    order = np.random.default_rng(cfg.seed).permutation(n)
    batches = [order[s] for s in _slices(n, size)]
    queries = _probe_queries(points, 100, cfg.seed)

    def body(index):
        for rows in batches:
            index.insert(points[rows], rows)
        return index

    times, index = _timed(lambda: cfg.new_index(points.shape[1]), body, cfg.runs, cfg.warmup, cfg.threads)
    if cfg.validate:
        _validate(index, queries, k, cfg.validate_cap, "insert")
    return cfg.result("insert", batch_size=size, k=k, runs=times, live_after=index.live,
                      checksum=index.knn(queries, k).checksum())


def cmd_delete(points: np.ndarray, cfg: BenchConfig, batch_pct: float | None = None,
               batch_size: int | None = None, total_pct: float = 100.0, k: int = 5) -> BenchResult:
    """Time deleting ``total_pct`` of a full structure in consecutive batches."""
    n = points.shape[0]
    size = batch_sizes(n, batch_pct, batch_size)
    order = np.random.default_rng(cfg.seed).permutation(n)
    doomed = order[: math.ceil(n * total_pct / 100)]
    batches = [points[doomed[s]] for s in _slices(doomed.shape[0], size)]
    queries = _probe_queries(points, 100, cfg.seed)

    def setup():
        index = cfg.new_index(points.shape[1])
        index.insert(points, np.arange(n))
        return index

    def body(index):
        for b in batches:
            index.erase(b)
        return index

    times, index = _timed(setup, body, cfg.runs, cfg.warmup, cfg.threads)
    if cfg.validate:
        _validate(index, queries, k, cfg.validate_cap, "delete")
    return cfg.result("delete", batch_size=size, k=k, runs=times, live_after=index.live,
                      checksum=index.knn(queries, k).checksum())


def cmd_knn(points: np.ndarray, cfg: BenchConfig, ks: Iterable[int] = (5,), query_pct: float = 10.0
            ) -> list[BenchResult]:
    """Time k-NN for a sample of the stored points, one row per ``k``."""
    n = points.shape[0]
    queries = _probe_queries(points, math.ceil(n * query_pct / 100), cfg.seed)
    set_num_threads(cfg.threads)
    index = cfg.new_index(points.shape[1])
    index.insert(points, np.arange(n))
    out = []
    for k in ks:
        if cfg.validate:
            _validate(index, queries, k, cfg.validate_cap, f"knn k={k}")
        times, res = _timed(lambda: index, lambda ix, k=k: ix.knn(queries, k), cfg.runs, cfg.warmup,
                            cfg.threads)
        out.append(cfg.result("knn", batch_size=queries.shape[0], k=k, runs=times, live_after=index.live,
                              checksum=res.checksum()))
    return out


def cmd_mixed(points: np.ndarray, cfg: BenchConfig, k: int = 5, query_pct: float = 10.0,
              step_pct: float = 5.0, per_section: int = 5) -> list[BenchResult]:
    """Interleaved workload: 20 inserts then 15 deletes of 5% each, k-NN after every 5 updates.

    Returns two rows per section (update time and k-NN time).
    """
    n = points.shape[0]
    size = max(1, math.ceil(n * step_pct / 100))
    order = np.random.default_rng(cfg.seed).permutation(n)
    ins = [order[s] for s in _slices(n, size)]
    del_order = np.random.default_rng(cfg.seed + 1).permutation(n)
    n_del = (len(SECTIONS) - 4) * per_section
    dels = [points[del_order[s]] for s in _slices(n, size)][:n_del]
    queries = _probe_queries(points, math.ceil(n * query_pct / 100), cfg.seed)
    plan = [("INS", ins[i * per_section:(i + 1) * per_section]) for i in range(4)]
    plan += [("DEL", dels[i * per_section:(i + 1) * per_section]) for i in range(3)]

    def body(index):
        rows = []
        for label, (kind, batches) in zip(SECTIONS, plan):
            t0 = time.perf_counter()
            for b in batches:
                if kind == "INS":
                    index.insert(points[b], b)
                else:
                    index.erase(b)
            t1 = time.perf_counter()
            res = index.knn(queries, k)
            t2 = time.perf_counter()
            if cfg.validate:
                _validate(index, queries, k, cfg.validate_cap, f"mixed {label}")
            rows.append((label, t1 - t0, t2 - t1, index.live, ids_checksum(index), res.checksum()))
        return rows

    per_run = []
    for i in range(cfg.warmup + cfg.runs):
        set_num_threads(cfg.threads)
        rows = body(cfg.new_index(points.shape[1]))
        if i >= cfg.warmup:
            per_run.append(rows)
    out = []
    for s, label in enumerate(SECTIONS):
        _, _, _, live, upd_sum, knn_sum = per_run[-1][s]
        out.append(cfg.result("mixed-update", section=label, batch_size=size, k=k,
                              runs=[r[s][1] for r in per_run], live_after=live, checksum=upd_sum))
        out.append(cfg.result("mixed-knn", section=label, batch_size=queries.shape[0], k=k,
                              runs=[r[s][2] for r in per_run], live_after=live, checksum=knn_sum))
    return out
