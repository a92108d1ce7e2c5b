"""Synthetic point sets and point-file reading/writing.

Random draws come from per-chunk ``SeedSequence(seed, spawn_key=(chunk,))``
streams, so chunks can be generated concurrently and the output depends only
on the seed and the parameters, never on the thread count.

Binary files are ``b"PKD1"``, ``<u4`` dimension, ``<u8`` count, then the
coordinates as row-major ``<f8``.  Text files hold one point per line as
whitespace-separated decimals; the dimension comes from the first line.
"""

from __future__ import annotations

import enum
import functools
import math
import os
import struct
from dataclasses import dataclass

import numpy as np
from numba import njit

from .parprim import fork_join

MAGIC = b"PKD1"
_HEADER = struct.Struct("<4sIQ")
GEN_CHUNK = 1 << 16


class PointFileError(ValueError):
    """A point file is malformed or holds non-finite values."""


class DatasetKind(str, enum.Enum):
    UNIFORM = "uniform"
    VISUALVAR = "visualvar"
    FILE = "file"


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def _chunked(n: int, draw) -> list:
    bounds = [(lo, min(n, lo + GEN_CHUNK)) for lo in range(0, n, GEN_CHUNK)]
    return fork_join([functools.partial(draw, c, hi - lo) for c, (lo, hi) in enumerate(bounds)])


def gen_uniform(n: int, d: int, seed: int = 0) -> np.ndarray:
    """``n`` points uniform in the cube ``[0, sqrt(n)]^d``; ids are row indices."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be at least 1")
    side = math.sqrt(n)
    parts = _chunked(n, lambda c, m: _chunk_rng(seed, c).random((m, d)) * side)
    return np.concatenate(parts)


@njit(cache=True, nogil=True)
def _walk(jump, target, steps, domain):
    n, d = target.shape
    out = np.empty((n, d))
    out[0] = target[0]
    for i in range(1, n):
        if jump[i]:
            out[i] = target[i]
        else:
            for c in range(d):
                v = out[i - 1, c] + steps[i, c]
                out[i, c] = min(max(v, 0.0), domain)
    return out


def gen_visualvar(n: int, d: int, seed: int = 0, step: float | None = None, p_jump: float = 0.01,
                  domain: float | None = None) -> np.ndarray:
    """A clamped random walk in ``[0, domain]^d`` that teleports with probability ``p_jump``.

    Defaults: ``domain = sqrt(n)`` (same cube as :func:`gen_uniform`) and
    ``step = domain / 1000``.  The walk starts at a uniform random point.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be at least 1")
    if not 0.0 <= p_jump <= 1.0:
        raise ValueError("p_jump must lie in [0, 1]")
    domain = math.sqrt(n) if domain is None else float(domain)
    step = domain / 1000 if step is None else float(step)
    if domain <= 0 or step < 0:
        raise ValueError("domain must be positive and step non-negative")

    def draw(c, m):
        rng = _chunk_rng(seed, c)
        return rng.random(m) < p_jump, rng.random((m, d)) * domain, rng.uniform(-step, step, (m, d))

    parts = _chunked(n, draw)
    jump = np.concatenate([p[0] for p in parts])
    target = np.concatenate([p[1] for p in parts])
    steps = np.concatenate([p[2] for p in parts])
    return _walk(jump, target, steps, domain)


@dataclass(frozen=True)
class DatasetSpec:
    kind: DatasetKind
    n: int = 0
    d: int = 0
    seed: int = 0
    step: float | None = None
    p_jump: float = 0.01
    domain: float | None = None
    path: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", DatasetKind(self.kind))
        if self.kind is DatasetKind.FILE:
            if not self.path:
                raise ValueError("a file dataset needs a path")
        elif self.n < 1 or self.d < 1:
            raise ValueError("n and d must be at least 1")

    def load(self) -> np.ndarray:
        if self.kind is DatasetKind.UNIFORM:
            return gen_uniform(self.n, self.d, self.seed)
        if self.kind is DatasetKind.VISUALVAR:
            return gen_visualvar(self.n, self.d, self.seed, self.step, self.p_jump, self.domain)
        return read_points(self.path)

    def describe(self) -> str:
        if self.kind is DatasetKind.FILE:
            return os.path.basename(self.path)
        return f"{self.kind.value}-n{self.n}-d{self.d}-s{self.seed}"


# --------------------------------------------------------------------------
# files


def _check_finite(pts: np.ndarray) -> None:
    bad = ~np.isfinite(pts).all(axis=1)
    if bad.any():
        row = int(np.argmax(bad))
        raise PointFileError(f"row {row + 1}: non-finite coordinate")


def write_points(path, points, format: str = "binary") -> None:
    pts = np.ascontiguousarray(points, dtype="<f8")
    if pts.ndim != 2:
        raise ValueError(f"expected a 2-D array of points, got shape {pts.shape}")
    if format == "binary":
        with open(path, "wb") as f:
            f.write(_HEADER.pack(MAGIC, pts.shape[1], pts.shape[0]))
            f.write(pts.tobytes())
    elif format == "text":
        np.savetxt(path, pts, fmt="%.17g")
    else:
        raise ValueError(f"unknown point file format {format!r}")


def read_points(path, format: str | None = None) -> np.ndarray:
    """Read a point file; the format is sniffed from the magic bytes if not given."""
    if format is None:
        with open(path, "rb") as f:
            format = "binary" if f.read(4) == MAGIC else "text"
    if format == "binary":
        return _read_binary(path)
    if format == "text":
        return _read_text(path)
    raise ValueError(f"unknown point file format {format!r}")


def _read_binary(path) -> np.ndarray:
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise PointFileError(f"header: expected {_HEADER.size} bytes, found {len(head)}")
        magic, d, n = _HEADER.unpack(head)
        if magic != MAGIC:
            raise PointFileError(f"header: bad magic {magic!r}")
        if d < 1:
            raise PointFileError("header: dimension must be at least 1")
        payload = f.read()
    expected = 8 * n * d
    if len(payload) != expected:
        raise PointFileError(f"payload: expected {expected} bytes for {n}x{d} points, found {len(payload)}")
    pts = np.frombuffer(payload, dtype="<f8").reshape(n, d).astype(np.float64)
    _check_finite(pts)
    return pts


def _read_text(path) -> np.ndarray:
    rows: list[list[float]] = []
    d = None
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            fields = line.split()
            if not fields:
                continue
            try:
                row = [float(x) for x in fields]
            except ValueError as exc:
                raise PointFileError(f"row {lineno}: {exc}") from None
            if d is None:
                d = len(row)
            elif len(row) != d:
                raise PointFileError(f"row {lineno}: expected {d} values, found {len(row)}")
            if not all(math.isfinite(x) for x in row):
                raise PointFileError(f"row {lineno}: non-finite coordinate")
            rows.append(row)
    if d is None:
        raise PointFileError("no points in file")
    return np.array(rows, dtype=np.float64)
