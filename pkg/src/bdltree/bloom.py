"""Bloom filter over point coordinates.

Keys are the little-endian bytes of the coordinates (ids are ignored), so any
two coordinate-equal points hash alike.  ``-0.0`` is folded to ``+0.0`` first
because the two compare equal but differ in their bytes.  Probe ``i`` is
``h1 + i*h2 mod m`` from two seeded 64-bit hashes.

Parallel construction gives every thread a private bit array and ORs them
together afterwards, so no bit-set is lost and the result is bitwise identical
to a serial build.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

from .geometry import as_coords

DEFAULT_BITS_PER_KEY = 10
DEFAULT_HASHES = 7

_SEED1 = np.uint64(0x9E3779B97F4A7C15)
_SEED2 = np.uint64(0xC2B2AE3D27D4EB4F)


@njit(cache=True, nogil=True)
def _mix64(x):
    x ^= x >> np.uint64(30)
    x *= np.uint64(0xBF58476D1CE4E5B9)
    x ^= x >> np.uint64(27)
    x *= np.uint64(0x94D049BB133111EB)
    x ^= x >> np.uint64(31)
    return x


@njit(cache=True, nogil=True)
def _hash_key(words, seed):
    h = seed ^ np.uint64(words.shape[0])
    for w in words:
        h = _mix64(h ^ w) * np.uint64(0x100000001B3)
    return _mix64(h)


@njit(cache=True, nogil=True)
def _set_bits(bits, keys, lo, hi, m, h):
    for i in range(lo, hi):
        h1 = _hash_key(keys[i], _SEED1)
        h2 = _hash_key(keys[i], _SEED2)
        for j in range(h):
            b = (h1 + np.uint64(j) * h2) % m
            bits[b >> np.uint64(6)] |= np.uint64(1) << (b & np.uint64(63))


@njit(cache=True, nogil=True)
def _build_serial(keys, nwords, h):
    bits = np.zeros(nwords, dtype=np.uint64)
    _set_bits(bits, keys, 0, keys.shape[0], np.uint64(nwords * 64), h)
    return bits


@njit(cache=True, parallel=True)
def _build_parallel(keys, nwords, h, nchunks):
    n = keys.shape[0]
    m = np.uint64(nwords * 64)
    private = np.zeros((nchunks, nwords), dtype=np.uint64)
    step = (n + nchunks - 1) // nchunks
    for c in prange(nchunks):
        _set_bits(private[c], keys, c * step, min(n, (c + 1) * step), m, h)
    bits = np.zeros(nwords, dtype=np.uint64)
    for w in prange(nwords):
        acc = np.uint64(0)
        for c in range(nchunks):
            acc |= private[c, w]
        bits[w] = acc
    return bits


@njit(cache=True, parallel=True)
def _contains_many(bits, keys, h):
    m = np.uint64(bits.shape[0] * 64)
    out = np.empty(keys.shape[0], dtype=np.bool_)
    for i in prange(keys.shape[0]):
        h1 = _hash_key(keys[i], _SEED1)
        h2 = _hash_key(keys[i], _SEED2)
        hit = True
        for j in range(h):
            b = (h1 + np.uint64(j) * h2) % m
            if (bits[b >> np.uint64(6)] >> (b & np.uint64(63))) & np.uint64(1) == 0:
                hit = False
                break
        out[i] = hit
    return out


def key_words(coords: np.ndarray) -> np.ndarray:
    """Canonical 64-bit words of each point's little-endian coordinates."""
    canon = np.ascontiguousarray(coords, dtype="<f8") + 0.0  # -0.0 + 0.0 == +0.0
    return canon.view("<u8")


class BloomFilter:
    def __init__(self, bits: np.ndarray, n_hashes: int, n_keys: int, dim: int):
        self.bits = bits
        self.n_hashes = n_hashes
        self.n_keys = n_keys
        self.dim = dim

    @property
    def n_bits(self) -> int:
        return self.bits.shape[0] * 64

    @classmethod
    def build(
        cls,
        points,
        bits_per_key: int = DEFAULT_BITS_PER_KEY,
        n_hashes: int = DEFAULT_HASHES,
        parallel: bool = True,
        dim: int | None = None,
    ) -> "BloomFilter":
        if bits_per_key < 1 or n_hashes < 1:
            raise ValueError("bits_per_key and n_hashes must be positive")
        coords = as_coords(points, dim)
        n = coords.shape[0]
        dim = coords.shape[1] if n else (dim or 0)
        nwords = max(1, math.ceil(bits_per_key * n / 64))
        if n == 0:
            return cls(np.zeros(nwords, dtype=np.uint64), n_hashes, 0, dim)
        keys = key_words(coords)
        from .parprim import SERIAL_CUTOFF, get_num_threads

        threads = get_num_threads()
        if parallel and threads > 1 and n >= SERIAL_CUTOFF:
            bits = _build_parallel(keys, nwords, n_hashes, threads)
        else:
            bits = _build_serial(keys, nwords, n_hashes)
        return cls(bits, n_hashes, n, dim)

    def maybe_contains_many(self, points) -> np.ndarray:
        coords = as_coords(points, self.dim or None)
        if coords.shape[0] == 0:
            return np.zeros(0, dtype=bool)
        if self.n_keys == 0:
            return np.zeros(coords.shape[0], dtype=bool)
        return _contains_many(self.bits, key_words(coords), self.n_hashes)

    def maybe_contains(self, point) -> bool:
        return bool(self.maybe_contains_many([np.asarray(point, dtype=np.float64)])[0])

    def __contains__(self, point) -> bool:
        return self.maybe_contains(point)

    def theoretical_fp_rate(self) -> float:
        """The textbook estimate ``(1 - exp(-h n / m))^h``."""
        h, n, m = self.n_hashes, self.n_keys, self.n_bits
        return (1.0 - math.exp(-h * n / m)) ** h
