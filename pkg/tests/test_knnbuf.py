import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bdltree.knnbuf import KnnBuffer, KnnBuffers


def _oracle(pairs, k):
    return sorted(pairs, key=lambda p: (p[1], p[0]))[:k]


def test_examples():
    buf = KnnBuffer(1)
    buf.insert(0, 5.0)
    buf.insert(1, 3.0)
    assert buf.finalize() == [(1, 3.0)]

    buf = KnnBuffer(2)
    for i, d in enumerate([9.0, 1.0, 4.0, 7.0]):
        buf.insert(i, d)
    assert sorted(d for _, d in buf.finalize()) == [1.0, 4.0]

    buf = KnnBuffer(3)
    buf.insert(0, 1.0)
    buf.insert(1, 2.0)
    assert buf.bound == math.inf


def test_finalize_examples(rng):
    assert KnnBuffer(4).finalize() == []
    buf = KnnBuffer(5)
    pairs = [(i, float(d)) for i, d in enumerate(rng.random(1000))]
    for i, d in pairs:
        buf.insert(i, d)
    assert buf.finalize() == _oracle(pairs, 5)
    buf = KnnBuffer(3)
    for i in (9, 4, 7, 1):
        buf.insert(i, 2.0)
    assert buf.finalize() == [(1, 2.0), (4, 2.0), (7, 2.0)]


def test_rejects_negative_distance():
    with pytest.raises(ValueError):
        KnnBuffer(2).insert(0, -1.0)
    with pytest.raises(ValueError):
        KnnBuffer(0)


@given(st.integers(1, 12), st.lists(st.integers(0, 40), max_size=200))
def test_finalize_matches_sort_oracle(k, dists):
    # small integer distances force plenty of ties
    pairs = [(i, float(d)) for i, d in enumerate(dists)]
    buf = KnnBuffer(k)
    for i, d in pairs:
        buf.insert(i, d)
        assert buf.count <= 2 * k
    assert buf.finalize() == _oracle(pairs, k)


@given(st.integers(1, 8), st.lists(st.floats(0, 100), max_size=150))
def test_bound_tracks_kth_smallest_and_never_grows(k, dists):
    buf = KnnBuffer(k)
    seen, last = [], math.inf
    for i, d in enumerate(dists):
        buf.insert(i, d)
        seen.append(d)
        if len(seen) < k:
            assert buf.bound == math.inf
        else:
            assert buf.bound == sorted(seen)[k - 1]
        assert buf.bound <= last
        assert buf.threshold >= buf.bound
        last = buf.bound


@given(st.integers(1, 10), st.integers(0, 3000))
def test_compactions_amortised(k, m):
    buf = KnnBuffer(k)
    buf.insert_many(np.arange(m), np.arange(m, 0, -1, dtype=np.float64))  # every insert is accepted
    assert buf.compactions <= math.ceil(m / k) + 1


def test_batch_buffers_pad_short_rows():
    bufs = KnnBuffers(2, 3)
    res = bufs.finalize()
    assert res.ids.tolist() == [[-1, -1, -1]] * 2
    assert np.isinf(res.dist2).all() and res.counts.tolist() == [0, 0]
