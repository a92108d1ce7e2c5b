import math
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bdltree import parprim
from bdltree.datagen_io import (
    GEN_CHUNK,
    DatasetKind,
    DatasetSpec,
    PointFileError,
    gen_uniform,
    gen_visualvar,
    read_points,
    write_points,
)
from bdltree.oracle import brute_knn


def test_uniform_examples():
    one = gen_uniform(1, 3, seed=9)
    assert one.shape == (1, 3) and ((0 <= one) & (one <= 1)).all()
    assert np.array_equal(gen_uniform(1000, 2, 5), gen_uniform(1000, 2, 5))
    assert not np.array_equal(gen_uniform(1000, 2, 5), gen_uniform(1000, 2, 6))
    with pytest.raises(ValueError):
        gen_uniform(0, 2)


def test_uniform_mean_within_clt_bound():
    n = 100_000
    pts = gen_uniform(n, 2, 1)
    side = math.sqrt(n)
    sigma = side / math.sqrt(12) / math.sqrt(n)
    assert (np.abs(pts.mean(axis=0) - side / 2) <= 3 * sigma).all()
    assert pts.min() >= 0 and pts.max() <= side


def test_multi_chunk_output_ignores_thread_count():
    old = parprim.get_num_threads()
    try:
        parprim.set_num_threads(1)
        a = gen_uniform(2 * GEN_CHUNK + 10, 2, 3), gen_visualvar(2 * GEN_CHUNK + 10, 2, 3)
        parprim.set_num_threads(4)
        b = gen_uniform(2 * GEN_CHUNK + 10, 2, 3), gen_visualvar(2 * GEN_CHUNK + 10, 2, 3)
    finally:
        parprim.set_num_threads(old)
    assert a[0].tobytes() == b[0].tobytes() and a[1].tobytes() == b[1].tobytes()


def test_visualvar_examples():
    still = gen_visualvar(50, 3, seed=2, step=0.0, p_jump=0.0)
    assert (still == still[0]).all()
    jumpy = gen_visualvar(20_000, 2, seed=2, p_jump=1.0)
    side = math.sqrt(20_000)
    sigma = side / math.sqrt(12) / math.sqrt(20_000)
    assert (np.abs(jumpy.mean(axis=0) - side / 2) <= 4 * sigma).all()
    with pytest.raises(ValueError):
        gen_visualvar(10, 2, p_jump=1.5)


def test_visualvar_is_clustered_compared_to_uniform():
    n = 5000
    walk = gen_visualvar(n, 2, seed=4)
    unif = gen_uniform(n, 2, seed=4)
    assert walk.min() >= 0 and walk.max() <= math.sqrt(n)

    def mean_nn(pts):
        res = brute_knn(pts, np.arange(n), pts[:1000], 2)
        return np.sqrt(res.dist2[:, 1]).mean()

    assert mean_nn(walk) < mean_nn(unif)


def test_visualvar_determinism():
    assert gen_visualvar(3000, 3, seed=1).tobytes() == gen_visualvar(3000, 3, seed=1).tobytes()


def test_dataset_spec(tmp_path):
    spec = DatasetSpec("uniform", 100, 2, seed=3)
    assert spec.kind is DatasetKind.UNIFORM and spec.describe() == "uniform-n100-d2-s3"
    path = tmp_path / "pts.bin"
    write_points(path, spec.load())
    assert np.array_equal(DatasetSpec("file", path=str(path)).load(), spec.load())
    with pytest.raises(ValueError):
        DatasetSpec("uniform", 0, 2)
    with pytest.raises(ValueError):
        DatasetSpec("file")


@given(arrays(np.float64, st.tuples(st.integers(1, 30), st.integers(1, 5)),
              elements=st.floats(allow_nan=False, allow_infinity=False)),
       st.sampled_from(["binary", "text"]))
def test_round_trip(tmp_path_factory, pts, fmt):
    path = tmp_path_factory.mktemp("rt") / f"p.{fmt}"
    write_points(path, pts, fmt)
    back = read_points(path)
    assert back.shape == pts.shape and back.tobytes() == pts.tobytes()


def test_binary_layout_is_exact(tmp_path):
    path = tmp_path / "p.bin"
    write_points(path, [[1.0, 2.0], [3.0, 4.0]])
    data = path.read_bytes()
    assert data[:4] == b"PKD1"
    assert struct.unpack("<IQ", data[4:16]) == (2, 2)
    assert struct.unpack("<4d", data[16:]) == (1.0, 2.0, 3.0, 4.0)


def test_text_example(tmp_path):
    path = tmp_path / "p.txt"
    path.write_text("1 2\n3 4\n")
    assert read_points(path).tolist() == [[1.0, 2.0], [3.0, 4.0]]


def test_truncated_binary_names_byte_counts(tmp_path):
    path = tmp_path / "p.bin"
    write_points(path, np.ones((3, 2)))
    path.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(PointFileError, match="expected 48 bytes.*found 43"):
        read_points(path)


@pytest.mark.parametrize(
    "text, match",
    [("1 2\n3\n", "row 2"), ("1 2\nx 4\n", "row 2"), ("1 2\n3 nan\n", "row 2: non-finite"), ("", "no points")],
)
def test_bad_text_files(tmp_path, text, match):
    path = tmp_path / "p.txt"
    path.write_text(text)
    with pytest.raises(PointFileError, match=match):
        read_points(path)


def test_binary_rejects_bad_header_and_nonfinite(tmp_path):
    path = tmp_path / "p.bin"
    path.write_bytes(b"PKD2" + bytes(12))
    with pytest.raises(PointFileError, match="magic"):
        read_points(path, "binary")
    write_points(path, np.array([[1.0], [np.inf]]))
    with pytest.raises(PointFileError, match="row 2"):
        read_points(path)
