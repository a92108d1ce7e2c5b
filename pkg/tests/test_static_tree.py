import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bdltree.knnbuf import KnnBuffer
from bdltree.oracle import brute_knn
from bdltree.static_tree import (
    INTERNAL,
    LEAF,
    LEAF_CAP,
    Heuristic,
    StaticTree,
    build_heap,
    build_veb,
    choose_split,
    collect_live,
    erase_batch,
    hyperceiling,
    knn_single,
    veb_order,
)
from treecheck import check_tree, internal_nodes, sorted_rows

HEURISTICS = [Heuristic.OBJECT, Heuristic.SPATIAL]


def veb_address(h, levels):
    """Independent vEB position of 1-based heap node ``h`` in a complete tree."""
    if levels == 1:
        return 0
    half = -(-levels // 2)
    bottom = 1
    while bottom < half:
        bottom *= 2
    top = levels - bottom
    depth = h.bit_length() - 1
    if depth < top:
        return veb_address(h, top)
    below = depth - top
    j = (h >> below) - (1 << top)
    sub = (1 << below) | (h & ((1 << below) - 1))
    return (1 << top) - 1 + j * ((1 << bottom) - 1) + veb_address(sub, bottom)


def walk_heap_positions(tree):
    """(node index, heap position) for every reachable node."""
    out, stack = [], [(tree.root, 1)]
    while stack:
        node, h = stack.pop()
        out.append((int(node), h))
        if tree.kind[node] == INTERNAL:
            stack += [(tree.left[node], 2 * h), (tree.right[node], 2 * h + 1)]
    return out


# -- layout -------------------------------------------------------------------


def test_hyperceiling_examples():
    assert [hyperceiling(n) for n in (1, 2, 5)] == [1, 2, 8]
    assert hyperceiling(1024) == 1024 and hyperceiling(1025) == 2048
    with pytest.raises(ValueError):
        hyperceiling(0)


def test_trace_bottom_offsets(rng):
    tree = build_veb(rng.random((8, 2)), leaf_cap=1)
    assert tree.levels == 4
    assert sorted([tree.left[1], tree.right[1], tree.left[2], tree.right[2]]) == [3, 6, 9, 12]
    assert (tree.left[0], tree.right[0]) == (1, 2)


@pytest.mark.parametrize("heuristic", HEURISTICS)
def test_veb_positions_match_address_oracle(heuristic, rng):
    for n in range(1, 65):
        tree = build_veb(rng.random((n, 2)), heuristic=heuristic, leaf_cap=1)
        levels = n.bit_length()
        assert tree.levels == levels and tree.n_nodes == 2**levels - 1 <= 2 * n - 1
        seen = walk_heap_positions(tree)
        for node, h in seen:
            assert node == veb_address(h, levels), (n, h)
        if heuristic is Heuristic.OBJECT:
            assert len(seen) == tree.n_nodes


def test_veb_order_table_matches_oracle():
    for levels in range(1, 11):
        order = veb_order(levels)
        assert [int(order[h]) for h in range(1, 2**levels)] == [veb_address(h, levels) for h in range(1, 2**levels)]


def test_large_veb_layout_matches_oracle(rng):
    # big enough for the parallel driver and the compiled bottoms to both run
    tree = build_veb(rng.random((40_000, 3)))
    for node, h in walk_heap_positions(tree):
        assert node == veb_address(h, tree.levels)


def test_single_point_is_a_leaf():
    tree = build_veb([[1.0, 2.0]])
    assert tree.root == 0 and tree.kind[0] == LEAF and tree.live == 1


def test_empty_build_is_sentinel():
    tree = build_veb(np.empty((0, 3)), dim=3)
    assert tree.root == -1 and tree.live == 0 and tree.knn([[0.0, 0.0, 0.0]], 2).counts.tolist() == [0]


def test_object_median_balance(rng):
    tree = build_veb(rng.random((10_000, 3)))
    for node, left, right in internal_nodes(tree):
        assert abs(tree.live_count[left] - tree.live_count[right]) <= LEAF_CAP
    leaves = tree.leaves()
    assert LEAF_CAP <= tree.live_count[leaves].min() and tree.live_count[leaves].max() <= 2 * LEAF_CAP
    check_tree(tree)


def test_heap_layout_examples(rng):
    tree = build_heap(rng.random((2, 2)), leaf_cap=1)
    assert tree.root == 0 and (tree.left[0], tree.right[0]) == (1, 2)
    big = build_heap(rng.random((5000, 3)))
    for node, left, right in internal_nodes(big):
        assert (left, right) == (2 * node + 1, 2 * node + 2)
    buf = build_heap(rng.random((1024, 3)))
    assert buf.live == 1024 and buf.n_nodes == 127
    check_tree(buf)


@pytest.mark.parametrize("heuristic", HEURISTICS)
def test_layouts_give_identical_knn(heuristic, rng):
    pts = rng.random((3000, 3))
    q = rng.random((100, 3))
    assert build_veb(pts, heuristic=heuristic).knn(q, 7) == build_heap(pts, heuristic=heuristic).knn(q, 7)


# -- splits -------------------------------------------------------------------


def test_choose_split_examples():
    s = choose_split([[1.0, 1.0], [3.0, 3.0]], 0, "spatial")
    assert s.value == 2.0 and s.index == 1
    s = choose_split([[3.0], [1.0], [2.0]], 0, "object")
    assert s.index == 2 and sorted(s.points[:2, 0]) == [1.0, 2.0]
    s = choose_split([[1.0, 5.0], [1.0, 7.0], [1.0, 9.0]], 0, "spatial")
    assert s.dim == 1 and s.value == 7.0  # dimension 0 is degenerate
    s = choose_split([[2.0, 2.0]] * 4, 1, "spatial")
    assert s.index == 4  # nothing to split: one leaf keeps them all
    with pytest.raises(ValueError):
        choose_split([[1.0]], 0, "object")


def test_identical_points_make_one_leaf():
    tree = build_veb(np.ones((100, 2)), heuristic="spatial")
    assert tree.kind[tree.root] == LEAF and tree.live == 100
    assert tree.knn([[1.0, 1.0]], 3).ids.tolist() == [[0, 1, 2]]
    assert tree.erase([[1.0, 1.0]]) == 100 and tree.root == -1


# -- k-NN ---------------------------------------------------------------------


@pytest.mark.parametrize("heuristic", HEURISTICS)
def test_knn_matches_brute_force(heuristic, rng):
    pts = rng.random((10_000, 3))
    q = np.concatenate([rng.random((50, 3)), pts[:50]])
    tree = build_veb(pts, heuristic=heuristic)
    for k in (1, 5, 11):
        assert tree.knn(q, k) == brute_knn(pts, np.arange(10_000), q, k)


def test_knn_small_cases(rng):
    tree = build_veb([[3.0, 4.0]])
    assert tree.knn([[0.0, 0.0]], 3)[0] == [(0, 25.0)]
    pts = rng.random((40, 2))
    res = build_veb(pts).knn([[0.5, 0.5]], 40)
    assert sorted(i for i, _ in res[0]) == list(range(40))


def test_knn_single_merges_into_existing_buffer(rng):
    a, b = rng.random((500, 2)), rng.random((500, 2))
    ta = build_veb(a)
    tb = build_veb(b, ids=np.arange(500, 1000))
    buf = KnnBuffer(6)
    knn_single(ta, [0.3, 0.3], buf)
    knn_single(tb, [0.3, 0.3], buf)
    want = brute_knn(np.concatenate([a, b]), np.arange(1000), [[0.3, 0.3]], 6)[0]
    assert buf.finalize() == want


def test_duplicates_and_ties(rng):
    pts = rng.integers(0, 4, (2000, 2)).astype(float)  # many exact duplicates and distance ties
    q = rng.integers(0, 4, (60, 2)).astype(float)
    for heuristic in HEURISTICS:
        assert build_veb(pts, heuristic=heuristic).knn(q, 9) == brute_knn(pts, np.arange(2000), q, 9)


# -- erase / collect ----------------------------------------------------------


def test_erase_examples(rng):
    pts = rng.random((3000, 2))
    tree = build_veb(pts)
    before = tree.kind.copy()
    assert erase_batch(tree, np.empty((0, 2))) == 0
    np.testing.assert_array_equal(tree.kind, before)
    assert erase_batch(tree, pts) == 3000
    assert tree.live == 0 and tree.root == -1


@pytest.mark.parametrize("heuristic", HEURISTICS)
def test_erase_half_then_knn(heuristic, rng):
    pts = rng.random((10_000, 3))
    tree = build_veb(pts, heuristic=heuristic)
    gone = rng.permutation(10_000)[:5000]
    assert tree.erase(pts[gone]) == 5000
    keep = np.setdiff1d(np.arange(10_000), gone)
    check_tree(tree)
    q = rng.random((100, 3))
    assert tree.knn(q, 5) == brute_knn(pts[keep], keep, q, 5)
    coords, ids = collect_live(tree)
    assert np.array_equal(np.sort(ids), keep) and coords.shape[0] == tree.live


def test_large_batch_erase_uses_parallel_driver(rng):
    pts = rng.random((20_000, 2))
    tree = build_veb(pts)
    absent = rng.random((3000, 2)) + 5.0
    assert tree.erase(np.concatenate([pts[:6000], absent])) == 6000
    check_tree(tree)
    _, ids = tree.collect_live()
    assert np.array_equal(np.sort(ids), np.arange(6000, 20_000))


def test_collect_live_round_trip(rng):
    pts = rng.random((777, 4))
    tree = build_veb(pts)
    coords, ids = tree.collect_live()
    assert np.array_equal(sorted_rows(coords), sorted_rows(pts))
    assert np.array_equal(pts[ids], coords)


grid_points = st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=120)


@given(grid_points, grid_points, st.sampled_from(["object", "spatial"]), st.sampled_from([1, 2, 16]))
def test_erase_is_sound_and_complete(stored, batch, heuristic, leaf_cap):
    pts = np.array(stored, dtype=float)
    tree = StaticTree.build(pts, heuristic=heuristic, leaf_cap=leaf_cap)
    removed = tree.erase(np.array(batch, dtype=float))
    doomed = set(batch)
    survivors = [i for i, p in enumerate(stored) if p not in doomed]
    assert removed == len(stored) - len(survivors)
    _, ids = tree.collect_live()
    assert sorted(ids.tolist()) == survivors
    check_tree(tree)


@given(st.lists(st.integers(0, 200), min_size=1, max_size=8), st.sampled_from(["object", "spatial"]))
def test_repeated_erases_keep_invariants(cuts, heuristic):
    rng = np.random.default_rng(sum(cuts))
    pts = rng.integers(0, 30, (300, 2)).astype(float)
    tree = StaticTree.build(pts, heuristic=heuristic, leaf_cap=4)
    alive = np.ones(300, bool)
    for c in cuts:
        batch = pts[rng.permutation(300)[: c % 60]]
        tree.erase(batch)
        alive &= ~(pts[:, None, :] == batch[None]).all(-1).any(-1) if batch.size else True
        check_tree(tree)
        assert tree.live == alive.sum()
    if tree.live:
        q = rng.integers(0, 30, (10, 2)).astype(float)
        assert tree.knn(q, 4) == brute_knn(pts[alive], np.flatnonzero(alive), q, 4)


def test_bloom_prefilter_does_not_change_results(rng):
    pts = rng.random((5000, 2))
    a, b = build_veb(pts), build_veb(pts)
    batch = np.concatenate([pts[::3], rng.random((500, 2))])
    assert a.erase(batch, use_bloom=True) == b.erase(batch) == len(pts[::3])
    np.testing.assert_array_equal(a.alive, b.alive)
    assert a.root == b.root
    assert a.bloom is not None and b.bloom is None


def test_depth_is_logarithmic(rng):
    tree = build_veb(rng.random((50_000, 2)))
    assert tree.levels == math.floor(math.log2(math.ceil(50_000 / LEAF_CAP))) + 1
