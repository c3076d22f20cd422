import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import multiset
from pkdtree.construct import build, flatten
from pkdtree.core import Box, Config, HeavyLeaf, Interior, Leaf, bounding_box, split_box, Splitter
from pkdtree.datagen import GenSpec, generate
from pkdtree.oracle import brute_knn, brute_range_count, brute_range_report
from pkdtree.query import KnnBuffer, QueryStats, knn, range_count, range_report
from pkdtree.tree import PkdTree

small_pts = st.lists(st.tuples(st.integers(-40, 40), st.integers(-40, 40), st.integers(-40, 40)), min_size=1, max_size=250)
tiny_cfg = Config(lam=2, sigma=4, phi=4, seq_cutoff=16)


def dists(result):
    return [d for d, _ in result]


# ------------------------------------------------------------------- buffer


def test_buffer_bounded_max_heap():
    buf = KnnBuffer(3)
    for d in (5, 1, 9, 3):
        buf.push(d, None)
    assert len(buf) == 3 and buf.worst() == 5
    assert not buf.push(5, None)  # ties with the maximum are rejected
    assert buf.push(2, None)
    assert [d for d, _ in buf.items()] == [1, 2, 3]
    with pytest.raises(ValueError):
        KnnBuffer(0)


# ---------------------------------------------------------------------- knn


def test_knn_self():
    t = build([[0, 0], [1, 1], [2, 2]])
    res = knn(t, [0, 0], 1)
    assert res[0][0] == 0 and res[0][1].tolist() == [0, 0]


def test_knn_k_exceeds_n():
    pts = np.array([[0, 0], [3, 4], [1, 0]])
    res = knn(build(pts), [0, 0], 10)
    assert dists(res) == [0, 1, 25]


def test_knn_errors_and_empty():
    with pytest.raises(ValueError):
        knn(build([[1, 1]]), [0, 0], 0)
    assert knn(None, [0, 0], 3) == []
    with pytest.raises(ValueError):
        knn(build([[1, 1]]), [0, 0, 0], 1)


def test_knn_against_oracle():
    rng = np.random.default_rng(5)
    pts = rng.integers(0, 10**6, (2000, 3))
    t = build(pts)
    for q in rng.integers(-10**5, 11 * 10**5, (100, 3)):
        for k in (1, 10, 100):
            assert dists(knn(t, q, k)) == dists(brute_knn(pts, q, k))


def test_knn_heavy_leaf():
    t = build(np.full((1000, 2), 3))
    res = knn(t, [3, 3], 3)
    assert dists(res) == [0, 0, 0]
    assert dists(knn(t, [0, 0], 2)) == [18, 18]


def test_knn_huge_coordinates_exact():
    big = 2**62
    pts = np.array([[-big, -big], [big, big], [0, 1], [5, -7]], dtype=np.int64)
    t = build(pts)
    for q in ([big, -big], [0, 0], [-big, big - 3]):
        assert dists(knn(t, q, 4)) == dists(brute_knn(pts, q, 4))
    assert dists(knn(t, [big, -big], 1))[0] == (big - 5) ** 2 + (-big + 7) ** 2


def test_knn_real_coordinates():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(3000, 4))
    t = build(pts)
    for q in rng.normal(size=(20, 4)):
        assert np.allclose(dists(knn(t, q, 7)), dists(brute_knn(pts, q, 7)), rtol=0, atol=1e-12)


@given(small_pts, st.tuples(st.integers(-60, 60), st.integers(-60, 60), st.integers(-60, 60)), st.integers(1, 30))
def test_knn_prune_soundness_and_prefix(pts, q, k):
    pts = np.array(pts)
    t = build(pts, tiny_cfg)
    a = dists(knn(t, q, k))
    assert a == dists(knn(t, q, k, prune=False))
    assert a == dists(brute_knn(pts, q, k))
    assert a == sorted(a)
    if k > 1:
        assert dists(knn(t, q, k - 1)) == a[: k - 1]


def test_knn_pruning_saves_work():
    pts = generate(GenSpec("uniform", 50_000, 3, 2))
    t = build(pts)
    full, pruned = QueryStats(), QueryStats()
    knn(t, pts[0], 10, prune=False, stats=full)
    knn(t, pts[0], 10, stats=pruned)
    assert pruned.nodes * 20 < full.nodes


# -------------------------------------------------------------------- range


def test_range_examples():
    pts = generate(GenSpec("uniform", 5000, 2, 4))
    t = build(pts)
    bb = bounding_box(t)
    assert range_count(t, bb) == 5000
    assert multiset(range_report(t, bb)) == multiset(pts)
    far = Box(np.array([-10, -10]), np.array([-1, -1]))
    assert range_count(t, far) == 0
    assert range_report(t, far).shape == (0, 2)


def test_range_is_closed():
    pts = np.array([[0, 0], [5, 5], [10, 10]])
    t = build(pts)
    assert range_count(t, Box(np.array([5, 5]), np.array([10, 10]))) == 2
    assert range_count(t, Box(np.array([5, 5]), np.array([5, 5]))) == 1


def test_range_heavy_leaf():
    t = build(np.full((500, 2), 7))
    b = Box(np.array([0, 0]), np.array([7, 7]))
    assert range_count(t, b) == 500 and len(range_report(t, b)) == 500


def test_range_rejects_empty_query():
    with pytest.raises(ValueError):
        range_count(build([[1, 1]]), Box.empty(2))


def test_range_against_oracle():
    rng = np.random.default_rng(9)
    pts = generate(GenSpec("varden", 10**4, 3, 9))
    t = build(pts)
    for _ in range(500):
        c = pts[rng.integers(len(pts))]
        w = rng.integers(0, 2 * 10**6, 3)
        b = Box(c - w, c + w)
        cnt = range_count(t, b)
        rep = range_report(t, b)
        assert cnt == brute_range_count(pts, b) == len(rep)
        assert multiset(rep) == multiset(brute_range_report(pts, b))


def test_range_report_parallel_fill():
    pts = generate(GenSpec("uniform", 100_000, 2, 1))
    t = build(pts)
    b = Box(np.array([0, 0]), np.array([6 * 10**8, 10**9]))
    from pkdtree.parallel import num_threads

    with num_threads(4):
        a = range_report(t, b, cutoff=1)
    assert multiset(a) == multiset(brute_range_report(pts, b))


@given(small_pts, st.tuples(st.integers(-50, 50), st.integers(-50, 50), st.integers(-50, 50)), st.tuples(st.integers(0, 60), st.integers(0, 60), st.integers(0, 60)))
def test_range_prune_soundness(pts, lo, size):
    pts = np.array(pts)
    t = build(pts, tiny_cfg)
    b = Box(np.array(lo), np.array(lo) + np.array(size))
    c = range_count(t, b)
    assert c == range_count(t, b, prune=False) == brute_range_count(pts, b)
    assert multiset(range_report(t, b)) == multiset(range_report(t, b, prune=False))
    assert len(range_report(t, b)) == c


@given(small_pts)
def test_subspaces_contain_their_points(pts):
    pts = np.array(pts)
    t = build(pts, tiny_cfg)
    stack = [(t, bounding_box(t))]
    while stack:
        node, box = stack.pop()
        for p in flatten(node):
            assert box.contains_point(p)
        if isinstance(node, Interior):
            left, right = split_box(box, Splitter(node.dim, node.coord))
            stack += [(node.left, left), (node.right, right)]


# ---------------------------------------------------------------- wrapper


def test_tree_wrapper_box_stays_valid_after_updates():
    t = PkdTree(generate(GenSpec("uniform", 20_000, 2, 3)))
    t.insert(np.array([[-5, -5], [2 * 10**9, 7]]))
    assert t.knn([-6, -6], 1)[0][1].tolist() == [-5, -5]
    t.delete(np.array([[-5, -5]]))
    b = Box(np.array([-10, -10]), np.array([0, 0]))
    assert t.range_count(b) == 0
    assert t.range_count(t.box) == len(t)
