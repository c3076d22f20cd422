import numpy as np
import pytest

from pkdtree.core import Box, Config, HeavyLeaf, Interior, Leaf
from pkdtree.datagen import GenSpec, gen_uniform, gen_varden, generate
from pkdtree.oracle import brute_knn, brute_range_count, brute_range_report, check_tree


# ------------------------------------------------------------------- oracle


def test_brute_knn_examples():
    res = brute_knn(np.array([[3, 4]]), [0, 0], 1)
    assert res[0][0] == 25 and res[0][1].tolist() == [3, 4]
    pts = np.array([[2, 0], [0, 1], [0, 0]])
    assert [d for d, _ in brute_knn(pts, [0, 0], 5)] == [0, 1, 4]


def test_brute_knn_ties_keep_input_order():
    pts = np.array([[1, 0], [0, 1], [-1, 0]])
    assert [p.tolist() for _, p in brute_knn(pts, [0, 0], 3)] == pts.tolist()


def test_brute_range():
    empty = np.empty((0, 2), np.int64)
    box = Box(np.array([0, 0]), np.array([5, 5]))
    assert brute_range_count(empty, box) == 0
    assert len(brute_range_report(empty, box)) == 0
    pts = np.array([[0, 0], [5, 5], [6, 0]])
    assert brute_range_count(pts, box) == 2
    assert brute_range_report(pts, box).tolist() == [[0, 0], [5, 5]]


def good_tree():
    return Interior(0, 5, 4, Leaf(np.array([[1, 0], [2, 0]])), Leaf(np.array([[5, 0], [9, 0]])))


def test_check_tree_accepts_valid():
    assert check_tree(good_tree(), Config(phi=2)) == []


def test_check_tree_size_fault():
    t = good_tree()
    t.size = 5
    v = check_tree(t, Config(phi=2))
    assert [x.kind for x in v] == ["size"]


def test_check_tree_kd_fault():
    t = Interior(0, 5, 4, Leaf(np.array([[1, 0], [5, 0]])), Leaf(np.array([[6, 0], [9, 0]])))
    assert [x.kind for x in check_tree(t, Config(phi=2))] == ["kd"]


def test_check_tree_deep_kd_fault():
    inner = Interior(1, 3, 2, Leaf(np.array([[1, 0]])), Leaf(np.array([[7, 4]])))
    t = Interior(0, 5, 3, inner, Leaf(np.array([[8, 8]])))
    v = check_tree(t, Config(phi=2), balance=False)
    assert [(x.kind, x.path) for x in v] == [("kd", ())]


def test_check_tree_leaf_and_heavy_faults():
    assert [x.kind for x in check_tree(Leaf(np.zeros((3, 2))), Config(phi=2))] == ["leaf"]
    assert [x.kind for x in check_tree(HeavyLeaf(np.array([1, 1]), 0))] == ["heavy"]


def test_check_tree_balance_audit():
    big = Leaf(np.arange(600).reshape(300, 2))
    small = Leaf(np.array([[1000, 1000]]))
    t = Interior(0, 1000, 301, big, small)
    kinds = [x.kind for x in check_tree(t, Config(phi=300))]
    assert kinds == ["balance"]
    assert check_tree(t, Config(phi=300), balance=False) == []


# ------------------------------------------------------------------ datagen


def test_spec_validation():
    for bad in (dict(n=-1), dict(dims=0), dict(restart_prob=0.0), dict(restart_prob=1.0), dict(dist="gauss")):
        with pytest.raises(ValueError):
            GenSpec(**bad)


@pytest.mark.parametrize("gen", [gen_uniform, gen_varden])
def test_empty_and_determinism(gen):
    assert gen(GenSpec(n=0)).shape == (0, 3)
    a = gen(GenSpec(n=5000, seed=3))
    assert a.tobytes() == gen(GenSpec(n=5000, seed=3)).tobytes()
    assert a.tobytes() != gen(GenSpec(n=5000, seed=4)).tobytes()


@pytest.mark.parametrize("dist", ["uniform", "varden"])
@pytest.mark.parametrize("real", [False, True])
def test_bounds_and_length(dist, real):
    spec = GenSpec(dist, 20_000, 4, 1, bounds=(-100, 100), restart_prob=0.01, real=real)
    pts = generate(spec)
    assert pts.shape == (20_000, 4)
    assert pts.min() >= -100 and pts.max() <= 100
    assert pts.dtype == (np.float64 if real else np.int64)


def test_varden_single_point():
    pts = gen_varden(GenSpec("varden", 1, 2, 8))
    assert pts.shape == (1, 2)


def test_uniform_mean():
    lo, hi = 0, 10**9
    pts = gen_uniform(GenSpec("uniform", 10**5, 3, 2, bounds=(lo, hi)))
    mid = (lo + hi) / 2
    assert np.all(np.abs(pts.mean(axis=0) - mid) <= 0.01 * mid)


def test_varden_is_clustered():
    from scipy.spatial import cKDTree

    n = 10**5
    med = {}
    for dist in ("uniform", "varden"):
        pts = generate(GenSpec(dist, n, 3, 6)).astype(np.float64)
        d, _ = cKDTree(pts).query(pts, k=2)
        med[dist] = np.median(d[:, 1])
    assert med["varden"] * 5 <= med["uniform"]
