import numpy as np
import pytest
from hypothesis import given, strategies as st

from pkdtree.core import (
    Box,
    BoxRelation,
    Config,
    HeavyLeaf,
    Interior,
    Leaf,
    Splitter,
    as_points,
    box_relation,
    split_box,
    squared_distance,
    structure_hash,
    tree_height,
    widest_dimension,
)


def B(lo, hi):
    return Box(np.array(lo), np.array(hi))


class TestWidestDimension:
    def test_examples(self):
        assert widest_dimension(B((0, 0), (10, 3))) == 0
        assert widest_dimension(B((0, 0, 0), (5, 5, 5))) == 0
        assert widest_dimension(B((-4, 2), (-1, 9))) == 1

    def test_empty_box(self):
        with pytest.raises(ValueError, match="degenerate box"):
            widest_dimension(Box.empty(2))

    def test_full_int64_range_does_not_overflow(self):
        big = np.iinfo(np.int64)
        box = B((big.min, 0), (big.max, 10))
        assert widest_dimension(box) == 0

    @given(
        st.lists(st.tuples(st.integers(-10**6, 10**6), st.integers(0, 10**6)), min_size=1, max_size=6),
        st.integers(-10**9, 10**9),
    )
    def test_translation_invariant(self, dims, shift):
        lo = np.array([a for a, _ in dims])
        hi = lo + np.array([w for _, w in dims])
        assert widest_dimension(Box(lo, hi)) == widest_dimension(Box(lo + shift, hi + shift))


class TestSplitBox:
    def test_interior_split(self):
        left, right = split_box(B((0, 0), (10, 10)), Splitter(0, 4))
        assert left == B((0, 0), (4, 10))
        assert right == B((4, 0), (10, 10))

    def test_symmetric_split(self):
        left, right = split_box(B((-5, -5), (5, 5)), Splitter(1, 0))
        assert left == B((-5, -5), (5, 0))
        assert right == B((-5, 0), (5, 5))

    def test_splitter_on_upper_boundary_keeps_right_side(self):
        # a point at y == 10 goes right, so the right side must stay non-empty
        left, right = split_box(B((0, 0), (10, 10)), Splitter(1, 10))
        assert left == B((0, 0), (10, 10))
        assert right == B((0, 10), (10, 10))

    def test_outside_splitters_flag_empty(self):
        left, right = split_box(B((0, 0), (10, 10)), Splitter(0, 11))
        assert right.is_empty and left == B((0, 0), (10, 10))
        left, right = split_box(B((0, 0), (10, 10)), Splitter(0, 0))
        assert left.is_empty and right == B((0, 0), (10, 10))

    @given(
        st.lists(st.tuples(st.integers(-100, 100), st.integers(-100, 100)), min_size=1, max_size=40),
        st.integers(0, 1),
        st.integers(-120, 120),
    )
    def test_halves_hold_their_points(self, pts, d, x):
        pts = np.array(pts)
        box = Box(pts.min(axis=0), pts.max(axis=0))
        left, right = split_box(box, Splitter(d, x))
        for p in pts:
            side = left if p[d] < x else right
            assert side.contains_point(p)


class TestBoxRelation:
    def test_examples(self):
        q = B((0, 0), (5, 5))
        assert box_relation(B((1, 1), (2, 2)), q) is BoxRelation.CONTAINED
        assert box_relation(B((6, 6), (9, 9)), q) is BoxRelation.DISJOINT
        assert box_relation(B((4, 4), (7, 7)), q) is BoxRelation.INTERSECTS

    def test_empty_node_box_is_disjoint(self):
        assert box_relation(Box.empty(2), B((0, 0), (1, 1))) is BoxRelation.DISJOINT

    def test_touching_counts_as_intersecting(self):
        assert box_relation(B((5, 5), (8, 8)), B((0, 0), (5, 5))) is BoxRelation.INTERSECTS


class TestSquaredDistance:
    def test_examples(self):
        assert squared_distance((0, 0), (3, 4)) == 25
        assert squared_distance((7, -2), (7, -2)) == 0
        assert squared_distance((1, 2, 3), (4, 6, 3)) == 25

    def test_mismatch(self):
        with pytest.raises(ValueError):
            squared_distance((0, 0), (0, 0, 0))

    def test_no_overflow_at_extremes(self):
        big = np.iinfo(np.int64)
        d = squared_distance(np.array([big.min, big.min]), np.array([big.max, big.max]))
        assert d == 2 * (2**64 - 1) ** 2


def test_box_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        B((1, 0), (0, 0))


def test_config_validation():
    Config(alpha=0.0)
    Config(alpha=0.5)
    for bad in (dict(alpha=0.6), dict(alpha=-0.1), dict(lam=0), dict(sigma=0), dict(phi=0), dict(phi=64, seq_cutoff=32)):
        with pytest.raises(ValueError):
            Config(**bad)
    cfg = Config()
    assert (cfg.n_buckets, cfg.chunk_size, cfg.sample_size) == (64, 64, 2048)


def test_as_points_rejects_ragged_and_mismatched():
    with pytest.raises(ValueError, match="mixed dimensions"):
        as_points([[1, 2], [3]])
    with pytest.raises(ValueError, match="dimension mismatch"):
        as_points([[1, 2]], dims=3)
    assert as_points([[1, 2]]).dtype == np.int64
    assert as_points([[1.5, 2]]).dtype == np.float64


def test_height_and_hash():
    leaf = Leaf(np.array([[0, 0]]))
    heavy = HeavyLeaf(np.array([5, 5]), 3)
    t = Interior(0, 3, 4, leaf, heavy)
    assert tree_height(None) == -1
    assert tree_height(leaf) == 0
    assert tree_height(t) == 1
    assert structure_hash(t) == structure_hash(Interior(0, 3, 4, Leaf(np.array([[0, 0]])), HeavyLeaf(np.array([5, 5]), 3)))
    assert structure_hash(t) != structure_hash(Interior(0, 3, 4, Leaf(np.array([[0, 0]])), HeavyLeaf(np.array([5, 5]), 4)))
