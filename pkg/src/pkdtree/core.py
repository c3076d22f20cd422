"""Shared domain types: points, boxes, splitters, tree nodes and configuration.

Points are rows of a 2-D numpy array of shape ``(n, D)``; a single point is
a 1-D array of length ``D``.  Two coordinate types are supported: signed
64-bit integers (``int64``) and 64-bit reals (``float64``).

Splitting convention: a point ``p`` belongs to the left child of a node with
splitter ``(d, x)`` iff ``p[d] < x``; ties go right.
"""

from __future__ import annotations

import enum
import hashlib
import math
import struct
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

__all__ = [
    "COORD_DTYPES",
    "Config",
    "Splitter",
    "Box",
    "BoxRelation",
    "Interior",
    "Leaf",
    "HeavyLeaf",
    "TreeNode",
    "as_points",
    "as_point",
    "widest_dimension",
    "split_box",
    "box_relation",
    "squared_distance",
    "bounding_box",
    "tree_height",
    "tree_dims",
    "iter_nodes",
    "structure_hash",
]

COORD_DTYPES = (np.dtype(np.int64), np.dtype(np.float64))


@dataclass(frozen=True)
class Config:
    """Tunables for construction and rebalancing.

    ``lam`` is the skeleton height (levels built per sieve round), ``sigma``
    the oversampling rate, ``alpha`` the weight-balance slack, ``phi`` the
    leaf wrap and ``seq_cutoff`` the size under which work stays sequential.
    """

    lam: int = 6
    sigma: int = 32
    alpha: float = 0.3
    phi: int = 32
    seq_cutoff: int = 1024
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 0.5:
            raise ValueError(f"alpha must lie in [0, 0.5], got {self.alpha}")
        if self.lam < 1:
            raise ValueError("lam must be >= 1")
        if self.sigma < 1:
            raise ValueError("sigma must be >= 1")
        if self.phi < 1:
            raise ValueError("phi must be >= 1")
        if self.seq_cutoff < self.phi:
            raise ValueError("seq_cutoff must be >= phi")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @property
    def n_buckets(self) -> int:
        return 1 << self.lam

    @property
    def chunk_size(self) -> int:
        return 1 << self.lam

    @property
    def sample_size(self) -> int:
        return (1 << self.lam) * self.sigma


class Splitter(NamedTuple):
    dim: int
    coord: Union[int, float]


class BoxRelation(enum.Enum):
    DISJOINT = 0
    INTERSECTS = 1
    CONTAINED = 2


class Box:
    """Closed axis-aligned box ``[lo, hi]``, or the distinguished empty box."""

    __slots__ = ("lo", "hi", "is_empty")

    def __init__(self, lo, hi, *, empty: bool = False):
        lo = np.asarray(lo)
        hi = np.asarray(hi)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lo and hi must be 1-D arrays of equal length")
        if not empty and np.any(lo > hi):
            raise ValueError("inverted bounds; use Box.empty() for empty boxes")
        self.lo = lo
        self.hi = hi
        self.is_empty = empty

    @classmethod
    def empty(cls, dims: int, dtype=np.int64) -> "Box":
        z = np.zeros(dims, dtype=dtype)
        return cls(z, z.copy(), empty=True)

    @property
    def dims(self) -> int:
        return len(self.lo)

    def contains_point(self, p) -> bool:
        if self.is_empty:
            return False
        return bool(np.all(self.lo <= p) and np.all(p <= self.hi))

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        if self.is_empty or other.is_empty:
            return self.is_empty and other.is_empty and self.dims == other.dims
        return bool(np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi))

    def __repr__(self):
        if self.is_empty:
            return f"Box.empty({self.dims})"
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


class Interior:
    __slots__ = ("dim", "coord", "size", "left", "right")

    def __init__(self, dim: int, coord, size: int, left: "TreeNode", right: "TreeNode"):
        self.dim = dim
        self.coord = coord
        self.size = size
        self.left = left
        self.right = right

    @property
    def splitter(self) -> Splitter:
        return Splitter(self.dim, self.coord)

    def __repr__(self):
        return f"Interior(dim={self.dim}, coord={self.coord!r}, size={self.size})"


class Leaf:
    __slots__ = ("points",)

    def __init__(self, points: np.ndarray):
        self.points = points

    @property
    def size(self) -> int:
        return len(self.points)

    def __repr__(self):
        return f"Leaf(size={len(self.points)})"


class HeavyLeaf:
    """A leaf holding ``count`` copies of a single coordinate tuple."""

    __slots__ = ("point", "count")

    def __init__(self, point: np.ndarray, count: int):
        self.point = point
        self.count = count

    @property
    def size(self) -> int:
        return self.count

    def __repr__(self):
        return f"HeavyLeaf(point={self.point.tolist()}, count={self.count})"


TreeNode = Union[Interior, Leaf, HeavyLeaf]


def as_points(points, dims: Optional[int] = None, dtype=None) -> np.ndarray:
    """Coerce ``points`` to a C-contiguous ``(n, D)`` array of a supported dtype.

    Integer input maps to int64 and anything else to float64 unless ``dtype``
    is given.  Raises ``ValueError`` on ragged input or a dimension mismatch.
    """
    try:
        arr = np.asarray(points)
    except ValueError as exc:  # ragged nested sequences
        raise ValueError("points have mixed dimensions") from exc
    if arr.dtype == object:
        raise ValueError("points have mixed dimensions")
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, dims if dims is not None else 0)
    if arr.ndim != 2:
        raise ValueError(f"expected an (n, D) array of points, got shape {arr.shape}")
    if dtype is None:
        dtype = np.int64 if np.issubdtype(arr.dtype, np.integer) or arr.dtype == bool else np.float64
    dtype = np.dtype(dtype)
    if dtype not in COORD_DTYPES:
        raise ValueError(f"unsupported coordinate dtype {dtype}")
    if dims is not None and arr.shape[1] != dims and len(arr):
        raise ValueError(f"dimension mismatch: expected {dims}, got {arr.shape[1]}")
    if dims is not None and len(arr) == 0:
        return np.empty((0, dims), dtype=dtype)
    if arr.shape[1] < 1 and len(arr):
        raise ValueError("points need at least one dimension")
    return np.ascontiguousarray(arr, dtype=dtype)


def as_point(p, dims: Optional[int] = None, dtype=None) -> np.ndarray:
    arr = np.asarray(p)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D point, got shape {arr.shape}")
    if dims is not None and len(arr) != dims:
        raise ValueError(f"dimension mismatch: expected {dims}, got {len(arr)}")
    return as_points(arr[None, :], dtype=dtype)[0]


def _stretch(lo, hi):
    # Python ints make int64 stretches exact even when hi - lo overflows.
    return hi - lo


def widest_dimension(box: Box) -> int:
    """Index of the largest ``hi - lo`` extent; ties go to the smallest index."""
    if box.is_empty:
        raise ValueError("degenerate box")
    if box.dims < 1:
        raise ValueError("degenerate box")
    best, best_w = 0, None
    for i, (lo, hi) in enumerate(zip(box.lo.tolist(), box.hi.tolist())):
        w = _stretch(lo, hi)
        if best_w is None or w > best_w:
            best, best_w = i, w
    return best


def split_box(box: Box, s: Splitter) -> tuple[Box, Box]:
    """Subspaces of the two children of a node with splitter ``s``.

    Both halves are closed.  A side that cannot hold any point of the child
    is returned as the empty box.
    """
    d, x = s
    if box.is_empty:
        return box, box
    lo, hi = box.lo, box.hi
    # left points satisfy p[d] < x, so nothing fits when x <= lo[d]; right
    # points satisfy p[d] >= x, which a point at hi[d] == x still does
    if x <= lo[d]:
        left = Box.empty(box.dims, lo.dtype)
    else:
        lhi = hi.copy()
        lhi[d] = min(x, hi[d])
        left = Box(lo.copy(), lhi)
    if x > hi[d]:
        right = Box.empty(box.dims, lo.dtype)
    else:
        rlo = lo.copy()
        rlo[d] = max(x, lo[d])
        right = Box(rlo, hi.copy())
    return left, right


def box_relation(node_box: Box, query_box: Box) -> BoxRelation:
    if query_box.is_empty:
        raise ValueError("query box must be non-empty")
    if node_box.is_empty:
        return BoxRelation.DISJOINT
    nlo, nhi = node_box.lo, node_box.hi
    qlo, qhi = query_box.lo, query_box.hi
    if np.any(nhi < qlo) or np.any(nlo > qhi):
        return BoxRelation.DISJOINT
    if np.all(qlo <= nlo) and np.all(nhi <= qhi):
        return BoxRelation.CONTAINED
    return BoxRelation.INTERSECTS


def squared_distance(p, q):
    """Exact squared Euclidean distance.

    Integer points are accumulated as Python ints so the result cannot
    overflow; real points are summed in float64.
    """
    p = np.asarray(p)
    q = np.asarray(q)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    total = 0
    for a, b in zip(p.tolist(), q.tolist()):
        diff = a - b
        total += diff * diff
    return total


def iter_nodes(node):
    """Pre-order iteration over all nodes of a subtree."""
    stack = [node] if node is not None else []
    while stack:
        t = stack.pop()
        yield t
        if isinstance(t, Interior):
            stack.append(t.right)
            stack.append(t.left)


def tree_height(node) -> int:
    """Number of edges on the longest root-to-leaf path; -1 for the empty tree."""
    if node is None:
        return -1
    best = 0
    stack = [(node, 0)]
    while stack:
        t, h = stack.pop()
        if isinstance(t, Interior):
            stack.append((t.left, h + 1))
            stack.append((t.right, h + 1))
        elif h > best:
            best = h
    return best


def tree_dims(node) -> Optional[int]:
    while isinstance(node, Interior):
        node = node.left
    if isinstance(node, Leaf):
        return node.points.shape[1]
    if isinstance(node, HeavyLeaf):
        return len(node.point)
    return None


def bounding_box(node) -> Optional[Box]:
    """Tight bounding box of all points in a subtree (``None`` if empty)."""
    lo = hi = None
    for t in iter_nodes(node):
        if isinstance(t, Leaf):
            if not len(t.points):
                continue
            tlo, thi = t.points.min(axis=0), t.points.max(axis=0)
        elif isinstance(t, HeavyLeaf):
            tlo = thi = t.point
        else:
            continue
        if lo is None:
            lo, hi = tlo.copy(), thi.copy()
        else:
            np.minimum(lo, tlo, out=lo)
            np.maximum(hi, thi, out=hi)
    if lo is None:
        return None
    return Box(lo, hi)


def structure_hash(node) -> str:
    """Digest of node kinds, splitters, sizes and leaf contents in pre-order."""
    h = hashlib.blake2b(digest_size=16)
    for t in iter_nodes(node):
        if isinstance(t, Interior):
            h.update(b"I" + struct.pack("<qq", t.dim, t.size))
            h.update(np.asarray(t.coord).tobytes())
        elif isinstance(t, Leaf):
            h.update(b"L" + struct.pack("<q", len(t.points)))
            h.update(np.ascontiguousarray(t.points).tobytes())
        else:
            h.update(b"H" + struct.pack("<q", t.count))
            h.update(np.ascontiguousarray(t.point).tobytes())
    return h.hexdigest()


def ceil_log2(x: float) -> int:
    return max(0, math.ceil(math.log2(x))) if x > 1 else 0
