"""k-nearest-neighbour, range-count and range-report queries.

No node stores a bounding box.  Each query starts from a box enclosing the
whole tree (the caller's cached root box, or the tight box computed on
demand) and narrows it with every splitter on the way down.  Query boxes
are closed: a point on the boundary is inside.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from itertools import count
from typing import Optional

import numpy as np

from .construct import _flatten_into
from .core import Box, HeavyLeaf, Interior, Leaf, as_point, bounding_box, tree_dims
from .parallel import parallel_map

__all__ = ["KnnBuffer", "QueryStats", "knn", "range_count", "range_report"]

_INT64_MAX = (1 << 63) - 1


@dataclass
class QueryStats:
    nodes: int = 0
    leaves: int = 0


class KnnBuffer:
    """The ``k`` closest candidates seen so far, as a bounded max-heap."""

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self._heap = []
        self._seq = count()

    def __len__(self):
        return len(self._heap)

    @property
    def full(self) -> bool:
        return len(self._heap) >= self.k

    def worst(self):
        """Largest squared distance held, or ``None`` while empty."""
        return -self._heap[0][0] if self._heap else None

    def push(self, d2, point) -> bool:
        if len(self._heap) < self.k:
            heapq.heappush(self._heap, (-d2, next(self._seq), point))
            return True
        if d2 < -self._heap[0][0]:
            heapq.heapreplace(self._heap, (-d2, next(self._seq), point))
            return True
        return False

    def items(self) -> list:
        """Entries ``(d2, point)`` in ascending distance order."""
        return [(-nd, p) for nd, _, p in sorted(self._heap, key=lambda e: (-e[0], e[1]))]


def _root_box(tree, box: Optional[Box]):
    if box is None:
        box = bounding_box(tree)
    return box.lo.tolist(), box.hi.tolist()


def _exact_kind(lo, hi, q, dtype):
    """Arithmetic for leaf distances: native, or Python ints when int64 could overflow."""
    if dtype.kind == "f":
        return "native"
    total = 0
    for a, b, c in zip(lo, hi, q):
        span = max(b, c) - min(a, c)
        total += span * span
    return "native" if total <= _INT64_MAX else "object"


def _axis_gap(v, a, b):
    if v < a:
        return (a - v) * (a - v)
    if v > b:
        return (v - b) * (v - b)
    return 0


def knn(
    tree,
    q,
    k: int,
    *,
    box: Optional[Box] = None,
    prune: bool = True,
    stats: Optional[QueryStats] = None,
) -> list:
    """The ``min(k, n)`` nearest stored points to ``q`` as ascending ``(d2, point)``.

    Depth-first, near child first.  A subtree is entered only while the
    buffer is not full or its subspace lies strictly closer than the
    current ``k``-th distance.  Distances are exact squared distances.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if tree is None:
        return []
    D = tree_dims(tree)
    qa = as_point(q, dims=D)
    lo, hi = _root_box(tree, box)
    ql = qa.tolist()
    if qa.dtype.kind != "f" and _leaf_dtype(tree).kind != "f":
        mode = _exact_kind(lo, hi, ql, np.dtype(np.int64))
    else:
        mode = "native"
        ql = [float(v) for v in ql]
    qv = qa if mode == "native" else np.array(ql, dtype=object)
    buf = KnnBuffer(k)
    gaps = [_axis_gap(v, a, b) for v, a, b in zip(ql, lo, hi)]

    def scan(pts):
        if mode == "object":
            pts = pts.astype(object)
        diff = pts - qv
        d2 = (diff * diff).sum(axis=1)
        if buf.full:
            cand = np.flatnonzero(d2 < buf.worst())
        else:
            cand = range(len(d2))
        for i in cand:
            buf.push(d2[i].item() if mode == "native" else d2[i], pts[i])

    def visit(t, dist):
        if stats is not None:
            stats.nodes += 1
        if isinstance(t, Leaf):
            if stats is not None:
                stats.leaves += 1
            scan(t.points)
            return
        if isinstance(t, HeavyLeaf):
            d2 = 0
            for a, b in zip(t.point.tolist(), ql):
                d2 += (a - b) * (a - b)
            for _ in range(min(k, t.count)):
                if not buf.push(d2, t.point):
                    break
            return
        d, x = t.dim, t.coord
        qd, old_lo, old_hi, old_gap = ql[d], lo[d], hi[d], gaps[d]
        # left points satisfy p[d] < x, right ones p[d] >= x
        left_ok = x > old_lo
        right_ok = x <= old_hi
        order = (0, 1) if qd < x else (1, 0)
        for side in order:
            if side == 0:
                if not left_ok:
                    continue
                hi[d] = min(x, old_hi)
                child = t.left
            else:
                if not right_ok:
                    continue
                lo[d] = max(x, old_lo)
                child = t.right
            gap = _axis_gap(qd, lo[d], hi[d])
            cdist = dist - old_gap + gap
            if not prune or not buf.full or cdist < buf.worst():
                gaps[d] = gap
                visit(child, cdist)
                gaps[d] = old_gap
            lo[d], hi[d] = old_lo, old_hi

    visit(tree, sum(gaps))
    return [(d2, np.array(p, dtype=_leaf_dtype(tree))) for d2, p in buf.items()]


def _leaf_dtype(t):
    while isinstance(t, Interior):
        t = t.left
    return t.points.dtype if isinstance(t, Leaf) else t.point.dtype


def _query_lists(query: Box, D: int):
    if query.is_empty:
        raise ValueError("query box must be non-empty")
    if query.dims != D:
        raise ValueError(f"dimension mismatch: tree has {D}, query box {query.dims}")
    return query.lo.tolist(), query.hi.tolist()


def _relation(lo, hi, qlo, qhi) -> int:
    """0 disjoint, 1 intersects, 2 contained."""
    inside = True
    for a, b, c, e in zip(lo, hi, qlo, qhi):
        if b < c or a > e:
            return 0
        if a < c or b > e:
            inside = False
    return 2 if inside else 1


def _in_box(pts, qlo, qhi):
    if pts.dtype.kind == "f":
        lo = np.asarray(qlo, dtype=np.float64)
        hi = np.asarray(qhi, dtype=np.float64)
    elif all(isinstance(v, int) and -(1 << 63) <= v <= _INT64_MAX for v in qlo + qhi):
        lo = np.asarray(qlo, dtype=np.int64)
        hi = np.asarray(qhi, dtype=np.int64)
    else:
        # mixed int/float bounds: compare as Python numbers
        lo = np.array(qlo, dtype=object)
        hi = np.array(qhi, dtype=object)
        pts = pts.astype(object)
    return np.all((pts >= lo) & (pts <= hi), axis=1)


def _heavy_inside(t: HeavyLeaf, qlo, qhi) -> bool:
    return all(a <= v <= b for v, a, b in zip(t.point.tolist(), qlo, qhi))


def _walk_range(tree, box, query, prune, on_contained, on_leaf, on_heavy, stats):
    D = tree_dims(tree)
    qlo, qhi = _query_lists(query, D)
    lo, hi = _root_box(tree, box)

    def visit(t):
        if stats is not None:
            stats.nodes += 1
        if prune:
            rel = _relation(lo, hi, qlo, qhi)
            if rel == 0:
                return
            if rel == 2:
                on_contained(t)
                return
        if isinstance(t, Leaf):
            if stats is not None:
                stats.leaves += 1
            on_leaf(t, qlo, qhi)
            return
        if isinstance(t, HeavyLeaf):
            on_heavy(t, qlo, qhi)
            return
        d, x = t.dim, t.coord
        old_lo, old_hi = lo[d], hi[d]
        if x > old_lo or not prune:
            hi[d] = min(x, old_hi)
            visit(t.left)
            hi[d] = old_hi
        if x <= old_hi or not prune:
            lo[d] = max(x, old_lo)
            visit(t.right)
            lo[d] = old_lo

    visit(tree)


def range_count(
    tree,
    query: Box,
    *,
    box: Optional[Box] = None,
    prune: bool = True,
    stats: Optional[QueryStats] = None,
) -> int:
    """Number of stored points (with multiplicity) in the closed box ``query``."""
    if tree is None:
        return 0
    total = 0

    def contained(t):
        nonlocal total
        total += t.size

    def leaf(t, qlo, qhi):
        nonlocal total
        total += int(_in_box(t.points, qlo, qhi).sum())

    def heavy(t, qlo, qhi):
        nonlocal total
        if _heavy_inside(t, qlo, qhi):
            total += t.count

    _walk_range(tree, box, query, prune, contained, leaf, heavy, stats)
    return total


def range_report(
    tree,
    query: Box,
    *,
    box: Optional[Box] = None,
    prune: bool = True,
    stats: Optional[QueryStats] = None,
    cutoff: int = 1 << 14,
) -> np.ndarray:
    """All stored points in the closed box ``query`` as an ``(m, D)`` array.

    Subtrees that lie entirely inside the query are copied out in parallel
    into disjoint slices of one preallocated array, using their stored
    sizes as offsets.
    """
    if tree is None:
        D = 0 if box is None else box.dims
        return np.empty((0, D), np.int64)
    D = tree_dims(tree)
    pieces = []  # (subtree or array, size)

    def contained(t):
        pieces.append((t, t.size))

    def leaf(t, qlo, qhi):
        hit = t.points[_in_box(t.points, qlo, qhi)]
        if len(hit):
            pieces.append((hit, len(hit)))

    def heavy(t, qlo, qhi):
        if _heavy_inside(t, qlo, qhi):
            pieces.append((t, t.count))

    _walk_range(tree, box, query, prune, contained, leaf, heavy, stats)
    total = sum(s for _, s in pieces)
    out = np.empty((total, D), dtype=_leaf_dtype(tree))
    jobs, pos = [], 0
    for obj, size in pieces:
        jobs.append((obj, pos))
        pos += size

    def fill(job):
        obj, at = job
        if isinstance(obj, np.ndarray):
            out[at : at + len(obj)] = obj
        else:
            _flatten_into(obj, out, at)

    if total >= cutoff and len(jobs) > 1:
        parallel_map(fill, jobs)
    else:
        for job in jobs:
            fill(job)
    return out
