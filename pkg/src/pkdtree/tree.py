"""A stateful wrapper tying the node-level functions together."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .construct import build, flatten
from .core import Box, Config, as_point, as_points, bounding_box, structure_hash, tree_height
from .query import QueryStats, knn, range_count, range_report
from .update import UpdateStats, batch_delete, batch_insert

__all__ = ["PkdTree"]


class PkdTree:
    """A batch-dynamic kd-tree over a multiset of points.

    Single writer: updates need exclusive access, while queries may share
    the tree among threads.  The root bounding box is cached for queries;
    after deletions it may be larger than the tight box, which is harmless.

    >>> t = PkdTree([[0, 0], [1, 1], [2, 2]])
    >>> t.knn([0, 0], 1)[0][0]
    0
    """

    def __init__(self, points=None, cfg: Config = Config(), *, dims: Optional[int] = None, dtype=None):
        self.cfg = cfg
        self.stats = UpdateStats()
        self._ops = 0
        pts = as_points(points if points is not None else [], dims=dims, dtype=dtype)
        self.dims = dims if dims is not None else (pts.shape[1] or None)
        self.dtype = pts.dtype
        self.root = build(pts, cfg) if len(pts) else None
        self._box = bounding_box(self.root)

    @classmethod
    def from_root(cls, root, cfg: Config = Config(), *, ops: int = 0) -> "PkdTree":
        t = cls.__new__(cls)
        t.cfg = cfg
        t.stats = UpdateStats()
        t._ops = ops
        t.root = root
        box = bounding_box(root)
        t._box = box
        t.dims = box.dims if box is not None else None
        t.dtype = box.lo.dtype if box is not None else np.dtype(np.int64)
        return t

    def __len__(self):
        return 0 if self.root is None else self.root.size

    @property
    def height(self) -> int:
        return tree_height(self.root)

    @property
    def box(self) -> Optional[Box]:
        return self._box

    @property
    def ops(self) -> int:
        return self._ops

    def structure_hash(self) -> str:
        return structure_hash(self.root)

    def points(self) -> np.ndarray:
        return flatten(self.root, dims=self.dims, dtype=self.dtype)

    def _batch(self, batch) -> np.ndarray:
        pts = as_points(batch, dims=self.dims, dtype=self.dtype if self.dims is not None else None)
        if self.dims is None and len(pts):
            self.dims = pts.shape[1]
            self.dtype = pts.dtype
        return pts

    def insert(self, batch) -> UpdateStats:
        pts = self._batch(batch)
        stats = UpdateStats()
        if len(pts) == 0:
            return stats
        self._ops += 1
        old = self.root
        self.root = batch_insert(old, pts, self.cfg, op_id=self._ops, stats=stats)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        if self._box is None:
            self._box = Box(lo, hi)
        else:
            self._box = Box(np.minimum(self._box.lo, lo), np.maximum(self._box.hi, hi))
        self.stats.merge(stats)
        return stats

    def delete(self, batch) -> UpdateStats:
        pts = self._batch(batch)
        stats = UpdateStats()
        if len(pts) == 0 or self.root is None:
            stats.discarded = len(pts)
            self.stats.merge(stats)
            return stats
        self._ops += 1
        old = self.root
        self.root = batch_delete(old, pts, self.cfg, op_id=self._ops, stats=stats)
        if self.root is None:
            self._box = None
        elif self.root is not old:
            self._box = bounding_box(self.root)
        self.stats.merge(stats)
        return stats

    def knn(self, q, k: int, *, prune: bool = True, stats: Optional[QueryStats] = None) -> list:
        if self.root is None:
            if k < 1:
                raise ValueError("k must be >= 1")
            return []
        return knn(self.root, as_point(q, dims=self.dims), k, box=self._box, prune=prune, stats=stats)

    def range_count(self, query: Box, *, prune: bool = True) -> int:
        return range_count(self.root, query, box=self._box, prune=prune)

    def range_report(self, query: Box, *, prune: bool = True) -> np.ndarray:
        if self.root is None:
            return np.empty((0, self.dims or 0), self.dtype)
        return range_report(self.root, query, box=self._box, prune=prune)
