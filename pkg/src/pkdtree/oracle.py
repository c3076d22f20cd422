"""Brute-force reference answers and a structural validator.

Nothing here uses the query module: the reference answers come from
plain linear scans, so agreement with the tree is meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Box, Config, HeavyLeaf, Interior, Leaf

__all__ = [
    "Violation",
    "brute_knn",
    "brute_range_count",
    "brute_range_report",
    "check_tree",
    "balance_violations",
]


def _sq_dists(points: np.ndarray, q) -> np.ndarray:
    """Exact squared distances; Python ints whenever int64 might overflow."""
    q = np.asarray(q)
    if points.dtype.kind == "f" or q.dtype.kind == "f":
        diff = points.astype(np.float64) - q.astype(np.float64)
        return (diff * diff).sum(axis=1)
    ints = np.concatenate([points.ravel(), q.ravel()]) if len(points) else q.ravel()
    span = int(ints.max()) - int(ints.min()) if len(ints) else 0
    if span * span * max(1, points.shape[1]) < (1 << 62):
        diff = points.astype(np.int64) - q.astype(np.int64)
        return (diff * diff).sum(axis=1)
    diff = points.astype(object) - q.astype(object)
    return (diff * diff).sum(axis=1)


def brute_knn(points, q, k: int) -> list:
    """Ascending ``(d2, point)`` pairs for the ``min(k, n)`` closest points.

    Ties keep input order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    points = np.asarray(points)
    if len(points) == 0:
        return []
    d2 = _sq_dists(points, q)
    if d2.dtype == object:
        order = sorted(range(len(points)), key=lambda i: d2[i])[:k]
    else:
        order = np.argsort(d2, kind="stable")[:k].tolist()
    return [(d2[i].item() if hasattr(d2[i], "item") else d2[i], points[i]) for i in order]


def _inside(points: np.ndarray, box: Box) -> np.ndarray:
    if box.is_empty:
        return np.zeros(len(points), bool)
    mask = np.ones(len(points), bool)
    for d in range(points.shape[1]):
        col = points[:, d]
        mask &= (col >= box.lo[d]) & (col <= box.hi[d])
    return mask


def brute_range_count(points, box: Box) -> int:
    points = np.asarray(points)
    if len(points) == 0:
        return 0
    return int(_inside(points, box).sum())


def brute_range_report(points, box: Box) -> np.ndarray:
    points = np.asarray(points)
    if len(points) == 0:
        return points.reshape(0, box.dims)
    return points[_inside(points, box)]


@dataclass(frozen=True)
class Violation:
    kind: str  # "size" | "kd" | "leaf" | "heavy" | "balance" | "empty"
    path: tuple
    message: str


def _subtree_stats(node, path, cfg, out, stats):
    """Post-order sweep computing (size, per-dim min, per-dim max)."""
    # explicit stack to survive deep trees
    stack = [(node, path, False)]
    while stack:
        t, p, done = stack.pop()
        if isinstance(t, Leaf):
            pts = t.points
            if len(pts) == 0:
                out.append(Violation("empty", p, "leaf holds no points"))
                stats[id(t)] = (0, None, None)
                continue
            if len(pts) > cfg.phi:
                out.append(Violation("leaf", p, f"leaf holds {len(pts)} > phi={cfg.phi} points"))
            stats[id(t)] = (len(pts), pts.min(axis=0), pts.max(axis=0))
        elif isinstance(t, HeavyLeaf):
            if t.count < 1:
                out.append(Violation("heavy", p, f"heavy leaf count {t.count} < 1"))
            if np.asarray(t.point).ndim != 1:
                out.append(Violation("heavy", p, "heavy leaf must hold a single point"))
            stats[id(t)] = (t.count, t.point, t.point)
        elif isinstance(t, Interior):
            if not done:
                stack.append((t, p, True))
                stack.append((t.right, p + (1,), False))
                stack.append((t.left, p + (0,), False))
                continue
            if t.left is None or t.right is None:
                out.append(Violation("empty", p, "interior node with a missing child"))
                stats[id(t)] = (0, None, None)
                continue
            ls, lmin, lmax = stats[id(t.left)]
            rs, rmin, rmax = stats[id(t.right)]
            if t.size != ls + rs:
                out.append(Violation("size", p, f"stored size {t.size} != {ls} + {rs}"))
            d, x = t.dim, t.coord
            if lmax is not None and not lmax[d] < x:
                out.append(Violation("kd", p, f"left child reaches {lmax[d]} >= splitter {x} in dim {d}"))
            if rmin is not None and not rmin[d] >= x:
                out.append(Violation("kd", p, f"right child reaches {rmin[d]} < splitter {x} in dim {d}"))
            if lmin is None:
                mn, mx = rmin, rmax
            elif rmin is None:
                mn, mx = lmin, lmax
            else:
                mn, mx = np.minimum(lmin, rmin), np.maximum(lmax, rmax)
            stats[id(t)] = (ls + rs, mn, mx)
        else:
            out.append(Violation("empty", p, f"unexpected node {t!r}"))
            stats[id(t)] = (0, None, None)


def balance_violations(node, alpha: float, *, slack: float = 0.05, min_size: int = 256) -> list:
    """Interior nodes of at least ``min_size`` points whose left share leaves ``0.5 +- (alpha + slack)``."""
    out = []
    lo, hi = 0.5 - alpha - slack, 0.5 + alpha + slack
    stack = [(node, ())]
    while stack:
        t, p = stack.pop()
        if not isinstance(t, Interior):
            continue
        if t.size >= min_size:
            share = t.left.size / t.size
            if not lo <= share <= hi:
                out.append(Violation("balance", p, f"left share {share:.3f} outside [{lo:.2f}, {hi:.2f}]"))
        stack.append((t.right, p + (1,)))
        stack.append((t.left, p + (0,)))
    return out


def check_tree(
    tree,
    cfg: Config = Config(),
    *,
    balance: bool = True,
    slack: float = 0.05,
    min_size: int = 256,
    dims: Optional[int] = None,
) -> list:
    """Every violated invariant as a :class:`Violation`; empty means valid.

    Checks stored sizes, the kd invariant against each splitter (full
    subtree min/max), leaf capacity, heavy-leaf well-formedness and, if
    ``balance`` is set, the weight balance of every interior node with at
    least ``min_size`` points using ``alpha + slack``.
    """
    if tree is None:
        return []
    out = []
    _subtree_stats(tree, (), cfg, out, {})
    if dims is not None:
        for t in _leaves(tree):
            D = t.points.shape[1] if isinstance(t, Leaf) else len(t.point)
            if D != dims:
                out.append(Violation("leaf", (), f"leaf of dimension {D}, expected {dims}"))
                break
    if balance:
        out.extend(balance_violations(tree, cfg.alpha, slack=slack, min_size=min_size))
    return out


def _leaves(node):
    stack = [node]
    while stack:
        t = stack.pop()
        if isinstance(t, Interior):
            stack.extend((t.left, t.right))
        else:
            yield t
