"""Batch insertion and two-round batch deletion with partial rebuilds.

Both operations work on the tree in place (the caller owns it exclusively)
and return the new root, which differs from the old one when the root
itself is rebuilt or emptied.

Insertion knows exact post-insert sizes before moving any data: the batch
is sieved through the top ``lam`` levels of the existing tree and bucket
counts are added to stored sizes.  The topmost node on a path that would
fall out of weight balance is flattened, merged with its share of the
batch and rebuilt; balanced nodes pass their buckets further down.

Deletion first routes the batch to the leaves to learn which elements are
actually present, then applies the removals top-down with the same
rebuild rule.
"""

from __future__ import annotations

import threading
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import numpy as np

from .construct import Skeleton, build, flatten, sieve
from .core import Config, HeavyLeaf, Interior, Leaf, as_points, tree_dims
from .parallel import parallel_map

__all__ = [
    "UpdateStats",
    "is_balanced",
    "extract_skeleton",
    "batch_insert",
    "batch_delete",
]

INSERT_STREAM = 1
DELETE_STREAM = 2


@dataclass
class UpdateStats:
    """Counters filled in by the update routines.

    ``rebuilds``/``rebuild_points`` count only rebuilds forced by the
    balance rule.  Leaves that overflow (or heavy leaves that receive a
    different point) are rebuilt too, but those are tracked separately
    because they happen for every ``alpha``.
    """

    rebuilds: int = 0
    rebuild_points: int = 0
    leaf_rebuilds: int = 0
    leaf_rebuild_points: int = 0
    violations: list = field(default_factory=list)
    rebuilt_paths: list = field(default_factory=list)
    discarded: int = 0

    def merge(self, other: "UpdateStats") -> None:
        self.rebuilds += other.rebuilds
        self.rebuild_points += other.rebuild_points
        self.leaf_rebuilds += other.leaf_rebuilds
        self.leaf_rebuild_points += other.leaf_rebuild_points
        self.violations.extend(other.violations)
        self.rebuilt_paths.extend(other.rebuilt_paths)
        self.discarded += other.discarded

    def one_rebuild_per_path(self) -> bool:
        """True if no rebuilt node lies inside another rebuilt node."""
        paths = sorted(self.rebuilt_paths)
        for a, b in zip(paths, paths[1:]):
            if b[: len(a)] == a:
                return False
        return True


@lru_cache(maxsize=64)
def _alpha_fraction(alpha: float) -> tuple[int, int]:
    # the decimal reading of alpha, so 0.3 means exactly 3/10
    f = Fraction(repr(float(alpha)))
    return f.numerator, f.denominator


def is_balanced(left_size: int, total: int, alpha: float, phi: int = 0) -> bool:
    """``(0.5 - alpha) * total <= left_size <= (0.5 + alpha) * total``, exactly.

    Totals of at most ``phi`` always count as balanced.
    """
    if not 0 <= left_size <= total:
        raise ValueError("need 0 <= left_size <= total")
    if total <= phi:
        return True
    p, q = _alpha_fraction(alpha)
    lhs = 2 * q * left_size
    return (q - 2 * p) * total <= lhs <= (q + 2 * p) * total


def extract_skeleton(tree, lam: int) -> Skeleton:
    """Top ``lam`` levels of an existing tree as a :class:`Skeleton`.

    Entries are numbered in pre-order.  Buckets are the frontier subtrees
    at depth ``lam`` or shallower leaves, numbered left to right; they are
    listed in ``subtrees`` and the interior node behind every entry in
    ``nodes``.
    """
    if not isinstance(tree, Interior):
        raise ValueError("skeleton extraction needs an interior node")
    dims, coords, left, right, nodes, subtrees = [], [], [], [], [], []

    def walk(t, depth):
        if depth == lam or not isinstance(t, Interior):
            subtrees.append(t)
            return -len(subtrees)
        e = len(nodes)
        nodes.append(t)
        dims.append(t.dim)
        coords.append(t.coord)
        left.append(0)
        right.append(0)
        left[e] = walk(t.left, depth + 1)
        right[e] = walk(t.right, depth + 1)
        return e

    root = walk(tree, 0)
    dtype = _coord_dtype(tree)
    return Skeleton(
        np.array(dims, np.int64),
        np.array(coords, dtype),
        np.array(left, np.int64),
        np.array(right, np.int64),
        root,
        len(subtrees),
        lam,
        nodes=nodes,
        subtrees=subtrees,
    )


def _coord_dtype(t):
    while isinstance(t, Interior):
        t = t.left
    return t.points.dtype if isinstance(t, Leaf) else t.point.dtype


def _entry_paths(sk: Skeleton):
    """Root-relative direction tuples for every entry and bucket."""
    epath = [None] * sk.n_entries
    bpath = [None] * sk.n_buckets

    def walk(code, path):
        if code < 0:
            bpath[-code - 1] = path
            return
        epath[code] = path
        walk(int(sk.left[code]), path + (0,))
        walk(int(sk.right[code]), path + (1,))

    walk(sk.root, ())
    return epath, bpath


def _key(stream: int, op_id: int, path: tuple) -> tuple:
    return (stream, op_id, len(path)) + path


def _check_batch(tree, batch):
    dims = tree_dims(tree)
    if tree is None:
        return as_points(batch)
    return as_points(batch, dims=dims, dtype=_coord_dtype(tree))


# ---------------------------------------------------------------- insertion


class _Ctx:
    __slots__ = ("cfg", "op_id", "stats", "lock")

    def __init__(self, cfg, op_id, stats):
        self.cfg = cfg
        self.op_id = op_id
        self.stats = stats
        self.lock = threading.Lock()

    def record(self, size, path, *, balance=True):
        with self.lock:
            s = self.stats
            if balance:
                s.rebuilds += 1
                s.rebuild_points += size
                s.rebuilt_paths.append(path)
            else:
                s.leaf_rebuilds += 1
                s.leaf_rebuild_points += size

    def violation(self, path):
        with self.lock:
            self.stats.violations.append(path)


def _rebuild(ctx: _Ctx, node, pts, path, *, balance: bool):
    merged = np.concatenate([flatten(node), pts]) if node is not None else pts
    ctx.record(len(merged), path, balance=balance)
    return build(merged, ctx.cfg, key=_key(INSERT_STREAM, ctx.op_id, path))


def _insert_leafish(ctx: _Ctx, node, pts, path):
    if node is None:
        return _rebuild(ctx, None, pts, path, balance=False)
    if isinstance(node, HeavyLeaf):
        if bool(np.all(pts == node.point)):
            node.count += len(pts)
            return node
        return _rebuild(ctx, node, pts, path, balance=False)
    if len(node.points) + len(pts) <= ctx.cfg.phi:
        return Leaf(np.concatenate([node.points, pts]))
    return _rebuild(ctx, node, pts, path, balance=False)


def _insert(ctx: _Ctx, node, pts, path):
    if len(pts) == 0:
        return node
    if not isinstance(node, Interior):
        return _insert_leafish(ctx, node, pts, path)
    if len(pts) < ctx.cfg.seq_cutoff:
        return _insert_seq(ctx, node, pts, path)
    return _insert_skeleton(ctx, node, pts, path)


def _insert_seq(ctx: _Ctx, node, pts, path):
    """One level at a time; used for small batches."""
    m = len(pts)
    mask = pts[:, node.dim] < node.coord
    lp, rp = pts[mask], pts[~mask]
    total = node.size + m
    if not is_balanced(node.left.size + len(lp), total, ctx.cfg.alpha, ctx.cfg.phi):
        ctx.violation(path)
        return _rebuild(ctx, node, pts, path, balance=True)
    node.size = total
    node.left = _insert(ctx, node.left, lp, path + (0,))
    node.right = _insert(ctx, node.right, rp, path + (1,))
    return node


def _insert_skeleton(ctx: _Ctx, node, pts, path):
    cfg = ctx.cfg
    sk = extract_skeleton(node, cfg.lam)
    part = sieve(pts, sk)
    off = part.offsets.tolist()
    spans = sk.spans()
    epath, bpath = _entry_paths(sk)
    bucket_ids = None
    tasks = []  # (callable, parent, side)

    def span_points(lo, hi):
        nonlocal bucket_ids
        if bucket_ids is None:
            bucket_ids = sk.lookup_all(pts)
        # original batch order, as the level-at-a-time path would see it
        return pts[(bucket_ids >= lo) & (bucket_ids < hi)]

    def plan(code, parent, side):
        if code < 0:
            b = -code - 1
            if off[b + 1] > off[b]:
                sub = sk.subtrees[b]
                bp = part.bucket(b)
                tasks.append((lambda s=sub, q=bp, pa=path + bpath[b]: _insert(ctx, s, q, pa), parent, side))
            return
        t = sk.nodes[code]
        lo, mid, hi = spans[code]
        add = off[hi] - off[lo]
        if add == 0:
            return
        total = t.size + add
        p = path + epath[code]
        if not is_balanced(t.left.size + off[mid] - off[lo], total, cfg.alpha, cfg.phi):
            ctx.violation(p)
            q = span_points(lo, hi)
            tasks.append((lambda t=t, q=q, p=p: _rebuild(ctx, t, q, p, balance=True), parent, side))
            return
        t.size = total
        plan(int(sk.left[code]), t, "left")
        plan(int(sk.right[code]), t, "right")

    plan(sk.root, None, None)
    results = parallel_map(lambda task: task[0](), tasks, work=len(pts), cutoff=cfg.seq_cutoff)
    root = node
    for (_, parent, side), res in zip(tasks, results):
        if parent is None:
            root = res
        else:
            setattr(parent, side, res)
    return root


def batch_insert(
    tree,
    batch,
    cfg: Config = Config(),
    *,
    op_id: int = 0,
    stats: Optional[UpdateStats] = None,
):
    """Insert ``batch`` (a multiset) into ``tree``; returns the new root.

    ``op_id`` selects the random streams used by rebuilds, so replaying the
    same sequence of operations reproduces the same tree.
    """
    pts = _check_batch(tree, batch)
    if len(pts) == 0:
        return tree
    ctx = _Ctx(cfg, op_id, stats if stats is not None else UpdateStats())
    if tree is None:
        return build(pts, cfg, key=_key(INSERT_STREAM, op_id, ()))
    return _insert(ctx, tree, np.array(pts, copy=True), ())


# ----------------------------------------------------------------- deletion


class _DelCtx(_Ctx):
    __slots__ = ("removed", "survivors")

    def __init__(self, cfg, op_id, stats):
        super().__init__(cfg, op_id, stats)
        self.removed = {}
        self.survivors = {}


def _match_leaf(ctx: _DelCtx, leaf: Leaf, pts) -> int:
    want = Counter(map(tuple, pts.tolist()))
    keep = np.ones(len(leaf.points), bool)
    for i, row in enumerate(map(tuple, leaf.points.tolist())):
        if want.get(row, 0) > 0:
            want[row] -= 1
            keep[i] = False
    r = int(len(keep) - keep.sum())
    if r:
        ctx.removed[id(leaf)] = r
        ctx.survivors[id(leaf)] = leaf.points[keep]
    return r


def _locate(ctx: _DelCtx, node, pts) -> int:
    """Round 1: count how many batch elements each subtree really holds."""
    if len(pts) == 0 or node is None:
        return 0
    if isinstance(node, Leaf):
        return _match_leaf(ctx, node, pts)
    if isinstance(node, HeavyLeaf):
        hits = int(np.all(pts == node.point, axis=1).sum())
        r = min(hits, node.count)
        if r:
            ctx.removed[id(node)] = r
        return r
    if len(pts) < ctx.cfg.seq_cutoff:
        mask = pts[:, node.dim] < node.coord
        r = _locate(ctx, node.left, pts[mask]) + _locate(ctx, node.right, pts[~mask])
    else:
        sk = extract_skeleton(node, ctx.cfg.lam)
        part = sieve(pts, sk)
        got = parallel_map(
            lambda b: _locate(ctx, sk.subtrees[b], part.bucket(b)),
            range(sk.n_buckets),
            work=len(pts),
            cutoff=ctx.cfg.seq_cutoff,
        )
        # interior entries below this node need their totals too
        cum = np.concatenate([[0], np.cumsum(got)]).tolist()
        for e, (lo, _, hi) in enumerate(sk.spans()):
            c = cum[hi] - cum[lo]
            if c and e != sk.root:
                ctx.removed[id(sk.nodes[e])] = c
        r = cum[-1]
    if r:
        ctx.removed[id(node)] = r
    return r


def _survivors_into(ctx: _DelCtx, node, parts: list):
    stack = [node]
    while stack:
        t = stack.pop()
        r = ctx.removed.get(id(t), 0)
        if r == 0:
            parts.append(flatten(t))
        elif isinstance(t, Interior):
            stack.append(t.right)
            stack.append(t.left)
        elif isinstance(t, Leaf):
            parts.append(ctx.survivors[id(t)])
        elif t.count > r:
            parts.append(np.repeat(t.point[None, :], t.count - r, axis=0))


class _Slot:
    """Placeholder for a subtree that is being rebuilt."""

    __slots__ = ("node", "path", "result")

    def __init__(self, node, path):
        self.node = node
        self.path = path
        self.result = None


def _apply(ctx: _DelCtx, node, path, slots, fixups):
    """Round 2: the replacement for ``node`` (``None`` if emptied, or a slot)."""
    r = ctx.removed.get(id(node), 0)
    if r == 0:
        return node
    if isinstance(node, Leaf):
        keep = ctx.survivors[id(node)]
        return Leaf(keep) if len(keep) else None
    if isinstance(node, HeavyLeaf):
        node.count -= r
        return node if node.count else None
    total = node.size - r
    if total == 0:
        return None
    new_left = node.left.size - ctx.removed.get(id(node.left), 0)
    if not is_balanced(new_left, total, ctx.cfg.alpha, ctx.cfg.phi):
        ctx.violation(path)
        slot = _Slot(node, path)
        slots.append(slot)
        return slot
    left = _apply(ctx, node.left, path + (0,), slots, fixups)
    right = _apply(ctx, node.right, path + (1,), slots, fixups)
    if left is None:
        return right
    if right is None:
        return left
    node.left, node.right, node.size = left, right, total
    if isinstance(left, _Slot):
        fixups.append((node, "left", left))
    if isinstance(right, _Slot):
        fixups.append((node, "right", right))
    return node


def _rebuild_survivors(ctx: _DelCtx, slot: _Slot):
    parts = []
    _survivors_into(ctx, slot.node, parts)
    pts = np.concatenate(parts)
    ctx.record(len(pts), slot.path)
    return build(pts, ctx.cfg, key=_key(DELETE_STREAM, ctx.op_id, slot.path))


def batch_delete(
    tree,
    batch,
    cfg: Config = Config(),
    *,
    op_id: int = 0,
    stats: Optional[UpdateStats] = None,
):
    """Remove one stored occurrence per batch element; absent ones are ignored.

    Returns the new root (``None`` once everything is gone).
    """
    pts = _check_batch(tree, batch)
    if len(pts) == 0 or tree is None:
        return tree
    ctx = _DelCtx(cfg, op_id, stats if stats is not None else UpdateStats())
    found = _locate(ctx, tree, pts)
    ctx.stats.discarded += len(pts) - found
    if found == 0:
        return tree
    slots, fixups = [], []
    root = _apply(ctx, tree, (), slots, fixups)
    # a node left with no survivors is dropped before its balance test, so
    # every rebuild input is non-empty
    results = parallel_map(lambda s: _rebuild_survivors(ctx, s), slots, work=found, cutoff=cfg.seq_cutoff)
    for slot, res in zip(slots, results):
        slot.result = res
    for parent, side, slot in fixups:
        setattr(parent, side, slot.result)
    return root.result if isinstance(root, _Slot) else root
