"""Sampled multi-level construction.

A round of :func:`build` samples ``2**lam * sigma`` points, builds the top
``lam`` levels (the skeleton) from the samples, moves every point once into
its bucket with :func:`sieve`, and recurses on the buckets in parallel.
Inputs smaller than the sample size go to :func:`plain_build`, which picks
exact medians one level at a time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .core import (
    Box,
    Config,
    HeavyLeaf,
    Interior,
    Leaf,
    as_points,
    tree_dims,
)
from .parallel import get_num_threads, parallel_map, split_range

__all__ = [
    "Skeleton",
    "BucketPartition",
    "sample",
    "build_skeleton",
    "sieve",
    "plain_build",
    "build",
    "flatten",
]


@dataclass
class Skeleton:
    """Top levels of a tree as flat arrays.

    Internal entries ``i`` hold a splitter ``(dims[i], coords[i])``.
    ``left[i]`` / ``right[i]`` are either another entry index (``>= 0``) or
    an encoded bucket ``-(b + 1)``.  ``root`` uses the same encoding, so a
    skeleton with no internal entry routes everything to bucket 0.
    Buckets are numbered left to right.

    ``nodes`` and ``subtrees`` are filled only for skeletons extracted from
    an existing tree: the interior node behind each entry and the subtree
    behind each bucket.
    """

    dims: np.ndarray
    coords: np.ndarray
    left: np.ndarray
    right: np.ndarray
    root: int
    n_buckets: int
    lam: int
    nodes: Optional[list] = None
    subtrees: Optional[list] = None

    @classmethod
    def from_heap(cls, dims, coords, lam):
        ne = (1 << lam) - 1
        child = np.arange(ne, dtype=np.int64) * 2 + 1
        left = np.where(child < ne, child, -(child - ne) - 1)
        right = np.where(child + 1 < ne, child + 1, -(child + 1 - ne) - 1)
        return cls(dims, coords, left, right, 0, 1 << lam, lam)

    @property
    def n_entries(self) -> int:
        return len(self.dims)

    def lookup(self, p) -> int:
        return int(K.lookup(np.asarray(p), self.root, self.dims, self.coords, self.left, self.right))

    def lookup_all(self, points) -> np.ndarray:
        out = np.empty(len(points), np.int64)
        K.lookup_all(points, self.root, self.dims, self.coords, self.left, self.right, out)
        return out

    def spans(self) -> list[tuple[int, int, int]]:
        """Bucket range ``(lo, mid, hi)`` covered by each entry and its left child."""
        out = [None] * self.n_entries
        if self.root < 0:
            return out

        def walk(code):
            if code < 0:
                b = -code - 1
                return b, b + 1
            lo, mid = walk(int(self.left[code]))
            _, hi = walk(int(self.right[code]))
            out[code] = (lo, mid, hi)
            return lo, hi

        walk(self.root)
        return out


@dataclass
class BucketPartition:
    """Output of :func:`sieve`: ``permuted[offsets[j]:offsets[j+1]]`` is bucket ``j``."""

    permuted: np.ndarray
    offsets: np.ndarray
    comparisons: int = 0
    max_comparisons: int = 0
    passes: int = 2

    def bucket(self, j: int) -> np.ndarray:
        return self.permuted[self.offsets[j] : self.offsets[j + 1]]

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)


def _rng(cfg: Config, key: Sequence[int]) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=tuple(key)))


def sample(points, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` rows drawn uniformly with replacement."""
    if len(points) == 0:
        raise ValueError("cannot sample from an empty point set")
    idx = rng.integers(0, len(points), size=count)
    return points[idx]


def build_skeleton(samples, lam: int, enclosing: Box) -> Skeleton:
    samples = np.array(as_points(samples), copy=True)
    if enclosing.is_empty:
        raise ValueError("enclosing box must be non-empty")
    ne = (1 << lam) - 1
    dims = np.empty(ne, np.int64)
    coords = np.empty(ne, samples.dtype)
    blo = enclosing.lo.astype(samples.dtype)
    bhi = enclosing.hi.astype(samples.dtype)
    K.build_skeleton(samples, blo, bhi, lam, dims, coords)
    return Skeleton.from_heap(dims, coords, lam)


def _sieve_into(src: np.ndarray, dst: np.ndarray, sk: Skeleton, seq_cutoff: int = 1024):
    n = len(src)
    nb = sk.n_buckets
    chunk = 1 << sk.lam
    nchunks = -(-n // chunk)
    if nchunks == 0:
        return np.zeros(nb + 1, np.int64), 0, 0
    A = np.zeros((nchunks, nb), np.int64)
    groups = split_range(nchunks, get_num_threads())
    args = (sk.root, sk.dims, sk.coords, sk.left, sk.right)

    stats = parallel_map(
        lambda g: K.sieve_count(src, g[0], g[1], chunk, *args, A),
        groups,
        work=n,
        cutoff=seq_cutoff,
    )
    # exclusive prefix sum of A read in column-major order
    B = np.empty_like(A)
    K.column_scan(A, B)
    offsets = np.empty(nb + 1, np.int64)
    offsets[:nb] = B[0]
    offsets[nb] = n
    parallel_map(
        lambda g: K.sieve_distribute(src, dst, g[0], g[1], chunk, *args, B),
        groups,
        work=n,
        cutoff=seq_cutoff,
    )
    comps = sum(s[0] for s in stats)
    worst = max(s[1] for s in stats)
    return offsets, comps, worst


def sieve(points, skeleton: Skeleton) -> BucketPartition:
    """Stable counting distribution of ``points`` into the skeleton's buckets.

    Two passes over chunks of ``2**lam`` points: count per (chunk, bucket),
    then scatter using the column-major exclusive prefix sum as cursors.
    """
    src = as_points(points)
    dst = np.empty_like(src)
    offsets, comps, worst = _sieve_into(src, dst, skeleton)
    return BucketPartition(dst, offsets, comps, worst)


def _forest_nodes(pts, nn, kind, ndim, ncoord, nleft, nright, nstart, ncount, roots):
    kind = kind[:nn]
    nodes = [None] * nn
    leaves = np.flatnonzero(kind == K.KIND_LEAF)
    for i, s, c in zip(leaves.tolist(), nstart[leaves].tolist(), ncount[leaves].tolist()):
        nodes[i] = Leaf(pts[s : s + c])
    heavy = np.flatnonzero(kind == K.KIND_HEAVY)
    for i, s, c in zip(heavy.tolist(), nstart[heavy].tolist(), ncount[heavy].tolist()):
        nodes[i] = HeavyLeaf(pts[s].copy(), c)
    # children have larger ids, so walking ids downwards builds bottom-up
    inner = np.flatnonzero(kind == K.KIND_INTERIOR)[::-1]
    for i, d, x, c, l, r in zip(
        inner.tolist(),
        ndim[inner].tolist(),
        ncoord[inner].tolist(),
        ncount[inner].tolist(),
        nleft[inner].tolist(),
        nright[inner].tolist(),
    ):
        nodes[i] = Interior(d, x, c, nodes[l], nodes[r])
    return [nodes[r] for r in roots.tolist()]


def _plain_forest(pts, tasks, phi):
    """Exact-median subtrees for ``tasks`` of ``(lo, hi, box_lo, box_hi)`` rows of ``pts``."""
    T = len(tasks)
    D = pts.shape[1]
    tlo = np.empty(T, np.int64)
    thi = np.empty(T, np.int64)
    tbox = np.empty((T, 2, D), pts.dtype)
    rows = 0
    for t, (lo, hi, blo, bhi) in enumerate(tasks):
        tlo[t] = lo
        thi[t] = hi
        tbox[t, 0] = blo
        tbox[t, 1] = bhi
        rows += hi - lo
    cap = 2 * rows + T
    kind = np.empty(cap, np.int8)
    ndim = np.empty(cap, np.int64)
    ncoord = np.empty(cap, pts.dtype)
    nleft = np.empty(cap, np.int64)
    nright = np.empty(cap, np.int64)
    nstart = np.empty(cap, np.int64)
    ncount = np.empty(cap, np.int64)
    roots = np.empty(T, np.int64)
    nn = K.plain_build(pts, tlo, thi, tbox, phi, kind, ndim, ncoord, nleft, nright, nstart, ncount, roots)
    return _forest_nodes(pts, nn, kind, ndim, ncoord, nleft, nright, nstart, ncount, roots)


def _plain_seq(pts, blo, bhi, phi):
    return _plain_forest(pts, [(0, len(pts), blo, bhi)], phi)[0]


def _child_boxes(blo, bhi, d, c):
    llo, lhi = blo, bhi.copy()
    rlo, rhi = blo.copy(), bhi
    if c < lhi[d]:
        lhi[d] = c
    if c > rlo[d]:
        rlo[d] = c
    return (llo, lhi), (rlo, rhi)


def _plain(pts, blo, bhi, cfg: Config):
    """Exact-median build of ``pts`` (permuted in place; leaves are views)."""
    n = len(pts)
    if n == 0:
        return None
    if n < cfg.seq_cutoff or n <= cfg.phi:
        return _plain_seq(pts, blo, bhi, cfg.phi)

    # split large nodes here, then hand the small frontier to the pool
    tasks = []

    def split(view, lo, hi):
        if len(view) < cfg.seq_cutoff or len(view) <= cfg.phi:
            slot = [None]
            tasks.append((view, lo, hi, slot))
            return slot
        d, c, mid = K.split_once(view, lo, hi)
        if d < 0:
            return [HeavyLeaf(view[0].copy(), len(view))]
        (llo, lhi), (rlo, rhi) = _child_boxes(lo, hi, d, c)
        return (d, c, len(view), split(view[:mid], llo, lhi), split(view[mid:], rlo, rhi))

    plan = split(pts, blo, bhi)
    results = parallel_map(lambda t: _plain_seq(t[0], t[1], t[2], cfg.phi), tasks)
    for t, r in zip(tasks, results):
        t[3][0] = r

    def assemble(p):
        if isinstance(p, list):
            return p[0]
        d, c, size, l, r = p
        return Interior(d, c, size, assemble(l), assemble(r))

    return assemble(plan)


def plain_build(points, cfg: Config = Config(), box: Optional[Box] = None):
    """One-level-at-a-time construction with exact medians.

    Each node splits its subspace's widest dimension at the coordinate of
    rank ``n // 2`` (ties go right).  Groups of at most ``phi`` points become
    a :class:`Leaf`; groups of identical points larger than that become a
    :class:`HeavyLeaf`.
    """
    pts = np.array(as_points(points), copy=True)
    if len(pts) == 0:
        return None
    blo, bhi = _box_arrays(pts, box)
    return _plain(pts, blo, bhi, cfg)


def _box_arrays(pts, box):
    if box is None:
        lo = np.empty(pts.shape[1], pts.dtype)
        hi = np.empty(pts.shape[1], pts.dtype)
        K.bbox(pts, lo, hi)
        return lo, hi
    return box.lo.astype(pts.dtype), box.hi.astype(pts.dtype)


def _build(src, dst, blo, bhi, cfg: Config, key: tuple):
    n = len(src)
    if n < cfg.sample_size:
        return _plain(src, blo, bhi, cfg)
    lam = cfg.lam
    ne = (1 << lam) - 1
    samples = sample(src, cfg.sample_size, _rng(cfg, key))
    dims = np.empty(ne, np.int64)
    coords = np.empty(ne, src.dtype)
    K.build_skeleton(samples, blo, bhi, lam, dims, coords)
    sk = Skeleton.from_heap(dims, coords, lam)
    offsets, _, _ = _sieve_into(src, dst, sk, cfg.seq_cutoff)
    counts = np.diff(offsets)

    if counts.max() == n:
        # nothing separated: one exact split decides between progress and duplicates
        d, c, mid = K.split_once(dst, blo, bhi)
        if d < 0:
            return HeavyLeaf(dst[0].copy(), n)
        (llo, lhi), (rlo, rhi) = _child_boxes(blo, bhi, d, c)
        nb = cfg.n_buckets
        halves = parallel_map(
            lambda h: _build(*h),
            [
                (dst[:mid], src[:mid], llo, lhi, cfg, key + (nb,)),
                (dst[mid:], src[mid:], rlo, rhi, cfg, key + (nb + 1,)),
            ],
            work=n,
            cutoff=cfg.seq_cutoff,
        )
        return Interior(d, c, n, halves[0], halves[1])

    # subspace of every heap entry and bucket
    boxes = [None] * (2 * ne + 1)
    boxes[0] = (blo, bhi)
    dl = dims.tolist()
    for e in range(ne):
        lo, hi = boxes[e]
        boxes[2 * e + 1], boxes[2 * e + 2] = _child_boxes(lo, hi, dl[e], coords[e])
    off = offsets.tolist()
    small, large = [], []
    for b in range(cfg.n_buckets):
        size = off[b + 1] - off[b]
        if size >= cfg.sample_size:
            large.append(b)
        elif size:
            small.append(b)

    # one job per large bucket, small buckets batched into a few kernel calls
    jobs = [("build", b) for b in large]
    if small:
        groups = split_range(len(small), min(get_num_threads(), max(1, (n - sum(off[b + 1] - off[b] for b in large)) // cfg.seq_cutoff)))
        jobs += [("forest", small[g0:g1]) for g0, g1 in groups]

    def run(job):
        tag, arg = job
        if tag == "build":
            a, z = off[arg], off[arg + 1]
            lo, hi = boxes[ne + arg]
            return [_build(dst[a:z], src[a:z], lo, hi, cfg, key + (arg,))]
        tasks = [(off[b], off[b + 1]) + boxes[ne + b] for b in arg]
        return _plain_forest(dst, tasks, cfg.phi)

    built = parallel_map(run, jobs, work=n, cutoff=cfg.seq_cutoff)
    order = large + [b for _, grp in jobs[len(large):] for b in grp]
    trees = [t for res in built for t in res]
    sub = [None] * cfg.n_buckets
    for b, t in zip(order, trees):
        sub[b] = t
    cl = coords.tolist()

    def assemble(e):
        if e >= ne:
            return sub[e - ne]
        l = assemble(2 * e + 1)
        r = assemble(2 * e + 2)
        if l is None:
            return r
        if r is None:
            return l
        return Interior(dl[e], cl[e], l.size + r.size, l, r)

    return assemble(0)


def build(points, cfg: Config = Config(), *, key: Sequence[int] = (0,), box: Optional[Box] = None):
    """Build a tree over ``points`` (a multiset); returns ``None`` when empty.

    The result depends only on the input order, ``cfg`` and ``key`` (the
    random-stream prefix), never on the thread count.
    """
    pts = np.array(as_points(points), copy=True)
    if len(pts) == 0:
        return None
    blo, bhi = _box_arrays(pts, box)
    tmp = np.empty_like(pts)
    return _build(pts, tmp, blo, bhi, cfg, tuple(key))


def _leaf_dtype(node):
    while isinstance(node, Interior):
        node = node.left
    if isinstance(node, Leaf):
        return node.points.dtype
    return node.point.dtype


def _flatten_into(node, out, pos):
    stack = [node]
    while stack:
        t = stack.pop()
        if isinstance(t, Interior):
            stack.append(t.right)
            stack.append(t.left)
        elif isinstance(t, Leaf):
            m = len(t.points)
            out[pos : pos + m] = t.points
            pos += m
        else:
            out[pos : pos + t.count] = t.point
            pos += t.count
    return pos


def flatten(node, *, dims: Optional[int] = None, dtype=None, cutoff: int = 1 << 16) -> np.ndarray:
    """All points of a subtree in left-to-right order (heavy leaves expanded)."""
    if node is None:
        return np.empty((0, dims or 0), dtype=dtype or np.int64)
    D = tree_dims(node)
    out = np.empty((node.size, D), dtype=_leaf_dtype(node))
    if node.size < cutoff or get_num_threads() <= 1:
        _flatten_into(node, out, 0)
        return out
    tasks = []

    def plan(t, pos):
        if isinstance(t, Interior) and t.size >= cutoff:
            plan(t.left, pos)
            plan(t.right, pos + t.left.size)
        else:
            tasks.append((t, pos))

    plan(node, 0)
    parallel_map(lambda tp: _flatten_into(tp[0], out, tp[1]), tasks)
    return out
