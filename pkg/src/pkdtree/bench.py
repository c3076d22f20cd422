"""Benchmark drivers behind ``pkd bench``.

Every driver validates the tree it produced with :func:`oracle.check_tree`
before reporting a time, runs one untimed warm-up, then ``reps`` timed
runs.  Records are plain dicts with a stable key set, serialised as JSON
lines by the CLI.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional

import numpy as np

from .construct import build
from .core import Box, Config, tree_height
from .datagen import GenSpec, generate
from .oracle import check_tree
from .parallel import get_num_threads, num_threads, parallel_map
from .query import knn, range_count
from .tree import PkdTree
from .update import UpdateStats, batch_delete, batch_insert

__all__ = [
    "BenchRecord",
    "ValidationError",
    "cmd_gen",
    "cmd_build",
    "cmd_update",
    "cmd_query",
    "cmd_sweep_alpha",
    "summarize",
    "write_records",
]


class ValidationError(RuntimeError):
    """The structure produced by a benchmark failed its correctness gate."""


@dataclass
class BenchRecord:
    op: str
    n: int
    dims: int
    dist: str
    seed: int
    alpha: float
    lam: int
    sigma: int
    phi: int
    threads: int
    wall_ns: int
    throughput: float  # points (or queries) per second
    rep: Optional[int] = None
    batch: Optional[int] = None
    query: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _record(op, spec: GenSpec, cfg: Config, wall_ns, work, **kw) -> BenchRecord:
    return BenchRecord(
        op=op,
        n=spec.n,
        dims=spec.dims,
        dist=spec.dist,
        seed=spec.seed,
        alpha=cfg.alpha,
        lam=cfg.lam,
        sigma=cfg.sigma,
        phi=cfg.phi,
        threads=get_num_threads(),
        wall_ns=int(wall_ns),
        throughput=work / (wall_ns / 1e9) if wall_ns else float("inf"),
        **kw,
    )


def summarize(records: list[BenchRecord]) -> BenchRecord:
    """Mean over timed repetitions, tagged ``rep=None`` and ``extra['summary']``."""
    if not records:
        raise ValueError("nothing to summarise")
    first = records[0]
    mean_ns = sum(r.wall_ns for r in records) / len(records)
    out = BenchRecord(**{**first.to_dict(), "extra": dict(first.extra)})
    out.rep = None
    out.wall_ns = int(round(mean_ns))
    out.throughput = sum(r.throughput for r in records) / len(records)
    out.extra["summary"] = True
    out.extra["reps"] = len(records)
    return out


def _gate(root, cfg: Config, what: str):
    # sampled rebuilds place splitters within a few percent of the median, so
    # a very small alpha is audited against the default band instead
    slack = max(0.05, Config().alpha + 0.05 - cfg.alpha)
    problems = check_tree(root, cfg, slack=slack)
    if problems:
        raise ValidationError(f"{what}: {len(problems)} violations, first: {problems[0].message}")


def _timed(fn):
    t0 = time.perf_counter_ns()
    out = fn()
    return out, time.perf_counter_ns() - t0


def cmd_gen(spec: GenSpec, out_path, *, csv: bool = False) -> int:
    from .io import write_points

    pts = generate(spec)
    write_points(out_path, pts, csv=csv)
    return len(pts)


def _points_for(spec: GenSpec, points=None) -> np.ndarray:
    return generate(spec) if points is None else np.asarray(points)


def cmd_build(spec: GenSpec, cfg: Config = Config(), *, reps: int = 3, threads: Optional[int] = None, points=None):
    """Time full construction; returns ``(records, summary, root)``."""
    pts = _points_for(spec, points)
    if points is not None:
        spec = GenSpec(spec.dist, len(pts), pts.shape[1], spec.seed, real=pts.dtype.kind == "f")
    with num_threads(threads):
        root = build(pts, cfg)  # warm-up, also the validated instance
        _gate(root, cfg, "build")
        records = []
        for r in range(reps):
            root, ns = _timed(lambda: build(pts, cfg))
            records.append(_record("build", spec, cfg, ns, len(pts), rep=r, extra={"height": tree_height(root)}))
    if points is not None:
        for r in records:
            r.dist = "file"
    return records, summarize(records), root


def cmd_update(
    spec: GenSpec,
    fracs: Iterable[float],
    op: str = "insert",
    cfg: Config = Config(),
    *,
    reps: int = 3,
    threads: Optional[int] = None,
    compare_rebuild: bool = True,
):
    """Time one batch update per fraction on a freshly built base tree.

    Insert batches come from the same distribution with a derived seed;
    delete batches are drawn from the stored points.  With
    ``compare_rebuild`` each record also carries the time of building the
    post-update multiset from scratch.
    """
    if op not in ("insert", "delete"):
        raise ValueError("op must be 'insert' or 'delete'")
    base = generate(spec)
    records, summaries = [], []
    with num_threads(threads):
        for frac in fracs:
            if not 0 < frac <= 1:
                raise ValueError(f"batch fraction must lie in (0, 1], got {frac}")
            m = max(1, int(round(spec.n * frac)))
            if op == "insert":
                batch = generate(GenSpec(spec.dist, m, spec.dims, spec.seed + 1, spec.bounds, spec.restart_prob, spec.step, spec.real))
                final = np.concatenate([base, batch])
            else:
                idx = np.random.default_rng(spec.seed + 1).choice(len(base), size=m, replace=False)
                batch = base[idx]
                keep = np.ones(len(base), bool)
                keep[idx] = False
                final = base[keep]
            fn = batch_insert if op == "insert" else batch_delete
            per = []
            for r in range(-1, reps):
                root = build(base, cfg)
                stats = UpdateStats()
                root, ns = _timed(lambda: fn(root, batch, cfg, op_id=1, stats=stats))
                if r < 0:
                    _gate(root, cfg, op)
                    if root.size != len(final):
                        raise ValidationError(f"{op}: size {root.size} != expected {len(final)}")
                    continue
                extra = {"rebuild_points": stats.rebuild_points, "rebuilds": stats.rebuilds}
                if compare_rebuild:
                    _, rns = _timed(lambda: build(final, cfg))
                    extra["rebuild_ns"] = rns
                    extra["speedup_vs_rebuild"] = rns / ns if ns else float("inf")
                per.append(_record(op, spec, cfg, ns, m, rep=r, batch=m, extra=extra))
            records.extend(per)
            s = summarize(per)
            if compare_rebuild:
                s.extra["rebuild_ns"] = int(np.mean([p.extra["rebuild_ns"] for p in per]))
                s.extra["speedup_vs_rebuild"] = s.extra["rebuild_ns"] / s.wall_ns
            summaries.append(s)
    return records, summaries


def _random_boxes(pts: np.ndarray, count: int, rng, frac: float = 0.01):
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    width = np.maximum((hi - lo) * frac ** (1 / pts.shape[1]), 1)
    centers = pts[rng.integers(0, len(pts), count)]
    out = []
    for c in centers:
        half = (width * rng.uniform(0.25, 1.0, pts.shape[1]) / 2).astype(pts.dtype)
        out.append(Box(c - half, c + half))
    return out


def cmd_query(
    spec: GenSpec,
    cfg: Config = Config(),
    *,
    kind: str = "knn",
    ks: Iterable[int] = (1, 10),
    queries: int = 1000,
    reps: int = 3,
    threads: Optional[int] = None,
):
    """Queries run in parallel with each other, each one sequentially."""
    pts = generate(spec)
    tree = PkdTree(pts, cfg)
    _gate(tree.root, cfg, "query base")
    rng = np.random.default_rng(spec.seed + 2)
    records, summaries = [], []
    with num_threads(threads):
        if kind == "knn":
            qs = pts[rng.integers(0, len(pts), queries)]
            jobs = [(f"knn k={k}", lambda q, k=k: knn(tree.root, q, k, box=tree.box), qs) for k in ks]
        elif kind in ("range-count", "range"):
            boxes = _random_boxes(pts, queries, rng)
            jobs = [("range-count", lambda b: range_count(tree.root, b, box=tree.box), boxes)]
        else:
            raise ValueError(f"unknown query kind {kind!r}")
        for label, fn, items in jobs:
            per = []
            for r in range(-1, reps):
                _, ns = _timed(lambda: parallel_map(fn, items))
                if r >= 0:
                    per.append(_record("query", spec, cfg, ns, len(items), rep=r, query=label))
            records.extend(per)
            summaries.append(summarize(per))
    return records, summaries


def cmd_sweep_alpha(
    alphas: Iterable[float],
    *,
    dist: str = "varden",
    batches: int = 1000,
    batch_size: int = 1000,
    dims: int = 3,
    seed: int = 0,
    cfg: Config = Config(),
    threads: Optional[int] = None,
    gate: bool = True,
):
    """Incremental construction from empty for each ``alpha``.

    All alphas see the same point sequence, cut into ``batches`` batches.
    ``extra['rebuild_points']`` is the total size of balance-triggered
    rebuilds and ``extra['rebuild_ratio']`` that total over the final size.
    """
    spec = GenSpec(dist, batches * batch_size, dims, seed)
    pts = generate(spec)
    out = []
    with num_threads(threads):
        for a in alphas:
            c = Config(lam=cfg.lam, sigma=cfg.sigma, alpha=a, phi=cfg.phi, seq_cutoff=cfg.seq_cutoff, seed=cfg.seed)
            root, stats = None, UpdateStats()
            t0 = time.perf_counter_ns()
            for i in range(batches):
                root = batch_insert(root, pts[i * batch_size : (i + 1) * batch_size], c, op_id=i + 1, stats=stats)
            ns = time.perf_counter_ns() - t0
            if gate:
                _gate(root, c, f"sweep alpha={a}")
            out.append(
                _record(
                    "sweep-alpha",
                    spec,
                    c,
                    ns,
                    len(pts),
                    batch=batch_size,
                    extra={
                        "rebuilds": stats.rebuilds,
                        "rebuild_points": stats.rebuild_points,
                        "rebuild_ratio": stats.rebuild_points / max(1, len(pts)),
                        "leaf_rebuilds": stats.leaf_rebuilds,
                        "height": tree_height(root),
                    },
                )
            )
    return out


def write_records(records: Iterable[BenchRecord], fh) -> None:
    for r in records:
        fh.write(json.dumps(r.to_dict(), sort_keys=True))
        fh.write("\n")
