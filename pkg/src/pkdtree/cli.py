"""``pkd`` command line: data generation, benchmarks and tree validation.

Exit status: 0 on success, 1 on usage or I/O errors, 2 when a structure
fails validation.
"""

from __future__ import annotations

import argparse
import contextlib
import sys
from collections import Counter

from .bench import (
    ValidationError,
    cmd_build,
    cmd_gen,
    cmd_query,
    cmd_sweep_alpha,
    cmd_update,
    write_records,
)
from .construct import build, flatten
from .core import Config
from .datagen import DISTRIBUTIONS, GenSpec
from .io import PointFileError, load_tree, read_points, save_tree
from .oracle import check_tree

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _data_flags(p, n_default=100_000):
    p.add_argument("--dist", choices=DISTRIBUTIONS, default="uniform")
    p.add_argument("--n", type=int, default=n_default)
    p.add_argument("--dims", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--real", action="store_true", help="real-valued coordinates")


def _cfg_flags(p):
    p.add_argument("--lambda", dest="lam", type=int, default=6)
    p.add_argument("--sigma", type=int, default=32)
    p.add_argument("--alpha", type=float, default=0.3)
    p.add_argument("--leaf", type=int, default=32, help="leaf wrap phi")
    p.add_argument("--cutoff", type=int, default=1024, help="sequential cutoff")
    p.add_argument("--threads", type=int, default=None, help="worker bound (default PKD_THREADS or all cores)")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--output", default=None, help="write JSON lines here instead of stdout")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pkd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("gen", help="write a synthetic point file")
    _data_flags(g)
    g.add_argument("--output", required=True)
    g.add_argument("--csv", action="store_true", help="text instead of binary payload")

    b = sub.add_parser("bench", help="timed experiments")
    bsub = b.add_subparsers(dest="bench", parser_class=_Parser)
    bsub.required = True

    bb = bsub.add_parser("build", help="full construction")
    _data_flags(bb)
    _cfg_flags(bb)
    bb.add_argument("--input", default=None, help="point file instead of generated data")
    bb.add_argument("--save-tree", default=None, help="store the built tree (.npz)")

    bu = bsub.add_parser("update", help="one batch insert or delete per fraction")
    _data_flags(bu, 1_000_000)
    _cfg_flags(bu)
    bu.add_argument("--op", choices=("insert", "delete"), default="insert")
    bu.add_argument("--batch-frac", type=_float_list, default=[0.0001, 0.001, 0.01, 0.1])
    bu.add_argument("--no-rebuild", action="store_true", help="skip the full-rebuild comparison")

    bq = bsub.add_parser("query", help="kNN or range-count suite")
    _data_flags(bq)
    _cfg_flags(bq)
    bq.add_argument("--kind", choices=("knn", "range-count"), default="knn")
    bq.add_argument("--k", type=_int_list, default=[1, 10, 100])
    bq.add_argument("--queries", type=int, default=1000)

    bs = bsub.add_parser("sweep-alpha", help="incremental construction for several alpha")
    bs.add_argument("--dist", choices=DISTRIBUTIONS, default="varden")
    bs.add_argument("--dims", type=int, default=3)
    bs.add_argument("--seed", type=int, default=0)
    _cfg_flags(bs)
    bs.set_defaults(alpha=None)
    bs.add_argument("--alphas", type=_float_list, default=[0.01, 0.1, 0.2, 0.3, 0.4, 0.5])
    bs.add_argument("--batches", type=int, default=1000)
    bs.add_argument("--batch-size", type=int, default=1000)

    v = sub.add_parser("verify", help="validate a stored tree against a point file")
    v.add_argument("points", help="point file")
    v.add_argument("--tree", default=None, help="tree snapshot (.npz); built from the points if omitted")
    _cfg_flags(v)
    return parser


def _cfg(args) -> Config:
    try:
        return Config(
            lam=args.lam,
            sigma=args.sigma,
            alpha=args.alpha if args.alpha is not None else 0.3,
            phi=args.leaf,
            seq_cutoff=args.cutoff,
            seed=getattr(args, "seed", 0) or 0,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _spec(args) -> GenSpec:
    try:
        return GenSpec(args.dist, args.n, args.dims, args.seed, real=args.real)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


@contextlib.contextmanager
def _sink(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def _check_common(args):
    if args.threads is not None and args.threads < 1:
        raise UsageError("--threads must be >= 1")
    if args.reps < 1:
        raise UsageError("--reps must be >= 1")


def _run(args) -> int:
    if args.command == "gen":
        count = cmd_gen(_spec(args), args.output, csv=args.csv)
        print(f"wrote {count} points to {args.output}", file=sys.stderr)
        return EXIT_OK

    if args.command == "verify":
        _check_common(args)
        cfg = _cfg(args)
        pts = read_points(args.points)
        if args.tree:
            root, cfg = load_tree(args.tree)
        else:
            root = build(pts, cfg)
        problems = check_tree(root, cfg)
        stored = Counter(map(tuple, flatten(root, dims=pts.shape[1], dtype=pts.dtype).tolist()))
        if stored != Counter(map(tuple, pts.tolist())):
            print("point multiset differs from the point file", file=sys.stderr)
            problems.append(None)
        for p in problems:
            if p is not None:
                print(f"{p.kind} at {''.join(map(str, p.path)) or 'root'}: {p.message}", file=sys.stderr)
        if problems:
            return EXIT_INVALID
        print(f"ok: {len(pts)} points, no violations", file=sys.stderr)
        return EXIT_OK

    _check_common(args)
    cfg = _cfg(args)
    if args.bench == "build":
        spec = _spec(args)
        pts = read_points(args.input) if args.input else None
        records, summary, root = cmd_build(spec, cfg, reps=args.reps, threads=args.threads, points=pts)
        if args.save_tree:
            save_tree(args.save_tree, root, cfg)
        out = records + [summary]
    elif args.bench == "update":
        records, summaries = cmd_update(
            _spec(args), args.batch_frac, args.op, cfg, reps=args.reps, threads=args.threads, compare_rebuild=not args.no_rebuild
        )
        out = records + summaries
    elif args.bench == "query":
        records, summaries = cmd_query(
            _spec(args), cfg, kind=args.kind, ks=args.k, queries=args.queries, reps=args.reps, threads=args.threads
        )
        out = records + summaries
    else:
        out = cmd_sweep_alpha(
            args.alphas,
            dist=args.dist,
            batches=args.batches,
            batch_size=args.batch_size,
            dims=args.dims,
            seed=args.seed,
            cfg=cfg,
            threads=args.threads,
        )
    with _sink(args.output) as fh:
        write_records(out, fh)
    return EXIT_OK


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except UsageError as exc:
        print(f"pkd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, PointFileError) as exc:
        print(f"pkd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"pkd: validation failed: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"pkd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
