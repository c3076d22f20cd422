"""Point files and tree snapshots.

Point file: one ASCII header line ``pkd-points v1 <n> <D> <int|real>``
followed by ``n * D`` little-endian 64-bit values in row-major order.  The
CSV variant has the same header followed by one comma-separated row per
point; reals are written with ``repr`` so they round-trip bit for bit.

Tree snapshot: an ``.npz`` with the nodes in pre-order.
"""

from __future__ import annotations

import os

import numpy as np

from .core import Config, HeavyLeaf, Interior, Leaf, as_points

__all__ = ["write_points", "read_points", "save_tree", "load_tree", "PointFileError"]

MAGIC = "pkd-points"
VERSION = "v1"


class PointFileError(ValueError):
    pass


def _header(n, D, kind):
    return f"{MAGIC} {VERSION} {n} {D} {kind}\n"


def write_points(path, points, *, csv: bool = False) -> None:
    pts = as_points(points)
    n, D = pts.shape
    kind = "real" if pts.dtype.kind == "f" else "int"
    if csv:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(_header(n, D, kind))
            for row in pts.tolist():
                fh.write(",".join(repr(v) for v in row))
                fh.write("\n")
        return
    with open(path, "wb") as fh:
        fh.write(_header(n, D, kind).encode("ascii"))
        fh.write(pts.astype(pts.dtype.newbyteorder("<"), copy=False).tobytes(order="C"))


def _parse_header(line: str):
    parts = line.split()
    if len(parts) != 5 or parts[0] != MAGIC:
        raise PointFileError(f"not a point file (header {line.strip()!r})")
    if parts[1] != VERSION:
        raise PointFileError(f"unsupported point-file version {parts[1]!r}")
    try:
        n, D = int(parts[2]), int(parts[3])
    except ValueError:
        raise PointFileError("bad point count or dimension in header") from None
    if n < 0 or D < 1 or parts[4] not in ("int", "real"):
        raise PointFileError(f"bad header {line.strip()!r}")
    return n, D, np.dtype("<f8") if parts[4] == "real" else np.dtype("<i8")


_TEXT_BYTES = frozenset(b"0123456789+-.,eEinfatyINFATY \r\n")


def _looks_like_text(payload: bytes) -> bool:
    return len(payload) > 0 and payload.endswith(b"\n") and set(payload) <= _TEXT_BYTES


def read_points(path) -> np.ndarray:
    """Read either encoding; the format is detected from the payload."""
    with open(path, "rb") as fh:
        line = fh.readline(256).decode("ascii", errors="replace")
        n, D, dtype = _parse_header(line)
        payload = fh.read()
    if not _looks_like_text(payload):
        if len(payload) != n * D * 8:
            raise PointFileError(f"expected {n * D * 8} payload bytes, found {len(payload)}")
        arr = np.frombuffer(payload, dtype=dtype).reshape(n, D)
        return arr.astype(dtype.newbyteorder("="))
    text = payload.decode("ascii")
    rows = [r for r in text.splitlines() if r.strip()]
    if len(rows) != n:
        raise PointFileError(f"expected {n} rows, found {len(rows)}")
    conv = float if dtype.kind == "f" else int
    out = np.empty((n, D), dtype=dtype.newbyteorder("="))
    for i, r in enumerate(rows):
        vals = r.split(",")
        if len(vals) != D:
            raise PointFileError(f"row {i} has {len(vals)} values, expected {D}")
        out[i] = [conv(v) for v in vals]
    return out


def save_tree(path, root, cfg: Config = Config()) -> None:
    kinds, dims, coords, sizes, chunks, heavy = [], [], [], [], [], []
    dtype = None
    stack = [root] if root is not None else []
    while stack:
        t = stack.pop()
        if isinstance(t, Interior):
            kinds.append(0)
            dims.append(t.dim)
            coords.append(t.coord)
            sizes.append(t.size)
            stack.append(t.right)
            stack.append(t.left)
        elif isinstance(t, Leaf):
            kinds.append(1)
            dims.append(-1)
            coords.append(0)
            sizes.append(len(t.points))
            chunks.append(t.points)
            dtype = t.points.dtype
        else:
            kinds.append(2)
            dims.append(-1)
            coords.append(0)
            sizes.append(t.count)
            heavy.append(t.point)
            dtype = t.point.dtype
    dtype = dtype or np.dtype(np.int64)
    D = (chunks[0].shape[1] if chunks else len(heavy[0])) if (chunks or heavy) else 0
    np.savez(
        path,
        kinds=np.array(kinds, np.int8),
        dims=np.array(dims, np.int64),
        coords=np.array(coords, dtype),
        sizes=np.array(sizes, np.int64),
        leaf_points=np.concatenate(chunks) if chunks else np.empty((0, D), dtype),
        heavy_points=np.array(heavy, dtype).reshape(len(heavy), D),
        cfg=np.array([cfg.lam, cfg.sigma, cfg.phi, cfg.seq_cutoff, cfg.seed], np.int64),
        alpha=np.array(cfg.alpha),
    )


def load_tree(path):
    """Returns ``(root, cfg)``."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with np.load(path) as z:
        kinds = z["kinds"].tolist()
        dims = z["dims"].tolist()
        coords = z["coords"].tolist()
        sizes = z["sizes"].tolist()
        leaf_pts = z["leaf_points"]
        heavy = z["heavy_points"]
        lam, sigma, phi, cut, seed = z["cfg"].tolist()
        cfg = Config(lam=lam, sigma=sigma, alpha=float(z["alpha"]), phi=phi, seq_cutoff=cut, seed=seed)
    if not kinds:
        return None, cfg
    pos = {"i": 0, "leaf": 0, "heavy": 0}

    def node():
        # pre-order decode; recursion depth equals tree height
        i = pos["i"]
        pos["i"] += 1
        if kinds[i] == 0:
            left = node()
            right = node()
            return Interior(dims[i], coords[i], sizes[i], left, right)
        if kinds[i] == 1:
            a = pos["leaf"]
            pos["leaf"] += sizes[i]
            return Leaf(leaf_pts[a : a + sizes[i]])
        h = pos["heavy"]
        pos["heavy"] += 1
        return HeavyLeaf(heavy[h].copy(), sizes[i])

    return node(), cfg
