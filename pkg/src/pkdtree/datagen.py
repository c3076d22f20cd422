"""Seeded synthetic point sets.

``uniform`` draws every coordinate independently from the bounds.
``varden`` is a random walk that mostly takes small steps and, with a low
probability, restarts at a uniform random location; the result is a set
of dense clusters that can lie far apart.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import _kernels as K

__all__ = ["GenSpec", "gen_uniform", "gen_varden", "generate", "DISTRIBUTIONS"]

DISTRIBUTIONS = ("uniform", "varden")

Number = Union[int, float]


@dataclass(frozen=True)
class GenSpec:
    dist: str = "uniform"
    n: int = 0
    dims: int = 3
    seed: int = 0
    bounds: tuple[Number, Number] = (0, 10**9)
    restart_prob: float = 1e-4
    step: Optional[Number] = None  # default: bounds width / 1e5
    real: bool = False

    def __post_init__(self):
        if self.dist not in DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.dist!r}; choose from {DISTRIBUTIONS}")
        if self.n < 0:
            raise ValueError("n must be >= 0")
        if self.dims < 1:
            raise ValueError("dims must be >= 1")
        if not 0 < self.restart_prob < 1:
            raise ValueError("restart_prob must lie in (0, 1)")
        lo, hi = self.bounds
        if lo > hi:
            raise ValueError("bounds must satisfy lo <= hi")
        if self.step is not None and self.step < 0:
            raise ValueError("step must be >= 0")

    @property
    def dtype(self):
        return np.float64 if self.real else np.int64

    @property
    def step_size(self) -> Number:
        if self.step is not None:
            return self.step
        lo, hi = self.bounds
        width = hi - lo
        return width / 1e5 if self.real else max(1, width // 100_000)


def _rng(spec: GenSpec) -> np.random.Generator:
    return np.random.default_rng(spec.seed)


def _uniform(rng, spec: GenSpec, shape):
    lo, hi = spec.bounds
    if spec.real:
        return rng.uniform(lo, hi, size=shape)
    return rng.integers(int(lo), int(hi), size=shape, endpoint=True, dtype=np.int64)


def gen_uniform(spec: GenSpec) -> np.ndarray:
    """``spec.n`` i.i.d. points, each coordinate uniform over ``spec.bounds``."""
    return _uniform(_rng(spec), spec, (spec.n, spec.dims)).astype(spec.dtype, copy=False)


def gen_varden(spec: GenSpec) -> np.ndarray:
    """Random walk with restarts: clustered, far-apart dense regions."""
    n, D = spec.n, spec.dims
    out = np.empty((n, D), spec.dtype)
    if n == 0:
        return out
    rng = _rng(spec)
    start = _uniform(rng, spec, D).astype(spec.dtype)
    restart_u = rng.random(n)
    njumps = int((restart_u[1:] < spec.restart_prob).sum())
    jumps = _uniform(rng, spec, (njumps, D)).astype(spec.dtype).reshape(njumps, D)
    step = spec.step_size
    if spec.real:
        steps = rng.uniform(-step, step, size=(n, D))
    else:
        steps = rng.integers(-int(step), int(step), size=(n, D), endpoint=True, dtype=np.int64)
    lo, hi = spec.bounds
    lo = spec.dtype(lo)
    hi = spec.dtype(hi)
    K.varden_walk(out, start, restart_u, spec.restart_prob, steps, jumps, lo, hi)
    return out


def generate(spec: GenSpec) -> np.ndarray:
    return gen_uniform(spec) if spec.dist == "uniform" else gen_varden(spec)
