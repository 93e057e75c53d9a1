"""Enumeration of the lattice points ``x = m0 + M y`` inside ``P * box``.

The scan is organised as blocks: a prefix of coordinates is fixed to
scalars and the remaining coordinates form a dense numpy grid.  Work is
partitioned by ranges of the first coordinate so partitions can run in
parallel and be summed in a fixed order.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import InputError
from .forms import FormSystem, Polynomial

BLOCK = 1 << 21
INT64_SAFE = 1 << 62


def as_fraction(P) -> Fraction:
    if isinstance(P, float):
        if not math.isfinite(P):
            raise InputError("P must be finite")
        P = Fraction(P)
    else:
        P = Fraction(P)
    if P <= 0:
        raise InputError(f"P must be positive, got {P}")
    return P


def coordinate_values(system: FormSystem, P) -> list[list[int]]:
    """Admissible integer values of each coordinate: ``P a <= x <= P b``, ``x = m0 mod M``."""
    P = as_fraction(P)
    out = []
    for (a, b), m in zip(system.box, system.m0):
        lo = math.ceil(P * a)
        hi = math.floor(P * b)
        first = lo + (m - lo) % system.M
        out.append(list(range(first, hi + 1, system.M)))
    return out


def magnitude_bound(poly: Polynomial, bounds: Sequence[int]) -> int:
    """Upper bound on ``|poly|`` when ``|x_j| <= bounds[j]`` (sum of term bounds)."""
    total = 0
    for exps, c in poly.terms():
        total += abs(c) * math.prod(b**k for b, k in zip(bounds, exps))
    return total


def choose_dtype(polys: Sequence[Polynomial], values: Sequence[Sequence[int]]):
    bounds = [max((abs(v) for v in vals), default=0) for vals in values]
    worst = max((magnitude_bound(g, bounds) for g in polys), default=0)
    return np.int64 if worst < INT64_SAFE else object


class Block:
    """Prefix coordinates fixed to ``prefix``; the rest span a dense grid."""

    __slots__ = ("prefix", "axes", "dtype", "_powers")

    def __init__(self, prefix: tuple[int, ...], axes: Sequence[np.ndarray], dtype):
        self.prefix = prefix
        self.axes = axes
        self.dtype = dtype
        self._powers: dict[tuple[int, int], np.ndarray] = {}

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.axes)

    def _power(self, k: int, e: int) -> np.ndarray:
        key = (k, e)
        if key not in self._powers:
            base = self.axes[k]
            arr = np.array([int(v) ** e for v in base], dtype=self.dtype)
            shape = [1] * len(self.axes)
            shape[k] = len(base)
            self._powers[key] = arr.reshape(shape)
        return self._powers[key]

    def evaluate(self, poly: Polynomial, skip: Sequence[int] = ()):
        """Exact values of ``poly`` on the block; variables in ``skip`` are set to 0."""
        s = len(self.prefix)
        out = np.zeros(self.shape, dtype=self.dtype)
        for exps, c in poly.terms():
            if any(exps[j] for j in skip):
                continue
            scalar = c
            for j in range(s):
                if exps[j]:
                    scalar *= self.prefix[j] ** exps[j]
            if not scalar:
                continue
            term = None
            for k in range(len(self.axes)):
                e = exps[s + k]
                if e:
                    pw = self._power(k, e)
                    term = pw if term is None else term * pw
            if term is None:
                out = out + scalar
            else:
                out = out + term * scalar
        return out


def split_depth(lengths: Sequence[int], block: int = BLOCK) -> int:
    """Smallest prefix length whose complement grid fits in ``block`` points."""
    s = 0
    while s < len(lengths) and math.prod(lengths[s:]) > block:
        s += 1
    return max(s, 1) if lengths else 0


def iter_blocks(values: Sequence[Sequence[int]], first_range: range, dtype, block: int = BLOCK) -> Iterator[Block]:
    lengths = [len(v) for v in values]
    s = split_depth(lengths, block)
    tails = [np.asarray(v, dtype=np.int64 if dtype is not object else object) for v in values[s:]]
    heads = [values[0][i] for i in first_range]
    for prefix in itertools.product(heads, *values[1:s]):
        yield Block(tuple(prefix), tails, dtype)


def partition(length: int, parts: int) -> list[range]:
    parts = max(1, min(parts, length)) if length else 1
    bounds = [length * i // parts for i in range(parts + 1)]
    return [range(bounds[i], bounds[i + 1]) for i in range(parts)]


def run_partitioned(task: Callable[[range], object], length: int, workers: int) -> list:
    """Run ``task`` on contiguous index ranges; results come back in range order."""
    ranges = partition(length, workers)
    if workers <= 1 or len(ranges) == 1:
        return [task(r) for r in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, ranges))
