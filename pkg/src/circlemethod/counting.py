"""Brute-force computation of N(P), the number of common zeros
``x = m0 + M y`` of the system inside ``P * box``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import BudgetExceeded, InputError
from .forms import FormSystem, Polynomial
from .lattice import as_fraction, choose_dtype, coordinate_values, iter_blocks, run_partitioned

DEFAULT_BUDGET = 10**10
STRATEGIES = ("full", "solve-last")


@dataclass(frozen=True)
class CountReport:
    P: Fraction
    count: int
    points_scanned: int
    strategy: str
    wall_time: float
    evaluations: int = 0


def solve_last_split(system: FormSystem):
    """Return ``(k, c, d)`` if ``x_n`` occurs only in form ``k`` and there only as ``c x_n^d``."""
    n = system.n
    j = n - 1
    owners = [k for k, F in enumerate(system.forms) if j in F.variables()]
    if len(owners) != 1:
        return None
    k = owners[0]
    F = system.forms[k]
    with_last = [(e, c) for e, c in F.terms() if e[j]]
    if len(with_last) != 1:
        return None
    e, c = with_last[0]
    if sum(e) != e[j]:
        return None
    return k, c, e[j]


def _drop_last(poly: Polynomial, skip_term=None) -> Polynomial:
    return Polynomial(poly.n - 1, {e[:-1]: c for e, c in poly.terms() if e != skip_term})


def scan_cost(system: FormSystem, P, strategy: str) -> int:
    lengths = [len(v) for v in coordinate_values(system, P)]
    if strategy == "solve-last":
        return math.prod(lengths[:-1]) + lengths[-1]
    return math.prod(lengths)


def count_solutions(
    system: FormSystem,
    P,
    strategy: str = "auto",
    budget: int | None = DEFAULT_BUDGET,
    workers: int = 1,
) -> CountReport:
    """Exact ``N(P)``; box membership uses closed inequalities ``P a_i <= x_i <= P b_i``.

    ``full`` evaluates every form on every lattice point.  ``solve-last``
    needs ``x_n`` to appear in a single form, as ``c x_n^d`` plus terms free
    of ``x_n``; it scans the first ``n - 1`` coordinates and matches the
    residual equation ``c x_n^d = -rest`` against the finite table of
    admissible ``x_n``.
    """
    P = as_fraction(P)
    split = solve_last_split(system)
    if strategy == "auto":
        strategy = "solve-last" if split else "full"
    if strategy not in STRATEGIES:
        raise InputError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
    if strategy == "solve-last" and split is None:
        raise InputError("solve-last needs x_n to occur in exactly one form, only as c*x_n^d")
    cost = scan_cost(system, P, strategy)
    if budget is not None and cost > budget:
        raise BudgetExceeded(
            f"count at P={P} ({strategy}) would scan {cost:.3e} points, over budget {budget:.3e}",
            estimate=cost,
            budget=budget,
        )
    values = coordinate_values(system, P)
    total_points = math.prod(len(v) for v in values)
    t0 = time.perf_counter()
    if total_points == 0:
        count = 0
    elif strategy == "full":
        count = _count_full(system, values, workers)
    else:
        count = _count_solve_last(system, values, split, workers)
    return CountReport(P, count, total_points, strategy, time.perf_counter() - t0, cost)


def _count_full(system, values, workers):
    dtype = choose_dtype(system.forms, values)

    def task(rng):
        total = 0
        for block in iter_blocks(values, rng, dtype):
            mask = None
            for F in system.forms:
                z = block.evaluate(F) == 0
                mask = z if mask is None else mask & z
                if not mask.any():
                    break
            total += int(np.count_nonzero(mask))
        return total

    return sum(run_partitioned(task, len(values[0]), workers))


def _count_solve_last(system, values, split, workers):
    k, c, d = split
    n = system.n
    last_term = (0,) * (n - 1) + (d,)
    table: dict[int, int] = {}
    for x in values[-1]:
        v = c * x**d
        table[v] = table.get(v, 0) + 1
    prefix_values = values[:-1]
    reduced = [
        _drop_last(F, last_term if i == k else None) for i, F in enumerate(system.forms)
    ]
    if n == 1:
        # only the designated form, with no residual terms
        return table.get(0, 0)

    dtype = choose_dtype(reduced, prefix_values)
    keys = sorted(table)
    if dtype is object or max(abs(keys[0]), abs(keys[-1])) >= 1 << 62:
        key_arr = np.array(keys, dtype=object)
        dtype = object
    else:
        key_arr = np.array(keys, dtype=np.int64)
    cnt_arr = np.array([table[v] for v in keys], dtype=np.int64)
    others = [g for i, g in enumerate(reduced) if i != k]
    rest_poly = reduced[k]

    def task(rng):
        total = 0
        for block in iter_blocks(prefix_values, rng, dtype):
            mask = None
            for g in others:
                z = block.evaluate(g) == 0
                mask = z if mask is None else mask & z
            if mask is not None and not mask.any():
                continue
            target = -block.evaluate(rest_poly)
            target = np.broadcast_to(target, block.shape)
            if mask is not None:
                target = target[np.broadcast_to(mask, block.shape)]
            target = np.ravel(target)
            idx = np.searchsorted(key_arr, target)
            idx = np.minimum(idx, len(key_arr) - 1)
            hit = key_arr[idx] == target
            total += int(cnt_arr[idx[hit]].sum())
        return total

    return sum(run_partitioned(task, len(values[0]), workers))


def empirical_ratio(report: CountReport | int, prediction: float) -> float:
    if not prediction > 0:
        raise InputError(f"prediction must be positive, got {prediction}")
    count = report.count if isinstance(report, CountReport) else int(report)
    return count / prediction
