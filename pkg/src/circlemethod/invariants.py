"""Exact evaluation of the admissibility conditions on the number of variables.

Everything here is exact integer / ``Fraction`` arithmetic.  A *profile* is
a mapping ``{d: r_d}`` giving the number of forms of each degree; any
function taking a profile also accepts a ``FormSystem``.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import BudgetExceeded, InputError
from .forms import FormSystem
from .modp import CHUNK, batch_rank_mod_p, eval_mod, grid_points

DEFAULT_PRIMES = (5, 7, 11)
DEFAULT_LOCUS_BUDGET = 10**7


def profile_of(obj) -> dict[int, int]:
    """Normalise a system or mapping to ``{d: r_d}`` for ``1 <= d <= D``."""
    if isinstance(obj, FormSystem):
        return obj.r
    r = {int(d): int(k) for d, k in dict(obj).items() if k}
    if not r:
        raise InputError("empty degree profile")
    if min(r) < 1 or min(r.values()) < 0:
        raise InputError(f"invalid degree profile {r}")
    D = max(r)
    return {d: r.get(d, 0) for d in range(1, D + 1)}


def _B_map(r: Mapping[int, int], B) -> dict[int, int]:
    """``B_d`` for every ``d``; ``B_d = 0`` when ``r_d = 0`` and ``B_0 = 0``."""
    B = dict(B or {})
    out = {0: 0}
    for d, rd in r.items():
        out[d] = int(B.get(d, 0)) if rd else 0
    return out


# -- singular locus dimension -------------------------------------------------


@dataclass(frozen=True)
class SingularLocusEstimate:
    d: int
    estimate: int
    counts: tuple[tuple[int, int], ...] = ()
    confident: bool = False
    override_used: bool = False
    excluded: bool = False
    empty: bool = False
    slope: float | None = None


def singular_locus_count(system: FormSystem, d: int, p: int, budget: int | None = DEFAULT_LOCUS_BUDGET) -> int:
    """``#{x in F_p^n : rank J_d(x) < r_d over F_p}``."""
    forms = system.forms_of_degree(d)
    n = system.n
    if budget is not None and p**n > budget:
        raise BudgetExceeded(
            f"singular locus scan for degree {d} needs {p}^{n} = {p**n:.3e} points, "
            f"over budget {budget:.3e}; provide an override for B_{d}",
            estimate=p**n,
            budget=budget,
        )
    grads = [[F.derivative(j) for j in range(n)] for F in forms]
    rd = len(forms)
    total = p**n
    count = 0
    for start in range(0, total, CHUNK):
        X = grid_points(n, p, start, min(total, start + CHUNK))
        J = np.empty((X.shape[0], rd, n), dtype=np.int64)
        for i, row in enumerate(grads):
            for j, g in enumerate(row):
                J[:, i, j] = eval_mod(g, X, p)
        count += int(np.count_nonzero(batch_rank_mod_p(J, p) < rd))
    return count


def estimate_Bd(
    system: FormSystem,
    d: int,
    primes: Sequence[int] = DEFAULT_PRIMES,
    budget: int | None = DEFAULT_LOCUS_BUDGET,
    override: int | None = None,
) -> SingularLocusEstimate:
    """Heuristic ``dim S_d`` from point counts of ``S_d`` over small prime fields.

    With ``c_p ~ c * p^B``, the estimate is the rounded least-squares slope
    of ``log c_p`` against ``log p``; a single usable prime falls back to
    ``round(log_p c_p)``.  ``confident`` means every consecutive pair of
    primes gives the same rounded slope.  Reduction mod ``p`` can only
    enlarge ``S_d``, so a bad prime biases the estimate upwards.
    """
    if d not in system.degrees:
        raise InputError(f"degree {d} not present in the system (degrees {system.degrees})")
    n = system.n
    if override is not None:
        if not 0 <= override <= n:
            raise InputError(f"override B_{d}={override} outside [0, {n}]")
        return SingularLocusEstimate(d, int(override), override_used=True, confident=True, excluded=override == n)
    primes = sorted(set(primes))
    counts = tuple((p, singular_locus_count(system, d, p, budget)) for p in primes)
    usable = [(p, c) for p, c in counts if c > 0]
    if not usable:
        return SingularLocusEstimate(d, 0, counts, confident=True, empty=True)
    if len(usable) == 1:
        p, c = usable[0]
        est = round(math.log(c) / math.log(p))
        slope = None
        confident = False
    else:
        xs = [math.log(p) for p, _ in usable]
        ys = [math.log(c) for _, c in usable]
        slope = statistics.linear_regression(xs, ys).slope
        est = round(slope)
        pair = [
            round((ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k])) for k in range(len(usable) - 1)
        ]
        confident = all(v == est for v in pair) and len(usable) == len(counts)
    est = min(max(est, 0), n)
    return SingularLocusEstimate(d, est, counts, confident=confident, excluded=est == n, slope=slope)


# -- the explicit invariants ------------------------------------------------


def curly_D(obj, j: int | None = None) -> int:
    """``D_j = r_1 + 2 r_2 + ... + j r_j`` (``D_0 = 0``; ``j=None`` gives ``D_D``)."""
    r = profile_of(obj)
    D = max(r)
    if j is None:
        j = D
    if not 0 <= j <= D:
        raise InputError(f"j={j} outside [0, {D}]")
    return sum(k * r[k] for k in range(1, j + 1))


def s_values(obj, B, n: int) -> dict[int, Fraction]:
    """``s_d = sum_{k=d}^{D} 2^{k-1} (k-1) r_k / (n - B_k)`` for ``1 <= d <= D+1``."""
    r = profile_of(obj)
    Bm = _B_map(r, B)
    D = max(r)
    for k, rk in r.items():
        if rk and n <= Bm[k]:
            raise InputError(f"need n > B_{k}, got n={n}, B_{k}={Bm[k]}")
    s = {D + 1: Fraction(0)}
    for d in range(D, 0, -1):
        term = Fraction(2 ** (d - 1) * (d - 1) * r[d], n - Bm[d]) if r[d] else Fraction(0)
        s[d] = s[d + 1] + term
    return dict(sorted(s.items()))


def t_values(obj) -> dict[int, int]:
    """``t_d = sum_{k=d}^{D} 2^{k-1} (k-1) r_k`` for ``1 <= d <= D+1``."""
    r = profile_of(obj)
    D = max(r)
    t = {D + 1: 0}
    for d in range(D, 0, -1):
        t[d] = t[d + 1] + 2 ** (d - 1) * (d - 1) * r[d]
    return dict(sorted(t.items()))


def _admissible_degrees(r) -> list[int]:
    return [0] + [d for d, rd in r.items() if rd]


def n0_values(obj) -> tuple[dict[int, int], dict[int, int], int]:
    """``(t, {d: n_0(d)} over Delta u {0}, n_0)``.

    ``n_0`` is the maximum of the ``n_0(d)`` except for purely linear
    systems, where it is 0.
    """
    r = profile_of(obj)
    t = t_values(r)
    D = max(r)
    n0_of_d = {}
    for d in _admissible_degrees(r):
        lead = curly_D(r, d) * (2 ** (d - 1) + t[d + 1]) if d else 0
        n0_of_d[d] = lead + t[d + 1] + sum(t[j] * r[j] for j in range(d + 1, D + 1))
    if D == 1:
        # Linear systems: the literal n_0(1) = R comes from a differencing step
        # that linear forms never need; use Birch's value R(R+1)(D-1)2^{D-1} = 0.
        return t, n0_of_d, 0
    return t, n0_of_d, max(n0_of_d.values())


class Verdict(NamedTuple):
    passed: bool
    margin: int


def birch_bound(R: int, D: int) -> int:
    return R * (R + 1) * (D - 1) * 2 ** (D - 1)


def check_birch(n: int, B: int, R: int, D: int) -> Verdict:
    """``n > B + R(R+1)(D-1)2^{D-1}``; the margin is ``n - B - bound`` (pass iff > 0)."""
    slack = n - B - birch_bound(R, D)
    return Verdict(slack > 0, slack)


@dataclass(frozen=True)
class MainCondition:
    margins: dict[int, Fraction]
    passed: bool

    def failing(self) -> list[int]:
        return [d for d, m in self.margins.items() if m >= 1]


def check_theorem_main(obj, n: int, B=None) -> MainCondition:
    """Left-hand sides of the mixed-degree condition for ``d in Delta u {0}``.

    ``D_d (2^{d-1}/(n-B_d) + s_{d+1}) + s_{d+1} + sum_{j>d} s_j r_j``; the
    condition holds iff every value is strictly below 1.
    """
    r = profile_of(obj)
    Bm = _B_map(r, B)
    s = s_values(r, Bm, n)
    D = max(r)
    margins = {}
    for d in _admissible_degrees(r):
        tail = s[d + 1] + sum(s[j] * r[j] for j in range(d + 1, D + 1))
        lead = curly_D(r, d) * (Fraction(2 ** (d - 1), n - Bm[d]) + s[d + 1]) if d else 0
        margins[d] = lead + tail
    return MainCondition(margins, all(m < 1 for m in margins.values()))


def check_corollary(obj, n: int, B: int) -> Verdict:
    """Uniform-B simplification: ``n > B + n_0``."""
    _, _, n0 = n0_values(obj)
    slack = n - B - n0
    return Verdict(slack > 0, slack)


@dataclass(frozen=True)
class CrudeBounds:
    n0: int
    R: int
    curly_D: int
    lhs: int
    square_bound: int
    exponential_bound: int

    @property
    def square_ok(self) -> bool:
        return self.lhs <= self.square_bound

    @property
    def exponential_ok(self) -> bool:
        return self.lhs <= self.exponential_bound

    @property
    def passed(self) -> bool:
        return self.square_ok and self.exponential_ok


def check_crude_bounds(obj) -> CrudeBounds:
    """``n_0 + R - 1`` against ``D^2 2^{D-1}`` and ``(D-1) 2^D`` (``D`` = total weight)."""
    r = profile_of(obj)
    _, _, n0 = n0_values(r)
    R = sum(r.values())
    D = max(r)
    cD = curly_D(r)
    return CrudeBounds(n0, R, cD, n0 + R - 1, cD**2 * 2 ** (D - 1), (cD - 1) * 2**cD)


def iter_profiles(max_weight: int) -> Iterator[dict[int, int]]:
    """Every profile with ``r_D >= 1`` and total weight ``sum d r_d <= max_weight``."""

    def rec(d, remaining, acc):
        if d == 0:
            if acc:
                yield {k: acc.get(k, 0) for k in range(1, max(acc) + 1)}
            return
        for k in range(remaining // d + 1):
            if k:
                acc[d] = k
            yield from rec(d - 1, remaining - k * d, acc)
            acc.pop(d, None)

    yield from rec(max_weight, max_weight, {})


def variety_degree(obj) -> int:
    r = profile_of(obj)
    return math.prod(d**rd for d, rd in r.items())


class Thresholds(NamedTuple):
    smooth_theorem: bool
    conjecture: bool
    hartshorne_form: bool


def threshold_predicates(dim: int, deg: int) -> Thresholds:
    """Dimension thresholds in terms of the degree of a smooth variety."""
    smooth = dim >= (deg - 1) * 2**deg - 1
    conj = dim >= 2 * deg - 1
    return Thresholds(smooth, conj, dim >= 2 * deg - 1)


def check_lemma_improve(B, obj) -> dict[int, bool]:
    """``B_d <= r_d + ... + r_D - 1`` for each ``1 <= d <= D``."""
    r = profile_of(obj)
    Bm = _B_map(r, B)
    D = max(r)
    return {d: Bm[d] <= sum(r[k] for k in range(d, D + 1)) - 1 for d in range(1, D + 1)}


# -- the full report --------------------------------------------------------


@dataclass(frozen=True)
class InvariantReport:
    n: int
    B: dict[int, int]
    Dj: tuple[int, ...]
    s: dict[int, Fraction]
    t: dict[int, int]
    n0_of_d: dict[int, int]
    n0: int
    condition_margins: dict[int, Fraction]
    verdicts: dict[str, bool | None]
    estimates: dict[int, SingularLocusEstimate] = field(default_factory=dict)
    lemma_improve: dict[int, bool] = field(default_factory=dict)
    variety_degree: int = 1
    crude: CrudeBounds | None = None


def invariant_report(
    system: FormSystem,
    overrides: Mapping[int, int] | None = None,
    primes: Sequence[int] = DEFAULT_PRIMES,
    budget: int | None = DEFAULT_LOCUS_BUDGET,
) -> InvariantReport:
    overrides = dict(overrides or {})
    r = system.r
    n = system.n
    estimates = {
        d: estimate_Bd(system, d, primes, budget, override=overrides.get(d)) for d in system.degrees
    }
    excluded = [d for d, e in estimates.items() if e.excluded]
    if excluded:
        raise InputError(f"excluded system: B_d = n for degree(s) {excluded}")
    B = {d: e.estimate for d, e in estimates.items()}
    t, n0_of_d, n0 = n0_values(r)
    main = check_theorem_main(r, n, B)
    Bmax = max(B.values())
    D = system.D
    verdicts: dict[str, bool | None] = {
        "theorem_main": main.passed,
        "corollary": check_corollary(r, n, Bmax).passed,
        "birch": check_birch(n, B[D], system.R, D).passed if len(system.degrees) == 1 else None,
    }
    crude = check_crude_bounds(r)
    verdicts["crude_bounds"] = crude.passed
    return InvariantReport(
        n=n,
        B=B,
        Dj=tuple(curly_D(r, j) for j in range(D + 1)),
        s=s_values(r, B, n),
        t=t,
        n0_of_d=n0_of_d,
        n0=n0,
        condition_margins=main.margins,
        verdicts=verdicts,
        estimates=estimates,
        lemma_improve=check_lemma_improve(B, r),
        variety_degree=variety_degree(r),
        crude=crude,
    )
