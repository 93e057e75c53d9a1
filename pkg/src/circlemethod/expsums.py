"""Exponential sums and oscillatory integrals of the circle method: S(alpha),
complete sums S(a, q), the truncated singular series and singular integral,
J(gamma), and major-arc membership.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .counting import DEFAULT_BUDGET
from .densities import eval_float
from .errors import InputError
from .forms import FormSystem
from .lattice import as_fraction, choose_dtype, coordinate_values, iter_blocks, run_partitioned
from .modp import check_budget, residue_histogram

TWO_PI = 2 * math.pi
J_TOL = 1e-4
J_CAP = 1 << 20


@dataclass(frozen=True)
class FrequencyVector:
    """Coefficients ``alpha_{i,d}`` keyed by the system's ``(i, d)`` labels."""

    entries: Mapping[tuple[int, int], object]

    @classmethod
    def for_system(cls, system: FormSystem, values: Mapping[tuple[int, int], object] | Sequence) -> "FrequencyVector":
        labels = system.index()
        if not isinstance(values, Mapping):
            values = list(values)
            if len(values) != len(labels):
                raise InputError(f"expected {len(labels)} frequencies, got {len(values)}")
            values = dict(zip(labels, values))
        if set(values) != set(labels):
            raise InputError(f"frequency labels {sorted(values)} do not match the system's {labels}")
        return cls({lab: values[lab] for lab in labels})

    @classmethod
    def zero(cls, system: FormSystem) -> "FrequencyVector":
        return cls.for_system(system, [Fraction(0)] * system.R)

    def ordered(self, system: FormSystem) -> list:
        labels = system.index()
        if set(self.entries) != set(labels):
            raise InputError("frequency vector does not match the system's profile")
        return [self.entries[lab] for lab in labels]


def _is_exact(v) -> bool:
    return isinstance(v, (int, Fraction))


# -- S(alpha) -----------------------------------------------------------------


def S_alpha(
    system: FormSystem,
    P,
    alpha: FrequencyVector,
    budget: int | None = DEFAULT_BUDGET,
    workers: int = 1,
) -> complex:
    """``sum e(sum alpha_{i,d} F_{i,d}(x))`` over the lattice points counted by ``N(P)``.

    Rational frequencies use exact phases over a common denominator; real
    ones reduce ``alpha * F`` mod 1 in floating point.
    """
    P = as_fraction(P)
    coeffs = alpha.ordered(system)
    values = coordinate_values(system, P)
    check_budget(math.prod(len(v) for v in values), budget, f"exponential sum at P={P}")
    if any(len(v) == 0 for v in values):
        return 0j
    dtype = choose_dtype(system.forms, values)
    exact = all(_is_exact(a) for a in coeffs)
    if exact:
        fr = [Fraction(a) for a in coeffs]
        L = math.lcm(*(f.denominator for f in fr))
        nums = [f.numerator * (L // f.denominator) % L for f in fr]

    def task(rng):
        re, im = [], []
        for block in iter_blocks(values, rng, dtype):
            if exact:
                idx = np.zeros(block.shape, dtype=object if dtype is object else np.int64)
                for c, F in zip(nums, system.forms):
                    if c:
                        idx = (idx + (block.evaluate(F) % L) * c) % L
                theta = np.broadcast_to(idx, block.shape).astype(np.float64) / L
            else:
                theta = np.zeros(block.shape)
                for a, F in zip(coeffs, system.forms):
                    v = np.asarray(block.evaluate(F), dtype=np.float64)
                    theta = np.mod(theta + np.mod(float(a) * v, 1.0), 1.0)
                theta = np.broadcast_to(theta, block.shape)
            re.append(math.fsum(np.cos(TWO_PI * theta).ravel()))
            im.append(math.fsum(np.sin(TWO_PI * theta).ravel()))
        return re, im

    parts = run_partitioned(task, len(values[0]), workers)
    return complex(
        math.fsum(x for re, _ in parts for x in re),
        math.fsum(x for _, im in parts for x in im),
    )


# -- complete sums and the singular series -------------------------------------


def _roots(q: int) -> np.ndarray:
    return np.exp(2j * math.pi * np.arange(q) / q)


def complete_sum(system: FormSystem, q: int, a: Sequence[int], budget: int | None = DEFAULT_BUDGET) -> complex:
    """``S(a, q) = sum_{x mod q} e_q(sum a_{i,d} F_{i,d}(m0 + M x))``."""
    if q < 1:
        raise InputError("q must be positive")
    a = [int(v) for v in a]
    if len(a) != system.R:
        raise InputError(f"expected {system.R} entries in a, got {len(a)}")
    if math.gcd(q, *a) != 1:
        raise InputError(f"gcd(q, a) must be 1 (q={q}, a={a})")
    if q == 1:
        return 1 + 0j
    hist = residue_histogram(system.shifted_forms(), q, budget)
    return _pair_hist(hist, q, [np.array(a)])[0]


def _phase_index(hist_shape, q: int, A: np.ndarray) -> np.ndarray:
    """``(a . v) mod q`` for every row ``a`` of ``A`` and every histogram cell ``v``."""
    grids = np.indices(hist_shape).reshape(len(hist_shape), -1)
    return (A @ grids) % q


def _pair_hist(hist: np.ndarray, q: int, A) -> list[complex]:
    A = np.asarray(A, dtype=np.int64).reshape(-1, hist.ndim)
    idx = _phase_index(hist.shape, q, A)
    weights = np.asarray(hist, dtype=np.float64).ravel()
    roots = _roots(q)
    out = []
    for row in idx:
        z = roots[row] * weights
        out.append(complex(math.fsum(z.real), math.fsum(z.imag)))
    return out


def primitive_vectors(q: int, R: int):
    """``a mod q`` in lexicographic order with ``gcd(q, a_1, ..., a_R) = 1``."""
    for a in itertools.product(range(q), repeat=R):
        if math.gcd(q, *a) == 1:
            yield a


@dataclass(frozen=True)
class SeriesResult:
    H: int
    value: float
    imag: float
    terms: tuple[tuple[int, complex], ...]

    @property
    def running(self) -> list[complex]:
        return list(itertools.accumulate(t for _, t in self.terms))


def singular_series(system: FormSystem, H: int, budget: int | None = DEFAULT_BUDGET) -> SeriesResult:
    """``sum_{q <= H} q^{-n} sum_{a} S(a, q)``, taken in increasing ``q`` and lexicographic ``a``."""
    if H < 1:
        raise InputError("H must be at least 1")
    n, R = system.n, system.R
    polys = system.shifted_forms()
    terms = [(1, 1 + 0j)]
    for q in range(2, H + 1):
        check_budget(q**R * q**R, budget, f"singular series term q={q}")
        hist = residue_histogram(polys, q, budget)
        A = np.array(list(primitive_vectors(q, R)), dtype=np.int64)
        sums = _pair_hist(hist, q, A)
        total = complex(math.fsum(s.real for s in sums), math.fsum(s.imag for s in sums))
        terms.append((q, total / q**n))
    re = math.fsum(t.real for _, t in terms)
    im = math.fsum(t.imag for _, t in terms)
    return SeriesResult(H, re, im, tuple(terms))


# -- oscillatory integrals ------------------------------------------------------


@dataclass(frozen=True)
class JResult:
    value: complex
    nodes_per_axis: int
    converged: bool


def _float_bound(poly, bounds) -> float:
    return sum(abs(c) * math.prod(b**k for b, k in zip(bounds, e)) for e, c in poly.terms())


def _midpoint(system: FormSystem, coeffs: Sequence[float], m: int) -> complex:
    box = [(float(a), float(b)) for a, b in system.box]
    axes = [a + (b - a) * (np.arange(m) + 0.5) / m for a, b in box]
    cell = math.prod((b - a) / m for a, b in box)
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, system.n)
    phase = np.zeros(X.shape[0])
    for c, F in zip(coeffs, system.forms):
        if c:
            phase += c * eval_float(F, X)
    return complex(np.cos(TWO_PI * phase).sum(), np.sin(TWO_PI * phase).sum()) * cell


def J_gamma(
    system: FormSystem,
    gamma: FrequencyVector,
    start: int = 4,
    tol: float = J_TOL,
    cap: int = J_CAP,
) -> JResult:
    """``int_box e(sum gamma_{i,d} F_{i,d}(x)) dx`` by a midpoint tensor rule.

    Nodes per axis double until two successive values differ by less than
    ``tol`` or the grid would exceed ``cap`` nodes.
    """
    coeffs = [float(g) for g in gamma.ordered(system)]
    n = system.n
    # start with a few nodes per oscillation so coarse grids cannot alias
    bounds = [max(abs(float(a)), abs(float(b))) for a, b in system.box]
    spread = sum(abs(c) * _float_bound(F, bounds) for c, F in zip(coeffs, system.forms))
    m = max(1, start, 1 << max(0, math.ceil(math.log2(max(1.0, 4 * spread)))))
    while m > 1 and m**n > cap:
        m //= 2
    prev = _midpoint(system, coeffs, m)
    while (2 * m) ** n <= cap:
        m *= 2
        cur = _midpoint(system, coeffs, m)
        if abs(cur - prev) < tol:
            return JResult(cur, m, True)
        prev = cur
    return JResult(prev, m, False)


@dataclass(frozen=True)
class IntegralResult:
    H: float
    value: float
    imag: float
    error: float
    panels: int
    converged: bool


def singular_integral(
    system: FormSystem,
    H,
    order: int = 8,
    tol: float = J_TOL,
    max_panels: int = 1 << 10,
    j_cap: int = J_CAP,
) -> IntegralResult:
    """``M^{-n} int_{[-H, H]^R} J(gamma) d gamma`` by Gauss-Legendre panels.

    Panels per axis start at ``ceil(2H)`` and double until the value moves by
    less than ``tol``; ``error`` is the last change.
    """
    H = float(H)
    if H < 0:
        raise InputError("H must be non-negative")
    if H == 0:
        return IntegralResult(0.0, 0.0, 0.0, 0.0, 0, True)
    R = system.R
    nodes, weights = np.polynomial.legendre.leggauss(order)
    cache: dict[tuple[float, ...], JResult] = {}
    j_ok = True

    def J_at(g):
        nonlocal j_ok
        if g not in cache:
            cache[g] = J_gamma(system, FrequencyVector.for_system(system, list(g)), tol=tol / 10, cap=j_cap)
            j_ok &= cache[g].converged
        return cache[g].value

    def integrate(panels):
        width = 2 * H / panels
        pts, wts = [], []
        for k in range(panels):
            lo = -H + k * width
            pts.extend(lo + width * (nodes + 1) / 2)
            wts.extend(weights * width / 2)
        re, im = [], []
        for idx in itertools.product(range(len(pts)), repeat=R):
            w = math.prod(wts[i] for i in idx)
            z = J_at(tuple(float(pts[i]) for i in idx)) * w
            re.append(z.real)
            im.append(z.imag)
        return complex(math.fsum(re), math.fsum(im))

    panels = max(1, math.ceil(2 * H))
    prev = integrate(panels)
    change = math.inf
    while panels * 2 <= max_panels:
        panels *= 2
        cur = integrate(panels)
        change = abs(cur - prev)
        prev = cur
        if change < tol:
            break
    scale = 1.0 / system.M**system.n
    return IntegralResult(H, prev.real * scale, prev.imag * scale, change * scale, panels, change < tol and j_ok)


# -- major arcs ---------------------------------------------------------------


@dataclass(frozen=True)
class MajorArcParams:
    P: Fraction
    q: int
    a: tuple[int, ...]
    varpi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "P", as_fraction(self.P))
        object.__setattr__(self, "varpi", Fraction(self.varpi))
        object.__setattr__(self, "a", tuple(int(v) for v in self.a))
        if not 0 < self.varpi < Fraction(1, 3):
            raise InputError(f"varpi must lie in (0, 1/3), got {self.varpi}")
        if self.q < 1:
            raise InputError("q must be positive")
        if math.gcd(self.q, *self.a) != 1:
            raise InputError(f"gcd(q, a) must be 1 (q={self.q}, a={self.a})")

    @classmethod
    def default(cls, system: FormSystem, P, q: int, a: Sequence[int]) -> "MajorArcParams":
        return cls(P, q, tuple(a), Fraction(1, 2 * system.R + 4))


def _pow_le(x: Fraction, P: Fraction, e: Fraction) -> bool:
    """Exact test of ``x <= P^e`` for ``x >= 0`` and rational ``e``."""
    num, den = e.numerator, e.denominator
    return x**den <= P**num


def major_arc_membership(system: FormSystem, alpha: FrequencyVector, params: MajorArcParams) -> bool:
    """``q <= P^varpi`` and ``||alpha_{i,d} - a_{i,d}/q|| <= P^{-d + varpi}`` for every form.

    Distances are taken mod 1 and compared exactly.
    """
    if len(params.a) != system.R:
        raise InputError(f"expected {system.R} entries in a, got {len(params.a)}")
    if not _pow_le(Fraction(params.q), params.P, params.varpi):
        return False
    for value, a, (_, d) in zip(alpha.ordered(system), params.a, system.index()):
        diff = (Fraction(value) - Fraction(a, params.q)) % 1
        dist = min(diff, 1 - diff)
        if not _pow_le(dist, params.P, params.varpi - d):
            return False
    return True

