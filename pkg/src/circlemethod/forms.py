"""Exact integer polynomials, forms, polar forms and systems of forms.

Coefficients are Python ints throughout, so nothing overflows.  Polar forms
use the iterated forward-difference normalisation: for a form ``F`` of
degree ``d``,

    Polar(x_1, ..., x_d) = Delta_{x_1} ... Delta_{x_d} F,

which is integral by construction and satisfies ``Polar(x, ..., x) = d! F(x)``.
"""

from __future__ import annotations

import functools
import itertools
import math
import operator
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import InputError

Exps = tuple[int, ...]


def _grlex_key(exps: Exps):
    return (sum(exps), exps)


def _as_int(value, what="coefficient") -> int:
    try:
        return operator.index(value)
    except TypeError:
        if isinstance(value, Fraction) and value.denominator == 1:
            return value.numerator
        raise InputError(f"{what} must be an integer, got {value!r}") from None


def _check_point(n: int, point: Sequence[int], what="point") -> tuple[int, ...]:
    if len(point) != n:
        raise InputError(f"{what} has length {len(point)}, expected {n}")
    return tuple(_as_int(v, what) for v in point)


class Polynomial:
    """Sparse multivariate polynomial with integer coefficients.

    Terms are kept in graded-lexicographic order (largest first), so two
    polynomials compare equal exactly when their term lists agree.
    """

    __slots__ = ("n", "_coeffs", "_hash")

    def __init__(self, n: int, coeffs=None):
        if n < 0:
            raise InputError("number of variables must be non-negative")
        self.n = n
        acc: dict[Exps, int] = {}
        if coeffs:
            items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
            for exps, c in items:
                exps = tuple(_as_int(e, "exponent") for e in exps)
                if len(exps) != n:
                    raise InputError(f"exponent vector {exps} has length {len(exps)}, expected {n}")
                if any(e < 0 for e in exps):
                    raise InputError(f"negative exponent in {exps}")
                acc[exps] = acc.get(exps, 0) + _as_int(c)
        self._coeffs = {e: acc[e] for e in sorted(acc, key=_grlex_key, reverse=True) if acc[e]}
        self._hash = None

    # -- construction helpers -------------------------------------------

    @classmethod
    def constant(cls, n: int, c: int) -> "Polynomial":
        return cls(n, {(0,) * n: c})

    @classmethod
    def variable(cls, n: int, j: int) -> "Polynomial":
        exps = [0] * n
        exps[j] = 1
        return cls(n, {tuple(exps): 1})

    # -- basic queries ----------------------------------------------------

    def terms(self) -> tuple[tuple[Exps, int], ...]:
        return tuple(self._coeffs.items())

    @property
    def coeffs(self) -> dict[Exps, int]:
        return dict(self._coeffs)

    def coeff(self, exps: Exps) -> int:
        return self._coeffs.get(tuple(exps), 0)

    @property
    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(e) for e in self._coeffs), default=-1)

    def is_zero(self) -> bool:
        return not self._coeffs

    def is_homogeneous(self, degree: int | None = None) -> bool:
        degs = {sum(e) for e in self._coeffs}
        if degree is None:
            return len(degs) <= 1
        return degs <= {degree}

    def variables(self) -> set[int]:
        """Indices of variables that actually occur."""
        return {j for e in self._coeffs for j, k in enumerate(e) if k}

    def content(self) -> int:
        return functools.reduce(math.gcd, self._coeffs.values(), 0)

    def __len__(self):
        return len(self._coeffs)

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.n == other.n and self._coeffs == other._coeffs
        if isinstance(other, int):
            return self == Polynomial.constant(self.n, other)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.n, tuple(self._coeffs.items())))
        return self._hash

    def __repr__(self):
        return f"{type(self).__name__}({self.n}, {self})"

    def __str__(self):
        if not self._coeffs:
            return "0"
        parts = []
        for exps, c in self._coeffs.items():
            mono = "*".join(
                f"x{j + 1}" if k == 1 else f"x{j + 1}^{k}" for j, k in enumerate(exps) if k
            )
            if not mono:
                body = str(abs(c))
            elif abs(c) == 1:
                body = mono
            else:
                body = f"{abs(c)}*{mono}"
            sign = "-" if c < 0 else "+"
            parts.append((sign, body))
        first_sign, first = parts[0]
        out = ("-" if first_sign == "-" else "") + first
        for sign, body in parts[1:]:
            out += f" {sign} {body}"
        return out

    # -- arithmetic -------------------------------------------------------

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.n != self.n:
                raise InputError(f"variable count mismatch: {self.n} vs {other.n}")
            return other
        return Polynomial.constant(self.n, _as_int(other))

    def __add__(self, other):
        other = self._coerce(other)
        acc = dict(self._coeffs)
        for e, c in other._coeffs.items():
            acc[e] = acc.get(e, 0) + c
        return Polynomial(self.n, acc)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.n, {e: -c for e, c in self._coeffs.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            c = _as_int(other)
            return Polynomial(self.n, {e: c * v for e, v in self._coeffs.items()})
        other = self._coerce(other)
        acc: dict[Exps, int] = {}
        for e1, c1 in self._coeffs.items():
            for e2, c2 in other._coeffs.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                acc[e] = acc.get(e, 0) + c1 * c2
        return Polynomial(self.n, acc)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise InputError("negative power")
        out = Polynomial.constant(self.n, 1)
        for _ in range(k):
            out = out * self
        return out

    def exact_div(self, c: int) -> "Polynomial":
        """Divide every coefficient by ``c``; raises if not exact."""
        out = {}
        for e, v in self._coeffs.items():
            q, r = divmod(v, c)
            if r:
                raise InputError(f"coefficient {v} not divisible by {c}")
            out[e] = q
        return Polynomial(self.n, out)

    # -- evaluation and calculus ------------------------------------------

    def __call__(self, point: Sequence[int]) -> int:
        x = _check_point(self.n, point)
        total = 0
        for exps, c in self._coeffs.items():
            term = c
            for xj, k in zip(x, exps):
                if k:
                    term *= xj**k
            total += term
        return total

    def derivative(self, j: int) -> "Polynomial":
        if not 0 <= j < self.n:
            raise InputError(f"variable index {j} out of range for n={self.n}")
        out = {}
        for exps, c in self._coeffs.items():
            k = exps[j]
            if k:
                e = list(exps)
                e[j] = k - 1
                out[tuple(e)] = c * k
        return Polynomial(self.n, out)

    def gradient(self) -> tuple["Polynomial", ...]:
        return tuple(self.derivative(j) for j in range(self.n))

    def substitute_affine(self, shift: Sequence[int], scale: Sequence[int] | int = 1) -> "Polynomial":
        """Return ``f(shift + scale * x)`` (componentwise), expanded exactly."""
        shift = _check_point(self.n, shift, "shift")
        if isinstance(scale, int):
            scale = (scale,) * self.n
        scale = _check_point(self.n, scale, "scale")

        @functools.lru_cache(maxsize=None)
        def univariate(j: int, k: int) -> tuple[tuple[int, int], ...]:
            # (s + c x)^k = sum_i C(k,i) s^(k-i) c^i x^i
            s, c = shift[j], scale[j]
            return tuple(
                (i, math.comb(k, i) * s ** (k - i) * c**i)
                for i in range(k + 1)
                if math.comb(k, i) * s ** (k - i) * c**i
            )

        acc: dict[Exps, int] = {}
        for exps, coef in self._coeffs.items():
            partial = {(): coef}
            for j, k in enumerate(exps):
                nxt = {}
                for head, v in partial.items():
                    for i, w in univariate(j, k) if k else ((0, 1),):
                        key = head + (i,)
                        nxt[key] = nxt.get(key, 0) + v * w
                partial = nxt
            for e, v in partial.items():
                acc[e] = acc.get(e, 0) + v
        return Polynomial(self.n, acc)

    def translate(self, h: Sequence[int]) -> "Polynomial":
        """Return ``y -> f(y + h)``."""
        return self.substitute_affine(h, 1)

    def homogeneous_part(self, d: int) -> "Polynomial":
        return Polynomial(self.n, {e: c for e, c in self._coeffs.items() if sum(e) == d})


@dataclass(frozen=True)
class Monomial:
    coefficient: int
    exponents: Exps

    def __post_init__(self):
        if self.coefficient == 0:
            raise InputError("monomial coefficient must be nonzero")


class IntegerForm(Polynomial):
    """Homogeneous integer polynomial of a declared positive degree."""

    __slots__ = ("_degree",)

    def __init__(self, n: int, degree: int, coeffs=None):
        super().__init__(n, coeffs)
        degree = _as_int(degree, "degree")
        if degree < 1:
            raise InputError(f"form degree must be positive, got {degree}")
        for i, exps in enumerate(self._coeffs):
            if sum(exps) != degree:
                raise InputError(
                    f"monomial {i} has exponent sum {sum(exps)}, expected degree {degree}"
                )
        self._degree = degree

    @property
    def degree(self) -> int:
        return self._degree

    @property
    def monomials(self) -> tuple[Monomial, ...]:
        return tuple(Monomial(c, e) for e, c in self._coeffs.items())

    @classmethod
    def from_monomials(cls, n: int, degree: int, monomials: Iterable) -> "IntegerForm":
        pairs = []
        for m in monomials:
            if isinstance(m, Monomial):
                pairs.append((m.exponents, m.coefficient))
            else:
                c, e = m
                pairs.append((e, c))
        return cls(n, degree, pairs)

    @classmethod
    def from_polynomial(cls, poly: Polynomial, degree: int | None = None) -> "IntegerForm":
        if degree is None:
            degree = poly.degree
        return cls(poly.n, degree, poly.coeffs)

    @classmethod
    def diagonal(cls, coeffs: Sequence[int], degree: int) -> "IntegerForm":
        """``sum_j coeffs[j] * x_j^degree``."""
        n = len(coeffs)
        terms = {}
        for j, c in enumerate(coeffs):
            e = [0] * n
            e[j] = degree
            terms[tuple(e)] = c
        return cls(n, degree, terms)

    def __eq__(self, other):
        if isinstance(other, IntegerForm) and self._degree != other._degree:
            return False
        return super().__eq__(other)

    __hash__ = Polynomial.__hash__


def eval_form(form: Polynomial, point: Sequence[int]) -> int:
    return form(point)


def forward_difference(f: Polynomial, h: Sequence[int]) -> Polynomial:
    """``Delta_h f(y) = f(y + h) - f(y)`` as an exact polynomial in ``y``."""
    h = _check_point(f.n, h, "shift")
    return Polynomial(f.n, (f.translate(h) - f).coeffs)


# -- multilinear (polar) forms ----------------------------------------------


def _distinct_permutations(items: Sequence[int]) -> Iterator[tuple[int, ...]]:
    items = sorted(items)
    n = len(items)

    def rec(prefix, remaining):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        last = None
        for i, v in enumerate(remaining):
            if v == last:
                continue
            last = v
            yield from rec(prefix + [v], remaining[:i] + remaining[i + 1:])

    yield from rec([], items)


@dataclass(frozen=True)
class MultilinearForm:
    """A d-linear form ``sum c * x_1[j_1] ... x_d[j_d]`` over ordered index tuples."""

    n: int
    arity: int
    terms: tuple[tuple[int, tuple[int, ...]], ...]

    def __post_init__(self):
        for c, idx in self.terms:
            if len(idx) != self.arity:
                raise InputError("term index tuple does not match arity")
            if any(not 0 <= j < self.n for j in idx):
                raise InputError("term index out of range")

    @functools.cached_property
    def _table(self) -> dict[tuple[int, ...], int]:
        return {idx: c for c, idx in self.terms}

    def __call__(self, *slots: Sequence[int]) -> int:
        if len(slots) != self.arity:
            raise InputError(f"expected {self.arity} slot vectors, got {len(slots)}")
        xs = [_check_point(self.n, s, "slot") for s in slots]
        total = 0
        for c, idx in self.terms:
            term = c
            for x, j in zip(xs, idx):
                term *= x[j]
                if not term:
                    break
            total += term
        return total

    def is_symmetric(self) -> bool:
        table = self._table
        return all(table.get(tuple(sorted(idx))) == c for idx, c in table.items())

    def row_vector(self, *slots: Sequence[int]) -> list[int]:
        """Vector ``v`` with ``self(*slots, x) == v . x`` for every ``x``."""
        if len(slots) != self.arity - 1:
            raise InputError(f"expected {self.arity - 1} slot vectors, got {len(slots)}")
        xs = [_check_point(self.n, s, "slot") for s in slots]
        row = [0] * self.n
        for c, idx in self.terms:
            term = c
            for x, j in zip(xs, idx[:-1]):
                term *= x[j]
                if not term:
                    break
            row[idx[-1]] += term
        return row


@functools.lru_cache(maxsize=512)
def polar_form(form: IntegerForm) -> MultilinearForm:
    """Iterated forward difference ``Delta_{x_1} ... Delta_{x_d} F``.

    For the monomial ``c x^m`` this is ``c * prod(m_j!)`` summed over the
    ordered index tuples whose multiset is ``m``.
    """
    d = form.degree
    acc: dict[tuple[int, ...], int] = {}
    for exps, c in form.terms():
        weight = c * math.prod(math.factorial(k) for k in exps)
        multiset = [j for j, k in enumerate(exps) for _ in range(k)]
        for idx in _distinct_permutations(multiset):
            acc[idx] = acc.get(idx, 0) + weight
    terms = tuple((c, idx) for idx, c in sorted(acc.items()) if c)
    return MultilinearForm(form.n, d, terms)


def polar_row_vector(form: IntegerForm, *slots: Sequence[int]) -> list[int]:
    return polar_form(form).row_vector(*slots)


# -- systems ----------------------------------------------------------------


def _as_fraction(v, what) -> Fraction:
    if isinstance(v, float):
        if not math.isfinite(v):
            raise InputError(f"{what} must be finite")
        return Fraction(v)
    try:
        return Fraction(v)
    except (TypeError, ValueError):
        raise InputError(f"{what}: cannot interpret {v!r} as a number") from None


@dataclass(frozen=True)
class FormSystem:
    """A system of integer forms of possibly different degrees.

    ``forms`` is stored grouped by degree (ascending); within a degree the
    caller's order is kept.  That order also fixes the layout of frequency
    vectors and residue vectors elsewhere in the package.
    """

    n: int
    forms: tuple[IntegerForm, ...]
    M: int = 1
    m0: tuple[int, ...] | None = None
    box: tuple[tuple[Fraction, Fraction], ...] | None = None

    def __post_init__(self):
        n = _as_int(self.n, "n")
        if n < 1:
            raise InputError("n must be at least 1")
        forms = tuple(self.forms)
        if not forms:
            raise InputError("a system needs at least one form")
        for k, F in enumerate(forms):
            if not isinstance(F, IntegerForm):
                raise InputError(f"form {k} is not an IntegerForm")
            if F.n != n:
                raise InputError(f"form {k} has {F.n} variables, expected {n}")
            if F.is_zero():
                raise InputError(f"form {k} is identically zero")
        forms = tuple(sorted(forms, key=lambda F: F.degree))
        M = _as_int(self.M, "M")
        if M < 1:
            raise InputError("modulus M must be a positive integer")
        m0 = (0,) * n if self.m0 is None else tuple(_as_int(v, "m0") for v in self.m0)
        if len(m0) != n:
            raise InputError(f"m0 has length {len(m0)}, expected {n}")
        for j, v in enumerate(m0):
            if not 0 <= v <= M - 1:
                raise InputError(f"m0 coordinate {j} out of [0, M-1]: {v}")
        if self.box is None:
            box = ((Fraction(-1), Fraction(1)),) * n
        else:
            box = tuple(
                (_as_fraction(a, f"box[{j}]"), _as_fraction(b, f"box[{j}]"))
                for j, (a, b) in enumerate(self.box)
            )
        if len(box) != n:
            raise InputError(f"box has {len(box)} intervals, expected {n}")
        for j, (a, b) in enumerate(box):
            if not (-1 <= a < b <= 1):
                raise InputError(f"box interval {j} must satisfy -1 <= a < b <= 1, got [{a}, {b}]")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "forms", forms)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "m0", m0)
        object.__setattr__(self, "box", box)

    @property
    def degrees(self) -> list[int]:
        """The set Delta of degrees present, ascending."""
        return sorted({F.degree for F in self.forms})

    @property
    def D(self) -> int:
        return self.forms[-1].degree

    @property
    def R(self) -> int:
        return len(self.forms)

    @property
    def r(self) -> dict[int, int]:
        """Degree profile ``{d: r_d}`` for ``1 <= d <= D``."""
        out = {d: 0 for d in range(1, self.D + 1)}
        for F in self.forms:
            out[F.degree] += 1
        return out

    @property
    def curly_D(self) -> int:
        return sum(F.degree for F in self.forms)

    def forms_of_degree(self, d: int) -> tuple[IntegerForm, ...]:
        return tuple(F for F in self.forms if F.degree == d)

    def index(self) -> list[tuple[int, int]]:
        """``(i, d)`` labels of ``self.forms`` (``i`` counts from 0 within a degree)."""
        seen: dict[int, int] = {}
        out = []
        for F in self.forms:
            i = seen.get(F.degree, 0)
            seen[F.degree] = i + 1
            out.append((i, F.degree))
        return out

    def box_volume(self) -> Fraction:
        return math.prod((b - a for a, b in self.box), start=Fraction(1))

    def shifted_forms(self) -> tuple[Polynomial, ...]:
        """The polynomials ``x -> F(m0 + M x)``."""
        return tuple(F.substitute_affine(self.m0, self.M) for F in self.forms)

    def vanishes_at(self, x: Sequence[int]) -> bool:
        return all(F(x) == 0 for F in self.forms)

    def with_forms(self, forms: Iterable[IntegerForm]) -> "FormSystem":
        return FormSystem(self.n, tuple(forms), self.M, self.m0, self.box)


def jacobian_matrix(system: FormSystem, d: int, x: Sequence[int]) -> list[list[int]]:
    """Rows are the exact gradients of the degree-``d`` forms at ``x``."""
    forms = system.forms_of_degree(d)
    if not forms:
        raise InputError(f"degree {d} not present in the system (degrees {system.degrees})")
    x = _check_point(system.n, x)
    return [[g(x) for g in _gradient(F)] for F in forms]


@functools.lru_cache(maxsize=512)
def _gradient(F: Polynomial) -> tuple[Polynomial, ...]:
    return F.gradient()


def hat_jacobian(system: FormSystem, d: int, *slots: Sequence[int]) -> list[list[int]]:
    """Rows are the polar row vectors of the degree-``d`` forms at ``slots``."""
    forms = system.forms_of_degree(d)
    if not forms:
        raise InputError(f"degree {d} not present in the system (degrees {system.degrees})")
    if len(slots) != d - 1:
        raise InputError(f"degree {d} needs {d - 1} slot vectors, got {len(slots)}")
    return [polar_row_vector(F, *slots) for F in forms]


def apply_equivalence(system: FormSystem, multipliers: Mapping) -> FormSystem:
    """Build the equivalent system ``G_{i,d} = F_{i,d} + sum H * F_{j,e}``.

    ``multipliers`` maps ``(i, d)`` to a list of ``((j, e), H)`` where ``H``
    is an ``IntegerForm`` of degree ``d - e`` (or an int when ``e == d``).
    Allowed targets are ``e < d``, or ``e == d`` with ``j < i``.
    """
    labels = system.index()
    by_label = dict(zip(labels, system.forms))
    new_forms = []
    for (i, d), F in zip(labels, system.forms):
        G: Polynomial = F
        for (j, e), H in multipliers.get((i, d), ()):
            if (j, e) not in by_label:
                raise InputError(f"multiplier target {(j, e)} is not a form of the system")
            if e > d or (e == d and j >= i):
                raise InputError(
                    f"multiplier for {(i, d)} may only use forms of lower degree or earlier index, got {(j, e)}"
                )
            if isinstance(H, Polynomial):
                if H.n != system.n:
                    raise InputError("multiplier has the wrong number of variables")
                if not H.is_zero() and not H.is_homogeneous(d - e):
                    raise InputError(f"multiplier for {(i, d)} on {(j, e)} must have degree {d - e}")
            else:
                if d != e:
                    raise InputError(f"constant multiplier needs e == d, got e={e}, d={d}")
                H = Polynomial.constant(system.n, _as_int(H))
            G = G + H * by_label[(j, e)]
        new_forms.append(IntegerForm(system.n, d, G.coeffs))
    return system.with_forms(new_forms)
