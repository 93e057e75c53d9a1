"""Exact p-adic solution densities by residue-class recursion.

``measure(polys, k)`` is the Haar measure of ``{t in Z_p^n : v_p(g_i(t)) >= k_i}``.
A residue class ``t0 + p Z_p^n`` is resolved in one of three ways:

* some active ``g_i(t0)`` is a unit mod p: the class contributes nothing;
* the Jacobian of the active polynomials has full rank mod p: Hensel's
  lemma gives the class measure ``p^{-n} prod p^{-(k_i - 1)}``;
* otherwise recurse on ``u -> g(t0 + p u)``, whose content is divisible by
  ``p`` so every ``k_i`` strictly drops.

For homogeneous systems only projective representatives are scanned (each
line of ``F_p^n`` carries ``p - 1`` equal classes) and the zero class
reduces to the same system with ``k_i`` lowered by the degrees.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import BudgetExceeded
from .forms import Polynomial
from .modp import (
    _split_separable,
    batch_rank_mod_p,
    eval_mod,
    histogram_cost,
    iter_points,
    iter_projective,
    projective_count,
    residue_histogram,
)


def valuation(c: int, p: int) -> int:
    if c == 0:
        raise ValueError("valuation of zero")
    v = 0
    while c % p == 0:
        c //= p
        v += 1
    return v


class LocalSolver:
    """Memoising solver for one prime; ``budget`` caps total residue evaluations."""

    def __init__(self, n: int, p: int, budget: int | None = None):
        self.n = n
        self.p = p
        self.budget = budget
        self.spent = 0
        self._classes: dict[tuple[Polynomial, ...], tuple[int, list[tuple[int, ...]]]] = {}
        self._measures: dict[tuple, Fraction] = {}

    def _charge(self, cost: int):
        if self.budget is not None and self.spent + cost > self.budget:
            raise BudgetExceeded(
                f"p-adic density at p={self.p}: {self.spent + cost:.3e} residue evaluations exceeds budget {self.budget:.3e}",
                estimate=self.spent + cost,
                budget=self.budget,
            )
        self.spent += cost

    def _normalise(self, polys, kvec):
        p = self.p
        active = []
        for g, k in zip(polys, kvec):
            if k <= 0 or g.is_zero():
                continue
            v = valuation(g.content(), p)
            if v:
                g = g.exact_div(p**v)
                k -= v
            if k > 0:
                active.append((g, k))
        return active

    def measure(self, polys: Sequence[Polynomial], kvec: Sequence[int], homogeneous: bool = False) -> Fraction:
        active = self._normalise(polys, kvec)
        if not active:
            return Fraction(1)
        gs = tuple(g for g, _ in active)
        ks = tuple(k for _, k in active)
        key = (gs, ks, homogeneous)
        if key in self._measures:
            return self._measures[key]
        p, n = self.p, self.n
        hensel = Fraction(1, p**n) * Fraction(1, p ** sum(k - 1 for k in ks))
        if homogeneous:
            ns, singular = self._scan(gs, projective=True)
            zero = self.measure(gs, tuple(k - g.degree for g, k in zip(gs, ks)), True) / p**n
            lifted = sum(
                (self.measure([g.substitute_affine(t0, p) for g in gs], ks) for t0 in singular),
                Fraction(0),
            )
            result = zero + (p - 1) * (ns * hensel + lifted / p**n)
        else:
            ns, singular = self._scan(gs, projective=False)
            lifted = sum(
                (self.measure([g.substitute_affine(t0, p) for g in gs], ks) for t0 in singular),
                Fraction(0),
            )
            result = ns * hensel + lifted / p**n
        self._measures[key] = result
        return result

    def _scan(self, gs: tuple[Polynomial, ...], projective: bool):
        """Count nonsingular residue solutions; list the singular ones.

        In projective mode the zero vector is skipped and only normalised
        representatives are visited.
        """
        cache_key = gs + (projective,)
        if cache_key in self._classes:
            return self._classes[cache_key]
        p, n = self.p, self.n
        if len(gs) == 1:
            result = self._scan_single(gs[0], projective)
            self._classes[cache_key] = result
            return result
        self._charge(projective_count(n, p) if projective else p**n)
        grads = [[g.derivative(j) for j in range(n)] for g in gs]
        points = iter_projective(n, p) if projective else iter_points(n, p)
        ns = 0
        singular: list[tuple[int, ...]] = []
        m = len(gs)
        for X in points:
            sol = np.ones(X.shape[0], dtype=bool)
            for g in gs:
                sol &= eval_mod(g, X, p) == 0
                if not sol.any():
                    break
            if not sol.any():
                continue
            Y = X[sol]
            J = np.empty((Y.shape[0], m, n), dtype=np.int64)
            for i, row in enumerate(grads):
                for j, dg in enumerate(row):
                    J[:, i, j] = eval_mod(dg, Y, p)
            full = batch_rank_mod_p(J, p) == m
            ns += int(np.count_nonzero(full))
            singular.extend(tuple(int(v) for v in row) for row in Y[~full])
        self._classes[cache_key] = (ns, singular)
        return ns, singular

    def _scan_single(self, g: Polynomial, projective: bool):
        """One polynomial: count zeros by residue histogram and find the
        singular zeros among the candidates allowed by each partial derivative.

        A variable occurring only as pure powers has a univariate partial
        derivative, so its singular values are that derivative's roots; any
        other variable ranges over all of ``F_p``.
        """
        p, n = self.p, self.n
        self._charge(histogram_cost([g], p))
        zeros = int(residue_histogram([g], p)[0])
        _, separable = _split_separable([g])
        grads = [g.derivative(j) for j in range(n)]
        t = np.arange(p, dtype=np.int64).reshape(-1, 1)
        axes = []
        for j in range(n):
            if j in separable and separable[j][0] is not None:
                uni = Polynomial(1, {(e[j],): c for e, c in grads[j].terms()})
                axes.append(np.nonzero(eval_mod(uni, t, p) == 0)[0])
            else:
                axes.append(np.arange(p))
        size = int(np.prod([len(a) for a in axes], dtype=object))
        self._charge(size)
        singular: list[tuple[int, ...]] = []
        if size:
            for X in _product_chunks(axes):
                keep = eval_mod(g, X, p) == 0
                for dg in grads:
                    if not keep.any():
                        break
                    keep &= eval_mod(dg, X, p) == 0
                singular.extend(tuple(int(v) for v in row) for row in X[keep])
        if not projective:
            return zeros - len(singular), singular
        # zero vector is a (singular) solution of a form; drop it and pass to lines
        reps = sorted({_normalise_projective(s, p) for s in singular if any(s)})
        nonzero_smooth = zeros - 1 - (len(singular) - (1 if any(not any(s) for s in singular) else 0))
        assert nonzero_smooth % (p - 1) == 0
        return nonzero_smooth // (p - 1), reps


def _normalise_projective(s: tuple[int, ...], p: int) -> tuple[int, ...]:
    lead = next(v for v in s if v)
    inv = pow(lead, -1, p)
    return tuple(v * inv % p for v in s)


def _product_chunks(axes, chunk: int = 1 << 18):
    lengths = [len(a) for a in axes]
    total = int(np.prod(lengths, dtype=object))
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        X = np.empty((idx.size, len(axes)), dtype=np.int64)
        for c in range(len(axes) - 1, -1, -1):
            X[:, c] = np.asarray(axes[c], dtype=np.int64)[idx % lengths[c]]
            idx //= lengths[c]
        yield X


def local_counts(
    polys: Sequence[Polynomial],
    p: int,
    k_max: int,
    homogeneous: bool,
    budget: int | None = None,
) -> list[int]:
    """``N(p^k) = #{x mod p^k : g_i(x) = 0 mod p^k}`` for ``k = 1..k_max``.

    Stops early (returning the levels done so far) when the budget runs out;
    an empty list means not even ``k = 1`` fit.
    """
    n = polys[0].n
    solver = LocalSolver(n, p, budget)
    out = []
    for k in range(1, k_max + 1):
        try:
            mu = solver.measure(polys, (k,) * len(polys), homogeneous)
        except BudgetExceeded:
            break
        count = mu * p ** (n * k)
        assert count.denominator == 1
        out.append(int(count))
    return out
