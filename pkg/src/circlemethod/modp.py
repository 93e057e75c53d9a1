"""Vectorised residue arithmetic: polynomial evaluation mod q, batched rank
over F_p, residue enumeration and joint value histograms.
"""

from __future__ import annotations

import functools
import math
from typing import Iterator, Sequence

import numpy as np

from .errors import BudgetExceeded, InputError
from .forms import Polynomial

CHUNK = 1 << 18
INT64_SAFE = 1 << 62


def primes_up_to(n: int) -> list[int]:
    if n < 2:
        return []
    sieve = bytearray([1]) * (n + 1)
    sieve[:2] = b"\x00\x00"
    for p in range(2, math.isqrt(n) + 1):
        if sieve[p]:
            sieve[p * p :: p] = bytearray(len(range(p * p, n + 1, p)))
    return [i for i, v in enumerate(sieve) if v]


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % k for k in range(2, math.isqrt(n) + 1))


def factorize(n: int) -> dict[int, int]:
    out: dict[int, int] = {}
    k = 2
    while k * k <= n:
        while n % k == 0:
            out[k] = out.get(k, 0) + 1
            n //= k
        k += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def check_budget(cost: int, budget: int | None, what: str) -> None:
    if budget is not None and cost > budget:
        raise BudgetExceeded(
            f"{what}: estimated {cost:.3e} point evaluations exceeds budget {budget:.3e}",
            estimate=cost,
            budget=budget,
        )


# -- evaluation ------------------------------------------------------------


def eval_mod(poly: Polynomial, X: np.ndarray, q: int) -> np.ndarray:
    """Values of ``poly`` mod ``q`` at the rows of ``X`` (int64 residues)."""
    if q >= 1 << 31:
        raise InputError("modulus too large for vectorised evaluation")
    out = np.zeros(X.shape[0], dtype=np.int64)
    powers: dict[tuple[int, int], np.ndarray] = {}

    def power(j, k):
        key = (j, k)
        if key not in powers:
            if k == 1:
                powers[key] = X[:, j] % q
            else:
                powers[key] = power(j, k - 1) * power(j, 1) % q
        return powers[key]

    for exps, c in poly.terms():
        c %= q
        if not c:
            continue
        term = np.full(X.shape[0], c, dtype=np.int64)
        for j, k in enumerate(exps):
            if k:
                term = term * power(j, k) % q
        out += term
        out %= q
    return out


def grid_points(n: int, q: int, start: int, stop: int) -> np.ndarray:
    """Rows ``start..stop-1`` of the lexicographic enumeration of ``(Z/q)^n``."""
    idx = np.arange(start, stop, dtype=np.int64)
    X = np.empty((idx.size, n), dtype=np.int64)
    for c in range(n - 1, -1, -1):
        X[:, c] = idx % q
        idx //= q
    return X


def iter_points(n: int, q: int, chunk: int = CHUNK) -> Iterator[np.ndarray]:
    total = q**n
    for start in range(0, total, chunk):
        yield grid_points(n, q, start, min(total, start + chunk))


def iter_projective(n: int, p: int, chunk: int = CHUNK) -> Iterator[np.ndarray]:
    """Representatives of ``P^{n-1}(F_p)``: first nonzero coordinate equal to 1."""
    for lead in range(n):
        free = n - lead - 1
        total = p**free
        for start in range(0, total, chunk):
            tail = grid_points(free, p, start, min(total, start + chunk)) if free else np.zeros((1, 0), np.int64)
            X = np.zeros((tail.shape[0], n), dtype=np.int64)
            X[:, lead] = 1
            X[:, lead + 1 :] = tail
            yield X


def projective_count(n: int, p: int) -> int:
    return sum(p**k for k in range(n))


# -- linear algebra over F_p ----------------------------------------------


@functools.lru_cache(maxsize=64)
def _inverse_table(p: int) -> np.ndarray:
    inv = np.zeros(p, dtype=np.int64)
    for a in range(1, p):
        inv[a] = pow(a, p - 2, p)
    return inv


def batch_rank_mod_p(mats: np.ndarray, p: int) -> np.ndarray:
    """Rank over ``F_p`` of each matrix in a ``(B, r, c)`` integer array."""
    A = np.array(mats, dtype=np.int64) % p
    B, r, c = A.shape
    rank = np.zeros(B, dtype=np.int64)
    if r == 0 or c == 0 or B == 0:
        return rank
    inv = _inverse_table(p)
    rows = np.arange(r)
    for col in range(c):
        live = rank < r
        if not live.any():
            break
        mask = (A[:, :, col] != 0) & (rows[None, :] >= rank[:, None])
        has = mask.any(axis=1) & live
        if not has.any():
            continue
        b = np.nonzero(has)[0]
        piv = mask[b].argmax(axis=1)
        tgt = rank[b]
        pivot_rows = A[b, piv].copy()
        A[b, piv] = A[b, tgt]
        A[b, tgt] = pivot_rows * inv[pivot_rows[:, col]][:, None] % p
        normed = A[b, tgt]
        factors = A[b, :, col].copy()
        factors[np.arange(b.size), tgt] = 0
        A[b] = (A[b] - factors[:, :, None] * normed[:, None, :]) % p
        rank[b] += 1
    return rank


# -- residue histograms ----------------------------------------------------


def _split_separable(polys: Sequence[Polynomial]):
    """Partition variables into separable ones and a core.

    Variable ``j`` is separable when it occurs in at most one polynomial
    and every monomial containing it is a pure power of ``x_j``.
    Returns ``(core, separable)`` where ``separable`` maps ``j`` to
    ``(k, univariate terms)``; ``k`` is ``None`` for absent variables.
    """
    n = polys[0].n
    core, separable = [], {}
    for j in range(n):
        owners = [k for k, g in enumerate(polys) if any(e[j] for e, _ in g.terms())]
        if not owners:
            separable[j] = (None, ())
            continue
        if len(owners) == 1:
            g = polys[owners[0]]
            mixed = [e for e, _ in g.terms() if e[j] and sum(e) != e[j]]
            if not mixed:
                separable[j] = (owners[0], tuple((e[j], c) for e, c in g.terms() if e[j]))
                continue
        core.append(j)
    return core, separable


def histogram_cost(polys: Sequence[Polynomial], q: int) -> int:
    core, separable = _split_separable(polys)
    R = len(polys)
    return q ** len(core) + len(separable) * q ** (R + 1)


def residue_histogram(polys: Sequence[Polynomial], q: int, budget: int | None = None) -> np.ndarray:
    """Joint histogram ``h[v] = #{x mod q : (g_k(x) mod q)_k = v}``.

    Separable variables are folded in by cyclic convolution, so the scan
    only enumerates the remaining core variables.
    """
    if not polys:
        raise InputError("need at least one polynomial")
    n, R = polys[0].n, len(polys)
    if q < 1:
        raise InputError("modulus must be positive")
    check_budget(histogram_cost(polys, q), budget, f"residue enumeration mod {q}")
    core, separable = _split_separable(polys)
    dtype = np.int64 if q**n < INT64_SAFE else object

    sep_vars = set(separable)
    core_polys = []
    for g in polys:
        terms = {e: c for e, c in g.terms() if not any(e[j] for j in sep_vars)}
        core_polys.append(Polynomial(n, terms))

    shape = (q,) * R
    flat = np.zeros(q**R, dtype=dtype)
    m = len(core)
    total = q**m
    strides = [q ** (R - 1 - k) for k in range(R)]
    for start in range(0, total, CHUNK):
        Y = grid_points(m, q, start, min(total, start + CHUNK))
        X = np.zeros((Y.shape[0], n), dtype=np.int64)
        X[:, core] = Y
        idx = np.zeros(Y.shape[0], dtype=np.int64)
        for k, g in enumerate(core_polys):
            idx += eval_mod(g, X, q) * strides[k]
        counts = np.bincount(idx, minlength=q**R)
        flat += counts.astype(dtype)
    hist = flat.reshape(shape)

    for j in sorted(separable):
        k, uni = separable[j]
        if k is None:
            hist = hist * q
            continue
        t = np.arange(q, dtype=np.int64)
        vals = np.zeros(q, dtype=np.int64)
        for e, c in uni:
            vals = (vals + (c % q) * _powmod(t, e, q)) % q
        table = np.bincount(vals, minlength=q)
        out = np.zeros_like(hist)
        for s in np.nonzero(table)[0]:
            w = int(table[s])
            out = out + np.roll(hist, int(s), axis=k) * w
        hist = out
    return hist


def _powmod(t: np.ndarray, e: int, q: int) -> np.ndarray:
    out = np.ones_like(t) % q
    for _ in range(e):
        out = out * t % q
    return out
