"""Local densities: residue counts, p-adic densities, truncated Euler
products, the real density by Monte Carlo, and the main-term prediction.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import BudgetExceeded, InputError, NonConvergence
from .forms import FormSystem, Polynomial
from .modp import is_prime, primes_up_to, residue_histogram
from .padic import local_counts

DEFAULT_BUDGET = 10**9
DEFAULT_K_MAX = 6
DEFAULT_EPS = (0.02, 0.01)
MC_CHUNK = 1 << 16


def count_mod(system: FormSystem, q: int, budget: int | None = DEFAULT_BUDGET) -> int:
    """``#{x mod q : F(m0 + M x) = 0 mod q}`` by explicit residue enumeration."""
    if q < 1:
        raise InputError(f"modulus must be positive, got {q}")
    if q == 1:
        return 1
    hist = residue_histogram(system.shifted_forms(), q, budget)
    return int(hist[(0,) * system.R])


# -- p-adic densities -------------------------------------------------------


@dataclass(frozen=True)
class LocalDensity:
    p: int
    counts: tuple[int, ...]
    levels: tuple[Fraction, ...]
    stabilized: bool
    divergent: bool
    partial: bool = False

    @property
    def value(self) -> Fraction | None:
        return self.levels[-1] if self.levels else None


def _local_polys(system: FormSystem, p: int):
    """Forms whose residue counts give ``N(p^k)``; homogeneous when ``p`` does not divide ``M``."""
    if system.M % p:
        # x -> m0 + M x permutes residues mod p^k
        return list(system.forms), True
    return system.shifted_forms(), False


def sigma_p(
    system: FormSystem,
    p: int,
    k_max: int = DEFAULT_K_MAX,
    budget: int | None = DEFAULT_BUDGET,
) -> LocalDensity:
    """Levels ``p^{-(n-R)k} N(p^k)`` for ``k = 1..k_max``.

    Stabilised means the last three levels are equal (two when only two
    exist); levels of a quadric repeat in pairs, so two equal levels are not
    enough.  Divergent means the last three strictly increase by a constant
    step.  If the budget runs out the levels computed so far come back with
    ``partial`` set.
    """
    if not is_prime(p):
        raise InputError(f"{p} is not prime")
    if k_max < 1:
        raise InputError("k_max must be at least 1")
    polys, homogeneous = _local_polys(system, p)
    counts = local_counts(polys, p, k_max, homogeneous, budget)
    if not counts:
        raise BudgetExceeded(f"p-adic density at p={p}: level k=1 already exceeds budget {budget}", budget=budget)
    e = system.n - system.R
    levels = tuple(Fraction(c, p ** (e * k)) if e >= 0 else Fraction(c * p ** (-e * k)) for k, c in enumerate(counts, 1))
    return LocalDensity(
        p=p,
        counts=tuple(counts),
        levels=levels,
        stabilized=len(levels) >= 2 and len(set(levels[-3:])) == 1,
        divergent=_arithmetic_growth(levels),
        partial=len(counts) < k_max,
    )


def _arithmetic_growth(levels: Sequence[Fraction]) -> bool:
    if len(levels) < 3:
        return False
    a, b, c = levels[-3:]
    return b > a and c - b == b - a


@dataclass(frozen=True)
class EulerProduct:
    p_max: int
    k_max: int
    value: Fraction
    factors: dict[int, LocalDensity]
    unstabilized: tuple[int, ...] = ()

    def __float__(self) -> float:
        return float(self.value)


def euler_product(
    system: FormSystem,
    p_max: int,
    k_max: int = DEFAULT_K_MAX,
    budget: int | None = DEFAULT_BUDGET,
) -> EulerProduct:
    """``prod_{p <= p_max}`` of the last available level of each ``sigma_p``."""
    value = Fraction(1)
    factors = {}
    unstable = []
    for p in primes_up_to(p_max):
        loc = sigma_p(system, p, k_max, budget)
        if loc.divergent:
            raise NonConvergence(f"sigma_p diverges at p={p}: levels grow by a constant step")
        if not loc.stabilized:
            unstable.append(p)
        factors[p] = loc
        value *= loc.value
    if unstable:
        warnings.warn(f"sigma_p not stabilised by k={k_max} for p in {unstable}; using the last level", stacklevel=2)
    return EulerProduct(p_max, k_max, value, factors, tuple(unstable))


# -- real density -----------------------------------------------------------


def eval_float(poly: Polynomial, X: np.ndarray) -> np.ndarray:
    out = np.zeros(X.shape[0])
    for exps, c in poly.terms():
        term = np.full(X.shape[0], float(c))
        for j, k in enumerate(exps):
            if k:
                term *= X[:, j] ** k
        out += term
    return out


@dataclass(frozen=True)
class RealDensity:
    estimate: float
    stderr: float
    eps_schedule: tuple[float, ...]
    per_eps: tuple[tuple[float, float], ...]
    hits: tuple[int, ...]
    samples: int
    seed: int
    streams: int


def _stream_hits(system: FormSystem, ss: np.random.SeedSequence, count: int, eps: Sequence[float]) -> list[int]:
    rng = np.random.default_rng(ss)
    lo = np.array([float(a) for a, _ in system.box])
    hi = np.array([float(b) for _, b in system.box])
    hits = [0] * len(eps)
    done = 0
    while done < count:
        m = min(MC_CHUNK, count - done)
        X = lo + (hi - lo) * rng.random((m, system.n))
        worst = np.zeros(m)
        for F in system.forms:
            np.maximum(worst, np.abs(eval_float(F, X)), out=worst)
        for i, e in enumerate(eps):
            hits[i] += int(np.count_nonzero(worst <= e))
        done += m
    return hits


def sigma_infinity(
    system: FormSystem,
    samples: int,
    eps_schedule: Sequence[float] = DEFAULT_EPS,
    seed: int = 0,
    streams: int = 8,
    workers: int = 1,
) -> RealDensity:
    """``M^{-n} lim (2 eps)^{-R} vol{x in box : |F(x)| <= eps}`` by Monte Carlo.

    Samples are split over ``streams`` independent generators spawned from
    ``seed``, so the result depends on ``(seed, streams)`` only, never on
    ``workers``.  The limit is a linear extrapolation through the last two
    ``eps`` values; both use the same samples, and the standard error
    accounts for that correlation.
    """
    if samples < 10**4:
        raise InputError("sigma_infinity needs at least 10^4 samples")
    eps = [float(e) for e in eps_schedule]
    if len(eps) < 2 or any(not b < a for a, b in zip(eps, eps[1:])) or eps[-1] <= 0:
        raise InputError("eps_schedule must be strictly decreasing, positive, with at least 2 values")
    if streams < 1:
        raise InputError("streams must be positive")
    children = np.random.SeedSequence(seed).spawn(streams)
    sizes = [samples // streams + (i < samples % streams) for i in range(streams)]
    jobs = list(zip(children, sizes))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: _stream_hits(system, job[0], job[1], eps), jobs))
    else:
        results = [_stream_hits(system, ss, k, eps) for ss, k in jobs]
    hits = [sum(r[i] for r in results) for i in range(len(eps))]

    R, N = system.R, samples
    scale = float(system.box_volume()) / system.M**system.n
    per_eps = []
    for e, h in zip(eps, hits):
        c = scale / (2 * e) ** R
        frac = h / N
        per_eps.append((c * frac, c * math.sqrt(frac * (1 - frac) / N)))

    if all(h == 0 for h in hits):
        # rule of three: with no hits the hit rate is below 3/N at 95%
        bound = scale / (2 * eps[-1]) ** R * 3 / N
        return RealDensity(0.0, bound, tuple(eps), tuple(per_eps), tuple(hits), N, seed, streams)

    ea, eb = eps[-2], eps[-1]
    pa, pb = hits[-2] / N, hits[-1] / N
    ca, cb = scale / (2 * ea) ** R, scale / (2 * eb) ** R
    alpha = ea * cb / (ea - eb)
    beta = eb * ca / (ea - eb)
    estimate = alpha * pb - beta * pa
    # the eps_b region is nested in the eps_a region, so I_a I_b = I_b
    second = (alpha**2 - 2 * alpha * beta) * pb + beta**2 * pa
    var = max(second - estimate**2, 0.0) / N
    return RealDensity(estimate, math.sqrt(var), tuple(eps), tuple(per_eps), tuple(hits), N, seed, streams)


# -- main term ---------------------------------------------------------------


def predict_main_term(sigma_inf: float, euler: float, n: int, curly_D: int, P) -> float:
    """``sigma_inf * euler * P^(n - curly_D)``."""
    values = [float(sigma_inf), float(euler), float(P)]
    if not all(math.isfinite(v) for v in values):
        raise InputError("main-term inputs must be finite")
    return values[0] * values[1] * values[2] ** (n - curly_D)


@dataclass
class DensityEstimate:
    sigma_p: dict[int, LocalDensity]
    euler: EulerProduct
    sigma_inf: RealDensity
    prediction: tuple[Fraction, float] | None = None
    warnings: list[str] = field(default_factory=list)


def estimate_densities(
    system: FormSystem,
    p_max: int,
    k_max: int = DEFAULT_K_MAX,
    samples: int = 10**6,
    eps_schedule: Sequence[float] = DEFAULT_EPS,
    seed: int = 0,
    streams: int = 8,
    workers: int = 1,
    budget: int | None = DEFAULT_BUDGET,
    P=None,
) -> DensityEstimate:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        euler = euler_product(system, p_max, k_max, budget)
    real = sigma_infinity(system, samples, eps_schedule, seed, streams, workers)
    prediction = None
    if P is not None:
        P = Fraction(P)
        prediction = (P, predict_main_term(real.estimate, euler.value, system.n, system.curly_D, P))
    return DensityEstimate(euler.factors, euler, real, prediction, [str(w.message) for w in caught])
