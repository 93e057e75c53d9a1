import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circlemethod.densities import (
    count_mod,
    euler_product,
    predict_main_term,
    sigma_infinity,
    sigma_p,
)
from circlemethod.errors import BudgetExceeded, InputError, NonConvergence
from circlemethod.forms import IntegerForm
from circlemethod.modp import primes_up_to

from conftest import linear_system, make_system, quadric_system

XY = make_system(2, [IntegerForm(2, 2, {(1, 1): 1})])
CONE = make_system(3, [IntegerForm(3, 2, {(2, 0, 0): 1, (0, 2, 0): 1, (0, 0, 2): -1})])
PENCIL = make_system(4, [IntegerForm.diagonal([1, 1, 1, 1], 2), IntegerForm.diagonal([1, 2, 3, 4], 2)])
MIXED = make_system(3, [IntegerForm(3, 1, {(1, 0, 0): 1, (0, 1, 0): 2}), IntegerForm(3, 3, {(3, 0, 0): 1, (0, 0, 3): -1, (0, 1, 2): 1})])


class TestCountMod:
    def test_examples(self):
        assert count_mod(linear_system(), 7) == 7
        assert count_mod(linear_system(), 1) == 1
        assert count_mod(XY, 3) == 5

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            count_mod(make_system(6, [IntegerForm(6, 2, {(1, 1, 0, 0, 0, 0): 1, (0, 0, 1, 1, 0, 0): 1, (0, 0, 0, 0, 1, 1): 1})]), 97, budget=10**6)

    @pytest.mark.parametrize("system", [XY, CONE, PENCIL, MIXED], ids=["xy", "cone", "pencil", "mixed"])
    def test_crt_multiplicativity(self, system):
        for q1, q2 in [(2, 3), (3, 4), (4, 9), (5, 7), (2, 9)]:
            assert count_mod(system, q1 * q2) == count_mod(system, q1) * count_mod(system, q2)


class TestSigmaP:
    def test_linear_form_exact(self):
        for p in primes_up_to(20):
            loc = sigma_p(linear_system(), p, 3)
            assert loc.levels == (1, 1, 1) and loc.stabilized

    def test_cone_first_level(self):
        assert sigma_p(CONE, 3, 1).levels == (1,)

    def test_xy_diverges(self):
        loc = sigma_p(XY, 2, 3)
        assert loc.levels == (Fraction(3, 2), 2, Fraction(5, 2))
        assert loc.divergent and not loc.stabilized
        for p in (3, 5):
            lv = sigma_p(XY, p, 4).levels
            assert lv == tuple(k * (1 - Fraction(1, p)) + 1 for k in range(1, 5))

    def test_quadric_levels_pair_up_without_stabilising(self):
        # levels repeat in pairs and the pair steps shrink by p^-3, so the
        # equal tail of an odd k_max is not a limit
        for p in (3, 5, 7, 11, 13):
            loc = sigma_p(quadric_system(), p, 5)
            L = loc.levels
            assert L[1] == L[2] == 1 + Fraction(1, p**3) - Fraction(1, p**4)
            assert L[3] == L[4]
            assert L[3] - L[1] == (L[1] - L[0]) / p**3
            assert not loc.stabilized

    @pytest.mark.parametrize("system", [XY, CONE, PENCIL, MIXED, quadric_system()], ids=["xy", "cone", "pencil", "mixed", "quadric"])
    def test_against_residue_enumeration(self, system):
        for p in (2, 3, 5):
            loc = sigma_p(system, p, 3)
            for k, c in enumerate(loc.counts, 1):
                if p ** (k * system.n) <= 10**6:
                    assert c == count_mod(system, p**k)

    def test_congruence_class(self):
        S = make_system(2, [IntegerForm.diagonal([1, 1], 2)], M=2, m0=(1, 1))
        loc = sigma_p(S, 2, 3)
        assert loc.counts[0] == count_mod(S, 2) and loc.counts[1] == count_mod(S, 4) == 0
        assert loc.value == 0

    def test_not_prime(self):
        with pytest.raises(InputError):
            sigma_p(XY, 4, 2)

    def test_partial_on_budget(self):
        loc = sigma_p(MIXED, 3, 6, budget=40)
        assert loc.partial and 1 <= len(loc.levels) < 6
        assert sigma_p(MIXED, 3, 6, budget=None).levels[: len(loc.levels)] == loc.levels
        with pytest.raises(BudgetExceeded):
            sigma_p(PENCIL, 97, 2, budget=10)


class TestEulerProduct:
    def test_linear(self):
        assert euler_product(linear_system(), 30, 3).value == 1

    def test_divergence_names_prime(self):
        with pytest.raises(NonConvergence, match="p=2"):
            euler_product(XY, 5, 3)

    def test_unstabilised_warns(self):
        with pytest.warns(UserWarning, match="not stabilised"):
            E = euler_product(quadric_system(), 5, 4)
        assert E.unstabilized and E.value > 0

    @pytest.mark.filterwarnings("ignore:sigma_p not stabilised")
    def test_no_local_solution(self):
        S = make_system(2, [IntegerForm.diagonal([1, 1], 2)], M=2, m0=(1, 1))
        assert euler_product(S, 3, 3).value == 0


class TestSigmaInfinity:
    def test_linear(self):
        r = sigma_infinity(linear_system(), 200_000, seed=3)
        assert abs(r.estimate - 2) < 4 * r.stderr + 0.02

    def test_box_missing_zero_set(self):
        S = make_system(2, [IntegerForm(2, 1, {(1, 0): 1})], box=((Fraction(1, 2), 1), (-1, 1)))
        r = sigma_infinity(S, 10**4, seed=0)
        assert r.estimate == 0 and r.stderr > 0 and r.hits == (0, 0)

    def test_reproducible_and_worker_independent(self):
        a = sigma_infinity(quadric_system(), 40_000, seed=5, streams=4, workers=1)
        b = sigma_infinity(quadric_system(), 40_000, seed=5, streams=4, workers=3)
        assert a == b
        c = sigma_infinity(quadric_system(), 40_000, seed=6, streams=4)
        assert c.hits != a.hits

    def test_successive_eps_agree(self):
        for system in (linear_system(), quadric_system()):
            r = sigma_infinity(system, 300_000, seed=11)
            (va, ea), (vb, eb) = r.per_eps
            assert abs(va - vb) < 3 * math.hypot(ea, eb)

    def test_validation(self):
        with pytest.raises(InputError):
            sigma_infinity(linear_system(), 100)
        with pytest.raises(InputError):
            sigma_infinity(linear_system(), 10**4, eps_schedule=[0.01, 0.02])
        with pytest.raises(InputError):
            sigma_infinity(linear_system(), 10**4, eps_schedule=[0.01])

    def test_congruence_scaling(self):
        a = sigma_infinity(linear_system(), 10**5, seed=1)
        b = sigma_infinity(linear_system(M=2, m0=(1, 1)), 10**5, seed=1)
        assert b.estimate == pytest.approx(a.estimate / 4)


class TestPrediction:
    def test_linear(self):
        assert predict_main_term(2, 1, 2, 1, 10) == 20

    def test_zero_factor(self):
        assert predict_main_term(0, 1.3, 5, 2, 60) == 0
        assert predict_main_term(16.9, 0, 5, 2, 60) == 0

    def test_non_finite(self):
        with pytest.raises(InputError):
            predict_main_term(float("nan"), 1, 2, 1, 10)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(primes_up_to(20)), st.lists(st.integers(-6, 6), min_size=3, max_size=3).filter(any))
def test_any_linear_form_has_density_one(p, c):
    F = IntegerForm(3, 1, {e: v for e, v in zip([(1, 0, 0), (0, 1, 0), (0, 0, 1)], c) if v})
    if F.content() % p == 0:
        return  # reduces to 0 = 0 mod p; density is p^k-dependent, not 1
    assert sigma_p(make_system(3, [F]), p, 3).levels == (1, 1, 1)
