import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circlemethod.counting import count_solutions, empirical_ratio, scan_cost, solve_last_split
from circlemethod.errors import BudgetExceeded, InputError
from circlemethod.forms import IntegerForm

from conftest import linear_system, make_system, quadric_system


def naive_count(system, P):
    """Independent oracle: loop over integers in the box, filter the congruence."""
    ranges = []
    for a, b in system.box:
        lo, hi = P * a, P * b
        ranges.append([x for x in range(int(lo) - 1, int(hi) + 2) if lo <= x <= hi])
    total = 0
    for x in itertools.product(*ranges):
        if any((xi - mi) % system.M for xi, mi in zip(x, system.m0)):
            continue
        total += system.vanishes_at(x)
    return total


CONE = make_system(3, [IntegerForm(3, 2, {(2, 0, 0): 1, (0, 2, 0): 1, (0, 0, 2): -1})])


class TestExamples:
    def test_linear(self):
        assert count_solutions(linear_system(), 10).count == 21

    def test_linear_congruence(self):
        assert count_solutions(linear_system(M=2, m0=(1, 1)), 10).count == 10

    def test_cone_against_naive_loop(self):
        expected = naive_count(CONE, 20)
        assert expected == 257
        for strategy in ("full", "solve-last"):
            assert count_solutions(CONE, 20, strategy).count == expected

    def test_report_fields(self):
        rep = count_solutions(CONE, 3)
        assert 1 <= rep.count <= rep.points_scanned == 7**3
        assert rep.strategy == "solve-last"

    def test_non_integer_P(self):
        assert count_solutions(linear_system(), 2.5).count == 5


class TestStrategies:
    def test_quadric_agreement(self):
        Q = quadric_system()
        for P in (3, 7, 12):
            assert count_solutions(Q, P, "full").count == count_solutions(Q, P, "solve-last").count

    def test_solve_last_unavailable(self):
        S = make_system(2, [IntegerForm(2, 2, {(1, 1): 1})])
        assert solve_last_split(S) is None
        with pytest.raises(InputError):
            count_solutions(S, 5, "solve-last")

    def test_unknown_strategy(self):
        with pytest.raises(InputError):
            count_solutions(CONE, 5, "magic")

    def test_mixed_degrees(self):
        S = make_system(3, [IntegerForm(3, 1, {(1, 0, 0): 1, (0, 1, 0): -1}), IntegerForm(3, 2, {(1, 1, 0): 1, (0, 0, 2): -1})])
        assert count_solutions(S, 9, "full").count == count_solutions(S, 9, "solve-last").count == naive_count(S, 9)

    def test_cost(self):
        assert scan_cost(CONE, 10, "full") == 21**3
        assert scan_cost(CONE, 10, "solve-last") == 21**2 + 21


class TestGuards:
    def test_budget_refusal(self):
        with pytest.raises(BudgetExceeded, match="scan"):
            count_solutions(quadric_system(), 1000, budget=10**6)

    def test_bad_P(self):
        with pytest.raises(InputError):
            count_solutions(CONE, 0)

    def test_empirical_ratio(self):
        assert empirical_ratio(100, 100) == 1.0
        assert empirical_ratio(0, 5) == 0.0
        with pytest.raises(InputError):
            empirical_ratio(3, 0)


class TestProperties:
    def test_workers(self):
        Q = quadric_system()
        counts = {w: count_solutions(Q, 15, workers=w).count for w in (1, 2, 8)}
        assert len(set(counts.values())) == 1

    def test_monotone_in_P(self):
        prev = 0
        for P in range(1, 12):
            c = count_solutions(CONE, P).count
            assert c >= prev
            prev = c

    @settings(max_examples=15, deadline=None)
    @given(st.integers(1, 12), st.sampled_from([(1, 1, -2), (1, -1, 0), (2, 3, -5)]))
    def test_congruence_classes_partition(self, P, coeffs):
        exps = [(2, 0, 0), (0, 2, 0), (0, 0, 2)]
        forms = [IntegerForm(3, 2, {e: c for e, c in zip(exps, coeffs) if c})]
        base = make_system(3, forms)
        total = sum(
            count_solutions(make_system(3, forms, M=2, m0=m0), P).count
            for m0 in itertools.product(range(2), repeat=3)
        )
        assert total == count_solutions(base, P).count

    @settings(max_examples=15, deadline=None)
    @given(st.integers(1, 8), st.lists(st.integers(-3, 3), min_size=3, max_size=3))
    def test_matches_naive_on_random_binary_systems(self, P, c):
        coeffs = {(2, 0): c[0], (1, 1): c[1], (0, 2): c[2]}
        coeffs = {e: v for e, v in coeffs.items() if v} or {(1, 1): 1}
        S = make_system(2, [IntegerForm(2, 2, coeffs)])
        assert count_solutions(S, P, "full").count == naive_count(S, P)
