import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circlemethod.errors import InputError
from circlemethod.forms import (
    FormSystem,
    IntegerForm,
    MultilinearForm,
    Polynomial,
    apply_equivalence,
    forward_difference,
    hat_jacobian,
    jacobian_matrix,
    polar_form,
)

from conftest import make_system


@st.composite
def forms(draw, max_n=5, max_d=4):
    n = draw(st.integers(1, max_n))
    d = draw(st.integers(1, max_d))
    k = draw(st.integers(1, 6))
    coeffs = {}
    for _ in range(k):
        cuts = sorted(draw(st.lists(st.integers(0, d), min_size=n - 1, max_size=n - 1)))
        exps = tuple(b - a for a, b in zip([0] + cuts, cuts + [d]))
        coeffs[exps] = draw(st.integers(-9, 9))
    coeffs = {e: c for e, c in coeffs.items() if c}
    if not coeffs:
        coeffs = {(d,) + (0,) * (n - 1): 1}
    return IntegerForm(n, d, coeffs)


def vectors(n):
    return st.lists(st.integers(-6, 6), min_size=n, max_size=n)


class TestPolynomial:
    def test_arithmetic(self):
        x = Polynomial.variable(2, 0)
        y = Polynomial.variable(2, 1)
        p = (x + y) ** 2 - x * x
        assert p.coeffs == {(1, 1): 2, (0, 2): 1}
        assert p([3, 4]) == 40
        assert (p - p).is_zero()
        assert p.degree == 2 and (p - p).degree == -1

    def test_exact_div_and_content(self):
        p = Polynomial(2, {(1, 0): 6, (0, 1): -9})
        assert p.content() == 3
        assert p.exact_div(3).coeffs == {(1, 0): 2, (0, 1): -3}

    def test_substitute_affine(self):
        f = Polynomial(1, {(2,): 1})
        g = f.substitute_affine([1], 3)  # (1 + 3x)^2
        assert g.coeffs == {(2,): 9, (1,): 6, (0,): 1}

    def test_evaluation_dimension_mismatch(self):
        with pytest.raises(InputError):
            Polynomial(2, {(1, 0): 1})([1])

    def test_forward_difference_examples(self):
        assert forward_difference(Polynomial(1, {(2,): 1}), [1]).coeffs == {(1,): 2, (0,): 1}
        got = forward_difference(Polynomial(2, {(1, 1): 1}), [1, 2])
        assert got.coeffs == {(1, 0): 2, (0, 1): 1, (0, 0): 2}


class TestIntegerForm:
    def test_rejects_inhomogeneous(self):
        with pytest.raises(InputError):
            IntegerForm(2, 2, {(2, 0): 1, (1, 0): 1})

    def test_rejects_zero_degree(self):
        with pytest.raises(InputError):
            IntegerForm(2, 0, {(0, 0): 1})

    def test_diagonal(self):
        F = IntegerForm.diagonal([1, -2], 3)
        assert F([2, 1]) == 8 - 2


class TestPolar:
    def test_cube(self):
        L = polar_form(IntegerForm(1, 3, {(3,): 1}))
        assert L.terms == ((6, (0, 0, 0)),)

    def test_row_vector_of_product(self):
        L = polar_form(IntegerForm(2, 2, {(1, 1): 1}))
        assert L.row_vector([5, 7]) == [7, 5]

    def test_arity_checked(self):
        L = polar_form(IntegerForm(2, 2, {(1, 1): 1}))
        with pytest.raises(InputError):
            L([1, 2])

    @settings(max_examples=60, deadline=None)
    @given(forms(), st.data())
    def test_polar_is_iterated_difference(self, F, data):
        n, d = F.n, F.degree
        hs = [data.draw(vectors(n)) for _ in range(d)]
        g = F
        for h in hs:
            g = forward_difference(g, h)
        # after d differences only the constant survives
        assert g.degree <= 0
        assert g([0] * n) == polar_form(F)(*hs)

    @settings(max_examples=60, deadline=None)
    @given(forms(), st.data())
    def test_slot_symmetry(self, F, data):
        n, d = F.n, F.degree
        xs = [data.draw(vectors(n)) for _ in range(d)]
        perm = data.draw(st.permutations(range(d)))
        L = polar_form(F)
        assert L(*xs) == L(*[xs[i] for i in perm])
        assert L.is_symmetric()


class TestSystem:
    def test_sorted_by_degree(self):
        S = make_system(2, [IntegerForm(2, 2, {(2, 0): 1}), IntegerForm(2, 1, {(0, 1): 1})])
        assert S.degrees == [1, 2]
        assert S.r == {1: 1, 2: 1}
        assert S.curly_D == 3
        assert S.index() == [(0, 1), (0, 2)]

    def test_m0_out_of_range(self):
        with pytest.raises(InputError, match="m0 coordinate"):
            make_system(1, [IntegerForm(1, 1, {(1,): 1})], M=3, m0=(3,))

    def test_box_validation(self):
        with pytest.raises(InputError):
            make_system(1, [IntegerForm(1, 1, {(1,): 1})], box=((Fraction(1, 2), Fraction(1, 2)),))
        with pytest.raises(InputError):
            make_system(1, [IntegerForm(1, 1, {(1,): 1})], box=((-2, 1),))

    def test_box_volume_default(self):
        S = make_system(3, [IntegerForm.diagonal([1, 1, 1], 2)])
        assert S.box_volume() == 8

    def test_jacobian(self):
        S = make_system(2, [IntegerForm(2, 2, {(1, 1): 1}), IntegerForm(2, 2, {(2, 0): 1})])
        assert jacobian_matrix(S, 2, [3, 5]) == [[5, 3], [6, 0]]

    def test_equivalence_keeps_zero_set(self):
        x = Polynomial.variable(2, 0)
        S = make_system(2, [IntegerForm(2, 1, {(1, 0): 1, (0, 1): -1}), IntegerForm(2, 2, {(1, 1): 1})])
        H = IntegerForm.from_polynomial(x)
        T = apply_equivalence(S, {(0, 2): [((0, 1), H)]})
        # x1 x2 + x1 (x1 - x2) = x1^2
        assert T.forms[1] == IntegerForm(2, 2, {(2, 0): 1})
        for pt in ([0, 0], [2, 2], [1, -1], [3, 0]):
            assert S.vanishes_at(pt) == T.vanishes_at(pt)

    def test_equivalence_rejects_higher_degree_target(self):
        S = make_system(2, [IntegerForm(2, 1, {(1, 0): 1}), IntegerForm(2, 2, {(1, 1): 1})])
        with pytest.raises(InputError):
            apply_equivalence(S, {(0, 1): [((0, 2), 1)]})


@settings(max_examples=40, deadline=None)
@given(forms(max_d=4), st.data())
def test_hat_jacobian_identity(F, data):
    x = data.draw(vectors(F.n))
    S = FormSystem(F.n, (F,))
    d = F.degree
    hat = hat_jacobian(S, d, *([x] * (d - 1)))
    J = jacobian_matrix(S, d, x)
    assert hat == [[math.factorial(d - 1) * v for v in row] for row in J]


def test_multilinear_validation():
    with pytest.raises(InputError):
        MultilinearForm(2, 2, ((1, (0, 2)),))


class TestSpecExamples:
    def test_evaluation(self):
        assert IntegerForm.diagonal([1, 1], 2)([3, 4]) == 25
        assert IntegerForm(3, 3, {(1, 1, 1): 1})([1, 2, 3]) == 6
        assert IntegerForm(3, 3, {(1, 1, 1): 1})([0, 0, 0]) == 0

    def test_polar_of_square(self):
        L = polar_form(IntegerForm(1, 2, {(2,): 1}))
        assert L([3], [5]) == 30
        assert L.row_vector([4]) == [8]

    def test_polar_of_product(self):
        L = polar_form(IntegerForm(2, 2, {(1, 1): 1}))
        assert L([1, 2], [3, 4]) == 1 * 4 + 2 * 3

    def test_jacobians(self):
        Q = make_system(5, [IntegerForm.diagonal([1, 1, 1, -1, -1], 2)])
        assert jacobian_matrix(Q, 2, [1, 0, 0, 0, 0]) == [[2, 0, 0, 0, 0]]
        assert jacobian_matrix(Q, 2, [0] * 5) == [[0] * 5]
        S = make_system(2, [IntegerForm(2, 2, {(2, 0): 1}), IntegerForm(2, 2, {(0, 2): 1})])
        assert jacobian_matrix(S, 2, [1, 1]) == [[2, 0], [0, 2]]
        C = make_system(1, [IntegerForm(1, 3, {(3,): 1})])
        assert hat_jacobian(C, 3, [2], [2]) == [[24]] == [[2 * 3 * 4]]

    def test_equivalence_examples(self):
        C = IntegerForm(2, 3, {(3, 0): 1})
        Q = IntegerForm(2, 2, {(0, 2): 1})
        S = make_system(2, [C, Q])
        assert apply_equivalence(S, {}) == S
        T = apply_equivalence(S, {(0, 3): [((0, 2), IntegerForm(2, 1, {(1, 0): 1}))]})
        assert T.forms_of_degree(3)[0] == IntegerForm(2, 3, {(3, 0): 1, (1, 2): 1})


@settings(max_examples=20, deadline=None)
@given(st.data())
def test_equivalence_preserves_zero_set_on_random_points(data):
    n = 3
    L = IntegerForm(n, 1, {(1, 0, 0): 1, (0, 1, 0): -1})
    Q = IntegerForm(n, 2, {(0, 1, 1): 1, (2, 0, 0): -1})
    S = make_system(n, [L, Q])
    H = data.draw(forms(max_n=1, max_d=1))
    H = IntegerForm(n, 1, {(e[0], 0, 0): c for e, c in H.terms()} or {(1, 0, 0): 1})
    T = apply_equivalence(S, {(0, 2): [((0, 1), H)]})
    for _ in range(50):
        x = data.draw(st.lists(st.integers(-5, 5), min_size=n, max_size=n))
        assert S.vanishes_at(x) == T.vanishes_at(x)
