from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from steinlab.poly import Poly, parse_poly


def test_parse_grammar_with_whitespace_and_floats():
    p = parse_poly(" 3*x1^2*x4 - 1.5*x2 ")
    assert p.nvars == 4
    assert p.coefficient((2, 0, 0, 1)) == 3
    assert p.coefficient((0, 1, 0, 0)) == -1.5


def test_exact_arithmetic_stays_exact():
    x = Poly.var(0)
    p = (x * x - 1) / 3
    assert p.is_exact()
    assert p.coefficient((2,)) == Fraction(1, 3)


def test_gaussian_moments_are_double_factorials():
    x = Poly.var(0)
    assert [(x ** k).gaussian_moment() for k in range(0, 9)] == [1, 0, 1, 0, 3, 0, 15, 0, 105]


def test_evaluate_matches_manual_formula():
    p = parse_poly("x1*x2 + 2*x2^3 - 4")
    pts = np.array([[1.0, 2.0], [-0.5, 0.25]])
    expected = pts[:, 0] * pts[:, 1] + 2 * pts[:, 1] ** 3 - 4
    assert np.allclose(p.evaluate(pts), expected)


def test_negative_power_rejected():
    with pytest.raises(ValueError):
        Poly.var(0) ** -1


coeffs = st.lists(st.integers(-5, 5), min_size=1, max_size=5)


@settings(max_examples=60, deadline=None)
@given(coeffs, coeffs)
def test_product_rule(a, b):
    p, q = Poly.from_coeffs(a), Poly.from_coeffs(b)
    assert (p * q).diff() == p.diff() * q + p * q.diff()


@settings(max_examples=60, deadline=None)
@given(coeffs, st.floats(-2, 2))
def test_evaluation_is_a_ring_homomorphism(a, x):
    p = Poly.from_coeffs(a)
    lhs = (p * p + p).evaluate(np.array([[x]]))[0]
    v = p.evaluate(np.array([[x]]))[0]
    assert lhs == pytest.approx(v * v + v, abs=1e-9)
