from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from steinlab import gamma_calculus as G
from steinlab.poly import Poly

x = Poly.from_coeffs([0, 1])
BASIS = [Poly.from_coeffs([0] * k + [1]) for k in range(5)]


def test_ou_square():
    f = x * x
    d = G.ou()
    assert G.iterated_gamma(d, 1, f) == 4 * x * x
    assert G.iterated_gamma(d, 2, f) == 4 * x * x + 4
    assert G.iterated_gamma(d, 3, f) == 4 * x * x + 12


@pytest.mark.parametrize("k", range(7))
def test_ou_closed_forms(k):
    f = Poly.from_coeffs([0] * k + [1])
    d = G.ou()
    f1, f2, f3 = f.diff(), f.diff(0, 2), f.diff(0, 3)
    g1, g2 = f1 * f1, f2 * f2 + f1 * f1
    assert G.iterated_gamma(d, 2, f) == g2
    assert G.iterated_gamma(d, 3, f) == f3 * f3 + 3 * g2 - 2 * g1


def test_laguerre_linear():
    p = Fraction(3, 2)
    assert G.iterated_gamma(G.laguerre(p), 2, x) == (p + x) / 2


def test_jacobi_linear():
    assert G.iterated_gamma(G.jacobi(), 2, x) == 1 + x * x


@pytest.mark.parametrize("k", range(7))
def test_jacobi_factorization(k):
    assert G.jacobi_factorization_residual(Poly.from_coeffs([0] * k + [1])).is_zero()


coeff_lists = st.lists(st.integers(-4, 4), min_size=1, max_size=7)


@settings(max_examples=40, deadline=None)
@given(coeff_lists)
def test_jacobi_factorization_random(c):
    assert G.jacobi_factorization_residual(Poly.from_coeffs(c)).is_zero()


@settings(max_examples=30, deadline=None)
@given(coeff_lists, coeff_lists, st.sampled_from([1, 2, 3]))
def test_parallelogram_identity(a, b, n):
    f, g = Poly.from_coeffs(a), Poly.from_coeffs(b)
    d = G.laguerre(Fraction(3, 2))
    lhs = G.iterated_gamma(d, n, f + g) + G.iterated_gamma(d, n, f - g)
    rhs = 2 * G.iterated_gamma(d, n, f) + 2 * G.iterated_gamma(d, n, g)
    assert lhs == rhs


def test_sympy_functions_supported():
    e = G.iterated_gamma(G.ou(), 2, sympy.sin(G.X))
    assert sympy.simplify(e - 1) == 0


def test_plain_callables_rejected():
    with pytest.raises(TypeError):
        G.iterated_gamma(G.ou(), 2, lambda t: t)


@pytest.mark.parametrize("diff, consts", [
    (G.ou(), (1, 1, 1)),
    (G.laguerre(Fraction(3, 2)), (0.5, 0.5, 0.5)),
    (G.jacobi(), (1, 1, 0.5)),
])
def test_criteria_pass(diff, consts):
    rep = G.check_criteria(diff, *consts)
    assert rep.passed, rep.to_json()
    assert all(c.min_eigenvalue > -1e-9 for c in rep.criteria)


def test_criteria_fail_for_excess_curvature():
    rep = G.check_criteria(G.ou(), 1.1, 1, 1)
    assert not rep.passed
    assert rep.criteria[0].min_slack < 0


def test_laguerre_hessian_condition_needs_shape_one():
    rep = G.check_criteria(G.laguerre(Fraction(3, 4)), 0.5, 0.5, 0.5)
    assert rep.criteria[0].passed and rep.criteria[1].passed
    assert not rep.criteria[2].passed
    sigma = 1 - Fraction(1, 2) / Fraction(3, 4)
    assert G.check_criteria(G.laguerre(Fraction(3, 4)), 0.5, 0.5, float(sigma)).passed


def test_criteria_json_shape():
    d = G.check_criteria(G.ou(), 1, 1, 1, draws=10).criteria[0].to_json()
    assert set(d) >= {"criterion", "min_slack", "argmin_f", "argmin_x"}


def test_criteria_deterministic():
    a = G.check_criteria(G.jacobi(), 1, 1, 0.5, seed=3).to_json()
    b = G.check_criteria(G.jacobi(), 1, 1, 0.5, seed=3).to_json()
    assert a == b


@pytest.mark.parametrize("u, c, passed", [
    ("0.5*x1^2", Fraction(1, 3), True),
    ("0.5*x1^2 + 1/12*x1^4", Fraction(1, 4), True),
    ("0.5*x1^2", 2, False),
])
def test_log_concave_conditions(u, c, passed):
    rep = G.log_concave_conditions(u, c)
    assert rep.passed is passed
    if not passed:
        assert rep.slacks["u''>=c"] < 0


def test_log_concave_sympy_potential():
    u = G.X ** 2 / 2 + G.X ** 4 / 12
    assert G.log_concave_conditions(u, 0.25).passed
