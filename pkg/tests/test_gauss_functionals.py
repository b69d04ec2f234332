import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from steinlab import gauss_functionals as GF
from steinlab import measures as M
from steinlab.poly import Poly, parse_poly

PAIRS5 = GF.pairs_functional(5)
ROOT_HALF = "0.7071067811865476*x1^2 - 0.7071067811865476"


def test_ou_apply_examples():
    assert GF.ou_apply(parse_poly("x1")) == -parse_poly("x1")
    assert GF.ou_apply(PAIRS5) == -2 * PAIRS5
    assert GF.ou_apply(parse_poly("x1^2")) == parse_poly("2 - 2*x1^2")


def test_carre_du_champ_examples():
    assert GF.carre_du_champ(parse_poly("x1", 2), parse_poly("x2", 2)).is_zero()
    R2 = sum((Poly.var(i, 10) ** 2 for i in range(10)), Poly({}, 10))
    assert GF.carre_du_champ(PAIRS5) == R2
    g = GF.carre_du_champ(parse_poly(ROOT_HALF))
    assert g.coefficient((2,)) == pytest.approx(2.0, rel=1e-15)


def test_eigen_check_examples():
    assert GF.eigen_check(parse_poly("x1")) == 1
    assert GF.eigen_check(PAIRS5) == 2
    assert GF.eigen_check(parse_poly("x1^2")) is None
    assert GF.eigen_check(parse_poly(ROOT_HALF)) == 2


def test_eigen_stein_bound_examples():
    assert GF.eigen_stein_bound(["x1"]).value == 0
    assert GF.eigen_stein_bound(["x1", "x2"]).value == 0
    assert GF.eigen_stein_bound([ROOT_HALF]).value == pytest.approx(2.0, rel=1e-12)


def test_eigen_stein_bound_rejects_non_eigenfunction():
    with pytest.raises(ValueError):
        GF.eigen_stein_bound(["x1^2"])


@pytest.mark.parametrize("F, value", [("x1", 0), (ROOT_HALF, 2), ("x1^2 - 1", 9)])
def test_fourth_moment_examples(F, value):
    V2, bound = GF.fourth_moment_bound(F)
    assert V2.value == pytest.approx(value, abs=1e-12)
    assert bound.value == pytest.approx(value, abs=1e-12)


def test_fourth_moment_rejects_wrong_order():
    with pytest.raises(ValueError):
        GF.fourth_moment_bound("x1^2 - 1", k=3)


def _hermite2(i, n):
    return Poly.var(i, n) ** 2 - 1


@pytest.mark.parametrize("seed", range(5))
def test_fourth_moment_bound_dominates_on_random_chaos2(seed):
    rng = np.random.default_rng(seed)
    n = 3
    F = Poly({}, n)
    for i in range(n):
        F = F + float(rng.normal()) * _hermite2(i, n)
        for j in range(i + 1, n):
            F = F + float(rng.normal()) * Poly.var(i, n) * Poly.var(j, n)
    V2, bound = GF.fourth_moment_bound(F)
    assert V2.value <= bound.value + 3 * math.hypot(V2.std_error, bound.std_error) + 1e-9


def test_fourth_moment_by_monte_carlo_for_high_degree():
    # chaos of order 4 needs moments of degree 16, beyond the exact path
    F = parse_poly("x1^4 - 6*x1^2 + 3") / math.sqrt(24)
    V2, bound = GF.fourth_moment_bound(F, samples=400_000, seed=0)
    assert not bound.exact and bound.std_error > 0
    assert V2.value <= bound.value + 3 * math.hypot(V2.std_error, bound.std_error)


def test_u_field_pairs_closed_form():
    U = GF.u_field(PAIRS5)
    z = np.random.default_rng(0).standard_normal((1000, 10))
    F = PAIRS5.evaluate(z)
    R2 = np.sum(z * z, axis=1)
    assert np.allclose(U.evaluate(z)[:, 0], F * (1 - 2 / R2 - 4 / R2 ** 2), rtol=1e-10)


def test_u_field_identity_is_zero():
    U = GF.u_field(["x1"])
    z = np.random.default_rng(0).standard_normal((100, 1))
    assert np.allclose(U.evaluate(z), 0, atol=1e-14)
    assert GF.fisher_U_bound(["x1"], samples=10_000).value == pytest.approx(0, abs=1e-20)


def test_singular_gamma_matrix_rejected():
    with pytest.raises(ValueError, match="singular"):
        GF.u_field(["x1", "2*x1"])


def test_hill_index_on_pareto():
    rng = np.random.default_rng(0)
    vals = rng.pareto(1.2, 1_000_000) + 1
    assert GF.hill_tail_index(vals) == pytest.approx(1.2, rel=0.15)


def test_kappa():
    assert GF.kappa_of(1.0) == pytest.approx(3 / 14)
    with pytest.raises(ValueError):
        GF.kappa_of(0.0)


def test_entropy_bound_normal_zero_discrepancy():
    b = GF.entropy_bound_normal(["x1"], 1.0, samples=20_000)
    assert b.value == 0


def test_entropy_bound_normal_finite_for_chaos2():
    b = GF.entropy_bound_normal([ROOT_HALF], 0.25, samples=200_000, seed=0)
    assert math.isfinite(b.value) and b.value > 0
    assert b.S2 == pytest.approx(2.0)
    assert math.isfinite(b.A_F.value) and math.isfinite(b.B_F.value)


def test_entropy_bound_gamma_requires_half():
    with pytest.raises(ValueError, match="requires p ≥ ½"):
        GF.entropy_bound_gamma("x1^2", 0.4, 1.0)


def test_entropy_bound_gamma_rejects_negative_functional():
    with pytest.raises(ValueError, match="negative"):
        GF.entropy_bound_gamma("x1", 1.0, 1.0, samples=10_000)


def test_entropy_bound_gamma_chi_square():
    b = GF.entropy_bound_gamma("0.5*x1^2 + 0.5*x2^2 + 0.5*x3^2", 1.5, 1.0, samples=50_000)
    assert b.S2 == 0 and b.value == 0
    assert b.S2_source.startswith("Jensen")


def test_entropy_bound_gamma_with_law():
    law = M.scaled_gamma(1.5, M.GammaReference(1.5))
    b = GF.entropy_bound_gamma("0.5*x1^2 + 0.5*x2^2 + 0.5*x3^2", 1.5, 1.0, samples=20_000,
                               law=law)
    assert b.S2 == pytest.approx(0, abs=1e-12)


def test_concentration_gaussian_identity():
    rows = GF.concentration_moments(GF.gaussian_sampler, lambda x: x, lambda x: np.ones_like(x),
                                    [2], samples=400_000, seed=0)
    r = rows[0]
    assert r.norm_p == pytest.approx(1.0, rel=0.01)
    assert r.S_p == 0
    assert r.structure == pytest.approx(math.sqrt(2), rel=0.01)
    assert r.constant >= 1 / math.sqrt(2) - 0.01


def test_concentration_shifted_exponential():
    rows = GF.concentration_moments(lambda rng, m: rng.exponential(size=m) - 1, lambda x: x,
                                    lambda x: x + 1, [2, 4, 8], samples=400_000, seed=0)
    # tau - 1 = X, so S_p is the p-norm of X itself
    for r in rows:
        assert r.S_p == pytest.approx(r.norm_p, rel=1e-3)
    assert GF.required_constant(rows) == max(r.constant for r in rows)


def test_concentration_needs_kernel():
    with pytest.raises(ValueError):
        GF.concentration_moments(GF.gaussian_sampler, lambda x: x, None, [2])


def test_tail_exponent_gaussian():
    z = np.random.default_rng(0).standard_normal(1_000_000)
    assert GF.tail_exponent(z).exponent == pytest.approx(2.0, abs=0.05)


def test_sum_structure_reduces_to_sqrt_p_for_gaussian():
    assert GF.iid_sum_structure(4, 100, 0.0) == pytest.approx(2.0)
    assert GF.sum_discrepancy_p(4, 100, 1.0) == pytest.approx(0.8)


def test_clt_single_weight_is_hsi():
    from steinlab.inequalities import verify

    g3 = M.centered_gamma(3)
    res = GF.sum_discrepancy_clt(g3, [1.0])
    assert res.alpha == 1
    assert res.entropy_bound == pytest.approx(verify("hsi", g3).rhs, rel=1e-12)
    padded = GF.sum_discrepancy_clt(g3, [1.0, 0.0, 0.0])
    assert padded.entropy_bound == res.entropy_bound


def test_clt_weight_normalization():
    with pytest.raises(ValueError):
        GF.sum_discrepancy_clt(M.centered_gamma(3), [0.5, 0.5])


def test_clt_poincare_column():
    res = GF.sum_discrepancy_clt(M.centered_gamma(3), [0.1] * 100, poincare=0.5)
    assert res.poincare_bound is not None and res.poincare_bound > 0


def test_clt_histogram_is_density():
    rows = GF.clt_histogram(M.centered_gamma(3), [0.5] * 4, samples=20_000, seed=0, bins=40)
    width = rows[0][1] - rows[0][0]
    assert sum(d for _, _, d in rows) * width == pytest.approx(1.0, abs=0.01)


small_coeffs = st.lists(st.integers(-3, 3), min_size=1, max_size=4)


def _poly2(c):
    # degree <= 3 polynomial in two variables from a coefficient list
    monos = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (1, 2)]
    return Poly({m: v for m, v in zip(monos, c)}, 2)


@settings(max_examples=60, deadline=None)
@given(small_coeffs, small_coeffs)
def test_integration_by_parts(a, b):
    f, g = _poly2(a), _poly2(b)
    lhs = (f * GF.ou_apply(g)).gaussian_moment()
    rhs = -GF.carre_du_champ(f, g).gaussian_moment()
    assert lhs == rhs


@settings(max_examples=60, deadline=None)
@given(small_coeffs)
def test_eigenvalue_means_exact_equation(c):
    f = _poly2(c)
    lam = GF.eigen_check(f)
    if lam is not None:
        assert (GF.ou_apply(f) + lam * f).is_zero()


def test_fisher_u_pairs_stable_across_seeds():
    a = GF.fisher_U_bound(PAIRS5, samples=1_000_000, seed=0)
    b = GF.fisher_U_bound(PAIRS5, samples=1_000_000, seed=1)
    assert not a.flagged and not b.flagged
    assert abs(a.value - b.value) <= 3 * math.hypot(a.std_error, b.std_error)


def test_fisher_u_single_pair_is_flagged():
    est = GF.fisher_U_bound(["x1*x2"], samples=200_000, seed=0)
    assert est.flagged
