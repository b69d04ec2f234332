import math

import pytest
from hypothesis import given, settings, strategies as st

from steinlab import inequalities as Q
from steinlab import measures as M

GAUSS = M.STANDARD_GAUSSIAN.as_target()
N2 = M.gaussian_scale(2.0)
H_N2 = 0.5 * (1 - math.log(2))
W_N2 = math.sqrt(2) - 1


def test_hsi_on_reference_uses_convention():
    r = Q.verify("hsi", GAUSS)
    assert r.holds and r.rhs == 0 and "S=0" in r.conventions


def test_hsi_gaussian_scale():
    r = Q.verify("hsi", N2)
    assert r.lhs == pytest.approx(H_N2, rel=1e-9)
    assert r.rhs == pytest.approx(0.5 * math.log(1.5), rel=1e-9)
    assert r.holds and r.slack == pytest.approx(r.rhs - r.lhs)


def test_hsi_improved_is_equality_for_n2():
    r = Q.verify("hsi_improved", N2)
    assert r.rhs == pytest.approx(H_N2, rel=1e-8)
    assert r.holds


def test_wsh_gaussian_scale():
    r = Q.verify("wsh", N2)
    assert r.lhs == pytest.approx(W_N2, rel=1e-9)
    assert r.rhs == pytest.approx(math.acos(math.exp(-H_N2)), rel=1e-9)
    assert r.rhs <= math.sqrt(2 * H_N2)


def test_hwi_gaussian_scale():
    r = Q.verify("hwi", N2)
    assert r.rhs == pytest.approx(W_N2 * math.sqrt(0.5) - 0.5 * W_N2 ** 2, rel=1e-9)
    assert r.holds


def test_wp_for_shifted_exponential():
    r = Q.verify("wp", M.centered_gamma(1), p=1)
    assert r.rhs == pytest.approx(math.sqrt(2 / math.pi) * 2 / math.e, rel=1e-8)
    assert r.holds


def test_entropy_decay_gaussian():
    r = Q.verify("entropy_decay", N2, t=0.5)
    v = 1 + math.exp(-1)
    assert r.lhs == pytest.approx(0.5 * (v - 1 - math.log(v)), rel=1e-8)
    assert r.holds


def test_hsi_cov_against_own_covariance():
    r = Q.verify("hsi_cov", N2, covariance=2.0)
    assert r.lhs == pytest.approx(0, abs=1e-12) and r.holds


def test_unknown_kind_rejected():
    with pytest.raises(ValueError, match="unknown"):
        Q.verify("nonsense", N2)


def test_diverged_fisher_covered_by_convention():
    r = Q.verify("hsi", M.centered_gamma(1))
    assert r.holds and "I=inf" in r.conventions


@pytest.mark.parametrize("v", [1.5, 2.0, 4.0])
def test_improved_below_plain_hsi(v):
    t = M.gaussian_scale(v)
    assert Q.verify("hsi_improved", t).rhs <= Q.verify("hsi", t).rhs + 1e-12


def test_report_json_is_plain():
    d = Q.verify("hsi", M.centered_gamma(1)).to_json()
    assert d["rhs"] == "inf" and d["holds"] is True


def test_general_hsi_reference_target():
    ref = M.GammaReference(1.5)
    r = Q.verify_general_hsi(ref.as_target())
    assert r.lhs == pytest.approx(0, abs=1e-12) and r.rhs == 0 and r.holds


@pytest.mark.parametrize("target", [
    M.tilted_gamma(M.GammaReference(3.0), 0.2),
    M.tilted_uniform(M.JacobiReference(), 0.3),
])
def test_general_hsi_perturbed_targets(target):
    r = Q.verify_general_hsi(target)
    assert r.holds and r.slack > 0


def test_general_hsi_rejects_uncertified_constants():
    target = M.tilted_gamma(M.GammaReference(3.0), 0.2)
    with pytest.raises(ValueError, match="not certified"):
        Q.verify_general_hsi(target, rho=1.0, kappa=1.0, sigma=1.0)


def test_general_hsi_rejects_gamma_shape_half():
    target = M.GammaReference(0.5).as_target()
    with pytest.raises(ValueError, match="p > 1/2"):
        Q.verify_general_hsi(target)


def test_phi_minimum_gaussian_scale():
    m = Q.hwsi_phi_min(N2)
    hwi = Q.verify("hwi", N2).rhs
    hsi = Q.verify("hsi", N2).rhs
    assert m.entropy_bound <= min(hwi, hsi) + 1e-9
    assert m.entropy_bound >= H_N2 - 1e-9


def test_phi_edges_recover_hwi_and_hsi():
    I, S, W = 0.5, 1.0, W_N2
    a = W / math.sqrt(I)
    assert 0.5 * Q.phi_value(a, a, I, S, W) == pytest.approx(W * math.sqrt(I) - 0.5 * W * W)
    a = S * S / (I + S * S)
    assert 0.5 * Q.phi_value(a, 1.0, I, S, W) == pytest.approx(0.5 * S * S * math.log1p(I / S ** 2))


def test_phi_domain_checked():
    with pytest.raises(ValueError):
        Q.hwsi_phi(N2, 0.8, 0.5)


def test_sweep_with_zero_weight_is_reference():
    row = Q.counterexample_sweep([100], schedule=lambda n: 0.0)[0]
    for v in (row.H, row.I, row.S2, row.hwi_rhs, row.hsi_rhs):
        assert abs(v) < 1e-10
    assert row.W2 < 1e-10


def test_sweep_spike_scales():
    row = Q.counterexample_sweep([100], schedule=lambda n: 0.1)[0]
    assert row.S2 <= 0.1
    assert 500 <= row.I <= 2000
    assert row.hsi_rhs <= 0.5 * row.S2 * math.log1p(row.I / row.S2) + 1e-12
    assert row.hwi_holds and row.hsi_holds and row.below_cap


positive = st.floats(1e-6, 1e3, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(positive, positive)
def test_hsi_never_exceeds_lsi(S, I):
    assert Q.hsi_rhs(S, I)[0] <= 0.5 * I * (1 + 1e-12)


@settings(max_examples=200, deadline=None)
@given(positive, positive)
def test_improved_never_exceeds_hsi(S, I):
    assert Q.hsi_improved_rhs(S, I)[0] <= Q.hsi_rhs(S, I)[0] * (1 + 1e-9) + 1e-15


@settings(max_examples=200, deadline=None)
@given(positive, st.floats(0, 50))
def test_wsh_never_exceeds_talagrand(S, H):
    assert Q.wsh_rhs(S, H)[0] <= math.sqrt(2 * H) * (1 + 1e-12) + 1e-15


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_improved_continuous_at_ratio_one(S):
    I = S * S
    inside = Q.hsi_improved_rhs(S, I * (1 + 2e-4))[0]
    at = Q.hsi_improved_rhs(S, I)[0]
    assert at == pytest.approx(inside, rel=1e-3)
