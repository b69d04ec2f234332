import math

import numpy as np
import pytest
from scipy import special

from steinlab.quadrature import (adaptive, gauss_hermite, gaussian_expectation, gaussian_quantile,
                                 invert_monotone, panel_nodes)


@pytest.mark.parametrize("f, expected", [
    (lambda x: x * x, 1.0),
    (lambda x: x ** 4, 3.0),
    (lambda x: np.cos(x), math.exp(-0.5)),
])
def test_smooth_gaussian_expectations_by_hermite(f, expected):
    assert gaussian_expectation(f) == pytest.approx(expected, rel=1e-12)


def test_abs_moment_by_adaptive_with_kink():
    phi = lambda x: np.abs(x) * np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    res = adaptive(phi, -12, 12, points=[0.0])
    assert res.converged
    assert res.value == pytest.approx(math.sqrt(2 / math.pi), rel=1e-12)
    assert res.error < 1e-10


def test_adaptive_is_bit_deterministic():
    f = lambda x: np.exp(-x * x) * np.cos(3 * x)
    a = adaptive(f, -10, 10)
    b = adaptive(f, -10, 10)
    assert a.value == b.value and a.error == b.error


def test_panel_nodes_integrate_polynomials_exactly():
    x, w = panel_nodes(np.array([0.0, 0.5, 2.0]), order=6)
    assert np.sum(w * x ** 7) == pytest.approx(2.0 ** 8 / 8, rel=1e-13)


def test_hermite_weights_are_a_probability():
    _, w = gauss_hermite(64)
    assert np.sum(w) == pytest.approx(1.0, rel=1e-13)


@pytest.mark.parametrize("u, expected", [(0.5, 0.0), (0.975, 1.959963984540054)])
def test_normal_quantile(u, expected):
    assert gaussian_quantile(u) == pytest.approx(expected, abs=1e-12)


def test_exponential_quantile_matches_inverse():
    u = np.array([0.01, 0.3, 0.9, 0.999])
    cdf = lambda x: -np.expm1(-x)
    x = invert_monotone(cdf, u, 0.0, 50.0, derivative=lambda x: np.exp(-x))
    assert np.allclose(x, -np.log1p(-u), rtol=1e-12)


def test_quantile_roundtrip_on_percentiles():
    u = np.arange(1, 100) / 100
    assert np.max(np.abs(special.ndtr(gaussian_quantile(u)) - u)) < 1e-12


def test_bracketing_failure_reported():
    with pytest.raises(ValueError, match="bracketing"):
        invert_monotone(lambda x: np.tanh(x), [2.0], -5, 5)
