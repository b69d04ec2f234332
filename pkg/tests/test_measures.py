import math

import numpy as np
import pytest
from scipy import special, stats

from steinlab import measures as M


BUILT_IN = [
    ("gaussian-scale:2", None),
    ("centered-gamma:1", None),
    ("centered-gamma:3", None),
    ("uniform", None),
    ("mixture:10,0.1", None),
    ("student-like:3", None),
    ("scaled-gamma:2.5", "gamma:3"),
    ("tilted-gamma:0.2", "gamma:3"),
    ("tilted-uniform:0.3", "uniform"),
]


@pytest.mark.parametrize("descriptor, ref", BUILT_IN)
def test_normalized_and_centered(descriptor, ref):
    t = M.make_target(descriptor, M.parse_reference(ref))
    assert abs(t.total_mass() - 1) < 1e-8
    if t.reference.kind == "gaussian":
        assert abs(t.mean()) < 1e-8
    else:
        assert abs(t.drift_mean()) < 1e-8


def test_centered_gamma_one_is_shifted_exponential():
    t = M.centered_gamma(1)
    x = np.array([-0.5, 0.0, 2.0])
    assert np.allclose(t.pdf(x), np.exp(-(x + 1)), rtol=1e-13)
    assert t.support == (-1.0, math.inf)


def test_mixture_formula():
    n, a = 10.0, 0.1
    t = M.mixture(n, a)
    x = np.linspace(-3, 3, 13)
    expected = ((1 - a) * np.exp(-x * x / 2) + n * a * np.exp(-n * n * x * x / 2)) / math.sqrt(2 * math.pi)
    assert np.allclose(t.pdf(x), expected, rtol=1e-13)


@pytest.mark.parametrize("x", [0.0, 1.0])
def test_mixture_close_to_gaussian_for_small_weight(x):
    n, a = 50.0, 1e-3
    gap = abs(M.mixture(n, a).pdf(np.array([x]))[0] - stats.norm.pdf(x))
    assert gap <= a * (n * math.exp(-n * n * x * x / 2) + 1) / math.sqrt(2 * math.pi)


@pytest.mark.parametrize("bad", ["gaussian-scale:0", "gaussian-scale:-1", "mixture:10,1.5",
                                 "mixture:10,-0.1"])
def test_invalid_descriptors(bad):
    with pytest.raises(ValueError):
        M.make_target(bad)


def test_center_shifts_gamma():
    def logd(x):
        return np.where(x > 0, 2 * np.log(np.maximum(x, 1e-300)) - x - math.log(2), -np.inf)
    raw = M.from_unnormalized(logd, lambda x: 2 / x - 1, (0.0, math.inf), M.STANDARD_GAUSSIAN,
                              "gamma3")
    t = M.center(raw)
    assert abs(t.mean()) < 1e-8
    assert t.support[0] == pytest.approx(-3.0, abs=1e-8)


def test_center_rejects_density_without_mean():
    with pytest.raises(ValueError):
        M.custom(lambda x: 1 / (1 + x * x))


def test_pearson_gamma_member_matches_shifted_gamma():
    p = 3.0
    prm = M.PearsonParams.from_kernel(0.0, 1.0, p, support=(-p, math.inf))
    t = M.pearson_density(prm)
    x = np.array([-2.0, 0.0, 1.5, 6.0])
    assert np.allclose(t.pdf(x), M.centered_gamma(p).pdf(x), rtol=1e-8)


def test_pearson_student_member_is_symmetric():
    # rho proportional to (1 + x^2)^-3 has kernel (1 + x^2) / 4
    t = M.pearson_density(M.PearsonParams.from_kernel(0.25, 0.0, 0.25))
    x = np.linspace(0, 5, 6)
    assert np.allclose(t.pdf(x), t.pdf(-x), rtol=1e-10)
    assert abs(t.mean()) < 1e-8


@pytest.mark.parametrize("ref", [M.STANDARD_GAUSSIAN, M.GammaReference(1.5), M.JacobiReference()])
def test_reference_quantiles_invert_cdf(ref):
    assert ref.check_quantiles() < 1e-10


def test_gamma_reference_curvature_depends_on_shape():
    assert M.GammaReference(3).curvature() == (0.5, 0.5, 0.5)
    rho, kappa, sigma = M.GammaReference(0.75).curvature()
    assert sigma == pytest.approx(1 - 0.5 / 0.75)
    assert M.GammaReference(0.5).curvature() is None
