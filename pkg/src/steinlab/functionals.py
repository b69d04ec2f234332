"""Relative entropy, Fisher information, Stein kernels and discrepancies,
Wasserstein and total variation distances for one-dimensional targets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize

from .measures import PearsonParams, ReferenceMeasure, TargetDensity
from .quadrature import Cumulative, adaptive

ArrayFn = Callable[[np.ndarray], np.ndarray]

FISHER_EPSILONS = (1e-4, 1e-6, 1e-8)
DIVERGENCE_THRESHOLD = 1e8
# an extrapolation rate below this is treated as non-convergent
MIN_RATE = 0.1
MIN_DENSITY = 1e-300


@dataclass(frozen=True)
class FunctionalValue:
    kind: str
    value: float
    diverged: bool = False
    error_estimate: float = 0.0

    def __float__(self):
        return float(self.value)

    def to_json(self) -> dict:
        return {"kind": self.kind, "value": _json_float(self.value),
                "diverged": self.diverged, "error_estimate": _json_float(self.error_estimate)}


def _json_float(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return float(v)


def _diverged(kind: str) -> FunctionalValue:
    return FunctionalValue(kind, math.inf, True, math.inf)


def _tail_mass_ok(target: TargetDensity, integrand: ArrayFn, value: float) -> bool:
    """The integrand times the window radius must be negligible at both edges."""
    lo, hi = target.window()
    pts = []
    for end, edge in ((target.support[0], lo), (target.support[1], hi)):
        if not math.isfinite(end):
            pts.append(edge)
    if not pts:
        return True
    pts = np.array(pts)
    g = np.abs(np.asarray(integrand(pts), dtype=float))
    g = g.reshape(len(pts), -1)[:, 0]
    reach = np.abs(pts - target.center_point)
    return bool(np.all(g * reach <= 1e-7 * max(abs(value), 1e-12)))


# ---------------------------------------------------------------------------
# entropy and Fisher information


def _entropy_density(log_h: np.ndarray, log_ref: np.ndarray) -> np.ndarray:
    """ref * (h log h - h + 1) with h = exp(log_h), stable for h near 0, 1 and large."""
    out = np.empty_like(log_h)
    small = np.abs(log_h) < 1e-2
    ls = log_h[small]
    out[small] = np.exp(log_ref[small]) * ls * ls * (0.5 + ls * (1 / 3 + ls * (1 / 8 + ls / 30)))
    big = ~small
    lb = log_h[big]
    with np.errstate(invalid="ignore", over="ignore"):
        val = np.exp(lb + log_ref[big]) * (lb - 1) + np.exp(log_ref[big])
    val = np.where(np.isneginf(lb), np.exp(log_ref[big]), val)
    out[big] = val
    return out


def relative_entropy(target: TargetDensity) -> FunctionalValue:
    """H(nu | mu) = int h log h dmu."""
    ref = target.reference
    lo, hi = target.window()

    def g(x):
        return _entropy_density(target.log_relative(x), ref.logpdf(x))

    res = target.integrate(g)
    # reference mass outside the target window, where h is negligible
    outside = 0.0
    if lo > ref.support[0]:
        outside += float(ref.cdf(np.array([lo]))[0])
    if hi < ref.support[1]:
        outside += float(ref.sf(np.array([hi]))[0])
    value = float(res.value) + outside
    if not (res.converged and math.isfinite(value)) or not _tail_mass_ok(target, g, value):
        return _diverged("H")
    return FunctionalValue("H", max(value, 0.0), False, float(res.error))


def _has_interior_jump(target: TargetDensity) -> bool:
    """True when the density jumps at a support edge lying inside the reference support."""
    ref = target.reference
    lo, hi = target.window()
    probe = np.linspace(lo, hi, 257)[1:-1]
    peak = float(np.max(target.logpdf(probe)))
    for end, side in ((target.support[0], 1), (target.support[1], -1)):
        if not math.isfinite(end):
            continue
        if ref.support[0] < end < ref.support[1]:
            x = end + side * 1e-9 * max(1.0, abs(end), target.scale)
            if float(target.logpdf(np.array([x]))[0]) > peak + math.log(1e-12):
                return True
    return False


def fisher_information(target: TargetDensity) -> FunctionalValue:
    """I(nu | mu) = int a (log h)'^2 dnu, with the epsilon-regularized sequence
    int Gamma(log(h+eps)) (h+eps) dmu used to detect divergence."""
    ref = target.reference
    if _has_interior_jump(target):
        return _diverged("I")
    log_eps = np.log(np.array(FISHER_EPSILONS))

    def g(x):
        lh = target.log_relative(x)
        d = target.score(x) - ref.score(x)
        base = ref.diffusion(x) * d * d * target.pdf(x)
        base = np.where(np.isfinite(base), base, 0.0)
        # h / (h + eps) written as a logistic in log h
        w = 1.0 / (1.0 + np.exp(np.clip(log_eps[None, :] - lh.reshape(-1, 1), -700, 700)))
        stacked = np.concatenate([base.reshape(-1, 1), base.reshape(-1, 1) * w], axis=1)
        return stacked.reshape(x.shape + (4,))

    res = target.integrate(g, rel_tol=1e-11, abs_tol=1e-15)
    vals = np.asarray(res.value, dtype=float)
    errs = np.asarray(res.error, dtype=float)
    i0, i4, i6, i8 = vals
    if not np.all(np.isfinite(vals)) or max(i0, i8) > DIVERGENCE_THRESHOLD:
        return _diverged("I")
    if not _tail_mass_ok(target, lambda x: g(x)[..., 0], i0):
        return _diverged("I")
    d1, d2 = i6 - i4, i8 - i6
    noise = 1e-9 * max(i0, 1e-300) + 10 * float(np.max(errs))
    extrapolated = i8
    if d1 > noise and d2 > noise:
        rate = math.log10(d1 / d2) / 2.0
        if rate < MIN_RATE:
            return _diverged("I")
        extrapolated = i8 + d2 / (100.0 ** rate - 1.0)
    elif d2 > noise >= d1:
        # the gap is opening up as epsilon shrinks
        return _diverged("I")
    if extrapolated > DIVERGENCE_THRESHOLD:
        return _diverged("I")
    if not res.converged:
        return FunctionalValue("I", float(extrapolated), False, abs(extrapolated - i8) + errs[0])
    err = float(errs[0]) + (abs(extrapolated - i0) if d1 > noise else 0.0)
    return FunctionalValue("I", float(max(i0, 0.0)), False, err)


# ---------------------------------------------------------------------------
# Stein kernels


@dataclass(frozen=True)
class SteinKernel:
    """tau(x), scalar in one dimension, relative to ``reference``'s generator."""

    function: ArrayFn
    provenance: str
    reference: ReferenceMeasure

    def __call__(self, x):
        return self.function(np.asarray(x, dtype=float))


class _TailKernel:
    """tau(x) = rho(x)^-1 int_x^hi (-b(y)) rho(y) dy from cumulative panel sums.

    The sum runs from the right for x above the drift root and from the left
    (with a sign flip, using E[b] = 0) below it, so both tails keep full
    relative accuracy. Between grid nodes the partial panel is integrated
    directly instead of interpolated.
    """

    GRID = 2048

    def __init__(self, target: TargetDensity):
        self.target = target
        ref = target.reference
        lo, hi = target.window()
        self.lo, self.hi = lo, hi
        self.split = min(max(ref.drift_root, lo), hi)
        g = lambda y: -ref.drift(y) * target.pdf(y)
        self.g = g
        pts = list(target.points()) + [self.split]
        self.cum = Cumulative(g, lo, hi, pts, rel_tol=1e-13, min_panels=self.GRID)

    def numerator(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.where(x >= self.split, self.cum.right(x), -self.cum.left(x))
        return out.reshape(x.shape)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape
        x = x.ravel()
        logrho = self.target.logpdf(x)
        if np.any(logrho < math.log(MIN_DENSITY)):
            raise ValueError("kernel evaluation outside the usable support (density below 1e-300)")
        inside = (x >= self.lo) & (x <= self.hi)
        out = np.empty_like(x)
        out[inside] = self.numerator(x[inside]) / np.exp(logrho[inside])
        for i in np.flatnonzero(~inside):
            out[i] = self._far(x[i], logrho[i])
        return out.reshape(shape)

    def _far(self, x: float, logrho: float) -> float:
        span = self.hi - self.lo
        ref_drift = self.target.reference.drift
        f = lambda y: -ref_drift(y) * np.exp(self.target.logpdf(y) - logrho)
        if x > self.hi:
            return adaptive(f, x, x + span).value
        return -adaptive(f, x - span, x).value


def stein_kernel_1d(target: TargetDensity, method: str = "auto") -> SteinKernel:
    """Stein kernel of a one-dimensional target.

    ``method="auto"`` uses the family's closed form when it has one;
    ``"tail"`` forces the tail-integral construction.
    """
    if method not in ("auto", "tail"):
        raise ValueError("method must be 'auto' or 'tail'")
    if method == "auto" and target.kernel is not None:
        return SteinKernel(target.kernel, target.kernel_provenance or "closed_form_1d",
                           target.reference)
    return SteinKernel(_TailKernel(target), "closed_form_1d", target.reference)


def stein_kernel_pearson(params: PearsonParams, reference: ReferenceMeasure | None = None) -> SteinKernel:
    """Quadratic kernel alpha x^2 + beta x + gamma of a centered Pearson density."""
    from .measures import STANDARD_GAUSSIAN

    alpha, beta, gamma = params.kernel_coefficients()
    tau = lambda x: alpha * x * x + beta * x + gamma
    lo, hi = params.support
    inner = np.linspace(max(lo, -1e3), min(hi, 1e3), 10001)[1:-1]
    if np.any(tau(inner) <= 0):
        raise ValueError("quadratic kernel is not positive inside the support")
    # divergence of int y / tau(y) dy at each end: automatic at infinite ends
    # (alpha >= 0 there), requires a root of tau at finite ones
    for end in (lo, hi):
        if math.isfinite(end) and abs(tau(end)) > 1e-12 * max(1.0, abs(gamma)):
            raise ValueError(f"int y/tau(y) dy stays finite at the endpoint {end}; "
                             "the kernel need not be quadratic")
    if (not math.isfinite(hi) or not math.isfinite(lo)) and alpha < 0:
        raise ValueError("kernel becomes negative at infinity")
    return SteinKernel(lambda x: tau(np.asarray(x, dtype=float)), "pearson_quadratic",
                       reference or STANDARD_GAUSSIAN)


def kernel_identity_residual(target: TargetDensity, kernel: SteinKernel,
                             degrees: Sequence[int] = (2, 3, 4, 5, 6)) -> float:
    """max over phi = x^k of |E[-b phi'] - E[tau phi'']|; zero for a true kernel."""
    ref = target.reference
    worst = 0.0
    for k in degrees:
        lhs = target.expect(lambda x: -ref.drift(x) * k * x ** (k - 1))
        rhs = target.expect(lambda x: kernel(x) * k * (k - 1) * x ** (k - 2))
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    return worst


# ---------------------------------------------------------------------------
# discrepancies


def stein_discrepancy(target: TargetDensity, kernel: SteinKernel | None = None,
                      p: float = 2.0, norm: str = "hs") -> FunctionalValue:
    """(int |a^-1/2 tau a^-1/2 - 1|^p dnu)^(1/p); the HS and entrywise norms agree in 1D."""
    if p < 1:
        raise ValueError("p must be at least 1")
    if norm not in ("hs", "entrywise"):
        raise ValueError("norm must be 'hs' or 'entrywise'")
    kernel = kernel or stein_kernel_1d(target)
    ref = target.reference
    kind = "S" if p == 2 else "S_p"

    def g(x):
        dev = np.abs(kernel(x) / ref.diffusion(x) - 1.0)
        return dev ** p * target.pdf(x)

    res = target.integrate(g)
    if not (res.converged and math.isfinite(res.value)) or not _tail_mass_ok(target, g, res.value):
        return _diverged(kind)
    moment = max(float(res.value), 0.0)
    value = moment ** (1.0 / p)
    err = (float(res.error) / max(moment, 1e-300)) * value / p if moment > 0 else float(res.error)
    return FunctionalValue(kind, value, False, err)


def discrepancy_decomposition(target: TargetDensity, kernel: SteinKernel | None = None
                              ) -> Tuple[float, float]:
    """(Var_nu(tau), (C - 1)^2) whose sum is S^2 against the standard Gaussian."""
    ref = target.reference
    if ref.kind != "gaussian" or getattr(ref, "variance", 1.0) != 1.0:
        raise ValueError("decomposition is defined against the standard Gaussian")
    kernel = kernel or stein_kernel_1d(target)
    mean_tau = target.expect(kernel)
    second = target.expect(lambda x: x * x)
    var_tau = target.expect(lambda x: (kernel(x) - mean_tau) ** 2)
    if not all(math.isfinite(v) for v in (mean_tau, second, var_tau)):
        raise ValueError("covariance integral diverges")
    return float(var_tau), float((second - 1.0) ** 2)


def kernel_moment(target: TargetDensity, kernel: SteinKernel, p: float) -> float:
    """int |tau - 1|^p dnu, the entrywise quantity in one dimension (no root taken)."""
    return target.expect(lambda x: np.abs(kernel(x) - 1.0) ** p)


# ---------------------------------------------------------------------------
# distances

Measure = Union[TargetDensity, ReferenceMeasure]


def _points(m: Measure) -> list:
    if isinstance(m, TargetDensity):
        return m.points()
    lo, hi = m.window()
    pts = [m.mean + k * m.std for k in (-4, -2, -1, -0.5, 0, 0.5, 1, 2, 4)]
    return [p for p in pts if lo < p < hi]


def wasserstein_p_1d(target: TargetDensity, other: Measure | None = None,
                     p: float = 2.0) -> FunctionalValue:
    """W_p between two laws on the line through the monotone (quantile) coupling.

    Integrates |T(x) - x|^p against ``other`` with T = Q_target o F_other, which
    is the quantile integral after the substitution u = F_other(x). Lower and
    upper halves use the CDF and the survival function respectively, so
    quantiles deep in either tail stay accurate.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    other = other if other is not None else target.reference
    lo, hi = other.window()
    median = float(np.asarray(other.ppf(np.array([0.5])))[0])

    def transport(x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        y = np.empty_like(flat)
        low = flat <= median
        if np.any(low):
            y[low] = target.ppf(other.cdf(flat[low]))
        if np.any(~low):
            y[~low] = target.isf(other.sf(flat[~low]))
        return y.reshape(x.shape)

    def g(x):
        return np.abs(transport(x) - x) ** p * other.pdf(x)

    res = adaptive(g, lo, hi, _points(other) + [median], rel_tol=1e-10, abs_tol=1e-15)
    kind = "W_p"
    if not (res.converged and math.isfinite(res.value)):
        return _diverged(kind)
    moment = max(float(res.value), 0.0)
    value = moment ** (1.0 / p)
    err = (float(res.error) / moment) * value / p if moment > 0 else float(res.error) ** (1 / p)
    return FunctionalValue(kind, value, False, err)


def _crossings(target: TargetDensity, other: Measure, lo: float, hi: float) -> list:
    grid = np.linspace(lo, hi, 8001)[1:-1]
    diff = lambda x: target.logpdf(x) - other.logpdf(x)
    d = diff(grid)
    ok = np.isfinite(d)
    roots = []
    for i in np.flatnonzero(ok[:-1] & ok[1:] & (np.sign(d[:-1]) != np.sign(d[1:]))):
        f = lambda t: float(diff(np.array([t]))[0])
        roots.append(optimize.brentq(f, grid[i], grid[i + 1], xtol=1e-14))
    return roots


def total_variation_1d(target: TargetDensity, other: Measure | None = None) -> FunctionalValue:
    """TV = 1/2 int |rho - rho_other| dx."""
    other = other if other is not None else target.reference
    lo, hi = target.window()
    olo, ohi = other.window()
    a, b = min(lo, olo), max(hi, ohi)

    def g(x):
        lr, lo_ = target.logpdf(x), other.logpdf(x)
        return 0.5 * np.abs(np.exp(lr) - np.exp(lo_))

    pts = sorted(set(target.points()) | set(_points(other)) | set(_crossings(target, other, a, b))
                 | {e for e in (*target.support, *other.support) if math.isfinite(e)})
    res = adaptive(g, a, b, pts, rel_tol=1e-11, abs_tol=1e-15)
    if not res.converged:
        return _diverged("TV")
    return FunctionalValue("TV", float(res.value), False, float(res.error))


# ---------------------------------------------------------------------------
# convenience


@dataclass(frozen=True)
class FunctionalSummary:
    H: FunctionalValue
    I: FunctionalValue
    S: FunctionalValue
    W2: FunctionalValue
    W1: FunctionalValue
    TV: FunctionalValue

    def to_json(self) -> dict:
        return {k: getattr(self, k).to_json() for k in ("H", "I", "S", "W2", "W1", "TV")}


def summarize(target: TargetDensity, kernel: SteinKernel | None = None) -> FunctionalSummary:
    kernel = kernel or stein_kernel_1d(target)
    return FunctionalSummary(
        H=relative_entropy(target), I=fisher_information(target),
        S=stein_discrepancy(target, kernel), W2=wasserstein_p_1d(target, p=2),
        W1=wasserstein_p_1d(target, p=1), TV=total_variation_1d(target),
    )
