"""Reference measures and centered target densities on the line.

Every measure works in log-space: ``logpdf`` and ``score`` (the derivative of
the log-density) are the primitive callables, so tails far below the
underflow threshold of the density itself stay usable.

A reference carries the diffusion coefficient ``a`` and drift ``b`` of its
generator ``L f = a f'' + b f'``. A target is centered with respect to its
reference when ``E_nu[b] = 0``; for the standard Gaussian that is mean zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from .poly import Poly, parse_poly
from .quadrature import Cumulative, TRUNCATION_SIGMAS, adaptive, invert_monotone

ArrayFn = Callable[[np.ndarray], np.ndarray]
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
# tail criterion for window search: pdf(R) * R^2 below this fraction of the peak
_TAIL_EPS = 1e-17
_MAX_RADIUS = 1e12


def _arr(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _expand_window(logpdf: ArrayFn, center: float, scale: float, direction: int,
                   log_peak: float, power: float = 2.0,
                   eps: float = _TAIL_EPS) -> Tuple[float, bool]:
    """Walk outward from ``center`` until pdf(R)*|R|^power is negligible.

    Returns the radius edge and whether the criterion was met before the
    hard limit. ``power=1`` tests normalizability, ``power=2`` a finite mean.
    """
    r = TRUNCATION_SIGMAS * scale
    while r < _MAX_RADIUS:
        x = center + direction * r
        lp = float(logpdf(np.array([x]))[0])
        if lp + power * math.log(abs(x) + scale) < log_peak + math.log(eps):
            return x, True
        r *= 2.0
    return center + direction * r, False


# ---------------------------------------------------------------------------
# reference measures


class ReferenceMeasure:
    """Base class. Subclasses fill in the log-density, CDF and generator."""

    kind: str = ""
    dimension: int = 1
    support: Tuple[float, float] = (-math.inf, math.inf)

    def logpdf(self, x):
        raise NotImplementedError

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def score(self, x):
        raise NotImplementedError

    def diffusion(self, x):
        raise NotImplementedError

    def drift(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        raise NotImplementedError

    def ppf(self, u):
        raise NotImplementedError

    def isf(self, s):
        raise NotImplementedError

    @property
    def mean(self) -> float:
        raise NotImplementedError

    @property
    def std(self) -> float:
        raise NotImplementedError

    @property
    def drift_root(self) -> float:
        """Point where the drift vanishes; kernels split their tail sums here."""
        return self.mean

    def window(self) -> Tuple[float, float]:
        lo, hi = self.support
        r = TRUNCATION_SIGMAS * self.std
        return (lo if math.isfinite(lo) else self.mean - r,
                hi if math.isfinite(hi) else self.mean + r)

    def curvature(self) -> Optional[Tuple[float, float, float]]:
        """Constants (rho, kappa, sigma) for the general-reference bounds."""
        return None

    def describe(self) -> dict:
        return {"kind": self.kind}

    def as_target(self) -> "TargetDensity":
        """The reference viewed as a target against itself."""
        return TargetDensity(
            logpdf=self.logpdf, score=self.score, support=self.support, reference=self,
            tag=f"reference:{self.kind}", params=self.describe(), scale=self.std,
            center_point=self.mean, kernel=self.diffusion, kernel_provenance="constant"
            if self.kind == "gaussian" else "closed_form_1d",
            cdf=self.cdf, sf=self.sf, ppf=self.ppf, isf=self.isf,
        )

    def check_quantiles(self, levels: Sequence[float] | None = None) -> float:
        """max |ppf(cdf(x)) - x| over percentile points; used by the test-suite."""
        u = np.linspace(0.01, 0.99, 99) if levels is None else np.asarray(levels)
        x = np.where(u <= 0.5, self.ppf(u), self.isf(1 - u))
        back = np.where(u <= 0.5, self.cdf(x), 1 - self.sf(x))
        return float(np.max(np.abs(back - u)))


@dataclass(frozen=True, eq=False)
class GaussianReference(ReferenceMeasure):
    """Centered Gaussian with variance ``variance`` (the standard one by default)."""

    variance: float = 1.0
    kind: str = field(default="gaussian", init=False)
    support: Tuple[float, float] = field(default=(-math.inf, math.inf), init=False)

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError("Gaussian variance must be positive")

    def logpdf(self, x):
        x = _arr(x)
        return -0.5 * x * x / self.variance - LOG_SQRT_2PI - 0.5 * math.log(self.variance)

    def score(self, x):
        return -_arr(x) / self.variance

    def diffusion(self, x):
        return np.full_like(_arr(x), self.variance)

    def drift(self, x):
        return -_arr(x)

    def cdf(self, x):
        return special.ndtr(_arr(x) / self.std)

    def sf(self, x):
        return special.ndtr(-_arr(x) / self.std)

    def ppf(self, u):
        return self.std * special.ndtri(_arr(u))

    def isf(self, s):
        return -self.std * special.ndtri(_arr(s))

    @property
    def mean(self):
        return 0.0

    @property
    def std(self):
        return math.sqrt(self.variance)

    def curvature(self):
        return (1.0, 1.0, 1.0) if self.variance == 1.0 else None

    def describe(self):
        return {"kind": self.kind, "variance": self.variance}


@dataclass(frozen=True, eq=False)
class GammaReference(ReferenceMeasure):
    """Gamma(p) law on (0, inf) with Laguerre generator a = x, b = p - x."""

    shape: float = 1.0
    kind: str = field(default="gamma_product", init=False)
    support: Tuple[float, float] = field(default=(0.0, math.inf), init=False)

    def __post_init__(self):
        if not self.shape > 0:
            raise ValueError("gamma shape must be positive")

    def logpdf(self, x):
        x = _arr(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (self.shape - 1) * np.log(x) - x - special.gammaln(self.shape)
        return np.where(x > 0, out, -np.inf)

    def score(self, x):
        x = _arr(x)
        return (self.shape - 1) / x - 1.0

    def diffusion(self, x):
        return _arr(x).copy()

    def drift(self, x):
        return self.shape - _arr(x)

    def cdf(self, x):
        return special.gammainc(self.shape, np.maximum(_arr(x), 0.0))

    def sf(self, x):
        return special.gammaincc(self.shape, np.maximum(_arr(x), 0.0))

    def ppf(self, u):
        return special.gammaincinv(self.shape, _arr(u))

    def isf(self, s):
        return special.gammainccinv(self.shape, _arr(s))

    @property
    def mean(self):
        return float(self.shape)

    @property
    def std(self):
        return math.sqrt(self.shape)

    def window(self):
        hi, _ = _expand_window(self.logpdf, self.shape, self.std, +1,
                               float(self.logpdf(np.array([max(self.shape - 1, 1e-3)]))[0]))
        return (0.0, hi)

    def curvature(self):
        """(1/2, 1/2, 1/2) once p >= 1 in one dimension. Below that the Hessian
        condition only holds with sigma = 1 - 1/(2p), which vanishes at p = 1/2."""
        p = self.shape
        if p >= 1:
            return (0.5, 0.5, 0.5)
        if p > 0.5:
            return (0.5, 0.5, 1.0 - 0.5 / p)
        return None

    def describe(self):
        return {"kind": self.kind, "shape": self.shape}


@dataclass(frozen=True, eq=False)
class JacobiReference(ReferenceMeasure):
    """Uniform law on [-1, 1] with Jacobi generator a = 1 - x^2, b = -2x."""

    kind: str = field(default="uniform_jacobi", init=False)
    support: Tuple[float, float] = field(default=(-1.0, 1.0), init=False)

    def logpdf(self, x):
        x = _arr(x)
        return np.where(np.abs(x) <= 1, -math.log(2.0), -np.inf)

    def score(self, x):
        return np.zeros_like(_arr(x))

    def diffusion(self, x):
        x = _arr(x)
        return 1.0 - x * x

    def drift(self, x):
        return -2.0 * _arr(x)

    def cdf(self, x):
        return np.clip((_arr(x) + 1) / 2, 0.0, 1.0)

    def sf(self, x):
        return np.clip((1 - _arr(x)) / 2, 0.0, 1.0)

    def ppf(self, u):
        return 2 * _arr(u) - 1

    def isf(self, s):
        return 1 - 2 * _arr(s)

    @property
    def mean(self):
        return 0.0

    @property
    def std(self):
        return 1.0 / math.sqrt(3.0)

    def window(self):
        return (-1.0, 1.0)

    def curvature(self):
        return (1.0, 1.0, 0.5)

    def describe(self):
        return {"kind": self.kind}


class LogConcaveReference(ReferenceMeasure):
    """Law with density proportional to exp(-u) for a polynomial potential u.

    The generator is L f = f'' - u' f'. ``c`` is the claimed lower bound on u''
    used for the curvature constants (c, 3c, 1); those constants are only
    handed out after the sufficient conditions have been checked.
    """

    kind = "log_concave"
    support = (-math.inf, math.inf)

    def __init__(self, potential: Poly | str, c: float):
        if isinstance(potential, str):
            potential = parse_poly(potential, 1)
        if potential.nvars != 1:
            raise ValueError("potential must be univariate")
        if potential.degree < 2 or potential.univariate_coeffs()[-1] <= 0 or potential.degree % 2:
            raise ValueError("potential must grow to +inf on both sides")
        if not c > 0:
            raise ValueError("curvature bound c must be positive")
        self.potential = potential
        self.c = float(c)
        self._du = potential.diff()
        self._d2u = self._du.diff()
        xs = np.linspace(-50, 50, 200001)
        self._mode = float(xs[np.argmin(potential(xs))])
        lo, hi = self._search_window()
        self._lo, self._hi = lo, hi
        u0 = float(potential(self._mode))
        res = adaptive(lambda x: np.exp(-(potential(x) - u0)), lo, hi, [self._mode], rel_tol=1e-13)
        self._log_norm = u0 - math.log(res.value)
        self._cum = Cumulative(self.pdf, lo, hi, [self._mode])
        self._mean = adaptive(lambda x: x * self.pdf(x), lo, hi, [self._mode], rel_tol=1e-13).value
        var = adaptive(lambda x: (x - self._mean) ** 2 * self.pdf(x), lo, hi, [self._mode]).value
        self._std = math.sqrt(var)
        self._checked: Optional[bool] = None

    def _search_window(self):
        u = self.potential
        u0 = float(u(self._mode))
        out = []
        for direction in (-1, 1):
            r = 1.0
            while True:
                x = self._mode + direction * r
                if float(u(x)) - u0 > 80.0:
                    out.append(x)
                    break
                r *= 1.5
        return out[0], out[1]

    def logpdf(self, x):
        return -self.potential(_arr(x)) + self._log_norm

    def score(self, x):
        return -self._du(_arr(x))

    def diffusion(self, x):
        return np.ones_like(_arr(x))

    def drift(self, x):
        return -self._du(_arr(x))

    def cdf(self, x):
        return self._cum.left(x)

    def sf(self, x):
        return self._cum.right(x)

    def ppf(self, u):
        return invert_monotone(self.cdf, u, self._lo, self._hi, derivative=self.pdf)

    def isf(self, s):
        return invert_monotone(self.sf, s, self._lo, self._hi, increasing=False,
                               derivative=lambda x: -self.pdf(x))

    @property
    def mean(self):
        return self._mean

    @property
    def std(self):
        return self._std

    @property
    def drift_root(self):
        return self._mode

    def window(self):
        return (self._lo, self._hi)

    def conditions_hold(self) -> bool:
        if self._checked is None:
            from .gamma_calculus import log_concave_conditions

            self._checked = log_concave_conditions(self.potential, self.c).passed
        return self._checked

    def curvature(self):
        if not self.conditions_hold():
            return None
        return (self.c, 3 * self.c, 1.0)

    def describe(self):
        return {"kind": self.kind, "potential": str(self.potential), "c": self.c}


# ---------------------------------------------------------------------------
# targets


class TargetDensity:
    """A probability density on an interval, paired with a reference measure.

    ``logpdf``/``score`` must be vectorized and normalized. Optional analytic
    pieces (``kernel``, ``cdf`` and friends) are used when present; otherwise
    numerical versions are built on first use.
    """

    def __init__(self, logpdf: ArrayFn, score: ArrayFn, support: Tuple[float, float],
                 reference: ReferenceMeasure, tag: str, params: dict | None = None,
                 scale: float = 1.0, center_point: float = 0.0,
                 kernel: ArrayFn | None = None, kernel_provenance: str | None = None,
                 cdf: ArrayFn | None = None, sf: ArrayFn | None = None,
                 ppf: ArrayFn | None = None, isf: ArrayFn | None = None,
                 features: Sequence[Tuple[float, float]] = (),
                 window: Tuple[float, float] | None = None):
        self._logpdf = logpdf
        self._score = score
        self.support = (float(support[0]), float(support[1]))
        self.reference = reference
        self.tag = tag
        self.params = dict(params or {})
        self.scale = float(scale)
        self.center_point = float(center_point)
        self.kernel = kernel
        self.kernel_provenance = kernel_provenance
        self._cdf, self._sf, self._ppf, self._isf = cdf, sf, ppf, isf
        self.features = tuple((float(c), float(w)) for c, w in features)
        self._window = window
        self.dimension = 1

    # density
    def logpdf(self, x):
        x = _arr(x)
        lo, hi = self.support
        inside = (x > lo) & (x < hi)
        if np.all(inside):
            return self._logpdf(x)
        out = np.full(x.shape, -np.inf)
        if np.any(inside):
            out[inside] = self._logpdf(x[inside])
        return out

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def score(self, x):
        return self._score(_arr(x))

    def log_relative(self, x):
        """log h = log(rho / reference density)."""
        return self.logpdf(x) - self.reference.logpdf(x)

    def relative_density(self, x):
        return np.exp(self.log_relative(x))

    # integration support
    def window(self) -> Tuple[float, float]:
        if self._window is None:
            self._window = self._find_window(power=2.0)
        return self._window

    def _find_window(self, power: float, eps: float = _TAIL_EPS) -> Tuple[float, float]:
        lo, hi = self.support
        probe = self.center_point + self.scale * np.linspace(-3, 3, 61)
        probe = probe[(probe > lo) & (probe < hi)]
        if probe.size == 0:
            probe = np.array([0.5 * (lo + hi)])
        log_peak = float(np.max(self._logpdf(probe)))
        edges = []
        for end, direction in ((lo, -1), (hi, +1)):
            if math.isfinite(end):
                edges.append(end)
                continue
            x, ok = _expand_window(self._logpdf, self.center_point, self.scale, direction,
                                   log_peak, power, eps)
            if not ok:
                what = "normalizable" if power <= 1 else "of finite mean"
                raise ValueError(f"{self.tag}: density tail too heavy to be {what}")
            edges.append(x)
        return edges[0], edges[1]

    def points(self) -> list:
        """Breakpoints that let adaptive quadrature see every feature."""
        lo, hi = self.window()
        pts = {self.center_point}
        r = self.scale / 4
        while r < max(hi - self.center_point, self.center_point - lo):
            pts.update({self.center_point - r, self.center_point + r})
            r *= 2
        for c, w in self.features:
            for k in (0.0, 0.25, 1.0, 4.0, 16.0):
                pts.update({c - k * w, c + k * w})
        for end in self.support:
            if math.isfinite(end):
                pts.add(end)
        return sorted(p for p in pts if lo < p < hi)

    def integrate(self, g: ArrayFn, rel_tol: float = 1e-11, abs_tol: float = 1e-15):
        lo, hi = self.window()
        return adaptive(g, lo, hi, self.points(), rel_tol=rel_tol, abs_tol=abs_tol)

    def expect(self, g: ArrayFn, **kw) -> float:
        return self.integrate(lambda x: g(x) * self.pdf(x), **kw).value

    # distribution functions
    @cached_property
    def _cumulative(self) -> Cumulative:
        lo, hi = self.window()
        return Cumulative(self.pdf, lo, hi, self.points())

    def cdf(self, x):
        return self._cdf(_arr(x)) if self._cdf else self._cumulative.left(x)

    def sf(self, x):
        return self._sf(_arr(x)) if self._sf else self._cumulative.right(x)

    def _bracket(self):
        lo, hi = self.window()
        return lo, hi

    def ppf(self, u):
        if self._ppf:
            return self._ppf(_arr(u))
        lo, hi = self._bracket()
        return invert_monotone(self.cdf, u, lo, hi, derivative=self.pdf)

    def isf(self, s):
        if self._isf:
            return self._isf(_arr(s))
        lo, hi = self._bracket()
        return invert_monotone(self.sf, s, lo, hi, increasing=False,
                               derivative=lambda x: -self.pdf(x))

    # moments
    def mean(self) -> float:
        return self.expect(lambda x: x)

    def drift_mean(self) -> float:
        """E_nu[b]; zero exactly when the target is centered for its reference."""
        return self.expect(self.reference.drift)

    def total_mass(self) -> float:
        return self.integrate(self.pdf).value

    def with_reference(self, reference: ReferenceMeasure) -> "TargetDensity":
        if not (reference.support[0] <= self.support[0] and self.support[1] <= reference.support[1]):
            raise ValueError("target support must lie inside the reference support")
        twin = TargetDensity(self._logpdf, self._score, self.support, reference, self.tag,
                             self.params, self.scale, self.center_point, self.kernel,
                             self.kernel_provenance, self._cdf, self._sf, self._ppf, self._isf,
                             self.features, self._window)
        if reference.kind != "gaussian":
            # kernels depend on the generator drift; only Gaussian references share one
            twin.kernel = None
            twin.kernel_provenance = None
        return twin

    def describe(self) -> dict:
        return {"family": self.tag, **self.params}

    def __repr__(self):
        return f"TargetDensity({self.tag}, {self.params})"


# ---------------------------------------------------------------------------
# families

STANDARD_GAUSSIAN = GaussianReference()


def gaussian_scale(variance: float, reference: ReferenceMeasure = STANDARD_GAUSSIAN) -> TargetDensity:
    if not variance > 0:
        raise ValueError("variance must be positive")
    v = float(variance)
    sd = math.sqrt(v)
    return TargetDensity(
        logpdf=lambda x: -0.5 * x * x / v - LOG_SQRT_2PI - 0.5 * math.log(v),
        score=lambda x: -x / v,
        support=(-math.inf, math.inf), reference=reference, tag="gaussian_scale",
        params={"variance": v}, scale=sd,
        kernel=lambda x: np.full_like(_arr(x), v), kernel_provenance="constant",
        cdf=lambda x: special.ndtr(x / sd), sf=lambda x: special.ndtr(-x / sd),
        ppf=lambda u: sd * special.ndtri(u), isf=lambda s: -sd * special.ndtri(s),
        window=(-TRUNCATION_SIGMAS * sd, TRUNCATION_SIGMAS * sd),
    )


def centered_gamma(shape: float, reference: ReferenceMeasure = STANDARD_GAUSSIAN) -> TargetDensity:
    """Gamma(p) shifted by -p, so mean zero and variance p."""
    p = float(shape)
    if not p > 0:
        raise ValueError("gamma shape must be positive")
    lg = special.gammaln(p)

    def logpdf(x):
        z = x + p
        return (p - 1) * np.log(z) - z - lg

    return TargetDensity(
        logpdf=logpdf, score=lambda x: (p - 1) / (x + p) - 1.0,
        support=(-p, math.inf), reference=reference, tag="centered_gamma",
        params={"shape": p}, scale=math.sqrt(p),
        kernel=lambda x: _arr(x) + p, kernel_provenance="pearson_quadratic",
        cdf=lambda x: special.gammainc(p, np.maximum(x + p, 0)),
        sf=lambda x: special.gammaincc(p, np.maximum(x + p, 0)),
        ppf=lambda u: special.gammaincinv(p, u) - p,
        isf=lambda s: special.gammainccinv(p, s) - p,
    )


def uniform(half_width: float = math.sqrt(3.0),
            reference: ReferenceMeasure = STANDARD_GAUSSIAN) -> TargetDensity:
    """Uniform law on [-w, w]; the default width gives unit variance."""
    w = float(half_width)
    if not w > 0:
        raise ValueError("half width must be positive")
    return TargetDensity(
        logpdf=lambda x: np.full_like(x, -math.log(2 * w)), score=lambda x: np.zeros_like(x),
        support=(-w, w), reference=reference, tag="uniform", params={"half_width": w},
        scale=w / math.sqrt(3.0),
        kernel=lambda x: 0.5 * (w * w - _arr(x) ** 2), kernel_provenance="pearson_quadratic",
        cdf=lambda x: np.clip((x + w) / (2 * w), 0, 1), sf=lambda x: np.clip((w - x) / (2 * w), 0, 1),
        ppf=lambda u: (2 * u - 1) * w, isf=lambda s: (1 - 2 * s) * w,
    )


def default_mixture_weight(n: float) -> float:
    return float(n) ** -0.5


def mixture(n: float, a: float | None = None,
            reference: ReferenceMeasure = STANDARD_GAUSSIAN) -> TargetDensity:
    """(1-a) N(0,1) + a N(0, 1/n^2): a standard Gaussian with a narrow spike."""
    n = float(n)
    a = default_mixture_weight(n) if a is None else float(a)
    if not 0 <= a <= 1:
        raise ValueError("mixture weight must lie in [0, 1]")
    if not n > 0:
        raise ValueError("spike parameter n must be positive")
    la = math.log(a) if a > 0 else -np.inf
    l1a = math.log1p(-a) if a < 1 else -np.inf
    ln = math.log(n)

    def parts(x):
        # log of each component density
        g = -0.5 * x * x - LOG_SQRT_2PI + l1a
        s = -0.5 * (n * x) ** 2 - LOG_SQRT_2PI + la + ln
        return g, s

    def logpdf(x):
        g, s = parts(x)
        return np.logaddexp(g, s)

    def weights(x):
        g, s = parts(x)
        top = np.maximum(g, s)
        wg, ws = np.exp(g - top), np.exp(s - top)
        tot = wg + ws
        return wg / tot, ws / tot

    def score(x):
        wg, ws = weights(x)
        return -x * (wg + n * n * ws)

    def kernel(x):
        x = _arr(x)
        wg, ws = weights(x)
        return wg + ws / (n * n)

    return TargetDensity(
        logpdf=logpdf, score=score, support=(-math.inf, math.inf), reference=reference,
        tag="mixture", params={"n": n, "a": a}, scale=1.0,
        kernel=kernel, kernel_provenance="closed_form_1d",
        cdf=lambda x: (1 - a) * special.ndtr(x) + a * special.ndtr(n * x),
        sf=lambda x: (1 - a) * special.ndtr(-x) + a * special.ndtr(-n * x),
        features=[(0.0, 1.0 / n)],
        window=(-TRUNCATION_SIGMAS, TRUNCATION_SIGMAS),
    )


def student_like(alpha: float, reference: ReferenceMeasure = STANDARD_GAUSSIAN) -> TargetDensity:
    """Density proportional to (1 + x^2)^(-alpha); needs alpha > 1 for a mean."""
    al = float(alpha)
    if not al > 0.5:
        raise ValueError("(1+x^2)^(-alpha) is not normalizable for alpha <= 1/2")
    if not al > 1:
        raise ValueError("(1+x^2)^(-alpha) has no mean for alpha <= 1; cannot center")
    log_norm = 0.5 * math.log(math.pi) + special.gammaln(al - 0.5) - special.gammaln(al)
    dof = 2 * al - 1
    rt = math.sqrt(dof)
    scale = 1.0 / math.sqrt(2 * al - 3) if al > 1.5 else 1.0
    return TargetDensity(
        logpdf=lambda x: -al * np.log1p(x * x) - log_norm,
        score=lambda x: -2 * al * x / (1 + x * x),
        support=(-math.inf, math.inf), reference=reference, tag="student_like",
        params={"alpha": al}, scale=scale,
        kernel=lambda x: (1 + _arr(x) ** 2) / (2 * al - 2), kernel_provenance="pearson_quadratic",
        cdf=lambda x: special.stdtr(dof, x * rt), sf=lambda x: special.stdtr(dof, -x * rt),
        ppf=lambda u: special.stdtrit(dof, u) / rt, isf=lambda s: -special.stdtrit(dof, s) / rt,
    )


def from_unnormalized(log_density: ArrayFn, score: ArrayFn, support: Tuple[float, float],
                      reference: ReferenceMeasure = STANDARD_GAUSSIAN, tag: str = "custom",
                      params: dict | None = None, scale: float = 1.0, center_point: float = 0.0,
                      features: Sequence[Tuple[float, float]] = ()) -> TargetDensity:
    """Normalize ``exp(log_density)`` numerically on ``support``."""
    raw = TargetDensity(log_density, score, support, reference, tag, params, scale,
                        center_point, features=features)
    try:
        raw._window = raw._find_window(power=2.0)
    except ValueError:
        # no finite mean; a looser window still normalizes (center() will refuse it)
        raw._window = raw._find_window(power=1.0, eps=1e-9)
    lo, hi = raw.window()
    probe = np.linspace(lo, hi, 4097)[1:-1]
    shift = float(np.max(raw.logpdf(probe)))
    res = adaptive(lambda x: np.exp(raw.logpdf(x) - shift), lo, hi, raw.points(), rel_tol=1e-13)
    if not res.converged or not math.isfinite(res.value) or res.value <= 0:
        raise ValueError(f"{tag}: normalizing integral did not converge")
    log_norm = shift + math.log(res.value)
    return TargetDensity(lambda x: log_density(x) - log_norm, score, support, reference, tag,
                         params, scale, center_point, features=features, window=raw._window)


def center(target: TargetDensity, tol: float = 1e-12) -> TargetDensity:
    """Shift a target so its mean is zero (Gaussian references only)."""
    if target.reference.kind != "gaussian":
        raise ValueError("shift-centering only applies to Gaussian references; "
                         "use tilted() for other references")
    try:
        target._find_window(power=2.0)
    except ValueError as exc:
        raise ValueError(f"{target.tag}: mean integral does not converge") from exc
    m = target.mean()
    if abs(m) <= tol * max(1.0, target.scale):
        return target
    lp, sc = target._logpdf, target._score
    lo, hi = target.support
    wlo, whi = target.window()
    shifted = TargetDensity(
        logpdf=lambda x: lp(x + m), score=lambda x: sc(x + m), support=(lo - m, hi - m),
        reference=target.reference, tag=target.tag, params={**target.params, "shift": -m},
        scale=target.scale, center_point=target.center_point - m,
        features=[(c - m, w) for c, w in target.features], window=(wlo - m, whi - m),
    )
    return shifted


def custom(density: ArrayFn, support: Tuple[float, float] = (-math.inf, math.inf),
           derivative: ArrayFn | None = None, reference: ReferenceMeasure = STANDARD_GAUSSIAN,
           scale: float = 1.0, features: Sequence[Tuple[float, float]] = ()) -> TargetDensity:
    """User density (need not be normalized or centered); derivative by central differences if absent."""

    def log_density(x):
        with np.errstate(divide="ignore"):
            return np.log(density(x))

    if derivative is None:
        def score(x):
            h = 1e-6 * (1 + np.abs(x))
            return (density(x + h) - density(x - h)) / (2 * h) / density(x)
    else:
        def score(x):
            return derivative(x) / density(x)

    t = from_unnormalized(log_density, score, support, reference, "custom", {}, scale, 0.0, features)
    return center(t)


# Pearson family ------------------------------------------------------------


@dataclass(frozen=True)
class PearsonParams:
    a0: float
    a1: float
    b0: float
    b1: float
    b2: float
    support: Tuple[float, float] = (-math.inf, math.inf)

    @classmethod
    def from_kernel(cls, alpha: float, beta: float, gamma: float,
                    support: Tuple[float, float] = (-math.inf, math.inf)) -> "PearsonParams":
        """Parameters whose centered solution has kernel alpha x^2 + beta x + gamma."""
        return cls(beta, 2 * alpha + 1, gamma, beta, alpha, support)

    def kernel_coefficients(self) -> Tuple[float, float, float]:
        """(alpha, beta, gamma) read off the parameters; checks consistency."""
        alpha, beta, gamma = self.b2, self.b1, self.b0
        if not (math.isclose(self.a0, beta, abs_tol=1e-14) and
                math.isclose(self.a1, 2 * alpha + 1, abs_tol=1e-14)):
            raise ValueError("parameters do not satisfy a0 = b1 and a1 = 2 b2 + 1; "
                             "they are not the Pearson form of a centered density")
        return alpha, beta, gamma


def _pearson_log_density(prm: PearsonParams) -> ArrayFn:
    """Antiderivative of -(a0 + a1 x)/(b0 + b1 x + b2 x^2) in closed form."""
    a0, a1, b0, b1, b2 = prm.a0, prm.a1, prm.b0, prm.b1, prm.b2
    if b2 == 0 and b1 == 0:
        if b0 == 0:
            raise ValueError("degenerate Pearson denominator")
        return lambda x: -(a0 * x + 0.5 * a1 * x * x) / b0
    if b2 == 0:
        k = a0 - a1 * b0 / b1
        return lambda x: -(a1 * x / b1 + k / b1 * np.log(np.abs(b0 + b1 * x)))
    lead = a1 / (2 * b2)
    rest = a0 - a1 * b1 / (2 * b2)
    disc = b1 * b1 - 4 * b2 * b0
    if disc < 0:
        r = math.sqrt(-disc)
        inv = lambda x: (2 / r) * np.arctan((2 * b2 * x + b1) / r)
    elif disc > 0:
        r = math.sqrt(disc)
        inv = lambda x: (1 / r) * np.log(np.abs((2 * b2 * x + b1 - r) / (2 * b2 * x + b1 + r)))
    else:
        inv = lambda x: -2 / (2 * b2 * x + b1)
    return lambda x: -(lead * np.log(np.abs(b0 + b1 * x + b2 * x * x)) + rest * inv(x))


def pearson_density(prm: PearsonParams, reference: ReferenceMeasure = STANDARD_GAUSSIAN,
                    scale: float = 1.0) -> TargetDensity:
    """Centered density solving rho'/rho = -(a0 + a1 x)/(b0 + b1 x + b2 x^2)."""
    lo, hi = prm.support
    q = lambda x: prm.b0 + prm.b1 * x + prm.b2 * x * x
    probe = np.linspace(max(lo, -50.0), min(hi, 50.0), 2001)[1:-1]
    if np.any(q(probe) <= 0):
        raise ValueError("Pearson denominator must stay positive inside the support")
    logd = _pearson_log_density(prm)
    score = lambda x: -(prm.a0 + prm.a1 * x) / q(x)
    params = {"a0": prm.a0, "a1": prm.a1, "b0": prm.b0, "b1": prm.b1, "b2": prm.b2,
              "support": [lo, hi]}
    try:
        t = from_unnormalized(logd, score, prm.support, reference, "pearson", params, scale)
    except ValueError as exc:
        raise ValueError(f"Pearson solution is not normalizable: {exc}") from exc
    t = center(t)
    return t


# references with perturbed targets -------------------------------------


def scaled_gamma(shape: float, reference: GammaReference) -> TargetDensity:
    """Gamma(k) rescaled to the reference mean p, a centered target for the Laguerre generator.

    Its kernel is theta * x with theta = p / k.
    """
    k = float(shape)
    p = reference.shape
    theta = p / k
    lg = special.gammaln(k)

    def logpdf(x):
        return (k - 1) * np.log(x / theta) - x / theta - lg - math.log(theta)

    return TargetDensity(
        logpdf=logpdf, score=lambda x: (k - 1) / x - 1 / theta, support=(0.0, math.inf),
        reference=reference, tag="scaled_gamma", params={"shape": k, "scale": theta},
        scale=math.sqrt(k) * theta, center_point=p,
        kernel=lambda x: theta * _arr(x), kernel_provenance="closed_form_1d",
        cdf=lambda x: special.gammainc(k, np.maximum(x, 0) / theta),
        sf=lambda x: special.gammaincc(k, np.maximum(x, 0) / theta),
        ppf=lambda u: theta * special.gammaincinv(k, u),
        isf=lambda s: theta * special.gammainccinv(k, s),
    )


def _default_correction(reference: ReferenceMeasure):
    if reference.kind == "gamma_product":
        return (lambda x: np.exp(-x), lambda x: -np.exp(-x))
    if reference.kind == "uniform_jacobi":
        return (lambda x: x ** 3, lambda x: 3 * x ** 2)
    return (lambda x: x ** 3 * np.exp(-0.5 * x * x / 4),
            lambda x: (3 * x ** 2 - x ** 4 / 4) * np.exp(-0.5 * x * x / 4))


def tilted(reference: ReferenceMeasure, tilt: ArrayFn, tilt_derivative: ArrayFn,
           strength: float, correction: Tuple[ArrayFn, ArrayFn] | None = None,
           tag: str = "tilted") -> TargetDensity:
    """Target with relative density h = c0 + strength * tilt + c1 * correction.

    c0 and c1 are solved from E_mu[h] = 1 and E_mu[b h] = 0, so the result is a
    probability that is centered for the reference generator. Raises when h
    fails to stay positive.
    """
    psi, dpsi = correction or _default_correction(reference)
    lo, hi = reference.window()
    pts = [reference.mean, reference.drift_root]
    mu = lambda g: adaptive(lambda x: g(x) * reference.pdf(x), lo, hi, pts, rel_tol=1e-13).value
    b = reference.drift
    e_t, e_psi = mu(tilt), mu(psi)
    e_bt, e_bpsi = mu(lambda x: b(x) * tilt(x)), mu(lambda x: b(x) * psi(x))
    e_b = mu(b)
    # c0 + s e_t + c1 e_psi = 1 ; c0 e_b + s e_bt + c1 e_bpsi = 0
    mat = np.array([[1.0, e_psi], [e_b, e_bpsi]])
    rhs = np.array([1.0 - strength * e_t, -strength * e_bt])
    c0, c1 = np.linalg.solve(mat, rhs)
    h = lambda x: c0 + strength * tilt(x) + c1 * psi(x)
    dh = lambda x: strength * tilt_derivative(x) + c1 * dpsi(x)
    grid = np.linspace(lo, hi, 20001)
    if np.min(h(grid)) <= 0:
        raise ValueError("tilted relative density is not positive on the support")
    params = {"strength": strength, "c0": float(c0), "c1": float(c1)}
    return TargetDensity(
        logpdf=lambda x: reference.logpdf(x) + np.log(h(x)),
        score=lambda x: reference.score(x) + dh(x) / h(x),
        support=reference.support, reference=reference, tag=tag, params=params,
        scale=reference.std, center_point=reference.mean, window=reference.window(),
    )


def tilted_gamma(reference: GammaReference, strength: float = 0.2) -> TargetDensity:
    """h proportional to 1 + strength (x - p)/p, recentered by an exp(-x) correction."""
    p = reference.shape
    return tilted(reference, lambda x: (x - p) / p, lambda x: np.full_like(x, 1 / p), strength,
                  tag="tilted_gamma")


def tilted_uniform(reference: JacobiReference | None = None, strength: float = 0.3) -> TargetDensity:
    """h proportional to 1 + strength x on [-1, 1], recentered by a cubic correction."""
    reference = reference or JacobiReference()
    return tilted(reference, lambda x: x, lambda x: np.ones_like(x), strength,
                  tag="tilted_uniform")


# descriptor parsing ---------------------------------------------------------

FAMILIES = ("gaussian-scale", "centered-gamma", "uniform", "pearson", "mixture",
            "student-like", "scaled-gamma", "tilted-gamma", "tilted-uniform", "reference")


def parse_reference(text: str | None) -> ReferenceMeasure:
    """``gaussian``, ``gaussian:2``, ``gamma:3``, ``uniform``, ``log-concave:<u>;<c>``."""
    if not text or text == "gaussian":
        return STANDARD_GAUSSIAN
    name, _, arg = text.partition(":")
    if name == "gaussian":
        return GaussianReference(float(arg))
    if name == "gamma":
        return GammaReference(float(arg))
    if name in ("uniform", "jacobi"):
        return JacobiReference()
    if name == "log-concave":
        u, _, c = arg.rpartition(";")
        return LogConcaveReference(u, float(c))
    raise ValueError(f"unknown reference {text!r}")


def make_target(descriptor, reference: ReferenceMeasure | None = None) -> TargetDensity:
    """Build a target from a descriptor.

    ``descriptor`` is either a string ``family:arg1,arg2`` (e.g. ``gaussian-scale:2``,
    ``mixture:10,0.1``, ``pearson:a0,a1,b0,b1,b2[,lo,hi]``) or a mapping with a
    ``family`` key and named parameters.
    """
    if isinstance(descriptor, dict):
        descriptor = dict(descriptor)
        family = descriptor.pop("family").replace("_", "-")
        args = descriptor
    else:
        family, _, argtext = str(descriptor).partition(":")
        family = family.replace("_", "-")
        args = [float(v) for v in argtext.split(",")] if argtext else []
    ref = reference or STANDARD_GAUSSIAN

    def get(i, name, default=None):
        if isinstance(args, dict):
            return args.get(name, default)
        return args[i] if i < len(args) else default

    if family == "gaussian-scale":
        return gaussian_scale(get(0, "variance", 1.0), ref)
    if family == "centered-gamma":
        return centered_gamma(get(0, "shape"), ref)
    if family == "uniform":
        return uniform(get(0, "half_width", math.sqrt(3.0)), ref)
    if family == "mixture":
        return mixture(get(0, "n"), get(1, "a"), ref)
    if family == "student-like":
        return student_like(get(0, "alpha"), ref)
    if family == "pearson":
        names = ["a0", "a1", "b0", "b1", "b2"]
        vals = [get(i, k) for i, k in enumerate(names)]
        if isinstance(args, dict):
            support = tuple(args.get("support", (-math.inf, math.inf)))
        else:
            support = (get(5, "lo", -math.inf), get(6, "hi", math.inf))
        return pearson_density(PearsonParams(*vals, support=support), ref)
    if family == "scaled-gamma":
        if not isinstance(ref, GammaReference):
            raise ValueError("scaled-gamma needs a gamma reference")
        return scaled_gamma(get(0, "shape"), ref)
    if family == "tilted-gamma":
        if not isinstance(ref, GammaReference):
            raise ValueError("tilted-gamma needs a gamma reference")
        return tilted_gamma(ref, get(0, "strength", 0.2))
    if family == "tilted-uniform":
        if not isinstance(ref, JacobiReference):
            raise ValueError("tilted-uniform needs the uniform reference")
        return tilted_uniform(ref, get(0, "strength", 0.3))
    if family == "reference":
        return ref.as_target()
    raise ValueError(f"unknown target family {family!r}; known: {', '.join(FAMILIES)}")
