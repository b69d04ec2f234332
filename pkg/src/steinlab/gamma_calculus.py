"""Carre du champ and its iterates for one-dimensional diffusions
L f = a f'' + b f', with samplers that try to falsify curvature conditions.

Polynomial inputs (``Poly`` with integer or ``Fraction`` coefficients) are
handled exactly. Non-polynomial coefficients or test functions go through
sympy expressions in the symbol ``x``, which keeps every derivative exact too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy

from .poly import Poly, parse_poly

X = sympy.Symbol("x", real=True)
Expr = Union[Poly, sympy.Expr]
SLACK_THRESHOLD = -1e-9


@dataclass(frozen=True)
class Diffusion1D:
    """Generator L f = a f'' + b f' on ``support``."""

    a: Expr
    b: Expr
    support: Tuple[float, float]
    name: str = "diffusion"
    grid: Tuple[float, ...] = ()

    def point_grid(self) -> np.ndarray:
        if self.grid:
            return np.asarray(self.grid, dtype=float)
        lo, hi = self.support
        lo = lo if math.isfinite(lo) else -8.0
        hi = hi if math.isfinite(hi) else 8.0
        return np.linspace(lo, hi, 321)


def ou() -> Diffusion1D:
    return Diffusion1D(Poly.constant(1), Poly.from_coeffs([0, -1]), (-math.inf, math.inf), "ou",
                       tuple(np.linspace(-8, 8, 321)))


def laguerre(p) -> Diffusion1D:
    p = Fraction(p).limit_denominator(10 ** 9) if not isinstance(p, Fraction) else p
    if p <= 0:
        raise ValueError("Laguerre generator needs p > 0")
    return Diffusion1D(Poly.from_coeffs([0, 1]), Poly.from_coeffs([p, -1]), (0.0, math.inf),
                       f"laguerre(p={p})", tuple(np.linspace(0, 40, 401)))


def jacobi() -> Diffusion1D:
    return Diffusion1D(Poly.from_coeffs([1, 0, -1]), Poly.from_coeffs([0, -2]), (-1.0, 1.0),
                       "jacobi", tuple(np.linspace(-1, 1, 201)))


def log_concave(potential: Expr) -> Diffusion1D:
    """a = 1, b = -u' for the invariant density e^{-u}."""
    if isinstance(potential, str):
        potential = parse_poly(potential)
    du = _diff(potential)
    return Diffusion1D(_const(1, potential), -du, (-math.inf, math.inf), "log_concave",
                       tuple(potential_grid(potential)))


# ---------------------------------------------------------------------------
# algebra shared by Poly and sympy


def _is_poly(e) -> bool:
    return isinstance(e, Poly)


def _const(c, like):
    return Poly.constant(c) if _is_poly(like) else sympy.Integer(c)


def _diff(e: Expr, order: int = 1) -> Expr:
    if _is_poly(e):
        if e.nvars != 1:
            raise ValueError("one-dimensional calculus needs univariate polynomials")
        return e.diff(0, order)
    if isinstance(e, sympy.Expr):
        return sympy.diff(e, X, order)
    raise TypeError("test functions must be Poly or sympy expressions in x; "
                    "plain callables have no exact derivatives")


def to_sympy(e: Expr) -> sympy.Expr:
    if isinstance(e, sympy.Expr):
        return e
    if isinstance(e, (int, Fraction)):
        return sympy.Rational(e)
    if _is_poly(e):
        out = sympy.Integer(0)
        for (k,), c in e.terms.items():
            coeff = sympy.Rational(c) if isinstance(c, (int, Fraction)) else sympy.Float(c)
            out += coeff * X ** k
        return out
    raise TypeError(f"cannot convert {type(e).__name__}")


def _align(diff: Diffusion1D, *fs):
    """Put the coefficients and functions in one algebra (sympy if any is sympy)."""
    items = (diff.a, diff.b) + fs
    if all(_is_poly(e) for e in items):
        return items
    return tuple(to_sympy(e) for e in items)


def _simplify(e):
    return sympy.expand(e) if isinstance(e, sympy.Expr) else e


def generator(diff: Diffusion1D, f: Expr) -> Expr:
    a, b, f = _align(diff, f)
    return _simplify(a * _diff(f, 2) + b * _diff(f))


def carre_du_champ(diff: Diffusion1D, f: Expr, g: Expr | None = None) -> Expr:
    """Gamma(f, g) = a f' g'."""
    g = f if g is None else g
    a, b, f, g = _align(diff, f, g)
    return _simplify(a * _diff(f) * _diff(g))


def iterated_gamma(diff: Diffusion1D, n: int, f: Expr, g: Expr | None = None) -> Expr:
    """Gamma_n(f, g) = 1/2 [L Gamma_{n-1}(f, g) - Gamma_{n-1}(f, L g) - Gamma_{n-1}(g, L f)],
    starting from Gamma_0(f, g) = f g."""
    if n not in (0, 1, 2, 3) and not (isinstance(n, int) and n >= 0):
        raise ValueError("n must be a non-negative integer")
    g = f if g is None else g
    a, b, f, g = _align(diff, f, g)
    work = Diffusion1D(a, b, diff.support, diff.name)
    return _gamma_n(work, n, f, g)


def _gamma_n(diff: Diffusion1D, n: int, f, g):
    if n == 0:
        return _simplify(f * g)
    if n == 1:
        return _simplify(diff.a * _diff(f) * _diff(g))
    lf = generator(diff, f)
    lg = generator(diff, g)
    prev = _gamma_n(diff, n - 1, f, g)
    half = Fraction(1, 2) if _is_poly(prev) else sympy.Rational(1, 2)
    out = (generator(diff, prev) - _gamma_n(diff, n - 1, f, lg) - _gamma_n(diff, n - 1, g, lf))
    return _simplify(out * half)


def evaluate(e: Expr, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if _is_poly(e):
        return e(x)
    fn = sympy.lambdify(X, e, "numpy")
    return np.broadcast_to(np.asarray(fn(x), dtype=float), x.shape).copy()


# closed forms used as cross-checks

def ou_gamma2_closed_form(f: Poly) -> Poly:
    return _diff(f, 2) ** 2 + _diff(f) ** 2


def ou_gamma3_closed_form(f: Poly) -> Poly:
    d = ou()
    return _diff(f, 3) ** 2 + 3 * iterated_gamma(d, 2, f) - 2 * iterated_gamma(d, 1, f)


def jacobi_factorization_residual(f: Poly) -> Poly:
    """Gamma_3 - Gamma_2 minus its sum-of-squares factorization; the zero polynomial."""
    d = jacobi()
    x = Poly.from_coeffs([0, 1])
    w = Poly.from_coeffs([1, 0, -1])
    f1, f2, f3 = _diff(f), _diff(f, 2), _diff(f, 3)
    squares = (w * f3 - 3 * x * f2 - f1) ** 2 + (f1 + x * f2) ** 2 + 2 * f2 ** 2
    return iterated_gamma(d, 3, f) - iterated_gamma(d, 2, f) - w * squares


# ---------------------------------------------------------------------------
# curvature criteria by sampling


@dataclass
class CriterionReport:
    criterion: str
    min_slack: float
    argmin_f: List[float]
    argmin_x: float
    min_eigenvalue: float
    passed: bool

    def to_json(self) -> dict:
        return {"criterion": self.criterion, "min_slack": self.min_slack,
                "argmin_f": list(self.argmin_f), "argmin_x": self.argmin_x,
                "min_eigenvalue": self.min_eigenvalue, "passed": self.passed}


@dataclass
class CriteriaReport:
    diffusion: str
    constants: Tuple[float, float, float]
    criteria: List[CriterionReport]
    draws: int
    seed: int

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def to_json(self) -> dict:
        return {"diffusion": self.diffusion, "constants": list(self.constants),
                "draws": self.draws, "seed": self.seed, "passed": self.passed,
                "criteria": [c.to_json() for c in self.criteria]}


def _form_matrices(diff: Diffusion1D, basis: Sequence[Poly], x: np.ndarray):
    """Gamma_n(e_i, e_j) for n = 1, 2, 3 and (a e_i'')(a e_j'') evaluated on x."""
    k = len(basis)
    out = np.zeros((4, x.size, k, k))
    for i in range(k):
        for j in range(i, k):
            vals = [evaluate(iterated_gamma(diff, n, basis[i], basis[j]), x) for n in (1, 2, 3)]
            a, _, hi, hj = _align(diff, _diff(basis[i], 2), _diff(basis[j], 2))
            hess = _simplify(a * a * hi * hj)
            vals.append(evaluate(hess, x))
            for m, v in enumerate(vals):
                out[m, :, i, j] = out[m, :, j, i] = v
    return out


def check_criteria(diff: Diffusion1D, rho: float, kappa: float, sigma: float,
                   test_set: Sequence[Sequence[float]] | None = None,
                   point_grid: Sequence[float] | None = None, draws: int = 1000,
                   degree: int = 4, seed: int = 0) -> CriteriaReport:
    """Minimal slacks of Gamma_2 >= rho Gamma, Gamma_3 >= kappa Gamma_2 and
    Gamma_2 >= sigma (a f'')^2 over test polynomials and grid points.

    ``test_set`` holds ascending coefficient vectors; by default ``draws``
    random polynomials of degree at most ``degree`` with coefficients uniform in
    [-1, 1]. Every form is also checked through the smallest eigenvalue of its
    matrix on the monomial basis, which covers all polynomials of that degree.
    """
    x = np.asarray(diff.point_grid() if point_grid is None else point_grid, dtype=float)
    if test_set is None:
        rng = np.random.default_rng(seed)
        coeffs = rng.uniform(-1, 1, size=(draws, degree + 1))
    else:
        coeffs = np.array([list(c) + [0.0] * (degree + 1 - len(c)) for c in test_set], dtype=float)
        degree = coeffs.shape[1] - 1
    basis = [Poly.from_coeffs([0] * k + [1]) for k in range(degree + 1)]
    g1, g2, g3, hs = _form_matrices(diff, basis, x)
    forms = {
        "gamma2>=rho*gamma": g2 - rho * g1,
        "gamma3>=kappa*gamma2": g3 - kappa * g2,
        "gamma2>=sigma*hess": g2 - sigma * hs,
    }
    reports = []
    for name, m in forms.items():
        vals = np.einsum("fi,xij,fj->fx", coeffs, m, coeffs)
        k = np.unravel_index(np.argmin(vals), vals.shape)
        min_slack = float(vals[k])
        # constants drop out of every form, so use the non-constant monomials,
        # scaled by the Gamma_2 diagonal so that the eigenvalue is relative
        sub = m[:, 1:, 1:]
        scale = np.sqrt(np.einsum("xii->xi", g2[:, 1:, 1:]) + 1e-300)
        eig = float(np.min(np.linalg.eigvalsh(sub / scale[:, :, None] / scale[:, None, :])))
        reports.append(CriterionReport(name, min_slack, [float(c) for c in coeffs[k[0]]],
                                       float(x[k[1]]), eig, min_slack >= SLACK_THRESHOLD))
    return CriteriaReport(diff.name, (rho, kappa, sigma), reports, int(coeffs.shape[0]), seed)


# ---------------------------------------------------------------------------
# sufficient conditions for log-concave references


def potential_grid(u: Expr, points: int = 2001) -> np.ndarray:
    """Symmetric grid reaching where u exceeds its minimum by 72, the
    Gaussian analogue of twelve standard deviations."""
    r = 1.0
    xs = np.linspace(-50, 50, 20001)
    umin = float(np.min(evaluate(u, xs)))
    while r < 1e6:
        ends = evaluate(u, np.array([-r, r]))
        if np.all(ends - umin >= 72.0):
            break
        r *= 2
    return np.linspace(-r, r, points)


@dataclass
class LogConcaveReport:
    c: float
    slacks: Dict[str, float]
    worst_points: Dict[str, float]
    passed: bool
    grid_radius: float

    def to_json(self) -> dict:
        return {"c": self.c, "passed": self.passed, "slacks": self.slacks,
                "worst_points": self.worst_points, "grid_radius": self.grid_radius}


def log_concave_expressions(u: Expr, c) -> Dict[str, Expr]:
    """The three pointwise conditions as expressions that must be nonnegative."""
    if isinstance(u, str):
        u = parse_poly(u)
    if _is_poly(u):
        c = Fraction(c).limit_denominator(10 ** 12) if isinstance(c, float) else c
    else:
        c = sympy.nsimplify(c)
    d1, d2, d3, d4 = (_diff(u, k) for k in (1, 2, 3, 4))
    e = d4 - d1 * d3 + 2 * d2 * d2 - 6 * c * d2
    return {
        "u''>=c": _simplify(d2 - c),
        "curvature": _simplify(e),
        "mixed": _simplify(2 * (d2 - c) * e - 3 * d3 * d3),
    }


def log_concave_conditions(u: Expr, c: float, grid: Sequence[float] | None = None
                           ) -> LogConcaveReport:
    if isinstance(u, str):
        u = parse_poly(u)
    x = np.asarray(potential_grid(u) if grid is None else grid, dtype=float)
    slacks, worst = {}, {}
    for name, e in log_concave_expressions(u, c).items():
        vals = evaluate(e, x)
        k = int(np.argmin(vals))
        slacks[name] = float(vals[k])
        worst[name] = float(x[k])
    passed = all(v >= SLACK_THRESHOLD for v in slacks.values())
    return LogConcaveReport(float(c), slacks, worst, passed, float(np.max(np.abs(x))))
