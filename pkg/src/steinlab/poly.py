"""Sparse multivariate polynomials with exact or floating coefficients.

Coefficients are plain Python numbers. Integer and ``Fraction`` coefficients
stay exact under every operation here; a single float coefficient makes the
affected terms floating. Exponents are tuples of length ``nvars``.
"""

from __future__ import annotations

import re
from fractions import Fraction
from numbers import Number
from typing import Dict, Iterable, Tuple

import numpy as np

Exponent = Tuple[int, ...]


def _clean(c):
    if isinstance(c, Fraction) and c.denominator == 1:
        return int(c.numerator)
    return c


class Poly:
    """Polynomial in ``nvars`` variables stored as ``{exponent: coefficient}``."""

    __slots__ = ("nvars", "terms")

    def __init__(self, terms: Dict[Exponent, Number] | None = None, nvars: int = 1):
        self.nvars = int(nvars)
        self.terms: Dict[Exponent, Number] = {}
        for exp, c in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != self.nvars:
                raise ValueError(f"exponent {exp} does not have {self.nvars} entries")
            if c != 0:
                self.terms[exp] = self.terms.get(exp, 0) + c
        self.terms = {e: _clean(c) for e, c in self.terms.items() if c != 0}

    # construction helpers
    @classmethod
    def constant(cls, c, nvars: int = 1) -> "Poly":
        return cls({(0,) * nvars: c}, nvars)

    @classmethod
    def var(cls, i: int, nvars: int = 1) -> "Poly":
        """The coordinate function ``x_{i+1}`` (zero-based index ``i``)."""
        exp = [0] * nvars
        exp[i] = 1
        return cls({tuple(exp): 1}, nvars)

    @classmethod
    def from_coeffs(cls, coeffs: Iterable[Number]) -> "Poly":
        """Univariate polynomial from ascending coefficients."""
        return cls({(k,): c for k, c in enumerate(coeffs)}, 1)

    def coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                return other.extend(self.nvars) if other.nvars < self.nvars else other
            return other
        if isinstance(other, Number):
            return Poly.constant(other, self.nvars)
        return NotImplemented

    def extend(self, nvars: int) -> "Poly":
        if nvars < self.nvars:
            raise ValueError("cannot drop variables")
        pad = (0,) * (nvars - self.nvars)
        return Poly({e + pad: c for e, c in self.terms.items()}, nvars)

    # arithmetic
    def __add__(self, other):
        other = self.coerce(other)
        if other is NotImplemented:
            return other
        n = max(self.nvars, other.nvars)
        a, b = self.extend(n), other.extend(n)
        out = dict(a.terms)
        for e, c in b.terms.items():
            out[e] = out.get(e, 0) + c
        return Poly(out, n)

    __radd__ = __add__

    def __neg__(self):
        return Poly({e: -c for e, c in self.terms.items()}, self.nvars)

    def __sub__(self, other):
        other = self.coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self.coerce(other)
        if other is NotImplemented:
            return other
        n = max(self.nvars, other.nvars)
        a, b = self.extend(n), other.extend(n)
        out: Dict[Exponent, Number] = {}
        for e1, c1 in a.terms.items():
            for e2, c2 in b.terms.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return Poly(out, n)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Number):
            return NotImplemented
        if isinstance(other, int):
            other = Fraction(other)
        return Poly({e: c / other for e, c in self.terms.items()}, self.nvars)

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers")
        out = Poly.constant(1, self.nvars)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        other = self.coerce(other)
        if other is NotImplemented:
            return False
        n = max(self.nvars, other.nvars)
        return self.extend(n).terms == other.extend(n).terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def isclose(self, other, rtol: float = 1e-12, atol: float = 1e-12) -> bool:
        other = self.coerce(other)
        diff = self - other
        scale = max([abs(float(c)) for c in self.terms.values()] + [1.0])
        return all(abs(float(c)) <= atol + rtol * scale for c in diff.terms.values())

    # calculus
    def diff(self, i: int = 0, order: int = 1) -> "Poly":
        p = self
        for _ in range(order):
            out = {}
            for e, c in p.terms.items():
                if e[i] == 0:
                    continue
                e2 = list(e)
                e2[i] -= 1
                out[tuple(e2)] = out.get(tuple(e2), 0) + c * e[i]
            p = Poly(out, p.nvars)
        return p

    def gradient(self):
        return [self.diff(i) for i in range(self.nvars)]

    # queries
    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def is_exact(self) -> bool:
        return all(isinstance(c, (int, Fraction)) for c in self.terms.values())

    def coefficient(self, exp: Exponent):
        return self.terms.get(tuple(exp), 0)

    def univariate_coeffs(self) -> list:
        if self.nvars != 1:
            raise ValueError("not univariate")
        out = [0] * (self.degree + 1)
        for (k,), c in self.terms.items():
            out[k] = c
        return out

    def __call__(self, *args):
        """Evaluate. Univariate: ``p(x)``; multivariate: ``p(array[..., nvars])``."""
        if self.nvars == 1:
            x = args[0]
            if isinstance(x, (int, Fraction)):
                return sum((c * x ** e[0] for e, c in self.terms.items()), 0)
            x = np.asarray(x, dtype=float)
            out = np.zeros_like(x)
            for (k,), c in self.terms.items():
                out = out + float(c) * x ** k
            return out
        return self.evaluate(args[0])

    def evaluate(self, points) -> np.ndarray:
        """Evaluate at rows of ``points`` with shape ``(m, nvars)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[-1] != self.nvars:
            raise ValueError(f"expected {self.nvars} columns, got {pts.shape[-1]}")
        maxdeg = max((max(e) for e in self.terms), default=0)
        powers = [np.ones_like(pts)]
        for _ in range(maxdeg):
            powers.append(powers[-1] * pts)
        out = np.zeros(pts.shape[:-1])
        for e, c in self.terms.items():
            term = np.full(pts.shape[:-1], float(c))
            for i, k in enumerate(e):
                if k:
                    term = term * powers[k][..., i]
            out += term
        return out

    def gaussian_moment(self):
        """E[p(Z)] for a standard Gaussian vector Z, using double factorials."""
        total = 0
        for e, c in self.terms.items():
            m = 1
            for k in e:
                if k % 2:
                    m = 0
                    break
                m *= _double_factorial(k - 1)
            total += c * m
        return total

    def __repr__(self):
        return f"Poly({format_poly(self)!r}, nvars={self.nvars})"

    def __str__(self):
        return format_poly(self)


def _double_factorial(k: int) -> int:
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def format_poly(p: Poly) -> str:
    if p.is_zero():
        return "0"
    names = ["x"] if p.nvars == 1 else [f"x{i + 1}" for i in range(p.nvars)]
    parts = []
    for e in sorted(p.terms, key=lambda e: (-sum(e), tuple(-k for k in e))):
        c = p.terms[e]
        mono = "*".join(
            names[i] + (f"^{k}" if k > 1 else "") for i, k in enumerate(e) if k
        )
        sign = "-" if c < 0 else "+"
        mag = -c if c < 0 else c
        if mono and mag == 1:
            body = mono
        elif mono:
            body = f"{mag}*{mono}"
        else:
            body = f"{mag}"
        parts.append((sign, body))
    first_sign, first = parts[0]
    text = ("-" if first_sign == "-" else "") + first
    for sign, body in parts[1:]:
        text += f" {sign} {body}"
    return text


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<var>x\d*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse polynomial near {text[pos:]!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind)))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return tokens


def parse_poly(text: str, nvars: int | None = None) -> Poly:
    """Parse strings such as ``3*x1^2*x4 - 1.5*x2``.

    A bare ``x`` means ``x1``. Decimal literals become exact fractions.
    ``nvars`` defaults to the largest variable index present.
    """
    tokens = _tokenize(text)
    indices = [1 if v == "x" else int(v[1:]) for k, v in tokens if k == "var"]
    if any(i < 1 for i in indices):
        raise ValueError("variables are numbered from x1")
    n = max(indices, default=1)
    if nvars is not None:
        if nvars < n:
            raise ValueError(f"polynomial uses x{n} but nvars={nvars}")
        n = nvars
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else (None, None)

    def take(expected=None):
        nonlocal pos
        tok = peek()
        if tok[0] is None or (expected and tok[1] != expected):
            raise ValueError(f"expected {expected or 'token'} in {text!r}")
        pos += 1
        return tok

    def expr():
        sign = 1
        if peek()[1] in "+-" and peek()[0] == "op":
            sign = -1 if take()[1] == "-" else 1
        out = term() * sign
        while peek()[0] == "op" and peek()[1] in ("+", "-"):
            op = take()[1]
            t = term()
            out = out + t if op == "+" else out - t
        return out

    def term():
        out = power()
        while peek()[0] == "op" and peek()[1] in ("*", "/"):
            op = take()[1]
            if op == "*":
                out = out * power()
            else:
                den = power()
                if den.degree != 0 or den.is_zero():
                    raise ValueError("division only by non-zero constants")
                out = out / den.coefficient((0,) * n)
        return out

    def power():
        base = atom()
        if peek() == ("op", "^"):
            take()
            kind, val = take()
            if kind != "num" or not val.isdigit():
                raise ValueError("exponents must be non-negative integers")
            base = base ** int(val)
        return base

    def atom():
        kind, val = peek()
        if kind == "num":
            take()
            return Poly.constant(_clean(Fraction(val)), n)
        if kind == "var":
            take()
            idx = 1 if val == "x" else int(val[1:])
            return Poly.var(idx - 1, n)
        if val == "(":
            take()
            out = expr()
            take(")")
            return out
        if val == "-":
            take()
            return -power()
        raise ValueError(f"unexpected token {val!r} in {text!r}")

    result = expr()
    if pos != len(tokens):
        raise ValueError(f"trailing input in {text!r}")
    return result
