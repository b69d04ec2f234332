"""Polynomial functionals of a standard Gaussian vector on R^n.

Generator and carre du champ algebra is exact on ``Poly`` objects. Expectations
of polynomials of total degree up to ``EXACT_MOMENT_DEGREE`` use the closed-form
Gaussian moments; everything else is Monte Carlo with a reported standard error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .functionals import fisher_information, stein_discrepancy, stein_kernel_1d
from .measures import TargetDensity
from .poly import Poly, parse_poly

EXACT_MOMENT_DEGREE = 12
BATCH = 1 << 17
# a Hill tail index below this means the mean is infinite or converges too
# slowly for the standard error to be trusted
MIN_TAIL_INDEX = 1.5
DOUBLING_JUMP = 1.2
SINGULAR_CUTOFF = 1e-12


@dataclass(frozen=True)
class MCEstimate:
    value: float
    std_error: float
    samples: int
    seed: Optional[int]
    exact: bool = False
    flagged: bool = False
    tail_index: float = math.inf

    def to_json(self) -> dict:
        out = {"value": _num(self.value), "std_error": _num(self.std_error),
               "samples": self.samples, "seed": self.seed, "exact": self.exact,
               "flagged": self.flagged}
        if math.isfinite(self.tail_index):
            out["tail_index"] = self.tail_index
        return out


def _num(v):
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def exact(value) -> MCEstimate:
    return MCEstimate(float(value), 0.0, 0, None, exact=True)


def as_functional(F, n: int | None = None) -> Poly:
    if isinstance(F, Poly):
        return F if n is None or F.nvars >= n else F.extend(n)
    return parse_poly(str(F), n)


def as_vector(F_vec, n: int | None = None) -> List[Poly]:
    if isinstance(F_vec, (Poly, str)):
        F_vec = [F_vec]
    polys = [as_functional(F) for F in F_vec]
    dim = max([p.nvars for p in polys] + [n or 1])
    return [p.extend(dim) for p in polys]


# ---------------------------------------------------------------------------
# generator algebra


def ou_apply(F: Poly) -> Poly:
    """L F = Laplacian F - x . grad F."""
    out = Poly({}, F.nvars)
    for i in range(F.nvars):
        out = out + F.diff(i, 2) - Poly.var(i, F.nvars) * F.diff(i)
    return out


def carre_du_champ(F: Poly, G: Poly | None = None) -> Poly:
    """grad F . grad G."""
    G = F if G is None else G
    n = max(F.nvars, G.nvars)
    F, G = F.extend(n), G.extend(n)
    out = Poly({}, n)
    for i in range(n):
        out = out + F.diff(i) * G.diff(i)
    return out


def eigen_check(F: Poly):
    """The eigenvalue lambda with L F = -lambda F, or None.

    Exact coefficients give an exact test. Floating coefficients are compared
    with a relative tolerance of 1e-12, and the eigenvalue, always a
    nonnegative integer for this generator, is returned as an int.
    """
    if F.is_zero():
        return None
    LF = ou_apply(F)
    exp, c = max(F.terms.items(), key=lambda item: abs(item[1]))
    lam = -LF.coefficient(exp) / c
    residual = LF + lam * F
    if F.is_exact():
        return _clean_int(lam) if residual.is_zero() else None
    scale = max(abs(float(v)) for v in F.terms.values())
    if any(abs(float(v)) > 1e-12 * scale for v in residual.terms.values()):
        return None
    return int(round(float(lam)))


def _clean_int(v):
    return int(v) if v == int(v) else v


def gamma_matrix(F_vec: Sequence[Poly]) -> List[List[Poly]]:
    return [[carre_du_champ(Fi, Fj) for Fj in F_vec] for Fi in F_vec]


def determinant(M: List[List[Poly]]) -> Poly:
    n = len(M)
    if n == 1:
        return M[0][0]
    total = None
    for j in range(n):
        minor = [row[:j] + row[j + 1:] for row in M[1:]]
        term = M[0][j] * determinant(minor)
        total = term if total is None else (total + term if j % 2 == 0 else total - term)
    return total


def adjugate(M: List[List[Poly]]) -> List[List[Poly]]:
    """det(M) M^{-1} as exact polynomials."""
    n = len(M)
    if n == 1:
        return [[Poly.constant(1, M[0][0].nvars)]]
    adj = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1:] for k, row in enumerate(M) if k != i]
            cof = determinant(minor)
            adj[j][i] = cof if (i + j) % 2 == 0 else -cof
    return adj


# ---------------------------------------------------------------------------
# expectations


def _sample_batches(n: int, samples: int, seed: int):
    rng = np.random.default_rng(seed)
    done = 0
    while done < samples:
        m = min(BATCH, samples - done)
        yield rng.standard_normal((m, n))
        done += m


def gaussian_expectation(P: Poly, samples: int = 1_000_000, seed: int = 0) -> MCEstimate:
    if P.degree <= EXACT_MOMENT_DEGREE:
        return exact(P.gaussian_moment())
    return mc_mean(lambda z: P.evaluate(z), P.nvars, samples, seed)


def hill_tail_index(values: np.ndarray, fraction: float = 1e-3) -> float:
    """Hill estimator of the right tail index from the top ``fraction`` of |values|."""
    x = np.sort(np.abs(np.asarray(values, dtype=float)))[::-1]
    k = max(10, int(x.size * fraction))
    if x.size <= k + 1 or x[k] <= 0:
        return math.inf
    logs = np.log(x[:k] / x[k])
    m = float(np.mean(logs))
    return math.inf if m <= 0 else 1.0 / m


def doubling_jumps(values: np.ndarray) -> int:
    """Number of sample doublings (N/8 -> N) that raise the running mean by over 20%."""
    n = values.size
    cum = np.cumsum(values)
    means = [cum[max(n // d, 1) - 1] / max(n // d, 1) for d in (8, 4, 2, 1)]
    return sum(1 for a, b in zip(means, means[1:]) if a > 0 and b > DOUBLING_JUMP * a)


def mc_mean(fn: Callable[[np.ndarray], np.ndarray], n: int, samples: int, seed: int,
            check_tail: bool = False) -> MCEstimate:
    vals = np.concatenate([np.asarray(fn(z), dtype=float) for z in _sample_batches(n, samples, seed)])
    return summarize_samples(vals, seed, check_tail)


def summarize_samples(vals: np.ndarray, seed, check_tail: bool = False) -> MCEstimate:
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else math.inf
    flagged, tail = False, math.inf
    if check_tail:
        tail = hill_tail_index(vals)
        flagged = tail < MIN_TAIL_INDEX or doubling_jumps(np.abs(vals)) >= 2
    return MCEstimate(mean, se, int(vals.size), seed, False, flagged, tail)


# ---------------------------------------------------------------------------
# Stein discrepancy bounds for eigenfunction vectors


def _eigenvalues(F_vec: Sequence[Poly], lambdas=None) -> List:
    found = [eigen_check(F) for F in F_vec]
    if lambdas is None:
        if any(l is None for l in found):
            raise ValueError("every component must be an eigenfunction of -L")
        return found
    for F, given, lam in zip(F_vec, lambdas, found):
        if lam is None or abs(float(lam) - float(given)) > 1e-12:
            raise ValueError(f"{F} is not an eigenfunction with eigenvalue {given}")
    return list(lambdas)


def eigen_stein_bound(F_vec, lambdas=None, samples: int = 1_000_000, seed: int = 0) -> MCEstimate:
    """V^2 = sum_ij lambda_i^-2 Var(Gamma(F_i, F_j)) + |C - Id|_HS^2, an upper bound on S^2."""
    F_vec = as_vector(F_vec)
    lams = _eigenvalues(F_vec, lambdas)
    G = gamma_matrix(F_vec)
    d = len(F_vec)
    parts: List[Poly] = []
    for i in range(d):
        for j in range(d):
            parts.append(G[i][j] / lams[i])
    exact_ok = all(2 * p.degree <= EXACT_MOMENT_DEGREE for p in parts) and \
        all(2 * F.degree <= EXACT_MOMENT_DEGREE for F in F_vec)
    if exact_ok:
        total = 0
        for p in parts:
            m1 = p.gaussian_moment()
            total += (p * p).gaussian_moment() - m1 * m1
        for i in range(d):
            for j in range(d):
                c = (F_vec[i] * F_vec[j]).gaussian_moment() - (1 if i == j else 0)
                total += c * c
        return exact(total)
    n = F_vec[0].nvars
    rng_vals = []
    cov_vals = []
    for z in _sample_batches(n, samples, seed):
        rng_vals.append(np.stack([p.evaluate(z) for p in parts], axis=1))
        cov_vals.append(np.stack([(F_vec[i] * F_vec[j]).evaluate(z)
                                  for i in range(d) for j in range(d)], axis=1))
    g = np.concatenate(rng_vals)
    c = np.concatenate(cov_vals)
    var_part = float(np.sum(np.var(g, axis=0, ddof=1)))
    cov = np.mean(c, axis=0) - np.eye(d).ravel()
    value = var_part + float(np.sum(cov ** 2))
    # delta-method error from the squared centered terms
    centered = (g - g.mean(axis=0)) ** 2
    se = float(np.sqrt(np.sum(np.var(centered, axis=0, ddof=1)) / g.shape[0]))
    return MCEstimate(value, se, int(g.shape[0]), seed)


def fourth_moment_bound(F, k: int | None = None, samples: int = 1_000_000,
                        seed: int = 0) -> Tuple[MCEstimate, MCEstimate]:
    """(V^2, (E F^2 - 1)^2 + (k-1)/(3k) (E F^4 - 3 (E F^2)^2)) for an eigenfunction with eigenvalue k."""
    F = as_functional(F)
    lam = eigen_check(F)
    if lam is None or (k is not None and lam != k):
        raise ValueError(f"{F} is not an eigenfunction with eigenvalue {k}")
    V2 = eigen_stein_bound([F], [lam], samples, seed)
    ratio = Fraction(lam - 1, 3 * lam)
    if 4 * F.degree <= EXACT_MOMENT_DEGREE:
        m2 = (F * F).gaussian_moment()
        m4 = (F ** 4).gaussian_moment()
        return V2, exact((m2 - 1) ** 2 + ratio * (m4 - 3 * m2 * m2))
    F2, F4 = F * F, F ** 4

    def integrand(z):
        f2 = F2.evaluate(z)
        return np.stack([f2, F4.evaluate(z)], axis=1)

    vals = np.concatenate([integrand(z) for z in _sample_batches(F.nvars, samples, seed)])
    m2, m4 = vals.mean(axis=0)
    r = float(ratio)
    # delta method on the pair of sample means
    grad = np.array([2 * (m2 - 1) - 6 * r * m2, r])
    cov = np.cov(vals, rowvar=False) / vals.shape[0]
    se = float(np.sqrt(grad @ cov @ grad))
    return V2, MCEstimate(float((m2 - 1) ** 2 + r * (m4 - 3 * m2 * m2)), se, vals.shape[0], seed)


# ---------------------------------------------------------------------------
# Fisher information bound


@dataclass(frozen=True)
class UField:
    """U = adj LF / D + (V1 D - V2) / D^2 + F, with exact polynomial pieces."""

    F: List[Poly]
    det: Poly
    adj_LF: List[Poly]
    V1: List[Poly]
    V2: List[Poly]

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        D = self.det.evaluate(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            cols = [(a.evaluate(z) * D + v1.evaluate(z) * D - v2.evaluate(z)) / (D * D) + f.evaluate(z)
                    for a, v1, v2, f in zip(self.adj_LF, self.V1, self.V2, self.F)]
        return np.stack(cols, axis=1)


def u_field(F_vec) -> UField:
    F_vec = as_vector(F_vec)
    G = gamma_matrix(F_vec)
    D = determinant(G)
    if D.is_zero():
        raise ValueError("the Gamma matrix is identically singular")
    A = adjugate(G)
    LF = [ou_apply(F) for F in F_vec]
    d = len(F_vec)
    zero = Poly({}, F_vec[0].nvars)
    adj_LF, V1, V2 = [], [], []
    for j in range(d):
        a = zero
        v1 = zero
        v2 = zero
        for i in range(d):
            a = a + A[j][i] * LF[i]
            v1 = v1 + carre_du_champ(F_vec[i], A[i][j])
            v2 = v2 + A[i][j] * carre_du_champ(F_vec[i], D)
        adj_LF.append(a)
        V1.append(v1)
        V2.append(v2)
    return UField(F_vec, D, adj_LF, V1, V2)


def fisher_U_bound(F_vec, samples: int = 1_000_000, seed: int = 0) -> MCEstimate:
    """Monte Carlo estimate of int |U|^2 dmu, an upper bound on I(nu_F | gamma)."""
    U = u_field(F_vec)
    n = U.det.nvars

    def sq(z):
        u = U.evaluate(z)
        out = np.sum(u * u, axis=1)
        return np.where(np.isfinite(out), out, np.inf)

    return mc_mean(sq, n, samples, seed, check_tail=True)


def pairs_functional(n_pairs: int) -> Poly:
    """x1 x2 + x3 x4 + ... over 2 n_pairs variables."""
    n = 2 * n_pairs
    out = Poly({}, n)
    for i in range(n_pairs):
        out = out + Poly.var(2 * i, n) * Poly.var(2 * i + 1, n)
    return out


# ---------------------------------------------------------------------------
# entropic approximation bounds


def kappa_of(alpha: float) -> float:
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return (2 + alpha) / (2 * (4 + 3 * alpha))


def psi(r: float) -> float:
    return 1.0 + math.log(r) if r >= 1 else r


def _psi_slope(r: float) -> float:
    return 1.0 / r if r >= 1 else 1.0


@dataclass(frozen=True)
class EntropyBound:
    value: Optional[float]
    std_error: float
    A_F: MCEstimate
    B_F: MCEstimate
    kappa: float
    S2: Optional[float]
    S2_source: str
    flagged: bool
    rejected: int = 0
    note: str = ""

    def to_json(self) -> dict:
        return {"value": None if self.value is None else _num(self.value),
                "std_error": _num(self.std_error), "A_F": self.A_F.to_json(),
                "B_F": self.B_F.to_json(), "kappa": self.kappa,
                "S2": None if self.S2 is None else _num(self.S2), "S2_source": self.S2_source,
                "flagged": self.flagged, "rejected": self.rejected, "note": self.note}


def _assemble(S2, constant, constant_se, kappa):
    """S^2 Psi(c / S^2) / (2 (1 - 4 kappa)); zero when S^2 = 0."""
    if S2 is None:
        return None, math.nan
    if S2 == 0:
        return 0.0, 0.0
    r = constant / S2
    value = S2 * psi(r) / (2 * (1 - 4 * kappa))
    se = _psi_slope(r) * constant_se / (2 * (1 - 4 * kappa))
    return value, se


def entropy_bound_normal(F_vec, alpha: float, samples: int = 1_000_000, seed: int = 0,
                         S2: float | None = None) -> EntropyBound:
    """Entropy bound through A_F and B_F = E det(Gamma)^-alpha.

    When every component is an eigenfunction, S^2 is replaced by its upper bound
    V^2. The map r -> r Psi(c / r) is nondecreasing on (0, inf), so this keeps a
    valid bound.
    """
    kappa = kappa_of(alpha)
    F_vec = as_vector(F_vec)
    U = u_field(F_vec)
    d = len(F_vec)
    n = U.det.nvars
    if S2 is not None:
        source = "given"
    else:
        if any(eigen_check(F) is None for F in F_vec):
            raise ValueError("S^2 must be supplied when F is not a vector of eigenfunctions")
        V2 = eigen_stein_bound(F_vec, samples=samples, seed=seed)
        S2, source = V2.value, "V2 upper bound"

    def a_integrand(z):
        D = U.det.evaluate(z)
        adj = np.stack([a.evaluate(z) for a in U.adj_LF], axis=1)
        v1 = np.stack([v.evaluate(z) for v in U.V1], axis=1)
        v2 = np.stack([v.evaluate(z) for v in U.V2], axis=1)
        f = np.stack([p.evaluate(z) for p in U.F], axis=1)
        s = (np.linalg.norm(adj, axis=1) + np.linalg.norm(v1, axis=1)
             + np.linalg.norm(v2, axis=1) + np.linalg.norm(f, axis=1))
        return s * s

    def b_integrand(z):
        D = U.det.evaluate(z)
        with np.errstate(divide="ignore"):
            return np.where(D > 0, D ** (-alpha), np.inf)

    A = mc_mean(a_integrand, n, samples, seed)
    B = mc_mean(b_integrand, n, samples, seed + 1, check_tail=True)
    c = 2 * (A.value + d * (B.value + 1))
    c_se = 2 * math.hypot(A.std_error, d * B.std_error)
    value, se = _assemble(S2, c, c_se, kappa)
    return EntropyBound(value, se, A, B, kappa, S2, source, B.flagged)


def entropy_bound_gamma(F, p: float, alpha: float, samples: int = 1_000_000, seed: int = 0,
                        S2: float | None = None, law: TargetDensity | None = None) -> EntropyBound:
    """Gamma-reference entropy bound for a nonnegative functional F of a Gaussian vector.

    L and Gamma are the Ornstein-Uhlenbeck operators of the ambient Gaussian
    space. S^2 comes from ``S2``, from the 1D kernel of ``law`` when given, or
    from the Jensen bound E[(Gamma(F) / (lambda F) - 1)^2] when F - p is an
    eigenfunction with eigenvalue lambda; otherwise only A_F and B_F are reported.
    """
    if p < 0.5:
        raise ValueError("the gamma entropy bound requires p ≥ ½")
    kappa = kappa_of(alpha)
    F = as_functional(F)
    n = F.nvars
    LF = ou_apply(F)
    G = carre_du_champ(F)
    GG = carre_du_champ(F, G)
    scale = max([abs(float(c)) for c in F.terms.values()] + [1.0])
    mins = [float(np.min(F.evaluate(z))) for z in _sample_batches(n, min(samples, 1 << 16), seed)]
    if min(mins) < -SINGULAR_CUTOFF * scale:
        raise ValueError("F takes negative values; the gamma bound needs F >= 0")
    note = ""
    source = "none"
    if S2 is not None:
        source = "given"
    elif law is not None:
        S2 = stein_discrepancy(law, stein_kernel_1d(law)).value ** 2
        source = "law kernel"
    else:
        lam = eigen_check(F - p)
        if lam is not None:
            if (G - lam * F).is_zero():
                S2, source = 0.0, "Jensen bound (exact)"
            else:
                est = mc_mean(lambda z: _safe_ratio_sq(G.evaluate(z), lam, F.evaluate(z)),
                              n, samples, seed + 2)
                S2, source = est.value, "Jensen bound"
        else:
            note = "S^2 unavailable; only A_F and B_F are reported"

    rejected = 0
    vals = []
    for z in _sample_batches(n, samples, seed):
        f = F.evaluate(z)
        keep = f >= SINGULAR_CUTOFF
        rejected += int(np.sum(~keep))
        f, zz = f[keep], z[keep]
        inner = f * np.abs(LF.evaluate(zz)) + G.evaluate(zz) + f * np.abs(GG.evaluate(zz)) + p + f
        vals.append(inner * inner / f)
    A = summarize_samples(np.concatenate(vals), seed)

    def b_integrand(z):
        g = G.evaluate(z)
        with np.errstate(divide="ignore"):
            return np.where(g > 0, g ** (-alpha), np.inf)

    B = mc_mean(b_integrand, n, samples, seed + 1, check_tail=True)
    c = 2 * (A.value + B.value + 1)
    c_se = 2 * math.hypot(A.std_error, B.std_error)
    value, se = _assemble(S2, c, c_se, kappa)
    if rejected:
        note = (note + "; " if note else "") + f"{rejected} samples with F < {SINGULAR_CUTOFF} rejected"
    return EntropyBound(value, se, A, B, kappa, S2, source, B.flagged, rejected, note)


def _safe_ratio_sq(g, lam, f):
    with np.errstate(divide="ignore", invalid="ignore"):
        r = g / (float(lam) * f) - 1.0
    return np.where(f > SINGULAR_CUTOFF, r * r, 0.0)


# ---------------------------------------------------------------------------
# moment growth and concentration


def rosenthal_constant(p: float) -> float:
    """An explicit linear choice K_p = 2p; not optimal."""
    return 2.0 * p


@dataclass(frozen=True)
class MomentRow:
    p: float
    norm_p: float
    S_p: float
    tau_norm: float
    structure: float
    structure_simple: float
    constant: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


MOMENT_COLUMNS = ("p", "norm_p", "S_p", "tau_norm", "structure", "structure_simple", "constant")


def concentration_moments(sampler: Callable[[np.random.Generator, int], np.ndarray],
                          u: Callable[[np.ndarray], np.ndarray],
                          kernel: Callable[[np.ndarray], np.ndarray] | None,
                          p_list: Sequence[float], samples: int = 1_000_000,
                          seed: int = 0) -> List[MomentRow]:
    """Empirical |u|_p against S_p + sqrt(p) (E tau^{p/2})^{1/p} for a one-dimensional law.

    ``constant`` is the smallest C making the moment bound hold at that p.
    """
    if kernel is None:
        raise ValueError("a Stein kernel for the sampled law is required")
    rng = np.random.default_rng(seed)
    x = np.asarray(sampler(rng, samples), dtype=float)
    vals = np.asarray(u(x), dtype=float)
    vals = vals - vals.mean()
    tau = np.asarray(kernel(x), dtype=float)
    rows = []
    for p in p_list:
        p = float(p)
        norm = float(np.mean(np.abs(vals) ** p) ** (1 / p))
        s_p = float(np.mean(np.abs(tau - 1) ** p) ** (1 / p))
        tnorm = float(np.mean(np.abs(tau) ** (p / 2)) ** (1 / p))
        structure = s_p + math.sqrt(p) * tnorm
        simple = s_p + math.sqrt(p) + math.sqrt(p) * math.sqrt(s_p)
        rows.append(MomentRow(p, norm, s_p, tnorm, structure, simple,
                              norm / structure if structure > 0 else math.inf))
    return rows


def sum_discrepancy_p(p: float, n: int, S_p: float) -> float:
    """Upper bound K_p n^-1/2 S_p on the p-discrepancy of a normalized sum of n iid copies."""
    return rosenthal_constant(p) * S_p / math.sqrt(n)


def iid_sum_structure(p: float, n: int, S_p: float) -> float:
    """sqrt(p) (1 + n^-1/2 sqrt(p) S_p + n^-1/4 sqrt(p S_p)), the moment-bound shape for sums."""
    return math.sqrt(p) * (1 + math.sqrt(p) * S_p / math.sqrt(n) + math.sqrt(p * S_p) / n ** 0.25)


def gamma_sum_sampler(shape: float, n: int):
    """Normalized sum of n centered Gamma(shape) variables, drawn exactly as
    (Gamma(n shape) - n shape) / sqrt(n shape)."""
    k = n * shape

    def draw(rng: np.random.Generator, m: int) -> np.ndarray:
        return (rng.gamma(k, size=m) - k) / math.sqrt(k)

    return draw


def gaussian_sampler(rng: np.random.Generator, m: int) -> np.ndarray:
    return rng.standard_normal(m)


@dataclass(frozen=True)
class TailFit:
    exponent: float
    scale: float
    radii: Tuple[float, ...]
    z: Tuple[float, ...]


def tail_exponent(values: np.ndarray, r_min: float = 0.25, r_max: float = 2.0,
                  points: int = 8) -> TailFit:
    """Exponent beta in P(u >= r) ~ Gaussian tail of r^{beta/2}, read on the normal scale.

    With z(r) the standard normal upper quantile of the empirical tail P(u >= r),
    fit z(r) - z(0) = c r^{beta/2} by least squares in log-log coordinates.
    An exact Gaussian gives beta = 2.
    """
    v = np.sort(np.asarray(values, dtype=float))
    n = v.size

    def upper(r):
        return (n - np.searchsorted(v, r, side="left")) / n

    radii = np.linspace(r_min, r_max, points)
    z0 = stats.norm.isf(upper(0.0))
    z = np.array([stats.norm.isf(upper(r)) for r in radii]) - z0
    ok = z > 0
    if ok.sum() < 2:
        return TailFit(math.nan, math.nan, tuple(radii), tuple(z))
    slope, intercept = np.polyfit(np.log(radii[ok]), np.log(z[ok]), 1)
    return TailFit(float(2 * slope), float(math.exp(intercept)), tuple(map(float, radii)),
                   tuple(map(float, z)))


# ---------------------------------------------------------------------------
# entropic central limit bound


@dataclass(frozen=True)
class CLTBound:
    alpha: float
    S2: float
    I: float
    S2_bound: float
    I_bound: float
    entropy_bound: float
    poincare_bound: Optional[float]

    def to_json(self) -> dict:
        return {k: (None if getattr(self, k) is None else _num(getattr(self, k)))
                for k in self.__dataclass_fields__}


def sum_discrepancy_clt(base: TargetDensity, weights: Sequence[float],
                        poincare: float | None = None, S2: float | None = None,
                        I: float | None = None) -> CLTBound:
    """Bounds for T = sum a_k X_k with X_k iid from ``base`` and sum a_k^2 = 1."""
    a = np.asarray(weights, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("weights must be a non-empty vector")
    if abs(float(np.sum(a * a)) - 1.0) > 1e-12:
        raise ValueError("weights must satisfy sum a_k^2 = 1")
    alpha = float(np.sum(a ** 4))
    if S2 is None:
        S2 = stein_discrepancy(base).value ** 2
    if I is None:
        I = fisher_information(base).value
    H = None
    S2_T = alpha * S2
    if S2_T == 0:
        bound = 0.0
    elif math.isinf(I):
        bound = math.inf
    else:
        bound = 0.5 * S2_T * math.log1p(I / S2_T)
    pb = None
    if poincare is not None:
        from .functionals import relative_entropy

        H = relative_entropy(base).value
        pb = alpha / (poincare / 2 + (1 - poincare / 2) * alpha) * H
    return CLTBound(alpha, S2, I, S2_T, I, bound, pb)


def clt_histogram(base: TargetDensity, weights: Sequence[float], samples: int = 100_000,
                  seed: int = 0, bins: int = 60) -> List[Tuple[float, float, float]]:
    """(left edge, right edge, density) of a sampled histogram of T = sum a_k X_k."""
    from .ou_semigroup import sample

    a = np.asarray(weights, dtype=float)
    rng = np.random.default_rng(seed)
    total = np.zeros(samples)
    for w in a:
        if w != 0:
            total += w * sample(base, samples, rng)
    dens, edges = np.histogram(total, bins=bins, range=(-6, 6), density=True)
    return [(float(edges[i]), float(edges[i + 1]), float(dens[i])) for i in range(bins)]


def required_constant(rows: Sequence[MomentRow]) -> float:
    """Smallest C for which the moment bound holds at every p in ``rows``."""
    return max(r.constant for r in rows)
