"""Ornstein-Uhlenbeck evolution of targets against the standard Gaussian.

The evolved law nu^t is the law of e^{-t} F + sqrt(1 - e^{-2t}) Z. Its density
is the Mehler integral written in the Gaussian variable u:

    rho_t(x) = e^t  int rho(e^t (x - s u)) phi(u) du,     s = sqrt(1 - e^{-2t}),

and the derivative and the conditional expectations needed for the evolved
kernel use the same nodes. The u-integral runs on composite Gauss-Legendre
panels that include the images of the base target's support edges and spikes,
which plain Gauss-Hermite would step over.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .functionals import (FunctionalValue, SteinKernel, fisher_information, relative_entropy,
                          stein_discrepancy, stein_kernel_1d)
from .measures import LOG_SQRT_2PI, STANDARD_GAUSSIAN, TargetDensity
from .quadrature import DEFAULT_HERMITE_NODES, gauss_hermite, panel_nodes

U_RANGE = 40.0
PANEL_WIDTH = 0.5
PANEL_ORDER = 10
CHUNK = 512
SMALL_T = 1e-4


def mehler(f, t: float, x, nodes: int = DEFAULT_HERMITE_NODES) -> np.ndarray:
    """P_t f(x) = E f(e^{-t} x + sqrt(1 - e^{-2t}) Z) by Gauss-Hermite quadrature."""
    if t < 0:
        raise ValueError("time must be non-negative")
    x = np.asarray(x, dtype=float)
    if t == 0:
        return np.asarray(f(x), dtype=float)
    z, w = gauss_hermite(nodes)
    e, s = math.exp(-t), math.sqrt(-math.expm1(-2 * t))
    vals = f(e * x[..., None] + s * z)
    return np.asarray(vals, dtype=float) @ w


class EvolvedTarget(TargetDensity):
    """nu^t for a base target with Gaussian reference."""

    def __init__(self, base: TargetDensity, t: float, kernel: SteinKernel | None = None):
        if base.reference.kind != "gaussian" or getattr(base.reference, "variance", 1.0) != 1.0:
            raise ValueError("the Ornstein-Uhlenbeck flow is defined against the standard Gaussian")
        if not t > 0:
            raise ValueError("EvolvedTarget needs t > 0; use the base target at t = 0")
        self.base = base
        self.t = float(t)
        self.e = math.exp(-t)
        self.s = math.sqrt(-math.expm1(-2 * t))
        self._base_kernel = kernel
        e, s = self.e, self.s
        blo, bhi = base.window()
        self._base_window = (blo, bhi)
        feats = [(e * c, math.hypot(e * w, s)) for c, w in base.features]
        feats += [(e * end, s) for end in base.support if math.isfinite(end)]
        super().__init__(
            logpdf=self._logpdf_impl, score=self._score_impl, support=(-math.inf, math.inf),
            reference=STANDARD_GAUSSIAN, tag=f"{base.tag}@t={t:g}",
            params={**base.params, "t": t}, scale=math.hypot(e * base.scale, s),
            center_point=e * base.center_point, features=feats,
            window=(e * blo - 12 * s, e * bhi + 12 * s),
        )
        self.kernel = self._kernel_impl
        self.kernel_provenance = "evolved"
        self._cache: dict = {}

    # the u-panel layout for a batch of x values
    def _edges(self, x: np.ndarray) -> np.ndarray:
        e, s = self.e, self.s
        blo, bhi = self._base_window
        lo = np.maximum(-U_RANGE, (x - e * bhi) / s)
        hi = np.minimum(U_RANGE, (x - e * blo) / s)
        hi = np.maximum(hi, lo)
        base = np.linspace(-U_RANGE, U_RANGE, int(2 * U_RANGE / PANEL_WIDTH) + 1)
        cols = [np.broadcast_to(base, (x.size, base.size))]
        marks = [(self.base.center_point, self.base.scale)]
        marks += list(self.base.features)
        for c, w in marks:
            uc = (x - e * c) / s
            wu = e * w / s
            offs = np.array([0.0, -0.25, 0.25, -1.0, 1.0, -4.0, 4.0, -16.0, 16.0])
            cols.append(uc[:, None] + wu * offs[None, :])
        for end in self.base.support:
            if math.isfinite(end):
                ue = (x - e * end) / s
                cols.append(ue[:, None] + np.array([0.0, -1e-3, 1e-3, -1e-2, 1e-2, -0.1, 0.1])[None, :])
        edges = np.concatenate(cols + [lo[:, None], hi[:, None]], axis=1)
        edges = np.clip(edges, lo[:, None], hi[:, None])
        return np.sort(edges, axis=1)

    def _compute(self, x: np.ndarray, with_kernel: bool) -> dict:
        """log rho_t, score and optionally E[tau | x], E[(tau - 1) Z | x] for a flat batch."""
        e, s = self.e, self.s
        edges = self._edges(x)
        u, w = panel_nodes(edges, PANEL_ORDER)
        y = (x[:, None] - s * u) / e
        with np.errstate(divide="ignore"):
            logw = np.log(w) + self.base.logpdf(y) - 0.5 * u * u - LOG_SQRT_2PI
        top = np.max(logw, axis=1)
        top = np.where(np.isfinite(top), top, 0.0)
        wt = np.exp(logw - top[:, None])
        mass = wt.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            logrho = self.t + top + np.log(mass)
            mean_u = (wt * u).sum(axis=1) / mass
        out = {"logpdf": logrho, "score": -mean_u / s}
        if with_kernel:
            inside = wt > 0
            tau = np.zeros_like(y)
            tau[inside] = self.base_kernel(y[inside])
            with np.errstate(invalid="ignore"):
                out["cond_tau"] = (wt * tau).sum(axis=1) / mass
                out["cond_tau_z"] = (wt * (tau - 1.0) * u).sum(axis=1) / mass
        return out

    def base_kernel(self, y):
        if self._base_kernel is None:
            self._base_kernel = stein_kernel_1d(self.base)
        return self._base_kernel(y)

    def _batch(self, x, with_kernel: bool = False) -> dict:
        x = np.asarray(x, dtype=float)
        key = (x.shape, hash(x.tobytes()))
        hit = self._cache.get(key)
        if hit is not None and (not with_kernel or "cond_tau" in hit):
            return hit
        flat = x.ravel()
        parts = [self._compute(flat[i:i + CHUNK], with_kernel) for i in range(0, flat.size, CHUNK)]
        merged = {k: np.concatenate([p[k] for p in parts]).reshape(x.shape) for k in parts[0]}
        if len(self._cache) > 8:
            self._cache.clear()
        self._cache[key] = merged
        return merged

    def _logpdf_impl(self, x):
        return self._batch(x)["logpdf"]

    def _score_impl(self, x):
        return self._batch(x)["score"]

    def _kernel_impl(self, x):
        """tau_t = e^{-2t} P_t(h tau) / P_t h + (1 - e^{-2t})."""
        b = self._batch(x, with_kernel=True)
        return self.e ** 2 * b["cond_tau"] + (1 - self.e ** 2)

    def relative_density(self, x):
        """P_t h(x)."""
        return np.exp(self.log_relative(x))

    def score_from_kernel(self, x):
        """(log P_t h)' through e^{-2t} s^{-1} E[(tau(F) - 1) Z | F_t = x]."""
        b = self._batch(x, with_kernel=True)
        return self.e ** 2 / self.s * b["cond_tau_z"]


def mehler_evolve(target: TargetDensity, t: float, kernel: SteinKernel | None = None) -> TargetDensity:
    """nu^t; ``t = 0`` returns the base target itself."""
    if t < 0:
        raise ValueError("time must be non-negative")
    if t == 0:
        return target
    return EvolvedTarget(target, t, kernel)


def evolved_stein_kernel(target: TargetDensity, kernel: SteinKernel | None, t: float) -> SteinKernel:
    if not t > 0:
        raise ValueError("evolved kernel needs t > 0")
    ev = EvolvedTarget(target, t, kernel)
    return SteinKernel(ev.kernel, "evolved", ev.reference)


# ---------------------------------------------------------------------------
# Monte Carlo score


@dataclass(frozen=True)
class ScoreEstimate:
    value: float
    std_error: float
    hits: int
    flagged: bool


def score_mc(target: TargetDensity, kernel: SteinKernel | None, t: float, x: float,
             samples: int = 1_000_000, seed: int = 0, bandwidth_factor: float = 0.1,
             min_hits: int = 100) -> ScoreEstimate:
    """Local-average estimate of v_t'(x) = e^{-2t}(1-e^{-2t})^{-1/2} E[(tau(F)-1) Z | F_t = x]."""
    if not t > 0:
        raise ValueError("t must be positive")
    kernel = kernel or stein_kernel_1d(target)
    rng = np.random.default_rng(seed)
    f = sample(target, samples, rng)
    z = rng.standard_normal(samples)
    e, s = math.exp(-t), math.sqrt(-math.expm1(-2 * t))
    ft = e * f + s * z
    h = bandwidth_factor * float(np.std(ft))
    hit = np.abs(ft - x) < h
    k = int(hit.sum())
    if k < 2:
        return ScoreEstimate(math.nan, math.inf, k, True)
    vals = (kernel(f[hit]) - 1.0) * z[hit]
    factor = e * e / s
    mean = float(vals.mean()) * factor
    se = float(vals.std(ddof=1)) / math.sqrt(k) * factor
    return ScoreEstimate(mean, se, k, k < min_hits)


def sample(target: TargetDensity, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw from a target: exact component sampling for mixtures, inverse transform otherwise."""
    if target.tag == "mixture":
        nn, a = target.params["n"], target.params["a"]
        spike = rng.random(n) < a
        z = rng.standard_normal(n)
        return np.where(spike, z / nn, z)
    u = rng.random(n)
    u = np.clip(u, 1e-300, 1 - 1e-16)
    low = u <= 0.5
    out = np.empty(n)
    out[low] = target.ppf(u[low])
    out[~low] = target.isf(1 - u[~low])
    return out


# ---------------------------------------------------------------------------
# decay curves and de Bruijn


DECAY_COLUMNS = ("t", "H", "I", "S", "bound_I_lsi", "bound_I_stein", "bound_I_improved",
                 "bound_H_exp", "bound_H_hsi1", "bound_H_hsi2")


def _safe_div(a: float, b: float) -> float:
    if b == 0:
        return math.inf if a > 0 else 0.0
    return a / b


def decay_bounds(t: float, H: float, I: float, S: float) -> dict:
    """Every decay bound at time t from the base values H, I, S."""
    e2 = math.exp(-2 * t)
    one_m = -math.expm1(-2 * t)
    S2 = S * S
    stein_env = _safe_div(e2 * e2 * S2, one_m) if S2 > 0 else 0.0
    if S2 == 0 or I == 0:
        improved = 0.0
    elif math.isinf(I):
        improved = stein_env if math.isfinite(S2) else math.inf
    elif math.isinf(S2):
        improved = e2 * I
    else:
        improved = e2 * S2 * I / (S2 + math.expm1(2 * t) * I)
    if H == 0:
        hsi1 = 0.0
    elif S2 == 0:
        hsi1 = 0.0
    elif math.isinf(S2):
        hsi1 = e2 * H
    else:
        hsi1 = e2 * e2 * H / (e2 + one_m * H / S2)
    return {
        "bound_I_lsi": e2 * I,
        "bound_I_stein": stein_env,
        "bound_I_improved": improved,
        "bound_H_exp": e2 * H,
        "bound_H_hsi1": hsi1,
        "bound_H_hsi2": stein_env,
        "bound_S": e2 * S,
    }


@dataclass
class DecayRow:
    t: float
    H: FunctionalValue
    I: FunctionalValue
    S: FunctionalValue
    bounds: dict

    def as_dict(self) -> dict:
        out = {"t": self.t, "H": self.H.value, "I": self.I.value, "S": self.S.value}
        out.update({k: self.bounds[k] for k in DECAY_COLUMNS[4:]})
        return out

    def violations(self, factor: float = 1 + 1e-6) -> List[str]:
        """Bound columns that fail to dominate their functional (with a relative factor)."""
        bad = []
        pairs = [("I", "bound_I_lsi"), ("I", "bound_I_stein"), ("I", "bound_I_improved"),
                 ("H", "bound_H_exp"), ("H", "bound_H_hsi1"), ("H", "bound_H_hsi2"),
                 ("S", "bound_S")]
        for col, bnd in pairs:
            val = getattr(self, col).value
            b = self.bounds[bnd]
            if val > b * factor + 1e-14:
                bad.append(bnd)
        if self.bounds["bound_H_hsi1"] > self.bounds["bound_H_hsi2"] * factor + 1e-14:
            bad.append("hsi1>hsi2")
        return bad


def decay_curves(target: TargetDensity, kernel: SteinKernel | None = None,
                 times: Sequence[float] = tuple(np.arange(0, 3.0001, 0.25))) -> List[DecayRow]:
    kernel = kernel or stein_kernel_1d(target)
    H0 = relative_entropy(target)
    I0 = fisher_information(target)
    S0 = stein_discrepancy(target, kernel)
    rows = []
    for t in times:
        t = float(t)
        if t == 0:
            H, I, S = H0, I0, S0
        else:
            ev = EvolvedTarget(target, t, kernel)
            H, I = relative_entropy(ev), fisher_information(ev)
            S = stein_discrepancy(ev, SteinKernel(ev.kernel, "evolved", ev.reference))
        rows.append(DecayRow(t, H, I, S, decay_bounds(t, H0.value, I0.value, S0.value)))
    return rows


def format_float(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return f"{v:.12g}"


def decay_csv(rows: Sequence[DecayRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DECAY_COLUMNS)
    for r in rows:
        d = r.as_dict()
        w.writerow([format_float(d[c]) for c in DECAY_COLUMNS])
    return buf.getvalue()


@dataclass(frozen=True)
class DeBruijnResult:
    H: float
    integral: float
    tail: float
    small_t: float
    residual: float
    nodes: int

    def as_tuple(self):
        return (self.H, self.integral + self.small_t + self.tail, self.residual)


def _time_nodes(t0: float, horizon: float, panels: int = 4, order: int = 8):
    """Gauss-Legendre nodes in log t on [t0, 1] and in t on [1, horizon]."""
    from .quadrature import gauss_legendre

    x, w = gauss_legendre(order)
    nodes, weights = [], []
    a, b = math.log(t0), 0.0
    for k in range(panels):
        lo = a + (b - a) * k / panels
        hi = a + (b - a) * (k + 1) / panels
        lt = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x
        nodes.append(np.exp(lt))
        weights.append(0.5 * (hi - lo) * w * np.exp(lt))
    if horizon > 1:
        for k in range(panels):
            lo = 1 + (horizon - 1) * k / panels
            hi = 1 + (horizon - 1) * (k + 1) / panels
            nodes.append(0.5 * (lo + hi) + 0.5 * (hi - lo) * x)
            weights.append(0.5 * (hi - lo) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def de_bruijn_check(target: TargetDensity, kernel: SteinKernel | None = None,
                    horizon: float = 8.0, t0: float = SMALL_T) -> DeBruijnResult:
    """Compare H(nu) with the time integral of I(nu^t).

    On (0, t0] the trapezoid rule is used when I(nu) is finite; otherwise the
    integral is closed off by a power law I(nu^t) ~ A t^-k fitted at t0 and
    2 t0. Beyond the
    horizon the Stein envelope e^{-4t} S^2 / (1 - e^{-2t}) is integrated exactly.
    """
    kernel = kernel or stein_kernel_1d(target)
    H = relative_entropy(target).value
    S = stein_discrepancy(target, kernel).value
    if H == 0 and S == 0:
        return DeBruijnResult(0.0, 0.0, 0.0, 0.0, 0.0, 0)
    ts, ws = _time_nodes(t0, horizon)
    vals = np.array([fisher_information(EvolvedTarget(target, float(t), kernel)).value for t in ts])
    integral = float(np.sum(vals * ws))
    i_a = fisher_information(EvolvedTarget(target, t0, kernel)).value
    i_b = fisher_information(EvolvedTarget(target, 2 * t0, kernel)).value
    i_0 = fisher_information(target).value
    if math.isfinite(i_0):
        small = 0.5 * t0 * (i_0 + i_a)
    else:
        k = 0.0
        if i_a > 0 and i_b > 0:
            k = min(max(math.log(i_a / i_b) / math.log(2.0), 0.0), 0.99)
        small = t0 * i_a / (1 - k)
    w = math.exp(-2 * horizon)
    tail = 0.5 * S * S * (-w - math.log1p(-w))
    residual = H - integral - small - tail
    return DeBruijnResult(H, integral, tail, small, residual, len(ts) + 2)
