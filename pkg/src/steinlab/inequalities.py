"""Check functional inequalities between entropy, Fisher information, Stein
discrepancy and transport or total-variation distances on concrete targets.

Every check returns an ``InequalityReport``. Degenerate values of S and I
(zero or infinite) go through explicit limit branches whose names are recorded
in ``conventions`` so that each report says how its right-hand side was formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from .functionals import (FunctionalValue, SteinKernel, fisher_information, kernel_moment,
                          relative_entropy, stein_discrepancy, stein_kernel_1d,
                          total_variation_1d, wasserstein_p_1d)
from .measures import GaussianReference, ReferenceMeasure, TargetDensity, mixture

RELATIVE_TOLERANCE = 1e-7

KINDS = ("lsi", "hsi", "hsi_improved", "hsi_cov", "wsh", "talagrand", "hwi", "w2s", "wp",
         "tv_stein", "pinsker", "entropy_decay", "w2s_general")


@dataclass
class InequalityReport:
    kind: str
    lhs: float
    rhs: float
    slack: float
    holds: bool
    tolerance: float
    status: str
    inputs: Dict[str, float] = field(default_factory=dict)
    conventions: List[str] = field(default_factory=list)
    note: str = ""

    def to_json(self) -> dict:
        return {
            "kind": self.kind, "lhs": _num(self.lhs), "rhs": _num(self.rhs),
            "slack": _num(self.slack), "holds": self.holds, "status": self.status,
            "tolerance": _num(self.tolerance),
            "inputs": {k: _num(v) for k, v in self.inputs.items()},
            "conventions": list(self.conventions), "note": self.note,
        }


def _num(v):
    if isinstance(v, (bool, str)) or v is None:
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def tolerance_for(rhs: float) -> float:
    return RELATIVE_TOLERANCE * (max(1.0, rhs) if math.isfinite(rhs) else 1.0)


def make_report(kind: str, lhs: float, rhs: float, inputs: dict, conventions: Sequence[str],
                note: str = "") -> InequalityReport:
    tol = tolerance_for(rhs)
    if math.isnan(lhs) or math.isnan(rhs) or (math.isinf(lhs) and math.isinf(rhs)):
        return InequalityReport(kind, lhs, rhs, math.nan, False, tol, "indeterminate",
                                dict(inputs), list(conventions), note)
    slack = rhs - lhs
    holds = slack >= -tol
    return InequalityReport(kind, lhs, rhs, slack, holds, tol, "holds" if holds else "violated",
                            dict(inputs), list(conventions), note)


# ---------------------------------------------------------------------------
# closed-form right-hand sides with limit branches


def hsi_rhs(S: float, I: float) -> Tuple[float, Optional[str]]:
    """1/2 S^2 log(1 + I/S^2) with its limits at S or I in {0, inf}."""
    if S == 0:
        return 0.0, "S=0"
    if math.isinf(S):
        return 0.5 * I, "S=inf"
    if I == 0:
        return 0.0, None
    if math.isinf(I):
        return math.inf, "I=inf"
    S2 = S * S
    return 0.5 * S2 * math.log1p(I / S2), None


def hsi_improved_rhs(S: float, I: float) -> Tuple[float, Optional[str]]:
    """1/2 I int_0^1 w / (r + (1 - r) w) dw with r = I/S^2, written in closed form."""
    if S == 0:
        return 0.0, "S=0"
    if math.isinf(S):
        return 0.5 * I, "S=inf"
    if I == 0:
        return 0.0, None
    if math.isinf(I):
        return math.inf, "I=inf"
    r = I / (S * S)
    q = 1.0 - r
    if abs(q) < 1e-4:
        f = 0.5 + q / 6.0 + q * q / 12.0
        branch = "I=S^2 by continuity"
    else:
        f = (q + r * math.log1p(-q)) / (q * q)
        branch = None
    return 0.5 * I * f, branch


def wsh_rhs(S: float, H: float) -> Tuple[float, Optional[str]]:
    """S arccos(exp(-H/S^2))."""
    if S == 0:
        return 0.0, "S=0"
    if math.isinf(S):
        return math.sqrt(2 * H), "S=inf"
    if math.isinf(H):
        return 0.5 * math.pi * S, "H=inf"
    # arccos(e^-r) = 2 arcsin(sqrt((1 - e^-r) / 2)) keeps full accuracy for small r
    r = H / (S * S)
    return 2 * S * math.asin(math.sqrt(-math.expm1(-r) / 2)), None


def psi(r: float) -> float:
    """1 + log r above one, the identity below."""
    return 1.0 + math.log(r) if r >= 1 else r


def general_hsi_rhs(S: float, I: float, rho: float, kappa: float, sigma: float
                    ) -> Tuple[float, Optional[str]]:
    if S == 0:
        return 0.0, "S=0"
    m = max(rho, kappa)
    if math.isinf(S):
        return m * I / (2 * rho * kappa), "S=inf"
    if math.isinf(I):
        return math.inf, "I=inf"
    S2 = S * S
    return S2 * psi(sigma * m * I / (rho * kappa * S2)) / (2 * sigma), None


def gaussian_abs_moment_constant(p: float) -> float:
    """(E|Z|^p)^(1/p) for a standard Gaussian Z."""
    return (2 ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)) ** (1 / p)


def entropy_decay_rhs(t: float, H: float, S: float) -> Tuple[float, float]:
    """Both members of the HSI-based entropy decay at time t."""
    e2 = math.exp(-2 * t)
    one_m = -math.expm1(-2 * t)
    second = math.inf if one_m == 0 else e2 * e2 * S * S / one_m
    if S == 0 or H == 0:
        return 0.0, (0.0 if S == 0 else second)
    if math.isinf(S):
        return e2 * H, second
    first = e2 * e2 * H / (e2 + one_m * H / (S * S))
    return first, second


# ---------------------------------------------------------------------------
# functionals on demand


class _Inputs:
    """Lazily computed functionals of one target, kept for the report snapshot."""

    def __init__(self, target: TargetDensity, kernel: SteinKernel | None):
        self.target = target
        self._kernel = kernel
        self.snapshot: Dict[str, float] = {}
        self.diverged: List[str] = []

    @property
    def kernel(self) -> SteinKernel:
        if self._kernel is None:
            self._kernel = stein_kernel_1d(self.target)
        return self._kernel

    def _take(self, name: str, fv: FunctionalValue) -> float:
        self.snapshot[name] = fv.value
        if fv.diverged:
            self.diverged.append(name)
        return fv.value

    def get(self, name: str) -> float:
        if name in self.snapshot:
            return self.snapshot[name]
        t = self.target
        if name == "H":
            return self._take(name, relative_entropy(t))
        if name == "I":
            return self._take(name, fisher_information(t))
        if name == "S":
            return self._take(name, stein_discrepancy(t, self.kernel))
        if name == "W2":
            return self._take(name, wasserstein_p_1d(t, p=2))
        if name == "TV":
            return self._take(name, total_variation_1d(t))
        raise KeyError(name)


def _require_standard(target: TargetDensity, kind: str):
    ref = target.reference
    if ref.kind != "gaussian" or getattr(ref, "variance", 1.0) != 1.0:
        raise ValueError(f"{kind} is stated against the standard Gaussian reference")


def _covariance(value) -> float:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.shape != (1, 1):
        raise ValueError("only 1x1 covariance matrices are supported for one-dimensional targets")
    c = float(arr[0, 0])
    if not c > 0:
        raise ValueError("covariance must be positive definite")
    return c


def verify(kind: str, target: TargetDensity, kernel: SteinKernel | None = None,
           **options) -> InequalityReport:
    """Evaluate one inequality on ``target``.

    Options: ``t`` for entropy_decay, ``p`` for wp, ``covariance`` for hsi_cov,
    ``rho``/``kappa``/``sigma`` for w2s_general (defaults from the reference).
    """
    if kind not in KINDS:
        raise ValueError(f"unknown inequality kind {kind!r}; choose from {', '.join(KINDS)}")
    if kind == "hsi_cov":
        return _verify_hsi_cov(target, options)
    if kind == "w2s_general":
        return _verify_w2s_general(target, kernel, options)
    _require_standard(target, kind)
    f = _Inputs(target, kernel)
    conv: List[str] = []

    def note(branch):
        if branch:
            conv.append(branch)

    if kind == "lsi":
        H, I = f.get("H"), f.get("I")
        lhs, rhs = H, 0.5 * I
    elif kind == "hsi":
        H, I, S = f.get("H"), f.get("I"), f.get("S")
        rhs, b = hsi_rhs(S, I)
        note(b)
        lhs = H
    elif kind == "hsi_improved":
        H, I, S = f.get("H"), f.get("I"), f.get("S")
        rhs, b = hsi_improved_rhs(S, I)
        note(b)
        lhs = H
    elif kind == "wsh":
        W, S, H = f.get("W2"), f.get("S"), f.get("H")
        rhs, b = wsh_rhs(S, H)
        note(b)
        lhs = W
    elif kind == "talagrand":
        W, H = f.get("W2"), f.get("H")
        lhs, rhs = W, math.sqrt(2 * H)
    elif kind == "hwi":
        H, W, I = f.get("H"), f.get("W2"), f.get("I")
        if math.isinf(I):
            rhs = math.inf if W > 0 else math.nan
            note("I=inf")
        else:
            rhs = W * math.sqrt(I) - 0.5 * W * W
        lhs = H
    elif kind == "w2s":
        lhs, rhs = f.get("W2"), f.get("S")
    elif kind == "wp":
        p = float(options.get("p", 1.0))
        if p < 1:
            raise ValueError("wp needs p >= 1")
        wp = wasserstein_p_1d(target, p=p)
        f._take("W_p", wp)
        moment = kernel_moment(target, f.kernel, p)
        f.snapshot["tau_moment_p"] = moment
        # one-dimensional: both dimension factors equal one
        rhs = gaussian_abs_moment_constant(p) * moment ** (1 / p)
        f.snapshot["p"] = p
        lhs = wp.value
    elif kind == "tv_stein":
        tv = f.get("TV")
        moment = kernel_moment(target, f.kernel, 1.0)
        f.snapshot["tau_moment_1"] = moment
        lhs, rhs = tv, 2 * moment
    elif kind == "pinsker":
        lhs, rhs = f.get("TV"), math.sqrt(0.5 * f.get("H"))
    elif kind == "entropy_decay":
        if "t" not in options:
            raise ValueError("entropy_decay needs the time option t")
        t = float(options["t"])
        if t < 0:
            raise ValueError("t must be non-negative")
        from .ou_semigroup import mehler_evolve

        H, S = f.get("H"), f.get("S")
        first, second = entropy_decay_rhs(t, H, S)
        ev = mehler_evolve(target, t, f.kernel if t > 0 else None)
        lhs = relative_entropy(ev).value
        f.snapshot.update({"t": t, "H_t": lhs, "second_member": second})
        rhs = first
        if first > second * (1 + RELATIVE_TOLERANCE):
            conv.append("first member above second")
    else:  # pragma: no cover
        raise AssertionError(kind)

    report = make_report(kind, lhs, rhs, f.snapshot, conv)
    if f.diverged and report.status != "indeterminate":
        covered = any(c.endswith("=inf") for c in conv)
        if not covered and not math.isinf(rhs):
            report.status = "indeterminate"
            report.holds = False
            report.note = "diverged: " + ", ".join(f.diverged)
    return report


def _verify_hsi_cov(target: TargetDensity, options) -> InequalityReport:
    if "covariance" not in options:
        raise ValueError("hsi_cov needs the covariance option")
    c = _covariance(options["covariance"])
    ref = target.reference
    if ref.kind != "gaussian":
        raise ValueError("hsi_cov is stated against a Gaussian reference")
    twin = target.with_reference(GaussianReference(c))
    f = _Inputs(twin, None)
    H, I, S = f.get("H"), f.get("I"), f.get("S")
    rhs, b = hsi_rhs(S, I)
    f.snapshot["covariance"] = c
    return make_report("hsi_cov", H, rhs, f.snapshot, [b] if b else [])


def _verify_w2s_general(target: TargetDensity, kernel, options) -> InequalityReport:
    ref = target.reference
    consts = ref.curvature()
    if consts is None:
        raise ValueError(_constraint_message(ref))
    rho, kappa, sigma = consts
    f = _Inputs(target, kernel)
    W = wasserstein_p_1d(target, ref, p=2)
    f._take("W2", W)
    S = f.get("S")
    rhs = 2 * S / math.sqrt(kappa * sigma)
    f.snapshot.update({"rho": rho, "kappa": kappa, "sigma": sigma})
    return make_report("w2s_general", W.value, rhs, f.snapshot, [])


def _constraint_message(ref: ReferenceMeasure) -> str:
    if ref.kind == "gamma_product":
        return "gamma reference needs shape p > 1/2 (the Hessian condition fails at p = 1/2)"
    if ref.kind == "log_concave":
        return "log-concave reference fails the curvature conditions on u''' and u''''"
    return f"no curvature constants are known for the {ref.kind} reference"


def verify_general_hsi(target: TargetDensity, reference: ReferenceMeasure | None = None,
                       rho: float | None = None, kappa: float | None = None,
                       sigma: float | None = None,
                       kernel: SteinKernel | None = None) -> InequalityReport:
    """H <= S^2 Psi(sigma max(rho, kappa) I / (rho kappa S^2)) / (2 sigma) against a
    gamma, Jacobi or certified log-concave reference."""
    if reference is not None and reference is not target.reference:
        target = target.with_reference(reference)
    ref = target.reference
    if ref.kind not in ("gamma_product", "uniform_jacobi", "log_concave"):
        raise ValueError("general HSI needs a gamma, Jacobi or log-concave reference")
    consts = ref.curvature()
    if consts is None:
        raise ValueError(_constraint_message(ref))
    given = (rho, kappa, sigma)
    if any(g is not None for g in given):
        if any(g is not None and not math.isclose(g, c, rel_tol=1e-12) for g, c in zip(given, consts)):
            raise ValueError(
                f"constants (rho, kappa, sigma) = {given} are not certified for the {ref.kind} "
                f"reference; the certified ones are {consts}")
    rho, kappa, sigma = consts
    mean_drift = target.drift_mean()
    if abs(mean_drift) > 1e-8:
        raise ValueError(f"target is not centered for its reference (E[b] = {mean_drift:.3g})")
    f = _Inputs(target, kernel)
    H, I, S = f.get("H"), f.get("I"), f.get("S")
    rhs, b = general_hsi_rhs(S, I, rho, kappa, sigma)
    f.snapshot.update({"rho": rho, "kappa": kappa, "sigma": sigma})
    report = make_report("general_hsi", H, rhs, f.snapshot, [b] if b else [])
    if f.diverged and not b and report.status == "holds" and not math.isinf(rhs):
        report.status, report.holds = "indeterminate", False
        report.note = "diverged: " + ", ".join(f.diverged)
    return report


# ---------------------------------------------------------------------------
# the two-parameter family between HWI and HSI


def phi_value(alpha, beta, I: float, S: float, W: float):
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    S2 = S * S
    return (alpha * I + (alpha - np.log(alpha)) * S2 + (1 - beta) / beta * W * W
            + (np.log(beta) - beta) * S2)


def hwsi_phi(target: TargetDensity, alpha: float, beta: float,
             kernel: SteinKernel | None = None) -> float:
    """Phi(alpha, beta) for 0 < alpha <= beta <= 1; H <= Phi / 2 for every such pair."""
    if not (0 < alpha <= beta <= 1):
        raise ValueError("need 0 < alpha <= beta <= 1")
    f = _Inputs(target, kernel)
    I, S, W = f.get("I"), f.get("S"), f.get("W2")
    if f.diverged:
        raise ValueError("Phi needs finite I, S and W2; diverged: " + ", ".join(f.diverged))
    return float(phi_value(alpha, beta, I, S, W))


@dataclass(frozen=True)
class PhiMinimum:
    alpha: float
    beta: float
    phi: float
    location: str

    @property
    def entropy_bound(self) -> float:
        return 0.5 * self.phi


def _classify(alpha: float, beta: float, tol: float = 1e-6) -> str:
    if abs(beta - 1) <= tol and abs(alpha - beta) <= tol:
        return "corner"
    if abs(alpha - beta) <= tol:
        return "alpha=beta"
    if abs(beta - 1) <= tol:
        return "beta=1"
    return "interior"


def minimize_phi(I: float, S: float, W: float, grid: int = 201) -> PhiMinimum:
    """Grid search over the triangle in (beta, alpha/beta), then bounded refinement."""
    if I == 0 and S == 0 and W == 0:
        return PhiMinimum(1.0, 1.0, 0.0, "corner")
    for v in (I, S, W):
        if not math.isfinite(v):
            raise ValueError("Phi needs finite I, S and W2")
    lv = np.linspace(-12, 0, grid)
    beta = np.exp(lv)[:, None]
    ratio = np.exp(lv)[None, :]
    vals = phi_value(beta * ratio, beta, I, S, W)
    k = np.unravel_index(np.argmin(vals), vals.shape)
    start = np.array([lv[k[0]], lv[k[1]]])

    def obj(z):
        b, r = math.exp(min(z[0], 0.0)), math.exp(min(z[1], 0.0))
        return float(phi_value(b * r, b, I, S, W))

    res = optimize.minimize(obj, start, method="L-BFGS-B", bounds=[(-40, 0), (-40, 0)],
                            options={"ftol": 1e-15, "gtol": 1e-12})
    candidates = [(float(vals[k]), math.exp(lv[k[0]]) * math.exp(lv[k[1]]), math.exp(lv[k[0]]))]
    b, r = math.exp(res.x[0]), math.exp(res.x[1])
    candidates.append((obj(res.x), b * r, b))
    # the two edges have closed-form minimizers
    if I > 0 and W > 0:
        a = min(1.0, W / math.sqrt(I))
        candidates.append((float(phi_value(a, a, I, S, W)), a, a))
    if I + S * S > 0 and S > 0:
        a = S * S / (I + S * S)
        candidates.append((float(phi_value(a, 1.0, I, S, W)), a, 1.0))
    phi, alpha, beta = min(candidates)
    return PhiMinimum(alpha, beta, phi, _classify(alpha, beta))


def hwsi_phi_min(target: TargetDensity, kernel: SteinKernel | None = None) -> PhiMinimum:
    f = _Inputs(target, kernel)
    I, S, W = f.get("I"), f.get("S"), f.get("W2")
    if f.diverged:
        raise ValueError("Phi needs finite I, S and W2; diverged: " + ", ".join(f.diverged))
    return minimize_phi(I, S, W)


# ---------------------------------------------------------------------------
# HWI against HSI on Gaussian-plus-spike mixtures


@dataclass(frozen=True)
class SweepRow:
    n: float
    a: float
    H: float
    I: float
    S2: float
    W2: float
    hwi_rhs: float
    hsi_rhs: float
    hsi_cap: float
    hwi_holds: bool
    hsi_holds: bool
    below_cap: bool

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


SWEEP_COLUMNS = ("n", "a", "H", "I", "S2", "W2", "hwi_rhs", "hsi_rhs", "hsi_cap",
                 "hwi_holds", "hsi_holds", "below_cap")


def counterexample_sweep(n_list: Sequence[float],
                         schedule: Callable[[float], float] | None = None) -> List[SweepRow]:
    """For each n, the mixture (1-a) N(0,1) + a N(0, 1/n^2) with a = schedule(n)."""
    schedule = schedule or (lambda n: n ** -0.5)
    rows = []
    for n in n_list:
        a = float(schedule(n))
        if not 0 <= a <= 1:
            raise ValueError("the schedule must take values in [0, 1]")
        target = mixture(float(n), a)
        hwi = verify("hwi", target)
        hsi = verify("hsi", target)
        ins = {**hwi.inputs, **hsi.inputs}
        S = ins["S"]
        cap = a * math.log1p(float(n) ** 2)
        tol = tolerance_for(cap)
        rows.append(SweepRow(float(n), a, ins["H"], ins["I"], S * S, ins["W2"], hwi.rhs, hsi.rhs,
                             cap, hwi.holds, hsi.holds, hsi.rhs <= cap + tol))
    return rows
