"""Command-line front end.

Every subcommand prints one JSON document ``{tool_version, config_echo,
reports, curves_path}`` on stdout and optionally writes a CSV. Exit codes:
0 when everything holds, 1 when some result is indeterminate or flagged,
2 for a violation or invalid input.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

import numpy as np
import sympy
import yaml

from . import __version__
from . import gamma_calculus as gc
from . import gauss_functionals as gf
from . import inequalities as ineq
from . import measures
from . import ou_semigroup as ou
from .functionals import stein_kernel_1d, summarize
from .ou_semigroup import format_float

EXIT_OK, EXIT_INDETERMINATE, EXIT_FAIL = 0, 1, 2
COMMANDS = ("compute", "verify", "evolve", "sweep", "gamma-calc", "functional", "clt",
            "concentration")
GAUSSIAN_KINDS = ("lsi", "hsi", "hsi_improved", "wsh", "talagrand", "hwi", "w2s", "tv_stein",
                  "pinsker")
CLI_KINDS = ineq.KINDS + ("general_hsi",)
FUNCTIONAL_OPS = ("summary", "ou", "gamma", "eigen", "stein-bound", "fourth-moment", "fisher-u",
                  "entropy-normal", "entropy-gamma")
DEFAULT_TIMES = "0:3:0.25"


class UsageError(Exception):
    """Bad flag values detected after parsing."""


# ---------------------------------------------------------------------------
# configuration


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steinlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}")
    sub.required = True

    def common(p):
        p.add_argument("--config", help="YAML file with a section per subcommand")
        p.add_argument("--seed", type=int, help="Monte Carlo seed (fallback: $STEINLAB_SEED)")
        p.add_argument("--out", help="CSV output path")
        p.add_argument("--report", help="also write the JSON report to this path")
        p.add_argument("--nodes", type=int, help="Gauss-Legendre order per evolution panel")
        p.add_argument("--truncation", type=float, help="quadrature window in standard deviations")
        p.add_argument("--tol", type=float, help="relative tolerance of inequality checks")
        p.add_argument("--samples", type=int, help="Monte Carlo sample count")

    def target(p):
        p.add_argument("--target", help="family descriptor, e.g. gaussian-scale:2 or mixture:10,0.1")
        p.add_argument("--reference", help="gaussian, gaussian:<var>, gamma:<p>, uniform, "
                                           "log-concave:<u>;<c>")

    p = sub.add_parser("compute", help="functionals of a target")
    common(p), target(p)
    p = sub.add_parser("verify", help="check inequalities on a target")
    common(p), target(p)
    p.add_argument("--kind", help="comma-separated kinds, or 'all'")
    p.add_argument("--t", type=float, help="time for entropy_decay")
    p.add_argument("--p", type=float, help="order for wp")
    p.add_argument("--covariance", type=float, help="covariance for hsi_cov")
    p = sub.add_parser("evolve", help="decay curves along the Ornstein-Uhlenbeck flow")
    common(p), target(p)
    p.add_argument("--times", help="comma list or start:stop:step")
    p.add_argument("--de-bruijn", dest="de_bruijn", action="store_true", default=None,
                   help="also integrate the Fisher information over time")
    p = sub.add_parser("sweep", help="HWI against HSI on the spiked mixture")
    common(p)
    p.add_argument("--n", help="comma-separated n values")
    p.add_argument("--workers", type=int, help="process pool size")
    p = sub.add_parser("gamma-calc", help="Gamma calculus and curvature criteria")
    common(p)
    p.add_argument("--diffusion", help="ou, laguerre:<p>, jacobi, log-concave:<u>")
    p.add_argument("--constants", help="rho,kappa,sigma for ou/laguerre/jacobi; c for log-concave")
    p.add_argument("--function", help="also print Gamma, Gamma_2, Gamma_3 of this function of x")
    p.add_argument("--draws", type=int, help="random test polynomials")
    p.add_argument("--degree", type=int, help="degree of test polynomials")
    p = sub.add_parser("functional", help="polynomial functionals of a Gaussian vector")
    common(p)
    p.add_argument("--F", dest="F", action="append", help="component polynomial (repeatable)")
    p.add_argument("--op", help=", ".join(FUNCTIONAL_OPS))
    p.add_argument("--alpha", type=float, help="exponent in B_F")
    p.add_argument("--p", type=float, help="gamma shape for entropy-gamma")
    p = sub.add_parser("clt", help="entropic CLT bound for weighted sums")
    common(p), target(p)
    p.add_argument("--weights", help="equal:<n> or a comma list")
    p.add_argument("--poincare", type=float, help="Poincare constant of the base law")
    p.add_argument("--bins", type=int, help="histogram bins when --out is given")
    p = sub.add_parser("concentration", help="moment growth against the Stein structure")
    common(p), target(p)
    p.add_argument("--law", help="gaussian, gamma-sum:<shape>,<n>, or omit to use --target")
    p.add_argument("--p", help="comma-separated moment orders")
    return parser


DEFAULTS: Dict[str, Dict[str, object]] = {
    "compute": {"target": "gaussian-scale:2"},
    "verify": {"target": "gaussian-scale:2", "kind": "all"},
    "evolve": {"target": "gaussian-scale:2", "times": DEFAULT_TIMES, "de_bruijn": False},
    "sweep": {"n": "100,1000,10000", "workers": 1},
    "gamma-calc": {"diffusion": "ou", "draws": 1000, "degree": 4},
    "functional": {"op": "summary", "alpha": 1.0, "samples": 1_000_000},
    "clt": {"target": "centered-gamma:3", "weights": "equal:100", "bins": 60,
            "samples": 100_000},
    "concentration": {"p": "2,4,8", "samples": 1_000_000},
}


def load_config(path: Optional[str], command: str) -> dict:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise UsageError(f"cannot read config {path!r}: {exc}")
    if not isinstance(data, dict):
        raise UsageError("config file must hold a mapping")
    merged = dict(data.get("common", {}) or {})
    merged.update(data.get(command, {}) or {})
    return {k.replace("-", "_"): v for k, v in merged.items()}


def resolve(args: argparse.Namespace) -> dict:
    """Flags override the config file, which overrides built-in defaults."""
    file_cfg = load_config(args.config, args.command)
    cfg = dict(DEFAULTS.get(args.command, {}))
    cfg.update(file_cfg)
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command"):
            cfg[k] = v
    if cfg.get("seed") is None:
        env = os.environ.get("STEINLAB_SEED")
        try:
            cfg["seed"] = int(env) if env else 0
        except ValueError:
            raise UsageError(f"STEINLAB_SEED must be an integer, got {env!r}")
    cfg["command"] = args.command
    return cfg


@contextlib.contextmanager
def quadrature_overrides(nodes=None, truncation=None, tol=None):
    saved = (ou.PANEL_ORDER, measures.TRUNCATION_SIGMAS, ineq.RELATIVE_TOLERANCE)
    try:
        if nodes is not None:
            if nodes < 2:
                raise UsageError("--nodes must be at least 2")
            ou.PANEL_ORDER = int(nodes)
        if truncation is not None:
            if truncation <= 0:
                raise UsageError("--truncation must be positive")
            measures.TRUNCATION_SIGMAS = float(truncation)
        if tol is not None:
            if tol <= 0:
                raise UsageError("--tol must be positive")
            ineq.RELATIVE_TOLERANCE = float(tol)
        yield
    finally:
        ou.PANEL_ORDER, measures.TRUNCATION_SIGMAS, ineq.RELATIVE_TOLERANCE = saved


# ---------------------------------------------------------------------------
# helpers


def _floats(text, name: str) -> List[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    if isinstance(text, (int, float)):
        return [float(text)]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--{name} expects comma-separated numbers, got {text!r}")


def parse_times(text) -> List[float]:
    if isinstance(text, str) and ":" in text:
        try:
            start, stop, step = (float(v) for v in text.split(":"))
        except ValueError:
            raise UsageError(f"--times expects start:stop:step, got {text!r}")
        if step <= 0:
            raise UsageError("--times step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(count)]
    times = _floats(text, "times")
    if any(t < 0 for t in times):
        raise UsageError("times must be nonnegative")
    return times


def make_target(cfg: dict):
    try:
        ref = measures.parse_reference(cfg.get("reference"))
        return measures.make_target(cfg["target"], ref)
    except (ValueError, KeyError, TypeError, IndexError) as exc:
        raise UsageError(f"bad target or reference: {exc}")


def _status_code(statuses: Sequence[str]) -> int:
    if any(s in ("violated", "failed", "error") for s in statuses):
        return EXIT_FAIL
    if any(s in ("indeterminate", "flagged") for s in statuses):
        return EXIT_INDETERMINATE
    return EXIT_OK


def _write_csv(path: str, columns: Sequence[str], rows: Sequence[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, str)) or v is None:
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return str(v)


# ---------------------------------------------------------------------------
# subcommands; each returns (reports, status list, curves path)


def cmd_compute(cfg):
    target = make_target(cfg)
    kernel = stein_kernel_1d(target)
    summary = summarize(target, kernel)
    report = {"target": target.tag, "kernel": kernel.provenance, **summary.to_json()}
    diverged = any(getattr(summary, k).diverged for k in ("H", "I", "S", "W2", "W1", "TV"))
    return [report], ["indeterminate" if diverged else "holds"], None


def _kinds(cfg, target) -> List[str]:
    text = cfg["kind"]
    kinds = list(text) if isinstance(text, (list, tuple)) else [k.strip() for k in str(text).split(",")]
    if kinds == ["all"]:
        kinds = list(GAUSSIAN_KINDS) if target.reference.kind == "gaussian" else ["general_hsi",
                                                                                  "w2s_general"]
    bad = [k for k in kinds if k not in CLI_KINDS]
    if bad:
        raise UsageError(f"unknown kind {', '.join(bad)}; choose from {', '.join(CLI_KINDS)} or all")
    return kinds


def cmd_verify(cfg):
    target = make_target(cfg)
    kinds = _kinds(cfg, target)
    options = {k: cfg[k] for k in ("t", "p", "covariance") if cfg.get(k) is not None}
    reports, statuses = [], []
    for kind in kinds:
        try:
            if kind == "general_hsi":
                rep = ineq.verify_general_hsi(target)
            else:
                rep = ineq.verify(kind, target, **options)
        except ValueError as exc:
            reports.append({"kind": kind, "status": "error", "holds": False, "note": str(exc)})
            statuses.append("error")
            continue
        reports.append(rep.to_json())
        statuses.append(rep.status)
    return reports, statuses, None


def cmd_evolve(cfg):
    target = make_target(cfg)
    times = parse_times(cfg["times"])
    rows = ou.decay_curves(target, times=times)
    reports, statuses = [], []
    for r in rows:
        bad = r.violations()
        reports.append({"t": r.t, "violations": bad, "S": r.S.value,
                        "bound_S": r.bounds["bound_S"], "status": "violated" if bad else "holds"})
        statuses.append("violated" if bad else "holds")
    if cfg.get("de_bruijn"):
        db = ou.de_bruijn_check(target)
        reports.append({"de_bruijn": {"H": db.H, "integral": db.integral, "small_t": db.small_t,
                                      "tail": db.tail, "residual": db.residual}})
    path = cfg.get("out")
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(ou.decay_csv(rows))
    return reports, statuses, path


def _sweep_one(n: float):
    return ineq.counterexample_sweep([n])[0]


def cmd_sweep(cfg):
    ns = _floats(cfg["n"], "n")
    if any(n <= 1 for n in ns):
        raise UsageError("sweep needs n > 1")
    workers = int(cfg.get("workers") or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, ns))
    else:
        rows = ineq.counterexample_sweep(ns)
    reports = [r.as_dict() for r in rows]
    statuses = ["holds" if r.hwi_holds and r.hsi_holds else "violated" for r in rows]
    path = cfg.get("out")
    if path:
        _write_csv(path, ineq.SWEEP_COLUMNS,
                   [[r.as_dict()[c] for c in ineq.SWEEP_COLUMNS] for r in rows])
    return reports, statuses, path


def _diffusion(text: str):
    name, _, arg = str(text).partition(":")
    if name == "ou":
        return gc.ou(), None
    if name == "laguerre":
        try:
            return gc.laguerre(Fraction(arg or "1")), None
        except (ValueError, ZeroDivisionError) as exc:
            raise UsageError(f"bad Laguerre shape: {exc}")
    if name == "jacobi":
        return gc.jacobi(), None
    if name == "log-concave":
        try:
            u = sympy.sympify(arg, locals={"x": gc.X})
        except (sympy.SympifyError, SyntaxError) as exc:
            raise UsageError(f"bad potential {arg!r}: {exc}")
        return None, u
    raise UsageError(f"unknown diffusion {text!r}; use ou, laguerre:<p>, jacobi or log-concave:<u>")


DEFAULT_CONSTANTS = {"ou": "1,1,1", "laguerre": "0.5,0.5,0.5", "jacobi": "1,1,0.5"}


def cmd_gamma_calc(cfg):
    diff, potential = _diffusion(cfg["diffusion"])
    name = str(cfg["diffusion"]).partition(":")[0]
    reports = []
    if potential is not None:
        consts = _floats(cfg.get("constants") or "0", "constants")
        if len(consts) != 1:
            raise UsageError("log-concave needs a single constant c")
        rep = gc.log_concave_conditions(potential, consts[0])
        reports.append(rep.to_json())
        status = "holds" if rep.passed else "failed"
        diff = gc.log_concave(potential)
    else:
        consts = _floats(cfg.get("constants") or DEFAULT_CONSTANTS[name], "constants")
        if len(consts) != 3:
            raise UsageError("--constants expects rho,kappa,sigma")
        rep = gc.check_criteria(diff, *consts, draws=int(cfg["draws"]), degree=int(cfg["degree"]),
                                seed=int(cfg["seed"]))
        reports.append(rep.to_json())
        status = "holds" if rep.passed else "failed"
    if cfg.get("function"):
        try:
            f = sympy.sympify(cfg["function"], locals={"x": gc.X})
        except (sympy.SympifyError, SyntaxError) as exc:
            raise UsageError(f"bad function: {exc}")
        reports.append({f"gamma{n}": str(gc.to_sympy(gc.iterated_gamma(diff, n, f)))
                        for n in (1, 2, 3)})
    return reports, [status], None


def _functional_vector(cfg):
    comps = cfg.get("F")
    if not comps:
        raise UsageError("functional needs at least one --F polynomial")
    if isinstance(comps, str):
        comps = [comps]
    try:
        return gf.as_vector(list(comps))
    except (ValueError, KeyError) as exc:
        raise UsageError(f"bad polynomial: {exc}")


def cmd_functional(cfg):
    op = cfg["op"]
    if op not in FUNCTIONAL_OPS:
        raise UsageError(f"unknown op {op!r}; choose from {', '.join(FUNCTIONAL_OPS)}")
    F = _functional_vector(cfg)
    samples, seed = int(cfg["samples"]), int(cfg["seed"])
    status = "holds"
    try:
        if op in ("summary", "ou", "gamma", "eigen"):
            rep = {"F": [str(p) for p in F]}
            if op in ("summary", "ou"):
                rep["LF"] = [str(gf.ou_apply(p)) for p in F]
            if op in ("summary", "gamma"):
                rep["gamma"] = [[str(g) for g in row] for row in gf.gamma_matrix(F)]
            if op in ("summary", "eigen"):
                rep["eigenvalues"] = [gf.eigen_check(p) for p in F]
            reports = [rep]
        elif op == "stein-bound":
            reports = [{"V2": gf.eigen_stein_bound(F, samples=samples, seed=seed).to_json()}]
        elif op == "fourth-moment":
            if len(F) != 1:
                raise UsageError("fourth-moment takes one component")
            V2, bound = gf.fourth_moment_bound(F[0], samples=samples, seed=seed)
            se = math.hypot(V2.std_error, bound.std_error)
            if V2.value > bound.value + 3 * se + 1e-12 * max(1.0, abs(bound.value)):
                status = "violated"
            reports = [{"V2": V2.to_json(), "bound": bound.to_json()}]
        elif op == "fisher-u":
            est = gf.fisher_U_bound(F, samples=samples, seed=seed)
            status = "flagged" if est.flagged else "holds"
            reports = [{"fisher_bound": est.to_json()}]
        elif op == "entropy-normal":
            b = gf.entropy_bound_normal(F, float(cfg["alpha"]), samples=samples, seed=seed)
            status = "flagged" if b.flagged else "holds"
            reports = [b.to_json()]
        else:
            if len(F) != 1 or cfg.get("p") is None:
                raise UsageError("entropy-gamma takes one component and --p")
            b = gf.entropy_bound_gamma(F[0], float(cfg["p"]), float(cfg["alpha"]),
                                       samples=samples, seed=seed)
            status = "flagged" if b.flagged or b.value is None else "holds"
            reports = [b.to_json()]
    except ValueError as exc:
        return [{"op": op, "status": "error", "note": str(exc)}], ["error"], None
    return reports, [status], None


def _weights(text) -> np.ndarray:
    if isinstance(text, str) and text.startswith("equal:"):
        try:
            n = int(text.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad weights {text!r}")
        if n < 1:
            raise UsageError("equal weights need n >= 1")
        return np.full(n, 1 / math.sqrt(n))
    return np.asarray(_floats(text, "weights"))


def cmd_clt(cfg):
    base = make_target(cfg)
    a = _weights(cfg["weights"])
    try:
        res = gf.sum_discrepancy_clt(base, a, poincare=cfg.get("poincare"))
    except ValueError as exc:
        raise UsageError(str(exc))
    path = cfg.get("out")
    if path:
        hist = gf.clt_histogram(base, a, samples=int(cfg["samples"]), seed=int(cfg["seed"]),
                                bins=int(cfg["bins"]))
        _write_csv(path, ("left", "right", "density"), hist)
    status = "indeterminate" if not math.isfinite(res.entropy_bound) else "holds"
    return [res.to_json()], [status], path


def _law(cfg):
    """(sampler, kernel, (shape, n) for gamma sums or None, label).

    An explicit law wins over --target; with neither the law is Gaussian."""
    law = cfg.get("law")
    if law is None and cfg.get("target"):
        target = make_target(cfg)
        kernel = stein_kernel_1d(target)
        return (lambda rng, m: ou.sample(target, m, rng)), kernel.function, None, target.tag
    if law is None or law == "gaussian":
        return gf.gaussian_sampler, (lambda x: np.ones_like(x)), None, "gaussian"
    name, _, arg = str(law).partition(":")
    if name == "gamma-sum":
        vals = _floats(arg, "law")
        if len(vals) != 2 or vals[0] <= 0 or vals[1] < 1:
            raise UsageError("gamma-sum expects <shape>,<n> with shape > 0 and n >= 1")
        shape, n = vals[0], int(vals[1])
        k = shape * n
        kernel = (lambda x: 1.0 + x / math.sqrt(k))
        return gf.gamma_sum_sampler(shape, n), kernel, (shape, n), f"gamma-sum({shape},{n})"
    raise UsageError(f"unknown law {law!r}; use gaussian or gamma-sum:<shape>,<n>")


def cmd_concentration(cfg):
    sampler, kernel, sum_info, label = _law(cfg)
    ps = _floats(cfg["p"], "p")
    if any(p < 1 for p in ps):
        raise UsageError("moment orders must be at least 1")
    samples, seed = int(cfg["samples"]), int(cfg["seed"])
    rows = gf.concentration_moments(sampler, lambda x: x, kernel, ps, samples, seed)
    x = sampler(np.random.default_rng(seed), samples)
    fit = gf.tail_exponent(x)
    columns = list(gf.MOMENT_COLUMNS)
    table = [[r.as_dict()[c] for c in gf.MOMENT_COLUMNS] for r in rows]
    extra = {}
    if sum_info is not None:
        shape, n = sum_info
        base = np.random.default_rng(seed + 1).gamma(shape, size=samples) - shape
        columns.append("sum_structure")
        for row, r in zip(table, rows):
            s_p = float(np.mean(np.abs(base / shape) ** r.p) ** (1 / r.p))
            row.append(gf.iid_sum_structure(r.p, n, s_p))
        extra["rosenthal_constant"] = "2p"
    report = {"law": label, "rows": [dict(zip(columns, row)) for row in table],
              "required_constant": gf.required_constant(rows),
              "tail_exponent": fit.exponent, "tail_scale": fit.scale, **extra}
    path = cfg.get("out")
    if path:
        _write_csv(path, columns, table)
    return [report], ["holds"], path


HANDLERS = {"compute": cmd_compute, "verify": cmd_verify, "evolve": cmd_evolve,
            "sweep": cmd_sweep, "gamma-calc": cmd_gamma_calc, "functional": cmd_functional,
            "clt": cmd_clt, "concentration": cmd_concentration}


# ---------------------------------------------------------------------------
# entry points


def run(argv: Optional[Sequence[str]] = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        cfg = resolve(args)
        with quadrature_overrides(cfg.get("nodes"), cfg.get("truncation"), cfg.get("tol")):
            reports, statuses, curves = HANDLERS[args.command](cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"steinlab: error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    echo = {k: v for k, v in cfg.items() if v is not None}
    doc = {"tool_version": __version__, "config_echo": _jsonable(echo),
           "reports": _jsonable(reports), "curves_path": curves}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    stdout.write(text)
    if cfg.get("report"):
        with open(cfg["report"], "w", encoding="utf-8") as fh:
            fh.write(text)
    return _status_code(statuses)


def main(argv: Optional[Sequence[str]] = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
