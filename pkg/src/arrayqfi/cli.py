"""Command-line front end.

Subcommands: ``closed``, ``overlap``, ``sweep``, ``check`` and ``oracle``.
Exit codes: 0 ok, 1 check failure, 2 usage error, 3 domain or numeric
error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .closed_form import (
    Coherent,
    EntangledOddEven,
    OptimalNoon,
    QfiResult,
    Spe,
    Thermal,
    qcrb,
    qfi_closed,
    qfi_spe,
    ratio_summary,
)
from .errors import ArrayQfiError, IdentityViolation
from .estimator import CountingModel, cfi_quadrature, estimator_moments
from .geometry import Deformation, EmitterArray
from .identities import CheckRecord, appendix_a_identity_suite, appendix_b_vev_suite
from .oracle import (
    fidelity_qfi,
    noon_variance_oracle,
    poisson_moment_oracle,
    state_overlap,
    thermal_series_oracle,
)
from .overlap import Engine, EngineConfig, pair_overlap_matrix, perm_sum_norm, qfi_overlap

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_DOMAIN, EXIT_IO = 0, 1, 2, 3, 4
CONFIG_ENV = "QFI_ARRAY_CONFIG"
CSV_HEADER = "param,qfi,qcrb,model,method"
MODEL_CHOICES = ("spe", "coherent", "thermal", "entangled-odd-even", "optimal")
# QCRB order expected at every N of the model sweep, smallest bound first
SWEEP_MODELS = ("optimal", "thermal", "coherent", "spe", "entangled-odd-even")


class UsageError(Exception):
    pass


def fmt(x: float) -> str:
    """17 significant digits, '.' separator, independent of locale."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.16e" % x


def _bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def _float_list(text: str) -> List[float]:
    return [float(t) for t in str(text).split(",") if t.strip()]


def load_config(path: str) -> Dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment."""
    out: Dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


# -- argument parsing ------------------------------------------------------


def _geometry_flags(p: argparse.ArgumentParser, n_default=4, d_default=15.0):
    p.add_argument("--n", type=int, default=n_default, help="number of sources N")
    p.add_argument("--d", type=float, default=d_default, help="spacing d")
    p.add_argument("--sigma", type=float, default=0.3, help="Gaussian width s")
    p.add_argument("--stretch", type=float, default=1.0, help="stretch factor xi")


def _model_flags(p: argparse.ArgumentParser):
    p.add_argument("--amplitude", type=float, default=1.0, help="coherent amplitude r")
    p.add_argument("--truncation", type=int, default=40, help="coherent photon-number cutoff")
    p.add_argument("--mean-photons", type=_float_list, default=[1.0],
                   help="thermal mean photon number, shared or comma-separated per source")
    p.add_argument("--p", type=float, default=0.5, help="odd/even entanglement weight")


def _common_flags(p: argparse.ArgumentParser):
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--unit", choices=("um", "nm", "arb"), default="um",
                   help="length unit label; never changes the arithmetic")
    p.add_argument("--deterministic", action="store_true",
                   help="fixed reduction order; byte-identical reruns")
    p.add_argument("--config", help=f"key = value file (also ${CONFIG_ENV})")


def _engine_flags(p: argparse.ArgumentParser):
    p.add_argument("--engine", choices=[e.value for e in Engine], default=None)
    p.add_argument("--compensated", action="store_true", help="compensated summation in the permanent")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qfi-array", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("closed", help="closed-form QFI and QCRB for one source model")
    p.add_argument("--model", choices=MODEL_CHOICES, default="spe")
    _geometry_flags(p)
    _model_flags(p)
    p.add_argument("--repetitions", type=int, default=1)
    _common_flags(p)

    p = sub.add_parser("overlap", help="QFI of overlapping single-photon emitters")
    _geometry_flags(p, d_default=1.2)
    _engine_flags(p)
    p.add_argument("--repetitions", type=int, default=1)
    _common_flags(p)

    p = sub.add_parser("sweep", help="spacing or source-number sweep written to a file")
    p.add_argument("--variable", choices=("spacing", "n"), default="spacing")
    p.add_argument("--min", type=float, required=True)
    p.add_argument("--max", type=float, required=True)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--relative", action="store_true", help="spacing bounds in units of sigma")
    p.add_argument("--output", "-o", required=True)
    p.add_argument("--workers", type=int, default=1)
    _geometry_flags(p)
    _model_flags(p)
    _engine_flags(p)
    p.add_argument("--repetitions", type=int, default=1)
    _common_flags(p)

    p = sub.add_parser("check", help="run identity, engine and oracle suites")
    p.add_argument("--max-n", type=int, default=6)
    p.add_argument("--self-test-negate", action="store_true", help="inject a failing check")
    p.add_argument("--report", help="write the JSON report to this path")
    _common_flags(p)

    p = sub.add_parser("oracle", help="run one independent oracle")
    p.add_argument("--kind", required=True,
                   choices=("overlap-state", "fidelity", "poisson", "thermal", "noon", "cfi", "estimator"))
    _geometry_flags(p, d_default=1.0)
    p.add_argument("--d2", type=float, default=None, help="second spacing for overlap-state")
    p.add_argument("--steps", type=_float_list, default=None, help="fidelity steps (absolute)")
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--nbar", type=float, default=1.0)
    p.add_argument("--n-max", type=int, default=None)
    _common_flags(p)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    path = known.config or os.environ.get(CONFIG_ENV)
    if not path:
        return
    entries = load_config(path)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    known_dests = set()
    for sp in subparsers.choices.values():
        actions = {a.dest: a for a in sp._actions}
        known_dests.update(actions)
        defaults = {}
        for key, value in entries.items():
            action = actions.get(key)
            if action is None:
                continue
            if isinstance(action, argparse._StoreTrueAction):
                defaults[key] = _bool(value)
            else:
                defaults[key] = value  # argparse converts string defaults with the action type
        sp.set_defaults(**defaults)
    unknown = sorted(set(entries) - known_dests)
    if unknown:
        raise UsageError(f"unknown configuration keys: {', '.join(unknown)}")


# -- helpers ---------------------------------------------------------------


def _geometry(args, n=None, d=None):
    array = EmitterArray(args.n if n is None else n, args.d if d is None else d, args.sigma)
    return array, Deformation(args.stretch)


def _model(name: str, args):
    if name == "spe":
        return Spe()
    if name == "coherent":
        return Coherent(args.amplitude, args.truncation)
    if name == "thermal":
        means = args.mean_photons
        return Thermal(means[0] if len(means) == 1 else tuple(means))
    if name == "entangled-odd-even":
        return EntangledOddEven(args.p)
    if name == "optimal":
        return OptimalNoon()
    raise UsageError(f"unknown model {name}")


def _bound(result: QfiResult, repetitions: int) -> float:
    if result.value == 0.0:
        return math.inf
    return qcrb(result, repetitions)


def _record(param: float, result: QfiResult, model: str, repetitions: int) -> dict:
    return {
        "param": float(param),
        "qfi": result.value,
        "qcrb": _bound(result, repetitions),
        "model": model,
        "method": result.method.value,
    }


def _csv_line(rec: dict) -> str:
    return ",".join([fmt(rec["param"]), fmt(rec["qfi"]), fmt(rec["qcrb"]), rec["model"], rec["method"]])


def _json_value(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, dict):
        return {k: _json_value(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_value(v) for v in x]
    if isinstance(x, np.floating):
        return float(x)
    return x


def _dumps(obj) -> str:
    return json.dumps(_json_value(obj), sort_keys=True, indent=2) + "\n"


def _emit(text: str) -> None:
    sys.stdout.write(text)
    sys.stdout.flush()


# -- subcommands -----------------------------------------------------------


def cmd_closed(args) -> int:
    array, deformation = _geometry(args)
    result = qfi_closed(array, deformation, _model(args.model, args))
    rec = _record(array.n_sources, result, args.model, args.repetitions)
    if args.format == "json":
        rec.update(diagnostics=result.diagnostics, convention=result.convention, unit=args.unit,
                   qfi_unit=f"1/{args.unit}^2", param_name="n_sources")
        _emit(_dumps(rec))
    else:
        _emit(CSV_HEADER + "\n" + _csv_line(rec) + "\n")
    return EXIT_OK


def _engine_config(args) -> EngineConfig:
    engine = Engine(args.engine) if args.engine else None
    return EngineConfig(engine=engine, deterministic=True, compensated_sum=args.compensated)


def cmd_overlap(args) -> int:
    array, deformation = _geometry(args)
    result = qfi_overlap(array, deformation, _engine_config(args))
    rec = _record(array.spacing, result, "spe", args.repetitions)
    if args.format == "json":
        rec.update(diagnostics=result.diagnostics, unit=args.unit, param_name="spacing")
        _emit(_dumps(rec))
    else:
        diag = result.diagnostics
        _emit(CSV_HEADER + ",term_B,term_C,log_perm\n" + _csv_line(rec)
              + "," + ",".join(fmt(diag[k]) for k in ("term_B", "term_C", "norm_log")) + "\n")
    return EXIT_OK


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    grid: tuple
    sigma: float
    stretch: float
    spacing: float
    n_sources: int
    output: str
    fmt: str


def _sweep_grid(args) -> tuple:
    if not args.min < args.max:
        raise UsageError("sweep needs --min < --max")
    if args.variable == "spacing":
        steps = 200 if args.steps is None else args.steps
        if steps < 2:
            raise UsageError("sweep needs --steps >= 2")
        lo, hi = args.min, args.max
        if args.relative:
            lo, hi = lo * args.sigma, hi * args.sigma
        if lo <= 0.0:
            raise UsageError("spacing sweeps need --min > 0")
        return tuple(float(x) for x in np.linspace(lo, hi, steps))
    lo, hi = int(round(args.min)), int(round(args.max))
    if lo < 1 or lo != args.min or hi != args.max:
        raise UsageError("source-number sweeps need integer bounds >= 1")
    steps = hi - lo + 1 if args.steps is None else args.steps
    if steps < 2:
        raise UsageError("sweep needs --steps >= 2")
    return tuple(sorted({int(round(x)) for x in np.linspace(lo, hi, steps)}))


def _spacing_point(job):
    n, d, sigma, stretch, engine, compensated, reps = job
    result = qfi_overlap(EmitterArray(n, d, sigma), Deformation(stretch),
                         EngineConfig(engine=engine, compensated_sum=compensated))
    return [_record(d, result, "spe", reps)]


def _n_point(job):
    n, d, sigma, stretch, models, reps = job
    array, deformation = EmitterArray(n, d, sigma), Deformation(stretch)
    return [_record(n, qfi_closed(array, deformation, model), name, reps) for name, model in models]


def cmd_sweep(args) -> int:
    grid = _sweep_grid(args)
    if args.variable == "spacing":
        engine = Engine(args.engine) if args.engine else None
        jobs = [(args.n, d, args.sigma, args.stretch, engine, args.compensated, args.repetitions) for d in grid]
        worker = _spacing_point
    else:
        models = [(name, _model(name, args)) for name in SWEEP_MODELS]
        jobs = [(n, args.d, args.sigma, args.stretch, models, args.repetitions) for n in grid]
        worker = _n_point
    if args.workers > 1:
        # map() yields in submission order, so records stay ordered by grid index
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            points = list(pool.map(worker, jobs))
    else:
        points = [worker(job) for job in jobs]

    if args.format == "csv":
        lines = [CSV_HEADER] + [_csv_line(rec) for recs in points for rec in recs]
        text = "\n".join(lines) + "\n"
    else:
        payload = {
            "variable": args.variable,
            "unit": args.unit,
            "fixed": {"n_sources": args.n, "spacing": args.d, "sigma": args.sigma, "stretch": args.stretch},
            "points": [
                {"param": recs[0]["param"],
                 "models": {r["model"]: {"qfi": r["qfi"], "qcrb": r["qcrb"], "method": r["method"]} for r in recs}}
                for recs in points
            ],
        }
        text = _dumps(payload)
    try:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        sys.stderr.write(f"cannot write {args.output}: {exc}\n")
        return EXIT_IO
    return EXIT_OK


# -- check suite -----------------------------------------------------------


def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / scale


class _Collector:
    def __init__(self):
        self.records: List[CheckRecord] = []

    def add(self, name, tolerance, deviation, detail=""):
        passed = bool(deviation <= tolerance)
        self.records.append(CheckRecord(name, tolerance, float(deviation), passed, detail))

    def fail(self, name, detail):
        self.records.append(CheckRecord(name, 0.0, math.nan, False, detail))

    def report(self, name, value, detail=""):
        # informational entry; always passes
        self.records.append(CheckRecord(name, math.inf, float(value), True, detail))


def run_checks(max_n: int = 6, negate: bool = False) -> List[CheckRecord]:
    out = _Collector()
    for n in range(1, min(max_n, 7) + 1):
        try:
            for rec in appendix_a_identity_suite(n, 1.0 if n % 2 else 15.0).checks:
                out.records.append(CheckRecord(f"appendix_a[N={n}].{rec.name}", rec.tolerance,
                                               rec.deviation, rec.passed, rec.detail))
        except IdentityViolation as exc:
            out.fail(f"appendix_a[N={n}]", str(exc))
    for n in range(1, 5):
        try:
            report = appendix_b_vev_suite(n, 4)
            for rec in report.checks:
                out.records.append(CheckRecord(f"appendix_b.{rec.name}", rec.tolerance, rec.deviation,
                                               rec.passed, rec.detail))
            fact = math.factorial(n)
            out.add(f"appendix_b.factor_n!n[n={n}]", 1e-12, _rel(report.factors["B2"], fact * n))
            out.add(f"appendix_b.factor_n!n^2[n={n}]", 1e-12, _rel(report.factors["B3"], fact * n * n))
        except IdentityViolation as exc:
            out.fail(f"appendix_b[n={n}]", str(exc))

    enum_cfg, perm_cfg = EngineConfig(Engine.ENUMERATE), EngineConfig(Engine.PERMANENT_MINORS)
    for n in range(2, min(max_n, 7) + 1):
        worst = {"qfi": 0.0, "term_B": 0.0, "term_C": 0.0, "perm": 0.0}
        for ratio in (0.1, 0.5, 1.0, 2.0, 5.0):
            for xi in (1.0, 2.0):
                array, deformation = EmitterArray(n, ratio, 1.0), Deformation(xi)
                a = qfi_overlap(array, deformation, enum_cfg)
                b = qfi_overlap(array, deformation, perm_cfg)
                w = pair_overlap_matrix(array, deformation)
                worst["qfi"] = max(worst["qfi"], _rel(a.value, b.value))
                worst["term_B"] = max(worst["term_B"], _rel(a.diagnostics["term_B"], b.diagnostics["term_B"]))
                worst["term_C"] = max(worst["term_C"], _rel(a.diagnostics["term_C"], b.diagnostics["term_C"]))
                worst["perm"] = max(worst["perm"], _rel(perm_sum_norm(w, enum_cfg), perm_sum_norm(w, perm_cfg)))
        for key, dev in worst.items():
            out.add(f"engine_equivalence[N={n}].{key}", 1e-10, dev)

    expected = {"entangled_odd_even": 0.5, "spe": 1.0, "coherent_limit": 2.0, "thermal": 3.0}
    for n in range(2, 11):
        ratios = ratio_summary(EmitterArray(n, 15.0, 0.3), Deformation(2.0))
        out.add(f"ratio_summary[N={n}]", 1e-12, max(_rel(ratios[k], v) for k, v in expected.items()))

    for r in np.linspace(0.0, 2.0, 9):
        out.add(f"poisson_moment[r={r:g}]", 1e-10, abs(poisson_moment_oracle(r) - (r * r + r ** 4)))
    for nbar in np.linspace(0.0, 3.0, 7):
        out.add(f"thermal_series[nbar={nbar:g}]", 1e-10,
                abs(thermal_series_oracle(nbar) - nbar * (1.0 + 2.0 * nbar)))

    for n in range(2, min(max_n, 4) + 1):
        for ratio in (0.5, 1.0, 2.0):
            array, deformation = EmitterArray(n, ratio, 1.0), Deformation(1.0)
            try:
                est = fidelity_qfi(array, deformation).qfi_estimate
                out.add(f"fidelity_oracle[N={n},d/s={ratio:g}]", 1e-3,
                        _rel(est, qfi_overlap(array, deformation).value))
            except ArrayQfiError as exc:
                out.fail(f"fidelity_oracle[N={n},d/s={ratio:g}]", str(exc))

    for n in range(2, max(min(max_n, 6), 2) + 1):
        for xi in (1.0, 2.0):
            array, deformation = EmitterArray(n, 15.0, 0.3), Deformation(xi)
            cfi = cfi_quadrature(CountingModel(array, deformation))
            out.add(f"cfi_equals_qfi[N={n},xi={xi:g}]", 1e-6, _rel(cfi, qfi_spe(array, deformation).value))
        array = EmitterArray(n, 15.0, 0.3)
        bias, var = estimator_moments(array, Deformation(1.0))
        out.add(f"estimator_bias[N={n}]", 1e-12, abs(bias) / array.spacing)
        out.add(f"estimator_var_qfi[N={n}]", 1e-8, abs(var * qfi_spe(array, Deformation(1.0)).value - 1.0))

    for n in (2, 3, 4):
        array, deformation = EmitterArray(n, 15.0, 0.3), Deformation(2.0)
        closed = qfi_closed(array, deformation, OptimalNoon())
        out.report(f"noon_oracle_over_formula[N={n}]", closed.diagnostics["oracle_noon"] / closed.value,
                   "reported only")

    if negate:
        array, deformation = EmitterArray(4, 15.0, 0.3), Deformation(2.0)
        value = qfi_spe(array, deformation).value
        out.add("self_test_negate", 1e-12, _rel(-value, value), "injected fault")
    return out.records


def cmd_check(args) -> int:
    start = time.perf_counter()
    records = run_checks(args.max_n, args.self_test_negate)
    elapsed = time.perf_counter() - start
    failed = [r for r in records if not r.passed]
    payload = {
        "passed": not failed,
        "n_checks": len(records),
        "failed": [r.name for r in failed],
        "checks": [
            {"name": r.name, "tolerance": r.tolerance, "deviation": r.deviation, "passed": r.passed,
             "detail": r.detail}
            for r in records
        ],
    }
    if not args.deterministic:
        payload["elapsed_s"] = elapsed
    if args.format == "json":
        _emit(_dumps(payload))
    else:
        lines = [
            f"{'PASS' if r.passed else 'FAIL'} {r.name} tol={r.tolerance:.1e} dev={r.deviation:.3e}"
            + (f" ({r.detail})" if r.detail and not r.passed else "")
            for r in records
        ]
        lines.append(f"{len(records) - len(failed)}/{len(records)} checks passed")
        _emit("\n".join(lines) + "\n")
    if args.report:
        try:
            with open(args.report, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(_dumps(payload))
        except OSError as exc:
            sys.stderr.write(f"cannot write {args.report}: {exc}\n")
            return EXIT_IO
    if failed:
        sys.stderr.write("failing checks: " + ", ".join(r.name for r in failed) + "\n")
        return EXIT_CHECK
    return EXIT_OK


def cmd_oracle(args) -> int:
    kind = args.kind
    out: Dict[str, object] = {"kind": kind}
    if kind == "poisson":
        out.update(r=args.r, value=poisson_moment_oracle(args.r, args.n_max), closed_form=args.r ** 2 + args.r ** 4)
    elif kind == "thermal":
        nb = args.nbar
        out.update(nbar=nb, value=thermal_series_oracle(nb, args.n_max), closed_form=nb * (1.0 + 2.0 * nb))
    else:
        array, deformation = _geometry(args)
        if kind == "overlap-state":
            d2 = args.d if args.d2 is None else args.d2
            out.update(d1=args.d, d2=d2, value=state_overlap(array, deformation, args.d, d2))
        elif kind == "fidelity":
            est = fidelity_qfi(array, deformation, args.steps)
            out.update(value=est.qfi_estimate, fidelity=est.fidelity, step=est.step,
                       raw_estimates=list(est.raw_estimates), richardson_order=est.richardson_order,
                       engine=qfi_overlap(array, deformation).value)
        elif kind == "noon":
            closed = qfi_closed(array, deformation, OptimalNoon())
            out.update(value=noon_variance_oracle(array, deformation), formula=closed.value,
                       branch_overlap=closed.diagnostics["branch_overlap"])
        elif kind == "cfi":
            out.update(value=cfi_quadrature(CountingModel(array, deformation)),
                       qfi=qfi_spe(array, deformation).value)
        elif kind == "estimator":
            bias, var = estimator_moments(array, deformation)
            out.update(bias=bias, variance=var, qfi=qfi_spe(array, deformation).value)
    if args.format == "json":
        _emit(_dumps(out))
    else:
        keys = sorted(out)
        vals = [fmt(out[k]) if isinstance(out[k], float) else str(out[k]).replace(",", ";") for k in keys]
        _emit(",".join(keys) + "\n" + ",".join(vals) + "\n")
    return EXIT_OK


COMMANDS = {
    "closed": cmd_closed,
    "overlap": cmd_overlap,
    "sweep": cmd_sweep,
    "check": cmd_check,
    "oracle": cmd_oracle,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        sys.stderr.write(f"cannot read configuration: {exc}\n")
        return EXIT_IO
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except (ArrayQfiError, ValueError, ArithmeticError) as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return EXIT_DOMAIN
    except OSError as exc:
        sys.stderr.write(f"I/O error: {exc}\n")
        return EXIT_IO
