"""Acceptance criteria 1-11, each reported as one PASS/FAIL line.

Run directly (``python3 tests/test_acceptance.py``) or under pytest, where
the lines are printed in the terminal summary.
"""
import csv
import io
import math
import time
import warnings

import numpy as np
import pytest

from arrayqfi import (
    CountingModel,
    Deformation,
    EmitterArray,
    Engine,
    EngineConfig,
    EntangledOddEven,
    Thermal,
    appendix_a_identity_suite,
    appendix_b_vev_suite,
    cfi_quadrature,
    estimator_moments,
    fidelity_qfi,
    poisson_moment_oracle,
    qfi_coherent_limit,
    qfi_entangled_odd_even,
    qfi_optimal,
    qfi_overlap,
    qfi_spe,
    qfi_thermal,
    thermal_series_oracle,
)
from arrayqfi.cli import SWEEP_MODELS, main
from arrayqfi.errors import ArrayQfiError

RESULTS = {}
ENUM = EngineConfig(Engine.ENUMERATE)
PERM = EngineConfig(Engine.PERMANENT_MINORS)


def rel(a, b):
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / scale


def record(number, passed, detail):
    RESULTS[number] = (bool(passed), detail)
    assert passed, f"criterion {number}: {detail}"


def criterion_1():
    start = time.perf_counter()
    worst = 0.0
    for n in range(2, 11):
        array, deformation = EmitterArray(n, 15.0, 0.3), Deformation(2.0)
        spe = qfi_spe(array, deformation).value
        values = (qfi_entangled_odd_even(array, deformation, EntangledOddEven(0.5)).value, spe,
                  qfi_coherent_limit(array, deformation).value, qfi_thermal(array, deformation, Thermal(1.0)).value)
        for value, ratio in zip(values, (0.5, 1.0, 2.0, 3.0)):
            worst = max(worst, rel(value / spe, ratio))
    elapsed = time.perf_counter() - start
    return worst <= 1e-12 and elapsed < 1.0, f"max ratio error {worst:.1e} (tol 1e-12), {elapsed:.3f}s (< 1s)"


def criterion_2():
    n, s, xi = 4, 0.3, 2.0
    value = qfi_spe(EmitterArray(n, 15.0, s), Deformation(xi)).value
    expected = xi ** 2 * n * (n * n - 1) / (12 * s * s)
    err = rel(value, expected)
    return err <= 1e-12, f"qfi_spe = {value:.12f}, rel error {err:.1e} (tol 1e-12)"


def criterion_3():
    result = qfi_optimal(EmitterArray(4, 15.0, 0.3), Deformation(2.0))
    oracle = result.diagnostics.get("oracle_noon", math.nan)
    ok = rel(result.value, 1600.0) <= 1e-12 and math.isfinite(oracle)
    return ok, (f"qfi_optimal = {result.value:.10g} (formula 1600); noon oracle = {oracle:.10g} "
                f"(ratio {oracle / result.value:.4f}, reported only)")


def criterion_4():
    start = time.perf_counter()
    s, xi = 0.3, 2.0
    grid = np.linspace(0.05, 4.0, 200)
    notes, ok = [], True
    for n in range(2, 6):
        values = np.array([qfi_overlap(EmitterArray(n, r * s, s), Deformation(xi), ENUM).value for r in grid])
        spe = qfi_spe(EmitterArray(n, 4 * s, s), Deformation(xi)).value
        final = values[-1]
        window = values[(grid > 0.2) & (grid < 1.5)]
        a = rel(final, spe) < 5e-3
        b = window.max() > final
        ok &= a and b
        notes.append(f"N={n}: d=4s off {rel(final, spe):.1e}, bump {window.max() / final:.3f}x")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 30.0
    return ok, "; ".join(notes) + f"; {elapsed:.1f}s (< 30s)"


def criterion_5():
    start = time.perf_counter()
    worst = 0.0
    for n in range(1, 8):
        for ratio in (0.1, 0.5, 1.0, 2.0, 5.0):
            for xi in (1.0, 2.0):
                array, deformation = EmitterArray(n, ratio, 1.0), Deformation(xi)
                worst = max(worst, rel(qfi_overlap(array, deformation, ENUM).value,
                                       qfi_overlap(array, deformation, PERM).value))
    elapsed = time.perf_counter() - start
    return worst <= 1e-10 and elapsed < 60.0, f"max rel diff {worst:.1e} (tol 1e-10), {elapsed:.1f}s (< 60s)"


def criterion_6():
    start = time.perf_counter()
    worst = 0.0
    for n in (2, 3, 4):
        for ratio in (0.5, 1.0, 2.0):
            array, deformation = EmitterArray(n, ratio, 1.0), Deformation(1.0)
            worst = max(worst, rel(fidelity_qfi(array, deformation).qfi_estimate,
                                   qfi_overlap(array, deformation).value))
    elapsed = time.perf_counter() - start
    return worst <= 1e-3 and elapsed < 30.0, f"max rel diff {worst:.1e} (tol 1e-3), {elapsed:.2f}s (< 30s)"


def criterion_7():
    start = time.perf_counter()
    worst = 0.0
    for n in range(2, 7):
        for xi in (1.0, 2.0):
            array, deformation = EmitterArray(n, 15.0, 0.3), Deformation(xi)
            worst = max(worst, rel(cfi_quadrature(CountingModel(array, deformation)),
                                   qfi_spe(array, deformation).value))
    elapsed = time.perf_counter() - start
    return worst <= 1e-6 and elapsed < 10.0, f"max rel diff {worst:.1e} (tol 1e-6), {elapsed:.2f}s (< 10s)"


def criterion_8():
    worst_bias = worst_var = 0.0
    for n in range(2, 7):
        array, deformation = EmitterArray(n, 15.0, 0.3), Deformation(1.0)
        bias, var = estimator_moments(array, deformation)
        worst_bias = max(worst_bias, abs(bias) / array.spacing)
        worst_var = max(worst_var, abs(var * qfi_spe(array, deformation).value - 1.0))
    ok = worst_bias <= 1e-12 and worst_var <= 1e-8
    return ok, f"max |bias|/d {worst_bias:.1e} (tol 1e-12), max |Var*QFI-1| {worst_var:.1e} (tol 1e-8)"


def criterion_9():
    p = max(abs(poisson_moment_oracle(r) - (r * r + r ** 4)) for r in np.linspace(0.0, 2.0, 41))
    t = max(abs(thermal_series_oracle(nb) - nb * (1 + 2 * nb)) for nb in np.linspace(0.0, 3.0, 61))
    return max(p, t) <= 1e-10, f"poisson max err {p:.1e}, thermal max err {t:.1e} (tol 1e-10)"


def criterion_10():
    try:
        a_worst = 0.0
        for n in range(1, 7):
            for d in (1.0, 15.0):
                report = appendix_a_identity_suite(n, d)
                for rec in report.checks:
                    if not rec.name.startswith("A5") and rec.deviation != 0.0:
                        return False, f"{rec.name} not exact at N={n}"
                    a_worst = max(a_worst, rec.deviation)
        b_worst = 0.0
        for n in range(1, 5):
            factors = appendix_b_vev_suite(n, 4).factors
            fact = math.factorial(n)
            b_worst = max(b_worst, rel(factors["B2"], fact * n), rel(factors["B3"], fact * n * n))
    except ArrayQfiError as exc:
        return False, str(exc)
    ok = a_worst <= 1e-10 and b_worst <= 1e-12
    return ok, f"A1-A4 exact, A5 scaled max {a_worst:.1e} (tol 1e-10); B factor max rel err {b_worst:.1e}"


def criterion_11(tmp_dir):
    out = tmp_dir / "ordering.csv"
    code = main(["sweep", "--variable", "n", "--min", "2", "--max", "10", "--sigma", "0.3", "--stretch", "2",
                 "-o", str(out), "--deterministic"])
    if code != 0:
        return False, f"sweep exited {code}"
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    by_n = {}
    for row in rows:
        by_n.setdefault(int(float(row["param"])), {})[row["model"]] = float(row["qcrb"])
    bad = [n for n, b in sorted(by_n.items()) if not all(b[x] < b[y] for x, y in zip(SWEEP_MODELS, SWEEP_MODELS[1:]))]
    detail = "ordering " + " < ".join(SWEEP_MODELS)
    if bad:
        b = by_n[bad[0]]
        detail += f" violated at N={bad}; N={bad[0]} qcrb: " + ", ".join(f"{m}={b[m]:.4g}" for m in SWEEP_MODELS)
    else:
        detail += " holds for N=2..10"
    return not bad, detail


@pytest.mark.parametrize("number", range(1, 11))
def test_criterion(number):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        record(number, *globals()[f"criterion_{number}"]())


def test_criterion_11(tmp_path):
    record(11, *criterion_11(tmp_path))


def summary_lines():
    return [f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}" for k, (ok, detail) in sorted(RESULTS.items())]


if __name__ == "__main__":
    import pathlib
    import tempfile

    for k in range(1, 12):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if k == 11:
                with tempfile.TemporaryDirectory() as tmp:
                    RESULTS[k] = criterion_11(pathlib.Path(tmp))
            else:
                RESULTS[k] = globals()[f"criterion_{k}"]()
    print("\n".join(summary_lines()))
