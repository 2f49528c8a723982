"""Independent numerical checks for the analytic results.

Nothing here reuses the B/C machinery of the overlap engine: the fidelity
oracle differentiates the state overlap numerically, the series oracles sum
photon-number distributions term by term, and the NOON oracle builds the
generator variance from single-photon momentum moments.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateArray, EngineLimit, InvalidParameter, StepTooLarge, TruncationTooSmall
from .geometry import Deformation, EmitterArray, position_derivatives
from .permanent import permanent

ENUMERATE_MAX_N = 7
CROSS_PERMANENT_MAX_N = 20
TAIL_TOLERANCE = 1e-12
DEFAULT_STEPS = (1e-3, 5e-4, 2.5e-4)  # in units of sigma


def _log_cross_sum(a: np.ndarray, b: np.ndarray, sigma: float) -> float:
    """log sum_sigma prod_j exp[-(a_j - b_sigma(j))^2 / (8 s^2)]."""
    n = len(a)
    log_m = -((a[:, None] - b[None, :]) ** 2) / (8.0 * sigma ** 2)
    if n <= ENUMERATE_MAX_N:
        perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
        exponents = log_m[np.arange(n), perms].sum(axis=1)
        top = exponents.max()
        return top + math.log(math.fsum(np.exp(exponents - top)))
    if n <= CROSS_PERMANENT_MAX_N:
        return math.log(permanent(np.exp(log_m), compensated=True))
    raise EngineLimit(f"state overlap supports N <= {CROSS_PERMANENT_MAX_N}, got {n}")


def _log_overlap(array: EmitterArray, deformation: Deformation, d1: float, d2: float) -> float:
    c = deformation.stretch * position_derivatives(array.n_sources)
    a, b = c * d1, c * d2
    s = array.sigma
    return _log_cross_sum(a, b, s) - 0.5 * (_log_cross_sum(a, a, s) + _log_cross_sum(b, b, s))


def state_overlap(array: EmitterArray, deformation: Deformation, d1: float, d2: float) -> float:
    """<Psi(d1)|Psi(d2)> of the normalised N-photon state (real, in (0, 1])."""
    for d in (d1, d2):
        if not math.isfinite(d) or d <= 0.0:
            raise InvalidParameter(f"spacings must be finite and > 0, got {d}")
    if d1 == d2:
        return 1.0
    return math.exp(_log_overlap(array, deformation, d1, d2))


@dataclass(frozen=True)
class FidelityEstimate:
    base_spacing: float
    step: float
    fidelity: float
    qfi_estimate: float
    richardson_order: int
    raw_estimates: tuple = ()


def fidelity_qfi(
    array: EmitterArray, deformation: Deformation, steps: Sequence[float] | None = None
) -> FidelityEstimate:
    """QFI from the curvature of the fidelity, ``8 (1 - F) / delta^2``.

    F is taken between d - delta/2 and d + delta/2; that is even in delta, so
    the raw estimates carry errors in delta^2, delta^4, ... and are combined
    with a Richardson tableau over the step ladder (largest step first).
    ``steps`` are absolute lengths; the default ladder is (1e-3, 5e-4,
    2.5e-4) times sigma.
    """
    d = array.spacing
    if steps is None:
        steps = [f * array.sigma for f in DEFAULT_STEPS]
    steps = sorted((float(h) for h in steps), reverse=True)
    if len(steps) < 2:
        raise InvalidParameter("Richardson extrapolation needs at least two steps")
    if any(h <= 0.0 for h in steps):
        raise InvalidParameter("steps must be positive")
    if steps[0] >= d / 10.0:
        raise StepTooLarge(f"largest step {steps[0]} is not below spacing/10 = {d / 10.0}")

    raw = []
    fidelity = 1.0
    for h in steps:
        log_f = _log_overlap(array, deformation, d - h / 2.0, d + h / 2.0)
        fidelity = math.exp(log_f)
        raw.append(8.0 * -math.expm1(log_f) / (h * h))

    table = [raw]
    for level in range(1, len(steps)):
        prev = table[-1]
        row = []
        for i in range(len(prev) - 1):
            ratio = (steps[i] / steps[i + level]) ** (2 * level)
            row.append((ratio * prev[i + 1] - prev[i]) / (ratio - 1.0))
        table.append(row)
    estimate = table[-1][0]

    scale = max(abs(estimate), np.finfo(float).tiny)
    for lower, upper in zip(raw, raw[1:]):
        if abs(lower - upper) > 0.1 * scale:
            raise StepTooLarge(
                f"raw estimates {lower:.6g} and {upper:.6g} differ by more than 10% of {estimate:.6g}"
            )
    for level_rows in table[1:]:
        if abs(level_rows[0] - table[0][-1]) > 0.1 * scale:
            raise StepTooLarge("Richardson levels disagree by more than 10%")
    return FidelityEstimate(
        base_spacing=d,
        step=steps[-1],
        fidelity=fidelity,
        qfi_estimate=max(estimate, 0.0),
        richardson_order=2 * len(steps),
        raw_estimates=tuple(raw),
    )


def _series(first: float, ratio, n_max: int | None, label: str, power: int = 2) -> float:
    """Sum n^power t_n where t_0 = first and t_n = t_{n-1} * ratio(n).

    When ``n_max`` is None it is grown until the tail bound is met.
    """
    def tail_bound(terms_last: float, n: int) -> float:
        # t_{n+1} n+1^p / (t_n n^p) for all later n is at most this rho
        nxt = n + 1
        rho = ratio(nxt + 1) * ((nxt + 1) / nxt) ** power
        if rho >= 1.0:
            return math.inf
        return terms_last * ratio(nxt) * nxt ** power / (1.0 - rho)

    limit = n_max if n_max is not None else 10_000
    terms = []
    t = first
    for n in range(0, limit + 1):
        if n > 0:
            t *= ratio(n)
        terms.append(t * n ** power)
        if n_max is None and n >= 2 and t > 0.0:
            total = math.fsum(terms)
            if tail_bound(t, n) <= TAIL_TOLERANCE * total * 1e-2:
                return total
        if t == 0.0 and n > 0:
            break
    total = math.fsum(terms)
    bound = tail_bound(t, limit) if t > 0.0 else 0.0
    if bound > TAIL_TOLERANCE * max(total, np.finfo(float).tiny):
        raise TruncationTooSmall(f"{label}: tail bound {bound:.3e} at n_max={limit} exceeds tolerance")
    return total


def poisson_moment_oracle(r: float, n_max: int | None = None) -> float:
    """sum_n e^{-r^2} r^{2n} n^2 / n!  (closed form r^2 + r^4)."""
    if not math.isfinite(r) or r < 0.0:
        raise InvalidParameter(f"r must be finite and >= 0, got {r}")
    if r == 0.0:
        return 0.0
    r2 = r * r
    return _series(math.exp(-r2), lambda n: r2 / n, n_max, "poisson")


def thermal_series_oracle(nbar: float, n_max: int | None = None) -> float:
    """sum_n n^2 nbar^n / (1 + nbar)^{1+n}  (closed form nbar (1 + 2 nbar))."""
    if not math.isfinite(nbar) or nbar < 0.0:
        raise InvalidParameter(f"nbar must be finite and >= 0, got {nbar}")
    if nbar == 0.0:
        return 0.0
    q = nbar / (1.0 + nbar)
    return _series(1.0 / (1.0 + nbar), lambda n: q, n_max, "bose-einstein")


def _momentum_moments(sigma: float, order: int = 64):
    """First and second moments of a single photon's momentum, |phi(k)|^2 ~ exp(-2 s^2 k^2)."""
    y, wts = np.polynomial.hermite.hermgauss(order)
    k = y / (math.sqrt(2.0) * sigma)
    norm = wts.sum()
    return float(np.dot(wts, k) / norm), float(np.dot(wts, k * k) / norm)


def noon_variance_oracle(array: EmitterArray, deformation: Deformation) -> float:
    """4 Var(G) on (|N photons at source N> + |N photons at source 1>)/sqrt(2).

    The two branches are taken as orthogonal; see ``noon_branch_overlap``
    for the single-photon overlap that this neglects.
    """
    n = array.n_sources
    if n < 2:
        raise DegenerateArray("the NOON-like state needs two distinct extremal sources")
    m1, m2 = _momentum_moments(array.sigma)
    # N independent photons in one spatial mode: total momentum moments
    k1 = n * m1
    k2 = n * m2 + n * (n - 1) * m1 * m1
    mu_prime = position_derivatives(n)
    xi = deformation.stretch
    branches = (mu_prime[-1], mu_prime[0])
    mean = sum(0.5 * xi * mp * k1 for mp in branches)
    second = sum(0.5 * (xi * mp) ** 2 * k2 for mp in branches)
    return 4.0 * (second - mean * mean)


def noon_branch_overlap(array: EmitterArray, deformation: Deformation) -> float:
    """exp[-(mu_N - mu_1)^2 / (8 s^2)] for the stretched array."""
    span = deformation.stretch * (array.n_sources - 1) * array.spacing
    return math.exp(-(span ** 2) / (8.0 * array.sigma ** 2))
