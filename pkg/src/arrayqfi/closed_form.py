"""Closed-form QFI and QCRB for mutually independent (d >> s) sources.

Every value here is built from the same ingredient, the stretched position
derivatives ``xi * mu'_j`` weighted by a per-source photon-number second
moment.  QFI values carry units of 1/length^2 and the bound is
``1 / (repetitions * QFI)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Sequence, Union

import numpy as np

from .errors import (
    DegenerateArray,
    InvalidParameter,
    TruncationTooSmall,
    ZeroInformation,
)
from .geometry import Deformation, EmitterArray, position_derivatives, sum_sq_derivatives

TAIL_TOLERANCE = 1e-12
QCRB_CONVENTION = "qcrb = 1/(nu * qfi), qfi = 4 Var(G)"


class Method(str, Enum):
    SPE = "spe_closed"
    COHERENT_SERIES = "coherent_series"
    COHERENT_LATTICE = "coherent_lattice"
    COHERENT_LIMIT = "coherent_limit"
    THERMAL = "thermal_closed"
    ENTANGLED_ODD_EVEN = "entangled_odd_even"
    OPTIMAL = "optimal_noon"
    OVERLAP_ENUMERATE = "overlap_enumerate"
    OVERLAP_PERMANENT = "overlap_permanent"


@dataclass(frozen=True)
class QfiResult:
    value: float
    method: Method
    diagnostics: Dict[str, float] = field(default_factory=dict)
    convention: str = QCRB_CONVENTION

    def __post_init__(self):
        if not math.isfinite(self.value) or self.value < 0.0:
            raise InvalidParameter(f"QFI must be finite and >= 0, got {self.value}")


# -- source models ---------------------------------------------------------


@dataclass(frozen=True)
class Spe:
    name = "spe"


@dataclass(frozen=True)
class Coherent:
    """Coherent states of real amplitude ``r`` on every source.

    There is deliberately no phase field: the Fisher information does not
    depend on the per-source phases.
    """

    amplitude: float = 1.0
    truncation: int = 40
    name = "coherent"

    def __post_init__(self):
        if not math.isfinite(self.amplitude) or self.amplitude < 0.0:
            raise InvalidParameter(f"amplitude must be finite and >= 0, got {self.amplitude}")
        if int(self.truncation) != self.truncation or self.truncation < 1:
            raise InvalidParameter(f"truncation must be an integer >= 1, got {self.truncation}")


@dataclass(frozen=True)
class Thermal:
    mean_photons: Union[float, Sequence[float]] = 1.0
    name = "thermal"

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.mean_photons, dtype=float))
        if values.ndim != 1 or values.size == 0:
            raise InvalidParameter("mean_photons must be a number or a non-empty list")
        if not np.all(np.isfinite(values)) or np.any(values < 0.0):
            raise InvalidParameter(f"mean_photons must be finite and >= 0, got {values.tolist()}")

    def per_source(self, n_sources: int) -> np.ndarray:
        values = np.atleast_1d(np.asarray(self.mean_photons, dtype=float))
        if values.size == 1:
            return np.full(n_sources, values[0])
        if values.size != n_sources:
            raise InvalidParameter(
                f"mean_photons has {values.size} entries for an array of {n_sources} sources"
            )
        return values


@dataclass(frozen=True)
class EntangledOddEven:
    """``sqrt(p)|odd sources fire> + sqrt(1-p)|even sources fire>``."""

    weight: float = 0.5
    name = "entangled_odd_even"

    def __post_init__(self):
        if not (0.0 <= self.weight <= 1.0):
            raise InvalidParameter(f"weight p must lie in [0, 1], got {self.weight}")


@dataclass(frozen=True)
class OptimalNoon:
    name = "optimal"


SourceModel = Union[Spe, Coherent, Thermal, EntangledOddEven, OptimalNoon]


def _prefactor(array: EmitterArray, deformation: Deformation) -> float:
    return deformation.stretch ** 2 / array.sigma ** 2


# -- QFI per source class --------------------------------------------------


def qfi_spe(array: EmitterArray, deformation: Deformation) -> QfiResult:
    value = _prefactor(array, deformation) * sum_sq_derivatives(array.n_sources)
    return QfiResult(value, Method.SPE)


def _poisson_log_terms(r: float, n: np.ndarray) -> np.ndarray:
    from scipy.special import gammaln

    if r == 0.0:
        return np.where(n == 0, 0.0, -np.inf)
    return -r * r + 2.0 * n * math.log(r) - gammaln(n + 1.0)


def _poisson_tail_bound(r: float, n_max: int, power: int) -> float:
    """Upper bound on ``sum_{n > n_max} e^{-r^2} r^{2n} n^power / n!``.

    Past ``n_max`` consecutive terms shrink by at most
    ``rho = r^2/(n+1) * ((n+1)/n)^power``, so the tail is dominated by a
    geometric series.
    """
    if r == 0.0:
        return 0.0
    n = n_max + 1
    rho = r * r / (n + 1) * ((n + 1) / n) ** power
    if rho >= 1.0:
        return math.inf
    first = math.exp(float(_poisson_log_terms(r, np.array([float(n)]))[0]) + power * math.log(n))
    return first / (1.0 - rho)


def qfi_coherent_series(
    array: EmitterArray, deformation: Deformation, model: Coherent, lattice: bool = False
) -> QfiResult:
    """Truncated photon-number series for an array of coherent states.

    The N-fold sum over occupation vectors factorises per source: each term
    ``sum_k mu'_k^2 n_k^2`` only involves one source, and the remaining
    sources contribute their (truncated) total probability.  ``lattice=True``
    evaluates the literal N-fold sum instead; it is exponential in N and is
    only offered as a cross-check for N <= 3.
    """
    r = float(model.amplitude)
    n_max = int(model.truncation)
    n = np.arange(n_max + 1, dtype=float)
    weights = np.exp(_poisson_log_terms(r, n))
    mass = math.fsum(weights)
    second = math.fsum(weights * n * n)
    tail = _poisson_tail_bound(r, n_max, 2)
    if second > 0.0 and tail > TAIL_TOLERANCE * second:
        raise TruncationTooSmall(
            f"Poisson tail bound {tail:.3e} exceeds {TAIL_TOLERANCE:g} of the second moment "
            f"{second:.3e} at n_max={n_max}, r={r}"
        )
    mu_prime = position_derivatives(array.n_sources)
    n_sources = array.n_sources
    if lattice:
        if n_sources > 3:
            raise InvalidParameter("the lattice form is only offered for N <= 3")
        grids = np.meshgrid(*([n] * n_sources), indexing="ij")
        prob = np.ones_like(grids[0])
        moment = np.zeros_like(grids[0])
        for k, grid in enumerate(grids):
            prob = prob * weights[grid.astype(int)]
            moment = moment + mu_prime[k] ** 2 * grid ** 2
        total = math.fsum((prob * moment).ravel())
        method = Method.COHERENT_LATTICE
    else:
        total = math.fsum(mu_prime ** 2 * second * mass ** (n_sources - 1))
        method = Method.COHERENT_SERIES
    value = _prefactor(array, deformation) * total
    return QfiResult(
        value,
        method,
        {"poisson_second_moment": second, "poisson_mass": mass, "tail_bound": tail},
    )


def qfi_coherent_limit(array: EmitterArray, deformation: Deformation) -> QfiResult:
    """Coherent-state QFI at unit mean photon number (r^2 = 1): twice the SPE value."""
    value = _prefactor(array, deformation) * array.n_sources * (array.n_sources ** 2 - 1) / 6.0
    return QfiResult(value, Method.COHERENT_LIMIT)


def qfi_thermal(array: EmitterArray, deformation: Deformation, model: Thermal) -> QfiResult:
    nbar = model.per_source(array.n_sources)
    mu_prime = position_derivatives(array.n_sources)
    total = math.fsum(mu_prime ** 2 * nbar * (1.0 + 2.0 * nbar))
    return QfiResult(_prefactor(array, deformation) * total, Method.THERMAL)


def qfi_entangled_odd_even(
    array: EmitterArray, deformation: Deformation, model: EntangledOddEven
) -> QfiResult:
    if array.n_sources < 2:
        raise DegenerateArray("the odd/even entangled state needs at least two sources")
    sq = position_derivatives(array.n_sources) ** 2
    odd = math.fsum(sq[0::2])  # j = 1, 3, 5, ...
    even = math.fsum(sq[1::2])
    p = model.weight
    value = _prefactor(array, deformation) * (p * odd + (1.0 - p) * even)
    return QfiResult(value, Method.ENTANGLED_ODD_EVEN, {"odd_sum": odd, "even_sum": even})


def qfi_optimal(array: EmitterArray, deformation: Deformation) -> QfiResult:
    """NOON-like optimum ``xi^2 N^2 (N-1)^2 / (4 s^2)``.

    The momentum-moment oracle value is attached under ``oracle_noon``; the
    two are reported side by side and not reconciled here.
    """
    from .oracle import noon_branch_overlap, noon_variance_oracle

    n = array.n_sources
    if n < 2:
        warnings.warn("optimal state needs two distinct extremal sources; N=1 gives QFI 0")
        return QfiResult(0.0, Method.OPTIMAL, {"oracle_noon": 0.0})
    value = _prefactor(array, deformation) * n * n * (n - 1) ** 2 / 4.0
    oracle = noon_variance_oracle(array, deformation)
    diagnostics = {"oracle_noon": oracle, "branch_overlap": noon_branch_overlap(array, deformation)}
    if value > 0.0:
        diagnostics["oracle_ratio"] = oracle / value
    return QfiResult(value, Method.OPTIMAL, diagnostics)


def qfi_closed(array: EmitterArray, deformation: Deformation, model: SourceModel) -> QfiResult:
    """Dispatch on the source model."""
    if isinstance(model, Spe):
        return qfi_spe(array, deformation)
    if isinstance(model, Coherent):
        return qfi_coherent_series(array, deformation, model)
    if isinstance(model, Thermal):
        return qfi_thermal(array, deformation, model)
    if isinstance(model, EntangledOddEven):
        return qfi_entangled_odd_even(array, deformation, model)
    if isinstance(model, OptimalNoon):
        return qfi_optimal(array, deformation)
    raise InvalidParameter(f"unknown source model {model!r}")


def qcrb(qfi: QfiResult, repetitions: int = 1) -> float:
    if int(repetitions) != repetitions or repetitions < 1:
        raise InvalidParameter(f"repetitions must be an integer >= 1, got {repetitions}")
    if qfi.value <= 0.0:
        raise ZeroInformation("QFI is zero, the Cramer-Rao bound is unbounded")
    return 1.0 / (repetitions * qfi.value)


def ratio_summary(array: EmitterArray, deformation: Deformation) -> Dict[str, float]:
    """Each source class relative to the SPE array: 1/2, 1, 2, 3."""
    if array.n_sources < 2:
        raise DegenerateArray("ratios need N >= 2 (the SPE QFI vanishes at N = 1)")
    spe = qfi_spe(array, deformation).value
    if spe == 0.0:
        raise ZeroInformation("SPE QFI is zero (stretch = 0); ratios are undefined")
    return {
        "entangled_odd_even": qfi_entangled_odd_even(array, deformation, EntangledOddEven(0.5)).value / spe,
        "spe": 1.0,
        "coherent_limit": qfi_coherent_limit(array, deformation).value / spe,
        "thermal": qfi_thermal(array, deformation, Thermal(1.0)).value / spe,
    }
