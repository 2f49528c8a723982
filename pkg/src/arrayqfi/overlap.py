"""Exact QFI of overlapping single-photon emitters.

When the source envelopes overlap, photons from different sources share one
field and the normalisation, <Psi|Psi'> and <Psi'|Psi'> all become sums over
permutations sigma of the sources.  Each permutation carries the weight

    w_sigma = prod_l exp[-(mu_l - mu_sigma(l))^2 / (8 s^2)] = prod_l W[l, sigma(l)],

which is the textbook weight exp[sum_l mu_l mu_sigma(l) / (4 s^2)] divided by
the sigma-independent factor exp[sum_l mu_l^2 / (4 s^2)].  Ratios of
permutation sums are unchanged by that rescaling, and every W entry lies in
(0, 1], so nothing overflows for d >> s; the identity permutation keeps the
normalisation >= 1.

Per permutation we need three single-assignment sums (``u``, ``v``, ``D``)
and the product ``u v``.  The enumeration engine walks the permutations in
Heap order, updating the weight and the sums in the two positions that
change.  The permanent engine instead writes each sum as a contraction with
first minors (single fixed assignment) or second minors (two fixed
assignments) of W.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional

import numpy as np

from .closed_form import Method, QfiResult
from .errors import EngineLimit, NumericalBreakdown
from .geometry import Deformation, EmitterArray, deformed_derivatives, deformed_positions
from .permanent import heap_swaps, permanent, permanent_minors

ENUMERATE_MAX_N = 11
AUTO_ENUMERATE_MAX_N = 7
CLAMP_SLACK = 1e-9
_RESYNC_EVERY = 64


class Engine(str, Enum):
    ENUMERATE = "enumerate"
    PERMANENT_MINORS = "permanent"


@dataclass(frozen=True)
class EngineConfig:
    engine: Optional[Engine] = None  # None: enumerate for N <= 7, permanent minors above
    deterministic: bool = True
    compensated_sum: bool = False

    def resolve(self, n_sources: int) -> Engine:
        engine = self.engine
        if engine is None:
            engine = Engine.ENUMERATE if n_sources <= AUTO_ENUMERATE_MAX_N else Engine.PERMANENT_MINORS
        engine = Engine(engine)
        if engine is Engine.ENUMERATE and n_sources > ENUMERATE_MAX_N:
            raise EngineLimit(
                f"the enumeration engine is limited to N <= {ENUMERATE_MAX_N}, got N = {n_sources}"
            )
        return engine


@dataclass(frozen=True)
class PairOverlapMatrix:
    dim: int
    entries: np.ndarray
    log_entries: np.ndarray


def pair_overlap_matrix(array: EmitterArray, deformation: Deformation) -> PairOverlapMatrix:
    mu = deformed_positions(array, deformation)
    diff = mu[:, None] - mu[None, :]
    log_w = -(diff * diff) / (8.0 * array.sigma ** 2)
    w = np.exp(log_w)
    w[w < np.finfo(float).tiny] = 0.0  # flush subnormals
    np.fill_diagonal(w, 1.0)
    np.fill_diagonal(log_w, 0.0)
    return PairOverlapMatrix(array.n_sources, w, log_w)


def perm_sum_norm(w: PairOverlapMatrix, config: EngineConfig = EngineConfig()) -> float:
    """sum_sigma prod_j W[j, sigma(j)], i.e. perm(W)."""
    engine = config.resolve(w.dim)
    if engine is Engine.ENUMERATE:
        return _enumerate(w, np.zeros(w.dim), np.zeros(w.dim), np.zeros(w.dim), config)["S0"]
    return permanent(w.entries, compensated=config.compensated_sum)


class _Accumulator:
    def __init__(self, compensated: bool):
        self.compensated = compensated
        self.items = [] if compensated else None
        self.total = 0.0

    def add(self, x: float):
        if self.compensated:
            self.items.append(x)
        else:
            self.total += x

    def value(self) -> float:
        return math.fsum(self.items) if self.compensated else self.total


def _assignment_tables(mu: np.ndarray, mu_prime: np.ndarray):
    """Per (row j, column a) contributions to u, v and D."""
    alpha = mu_prime[:, None] * (mu[None, :] - mu[:, None]) / 2.0
    beta = mu_prime[None, :] * (mu[:, None] - mu[None, :]) / 2.0
    delta = mu_prime[:, None] * mu_prime[None, :]
    return alpha, beta, delta


def _enumerate(w: PairOverlapMatrix, mu, mu_prime, _unused, config: EngineConfig) -> Dict[str, float]:
    n = w.dim
    log_w = w.log_entries.tolist()
    alpha, beta, delta = (t.tolist() for t in _assignment_tables(mu, mu_prime))
    sigma = list(range(n))

    def exact():
        lw = u = v = dd = 0.0
        for j in range(n):
            a = sigma[j]
            lw += log_w[j][a]
            u += alpha[j][a]
            v += beta[j][a]
            dd += delta[j][a]
        return lw, u, v, dd

    acc = {k: _Accumulator(config.compensated_sum) for k in ("S0", "Su", "Sv", "Suv", "SD")}

    def record(lw, u, v, dd):
        weight = math.exp(lw)
        acc["S0"].add(weight)
        acc["Su"].add(weight * u)
        acc["Sv"].add(weight * v)
        acc["Suv"].add(weight * u * v)
        acc["SD"].add(weight * dd)

    lw, u, v, dd = exact()
    record(lw, u, v, dd)
    for step, (p, q) in enumerate(heap_swaps(n), start=1):
        ap, aq = sigma[p], sigma[q]
        # two-factor update: rows p and q exchange their columns
        lw += log_w[p][aq] + log_w[q][ap] - log_w[p][ap] - log_w[q][aq]
        u += alpha[p][aq] + alpha[q][ap] - alpha[p][ap] - alpha[q][aq]
        v += beta[p][aq] + beta[q][ap] - beta[p][ap] - beta[q][aq]
        dd += delta[p][aq] + delta[q][ap] - delta[p][ap] - delta[q][aq]
        sigma[p], sigma[q] = aq, ap
        if step % _RESYNC_EVERY == 0:
            lw, u, v, dd = exact()  # bound the drift of the running sums
        record(lw, u, v, dd)
    return {k: a.value() for k, a in acc.items()}


def _minors(w: PairOverlapMatrix, mu, mu_prime, config: EngineConfig) -> Dict[str, float]:
    entries = w.entries
    alpha, beta, delta = _assignment_tables(mu, mu_prime)
    perm, first, second = permanent_minors(entries)
    if config.compensated_sum:
        perm = permanent(entries, compensated=True)
    # sum over sigma with sigma(j) = a fixed: W[j, a] * perm(minor j, a)
    fixed = entries * first
    s_u = float(np.sum(fixed * alpha))
    s_v = float(np.sum(fixed * beta))
    s_d = float(np.sum(fixed * delta))
    # u*v = sum_j alpha[j, sj] beta[j, sj] + sum_{j != l} alpha[j, sj] beta[l, sl];
    # the second part needs two fixed assignments (j -> a, l -> b) with a != b,
    # whose remaining weight is W[j, a] W[l, b] perm(minor {j, l}, {a, b}).
    # Entries with j == l or a == b are zero in ``second``.
    s_uv = float(np.sum(fixed * alpha * beta))
    s_uv += float(np.einsum("ja,lb,jlab->", entries * alpha, entries * beta, second))
    return {"S0": perm, "Su": s_u, "Sv": s_v, "Suv": s_uv, "SD": s_d}


def _permutation_sums(array: EmitterArray, deformation: Deformation, config: EngineConfig):
    engine = config.resolve(array.n_sources)
    w = pair_overlap_matrix(array, deformation)
    mu = deformed_positions(array, deformation)
    mu_prime = deformed_derivatives(array, deformation)
    if engine is Engine.ENUMERATE:
        sums = _enumerate(w, mu, mu_prime, None, config)
    else:
        sums = _minors(w, mu, mu_prime, config)
    if not math.isfinite(sums["S0"]) or sums["S0"] <= 0.0:
        raise NumericalBreakdown(f"permutation normalisation is {sums['S0']!r}")
    return engine, mu, mu_prime, sums


def _terms(array, mu, mu_prime, sums):
    s2 = array.sigma ** 2
    norm = sums["S0"]
    u = sums["Su"] / norm
    v = sums["Sv"] / norm
    uv = sums["Suv"] / norm
    dd = sums["SD"] / norm
    p = math.fsum(mu_prime * mu)
    term_b = (p + u) / (2.0 * s2)
    term_c = (s2 * dd + p * p + p * (u + v) + uv) / (4.0 * s2 * s2)
    # 4 (C - B^2) with the large P^2 pieces cancelled analytically
    centred = (uv - u * v + s2 * dd) / (s2 * s2)
    # per-permutation bound on the pieces cancelled in ``centred``; round-off
    # is relative to it, not to the (possibly much smaller) result
    alpha, beta, delta = _assignment_tables(mu, mu_prime)
    n = len(mu)
    bound = n * n * np.abs(alpha).max() * np.abs(beta).max() + s2 * n * np.abs(delta).max()
    scale = 4.0 * max(abs(term_c), bound / (s2 * s2))
    return term_b, term_c, centred, scale


def term_b(array: EmitterArray, deformation: Deformation, config: EngineConfig = EngineConfig()) -> float:
    _, mu, mu_prime, sums = _permutation_sums(array, deformation, config)
    return _terms(array, mu, mu_prime, sums)[0]


def term_c(array: EmitterArray, deformation: Deformation, config: EngineConfig = EngineConfig()) -> float:
    _, mu, mu_prime, sums = _permutation_sums(array, deformation, config)
    return _terms(array, mu, mu_prime, sums)[1]


def qfi_overlap(
    array: EmitterArray, deformation: Deformation, config: EngineConfig = EngineConfig()
) -> QfiResult:
    """QFI 4 (C - |B|^2) of N overlapping single-photon emitters.

    The value is evaluated in centred form, which is algebraically identical
    to 4 (C - B^2) but avoids subtracting two numbers of size (d I)^2.
    """
    engine, mu, mu_prime, sums = _permutation_sums(array, deformation, config)
    b, c, value, scale = _terms(array, mu, mu_prime, sums)
    if value < 0.0:
        if value >= -CLAMP_SLACK * max(scale, np.finfo(float).tiny):
            warnings.warn(f"clamping slightly negative overlap QFI {value:.3e} to 0")
            value = 0.0
        else:
            raise NumericalBreakdown(f"overlap QFI {value:.6e} is negative beyond round-off")
    method = Method.OVERLAP_ENUMERATE if engine is Engine.ENUMERATE else Method.OVERLAP_PERMANENT
    return QfiResult(
        value,
        method,
        {
            "term_B": b,
            "term_C": c,
            "qfi_from_terms": 4.0 * (c - b * b),
            "norm_log": math.log(sums["S0"]),
        },
    )
