"""Combinatorial identity suites for the permutation sums.

The appendix-A checks enumerate every permutation of the source positions
and confirm the symmetry identities used to simplify the permutation sums.
The appendix-B checks build bosonic states on a small lattice of modes and
recover the combinatorial factors of the vacuum expectation values.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .errors import IdentityViolation, InvalidParameter
from .geometry import EmitterArray, position_derivatives, source_positions

APPENDIX_A_MAX_N = 7
A5_TOLERANCE = 1e-10


@dataclass
class CheckRecord:
    name: str
    tolerance: float
    deviation: float
    passed: bool
    detail: str = ""


@dataclass
class SuiteReport:
    suite: str
    checks: List[CheckRecord] = field(default_factory=list)
    factors: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, tolerance, deviation, detail=""):
        rec = CheckRecord(name, tolerance, float(deviation), bool(deviation <= tolerance), detail)
        self.checks.append(rec)
        if not rec.passed:
            raise IdentityViolation(f"{name} failed: deviation {deviation:.3e} > {tolerance:.1e} {detail}")
        return rec


def _inverse(sigma: Tuple[int, ...]) -> Tuple[int, ...]:
    inv = [0] * len(sigma)
    for j, k in enumerate(sigma):
        inv[k] = j
    return tuple(inv)


def appendix_a_identity_suite(n_sources: int, d: float, seed: int = 7) -> SuiteReport:
    """Enumerate all permutations and check the permutation-sum identities.

    A1: sum_j G(mu_sigma(j)) = sum_j G(mu_j) for G in {x, x^2, exp}
    A2: sum_j mu'_sigma(j) mu_sigma(j) = sum_j mu'_j mu_j
    A3: sum over sigma unchanged by sigma -> sigma^-1 for sum_j mu'_j (x_sigma(j) - mu_j)
    A4: ... which equals sum_sigma sum_j mu'_sigma(j) (x_j - mu_sigma(j))
    A5: sum_sigma sum_j mu_j mu_sigma(j) = 0 for centred positions

    A1-A4 must hold exactly: every side is a correctly rounded sum
    (``math.fsum``) of the same multiset of floating-point terms.
    """
    if n_sources > APPENDIX_A_MAX_N:
        raise InvalidParameter(f"appendix A suite enumerates N! terms; N <= {APPENDIX_A_MAX_N}")
    array = EmitterArray(n_sources, d, 1.0)
    mu = source_positions(array).tolist()
    mu_p = position_derivatives(n_sources).tolist()
    x = (np.asarray(mu) + np.random.default_rng(seed).normal(scale=d, size=n_sources)).tolist()
    n = n_sources
    report = SuiteReport("appendix_a")
    perms = list(itertools.permutations(range(n)))

    functions = {"x": lambda t: t, "x^2": lambda t: t * t, "exp": math.exp}
    reference = {name: math.fsum(g(m) for m in mu) for name, g in functions.items()}
    ref_a2 = math.fsum(mp * m for mp, m in zip(mu_p, mu))
    worst = {name: (0.0, None) for name in list(functions) + ["A2"]}
    for sigma in perms:
        for name, g in functions.items():
            dev = abs(math.fsum(g(mu[k]) for k in sigma) - reference[name])
            if dev > worst[name][0] or worst[name][1] is None:
                worst[name] = (dev, sigma)
        dev = abs(math.fsum(mu_p[k] * mu[k] for k in sigma) - ref_a2)
        if dev > worst["A2"][0] or worst["A2"][1] is None:
            worst["A2"] = (dev, sigma)
    for name in functions:
        dev, sigma = worst[name]
        report.add(f"A1[G={name}]", 0.0, dev, f"worst permutation {sigma}")
    report.add("A2", 0.0, worst["A2"][0], f"worst permutation {worst['A2'][1]}")

    lhs = math.fsum(mu_p[j] * (x[s[j]] - mu[j]) for s in perms for j in range(n))
    inv = math.fsum(mu_p[j] * (x[_inverse(s)[j]] - mu[j]) for s in perms for j in range(n))
    shifted = math.fsum(mu_p[s[j]] * (x[j] - mu[s[j]]) for s in perms for j in range(n))
    report.add("A3", 0.0, abs(lhs - inv), "sigma -> sigma^-1")
    report.add("A4", 0.0, abs(lhs - shifted), "shift of sigma off the integration variable")

    a5 = math.fsum(mu[j] * mu[s[j]] for s in perms for j in range(n))
    factorised = math.factorial(n - 1) * math.fsum(mu) * math.fsum(mu)
    scale = math.factorial(n - 1) * max(abs(m) for m in mu) ** 2 if n > 1 else 1.0
    scale = scale or 1.0
    report.add("A5", A5_TOLERANCE, abs(a5) / scale, f"scaled by (N-1)! max|mu|^2 = {scale:.3e}")
    report.add("A5[factorised]", A5_TOLERANCE, abs(a5 - factorised) / scale)
    return report


# -- bosonic lattice -------------------------------------------------------

State = Dict[Tuple[int, ...], float]


def _create(state: State, k: int) -> State:
    out: State = {}
    for occ, amp in state.items():
        new = list(occ)
        new[k] += 1
        key = tuple(new)
        out[key] = out.get(key, 0.0) + amp * math.sqrt(new[k])
    return out


def _annihilate(state: State, k: int) -> State:
    out: State = {}
    for occ, amp in state.items():
        if occ[k] == 0:
            continue
        new = list(occ)
        new[k] -= 1
        key = tuple(new)
        out[key] = out.get(key, 0.0) + amp * math.sqrt(occ[k])
    return out


def _number(state: State, k: int) -> State:
    return _create(_annihilate(state, k), k)


def _inner(bra: State, ket: State) -> float:
    return math.fsum(amp * ket.get(occ, 0.0) for occ, amp in bra.items())


def _excite(modes: int, ks) -> State:
    state: State = {tuple([0] * modes): 1.0}
    for k in ks:
        state = _create(state, k)
    return state


def appendix_b_vev_suite(n_photons: int, mode_grid: int = 4) -> SuiteReport:
    """Vacuum expectation values of mode-operator strings on a lattice of modes.

    B1: <0| prod_j b(x_j) prod_j b^dag(x'_j) |0> counts the permutations with
        x_j = x'_sigma(j).
    B2: <0| b(k')^n n(k'') b^dag(k)^n |0> = n! n when k = k' = k'', else 0.
    B3: the same with n(k'') n(k''') gives n! n^2.
    """
    n = int(n_photons)
    if not 1 <= n <= 4:
        raise InvalidParameter(f"appendix B suite supports 1 <= n <= 4, got {n}")
    if not 1 <= mode_grid <= 6:
        raise InvalidParameter(f"mode grid must have 1..6 modes, got {mode_grid}")
    m = mode_grid
    report = SuiteReport("appendix_b")
    stacked = {k: _excite(m, [k] * n) for k in range(m)}

    b2_dev = 0.0
    b2_factor = None
    for kp, kpp, k in itertools.product(range(m), repeat=3):
        value = _inner(stacked[kp], _number(stacked[k], kpp))
        expected = math.factorial(n) * n if kp == kpp == k else 0.0
        b2_dev = max(b2_dev, abs(value - expected))
        if kp == kpp == k:
            b2_factor = value
    report.add(f"B2[n={n}]", 1e-9 * math.factorial(n) * n, b2_dev)

    b3_dev = 0.0
    b3_factor = None
    for kp, k2, k3, k in itertools.product(range(m), repeat=4):
        value = _inner(stacked[kp], _number(_number(stacked[k], k3), k2))
        expected = math.factorial(n) * n * n if kp == k2 == k3 == k else 0.0
        b3_dev = max(b3_dev, abs(value - expected))
        if kp == k2 == k3 == k:
            b3_factor = value
    report.add(f"B3[n={n}]", 1e-9 * math.factorial(n) * n * n, b3_dev)

    tuples = list(itertools.product(range(m), repeat=n))
    states = {t: _excite(m, t) for t in tuples}
    exhaustive = len(tuples) <= 256
    b1_dev = 0.0
    for xs in tuples:
        partners = tuples if exhaustive else set(itertools.permutations(xs)) | {
            tuple((v + 1) % m for v in xs), tuples[0], tuples[-1]}
        for ys in partners:
            value = _inner(states[xs], states[ys])
            count = sum(all(xs[j] == ys[s[j]] for j in range(n)) for s in itertools.permutations(range(n)))
            b1_dev = max(b1_dev, abs(value - count))
    report.add(f"B1[n={n}]", 1e-9 * math.factorial(n), b1_dev,
               "all tuple pairs" if exhaustive else "rearrangements plus non-matching partners")
    report.factors = {"B2": float(b2_factor), "B3": float(b3_factor)}
    return report


def multiset_count(xs, ys) -> int:
    """Number of sigma with xs[j] == ys[sigma(j)]; product of occupation factorials."""
    cx, cy = Counter(xs), Counter(ys)
    if cx != cy:
        return 0
    return math.prod(math.factorial(v) for v in cx.values())
