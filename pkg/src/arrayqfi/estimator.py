"""Photon-counting Fisher information and the SLD-based optimal estimator.

States of independent single-photon emitters live in the span of
``|Psi> = int f(x) a^dag(x)|0>`` and ``|X_j> = int f(x) x_j a^dag(x)|0>``.
Their Gram matrix follows from Gaussian moments (<Psi|X_j> = mu_j,
<X_j|X_k> = mu_j mu_k + s^2 delta_jk), so operators built from these vectors
are handled exactly as small matrices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateArray, InvalidParameter, QuadratureDivergence, UnsupportedStretch
from .geometry import (
    Deformation,
    EmitterArray,
    deformed_derivatives,
    deformed_positions,
    position_derivatives,
    source_positions,
    sum_sq_derivatives,
)

MIN_POINTS = 32
MIN_HALF_WIDTH = 8.0
REFINE_TOL = 1e-4


@dataclass(frozen=True)
class CountingModel:
    array: EmitterArray
    deformation: Deformation
    points: int = 64
    half_width: float = 10.0  # integration half-width in units of sigma

    def __post_init__(self):
        if self.points < MIN_POINTS:
            raise InvalidParameter(f"need at least {MIN_POINTS} quadrature points, got {self.points}")
        if self.half_width < MIN_HALF_WIDTH:
            raise InvalidParameter(f"half-width must be >= {MIN_HALF_WIDTH} sigma, got {self.half_width}")


def _gaussian(x, mean, sigma):
    # works for complex ``mean`` (complex-step differentiation)
    return np.exp(-((x - mean) ** 2) / (2.0 * sigma * sigma)) / math.sqrt(2.0 * math.pi * sigma * sigma)


def photon_count_pdf(model: CountingModel, positions) -> float:
    """Joint detection density prod_j |f(x_j, mu_j)|^2 of one photon per source."""
    x = np.asarray(positions, dtype=float)
    mu = deformed_positions(model.array, model.deformation)
    if x.shape != mu.shape:
        raise InvalidParameter(f"expected {len(mu)} detection positions, got shape {x.shape}")
    return float(np.prod(_gaussian(x, mu, model.array.sigma)))


def _source_cfi(model: CountingModel, j: int, points: int) -> float:
    array, xi = model.array, model.deformation.stretch
    s = array.sigma
    slope = xi * position_derivatives(array.n_sources)[j]
    centre = slope * array.spacing
    nodes, weights = np.polynomial.legendre.leggauss(points)
    half = model.half_width * s
    x = centre + half * nodes
    # d/dd of the marginal density by a complex step: exact to rounding,
    # with no hand-derived score function
    h = 1e-30 * max(array.spacing, 1.0)
    p = _gaussian(x, centre, s)
    dp = np.imag(_gaussian(x, slope * complex(array.spacing, h), s)) / h
    integrand = np.divide(dp * dp, p, out=np.zeros_like(p), where=p > 0.0)
    return float(half * np.dot(weights, integrand))


def cfi_contributions(model: CountingModel) -> np.ndarray:
    """Per-source classical Fisher information; the joint log-density is a sum over sources."""
    out = np.empty(model.array.n_sources)
    for j in range(model.array.n_sources):
        points = model.points
        coarse = _source_cfi(model, j, points)
        for _ in range(4):
            points *= 2
            fine = _source_cfi(model, j, points)
            diff = abs(fine - coarse)
            coarse = fine
            if diff <= 1e-13 * max(abs(fine), 1e-300):
                break
        if diff > REFINE_TOL * max(abs(fine), 1e-300):
            raise QuadratureDivergence(f"source {j + 1}: refinements differ by {diff:.3e}")
        out[j] = fine
    return out


def cfi_quadrature(model: CountingModel) -> float:
    return math.fsum(cfi_contributions(model))


# -- span of {|Psi>, |X_1>, ..., |X_N>} -----------------------------------


def _gram(means: np.ndarray, sigma: float) -> np.ndarray:
    n = len(means)
    g = np.empty((n + 1, n + 1))
    g[0, 0] = 1.0
    g[0, 1:] = g[1:, 0] = means
    g[1:, 1:] = np.outer(means, means) + sigma * sigma * np.eye(n)
    return g


def _expect(gram: np.ndarray, state: np.ndarray, *ops: np.ndarray) -> float:
    """<state| O_1 O_2 ... |state> for O_i = sum_ab A_ab |e_a><e_b|."""
    vec = gram @ state
    for op in reversed(ops):
        vec = gram @ (op @ vec)
    return float(state @ vec)


@dataclass(frozen=True)
class SldDescriptor:
    """L = 2(|Psi'><Psi| + |Psi><Psi'|), both vectors given by their coefficients
    over a basis with Gram matrix ``gram``."""

    gram: np.ndarray
    state: np.ndarray
    derivative: np.ndarray

    def matrix(self) -> np.ndarray:
        return 2.0 * (np.outer(self.derivative, self.state) + np.outer(self.state, self.derivative))

    def expectation(self) -> float:
        return _expect(self.gram, self.state, self.matrix())

    def second_moment(self) -> float:
        m = self.matrix()
        return _expect(self.gram, self.state, m, m)


def sld_pure(array: EmitterArray, deformation: Deformation) -> SldDescriptor:
    """SLD of the stretched SPE state over the orthogonal basis
    (|Psi>, |X_j> - mu_j |Psi>), whose Gram matrix is diag(1, s^2, ..., s^2)."""
    mu_prime = deformed_derivatives(array, deformation)
    s2 = array.sigma ** 2
    n = array.n_sources
    gram = np.diag(np.concatenate(([1.0], np.full(n, s2))))
    state = np.zeros(n + 1)
    state[0] = 1.0
    # d/dd f(x_j - mu_j) = f * (x_j - mu_j) mu_j' / (2 s^2)
    derivative = np.concatenate(([0.0], mu_prime / (2.0 * s2)))
    return SldDescriptor(gram, state, derivative)


def estimator_moments(array: EmitterArray, deformation: Deformation):
    """Bias and variance of ``O = d 1 + Q`` on the SPE state.

    Q = 12 / (xi^2 N (N^2-1)) sum_j mu_j' (|X_j><Psi| + |Psi><X_j| - 2 mu_j |Psi><Psi|)
    is written with the unstretched positions mu_j, so the check is only
    meaningful for xi = 1.
    """
    if deformation.stretch != 1.0:
        raise UnsupportedStretch("estimator moments are only defined for stretch = 1")
    n = array.n_sources
    if n < 2:
        raise DegenerateArray("the optimal estimator needs N >= 2")
    mu = source_positions(array)
    mu_prime = position_derivatives(n)
    kappa = 1.0 / (deformation.stretch ** 2 * sum_sq_derivatives(n))
    q = np.zeros((n + 1, n + 1))
    q[1:, 0] = q[0, 1:] = kappa * mu_prime
    q[0, 0] = -2.0 * kappa * math.fsum(mu_prime * mu)
    gram = _gram(mu, array.sigma)
    state = np.zeros(n + 1)
    state[0] = 1.0
    mean_q = _expect(gram, state, q)
    second_q = _expect(gram, state, q, q)
    d = array.spacing
    mean = d + mean_q
    second = d * d + 2.0 * d * mean_q + second_q
    return mean - d, second - mean * mean
