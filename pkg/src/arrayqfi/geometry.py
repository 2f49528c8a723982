"""Array geometry: source positions, stretched positions and their d-derivatives.

Sources are indexed 1..N and sit symmetrically about the array centre, so the
j-th expected position is ``(j - (N+1)/2) * d``.  A homogeneous stretch by a
factor ``xi`` multiplies every position by ``xi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter


@dataclass(frozen=True)
class EmitterArray:
    """N identical Gaussian emitters of width ``sigma`` spaced ``spacing`` apart."""

    n_sources: int
    spacing: float
    sigma: float

    def __post_init__(self):
        if isinstance(self.n_sources, bool) or int(self.n_sources) != self.n_sources:
            raise InvalidParameter(f"n_sources must be an integer, got {self.n_sources!r}")
        object.__setattr__(self, "n_sources", int(self.n_sources))
        if self.n_sources < 1:
            raise InvalidParameter(f"n_sources must be >= 1, got {self.n_sources}")
        for name in ("spacing", "sigma"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0.0:
                raise InvalidParameter(f"{name} must be finite and > 0, got {value}")
            object.__setattr__(self, name, value)

    def with_spacing(self, spacing: float) -> "EmitterArray":
        return EmitterArray(self.n_sources, spacing, self.sigma)


@dataclass(frozen=True)
class Deformation:
    """Homogeneous stretch about the array centre.

    Only the stretch factor itself enters the Fisher information (not
    ``stretch - 1``); ``stretch = 0`` collapses the array and carries no
    information, negative values would be a reflection and are rejected.
    """

    stretch: float = 1.0

    def __post_init__(self):
        value = float(self.stretch)
        if not math.isfinite(value) or value < 0.0:
            raise InvalidParameter(f"stretch must be finite and >= 0, got {value}")
        object.__setattr__(self, "stretch", value)


def position_derivatives(n_sources: int) -> np.ndarray:
    """Return ``mu'_j = j - (N+1)/2`` for j = 1..N (dimensionless, exact half-integers)."""
    if n_sources < 1:
        raise InvalidParameter(f"n_sources must be >= 1, got {n_sources}")
    return np.arange(1, n_sources + 1, dtype=float) - (n_sources + 1) / 2.0


def source_positions(array: EmitterArray) -> np.ndarray:
    # half-integer offsets are exact, so mu_j == -mu_{N+1-j} bit for bit
    return position_derivatives(array.n_sources) * array.spacing


def deformed_positions(array: EmitterArray, deformation: Deformation) -> np.ndarray:
    return deformation.stretch * source_positions(array)


def deformed_derivatives(array: EmitterArray, deformation: Deformation) -> np.ndarray:
    """d/dd of the stretched positions, ``xi * mu'_j``."""
    return deformation.stretch * position_derivatives(array.n_sources)


def sum_sq_derivatives(n_sources: int) -> float:
    """Closed form of ``sum_j mu'_j**2 = N (N^2 - 1) / 12``."""
    if n_sources < 1:
        raise InvalidParameter(f"n_sources must be >= 1, got {n_sources}")
    n = int(n_sources)
    return n * (n * n - 1) / 12.0


def symmetric_sum(values) -> float:
    """Sum ``values`` pairing element j with element N+1-j first.

    For positions that are symmetric about the centre each pair cancels
    exactly, so the result is exactly zero rather than a rounding residue.
    """
    values = np.asarray(values, dtype=float)
    n = len(values)
    total = 0.0
    for j in range(n // 2):
        total += values[j] + values[n - 1 - j]
    if n % 2:
        total += values[n // 2]
    return total
