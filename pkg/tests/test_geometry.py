import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from arrayqfi import (
    Deformation,
    EmitterArray,
    InvalidParameter,
    deformed_positions,
    position_derivatives,
    source_positions,
    sum_sq_derivatives,
)


@pytest.mark.parametrize(
    "n, d, expected",
    [(4, 15.0, [-22.5, -7.5, 7.5, 22.5]), (1, 5.0, [0.0]), (3, 2.0, [-2.0, 0.0, 2.0])],
)
def test_source_positions(n, d, expected):
    assert source_positions(EmitterArray(n, d, 1.0)).tolist() == expected


def test_deformed_positions_examples():
    array = EmitterArray(4, 15.0, 1.0)
    assert deformed_positions(array, Deformation(2.0)).tolist() == [-45.0, -15.0, 15.0, 45.0]
    assert np.array_equal(deformed_positions(array, Deformation(1.0)), source_positions(array))
    assert not deformed_positions(array, Deformation(0.0)).any()


@pytest.mark.parametrize("n, expected", [(2, [-0.5, 0.5]), (5, [-2, -1, 0, 1, 2])])
def test_position_derivatives(n, expected):
    assert position_derivatives(n).tolist() == expected


@pytest.mark.parametrize("n, expected", [(1, 0.0), (4, 5.0), (10, 82.5)])
def test_sum_sq_derivatives(n, expected):
    assert sum_sq_derivatives(n) == expected


@pytest.mark.parametrize("n", range(1, 51))
def test_sum_sq_matches_direct_sum(n):
    assert sum_sq_derivatives(n) == math.fsum(position_derivatives(n) ** 2)


@given(st.integers(1, 40), st.floats(1e-3, 1e3), st.just(0.0) | st.floats(1e-6, 10.0))
def test_centred_and_homogeneous(n, d, xi):
    array = EmitterArray(n, d, 1.0)
    mu = source_positions(array)
    assert math.fsum(mu) == 0.0
    assert math.fsum(position_derivatives(n)) == 0.0
    gaps = np.diff(deformed_positions(array, Deformation(xi)))
    assert np.allclose(gaps, xi * d, rtol=1e-12, atol=0.0)


@pytest.mark.parametrize(
    "kwargs",
    [dict(n_sources=0, spacing=1.0, sigma=1.0), dict(n_sources=2, spacing=0.0, sigma=1.0),
     dict(n_sources=2, spacing=1.0, sigma=-1.0), dict(n_sources=2, spacing=math.inf, sigma=1.0),
     dict(n_sources=2, spacing=1.0, sigma=math.nan)],
)
def test_invalid_array(kwargs):
    with pytest.raises(InvalidParameter):
        EmitterArray(**kwargs)


@pytest.mark.parametrize("xi", [-0.5, math.inf, math.nan])
def test_invalid_stretch(xi):
    with pytest.raises(InvalidParameter):
        Deformation(xi)
