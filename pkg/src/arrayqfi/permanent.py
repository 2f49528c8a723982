"""Matrix permanents and permutation enumeration.

``permanent`` uses Ryser's inclusion-exclusion formula

    perm(A) = (-1)^n sum_{S subset of columns} (-1)^|S| prod_i sum_{j in S} a_ij

with the column subsets walked in Gray-code order.  Subsets are split into
a low block of columns, whose row sums are tabulated once, and a high block
walked by the Gray code; each Gray step then evaluates a whole low block with
one vectorised product.  Blocks are reduced in a fixed order, so results do
not depend on anything but the input.

``permanent_minors`` differentiates the same sum with respect to matrix
entries.  Because the permanent is multilinear, d perm / d a_jk is the
permanent of the (j, k) minor, and the second derivative with respect to
a_ja, a_lb is the permanent with rows j, l and columns a, b removed.
"""
from __future__ import annotations

import itertools
import math
from typing import Iterator, Tuple

import numpy as np

from .errors import DimensionLimit

MAX_DIM = 25
MAX_MINORS_DIM = 20
_LOW_BITS = 12


def _check_square(matrix) -> np.ndarray:
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def _subset_table(n_bits: int) -> np.ndarray:
    """0/1 membership table of all 2^n_bits subsets, row s = binary digits of s."""
    s = np.arange(1 << n_bits, dtype=np.int64)
    return ((s[:, None] >> np.arange(n_bits)) & 1).astype(float)


def gray_code_flips(n_bits: int) -> Iterator[Tuple[int, bool]]:
    """Yield (bit, now_set) for each step of the reflected binary Gray code.

    Starts from the empty set and visits all 2^n_bits - 1 non-empty subsets,
    flipping exactly one bit per step.
    """
    prev = 0
    for k in range(1, 1 << n_bits):
        g = k ^ (k >> 1)
        changed = g ^ prev
        bit = changed.bit_length() - 1
        yield bit, bool(g & changed)
        prev = g


def _ryser_blocks(a: np.ndarray):
    """Yield (row_sums, signs, membership) for consecutive blocks of column subsets.

    ``signs`` already include the global (-1)^n factor.  Every subset of the
    n columns appears exactly once over all blocks.
    """
    n = a.shape[0]
    low = min(n, _LOW_BITS)
    high = n - low
    low_table = _subset_table(low)
    low_rows = low_table @ a[:, :low].T  # (2^low, n)
    low_sizes = low_table.sum(axis=1)
    base_sign = (-1.0) ** n * np.where(low_sizes % 2 == 0, 1.0, -1.0)

    high_member = np.zeros(high)
    high_rowsum = np.zeros(n)
    high_size = 0

    def block():
        sign = base_sign if high_size % 2 == 0 else -base_sign
        rows = low_rows + high_rowsum
        member = np.empty((low_rows.shape[0], n))
        member[:, :low] = low_table
        member[:, low:] = high_member
        return rows, sign, member

    yield block()
    for bit, now_set in gray_code_flips(high):
        column = a[:, low + bit]
        if now_set:
            high_rowsum = high_rowsum + column
            high_member[bit] = 1.0
            high_size += 1
        else:
            high_rowsum = high_rowsum - column
            high_member[bit] = 0.0
            high_size -= 1
        yield block()


def permanent(matrix, compensated: bool = False) -> float:
    """Permanent of a square real matrix (dimension <= 25) by Gray-code Ryser.

    With ``compensated=True`` every block is summed with ``math.fsum`` and the
    block totals are combined the same way.
    """
    a = _check_square(matrix)
    n = a.shape[0]
    if n > MAX_DIM:
        raise DimensionLimit(f"permanent supports dimension <= {MAX_DIM}, got {n}")
    if n == 0:
        return 1.0
    partials = []
    for rows, sign, _ in _ryser_blocks(a):
        terms = sign * np.prod(rows, axis=1)
        partials.append(math.fsum(terms) if compensated else float(np.sum(terms)))
    total = math.fsum(partials) if compensated else float(np.sum(partials))
    if np.all(a >= 0.0):
        # exact result is non-negative; only rounding can push it below zero
        total = max(total, 0.0)
    return total


def permanent_bruteforce(matrix) -> float:
    """Direct sum over all n! permutations; for cross-checks at small n."""
    a = _check_square(matrix)
    n = a.shape[0]
    rows = np.arange(n)
    return math.fsum(float(np.prod(a[rows, list(p)])) for p in itertools.permutations(range(n)))


def _products_without_one(rows: np.ndarray) -> np.ndarray:
    """out[:, j] = prod_{i != j} rows[:, i], computed without division."""
    b, n = rows.shape
    prefix = np.ones((b, n + 1))
    np.cumprod(rows, axis=1, out=prefix[:, 1:])
    suffix = np.ones((b, n + 1))
    np.cumprod(rows[:, ::-1], axis=1, out=suffix[:, 1:])
    suffix = suffix[:, ::-1]  # suffix[:, j] = prod_{i >= j}
    return prefix[:, :n] * suffix[:, 1:]


def _products_without_two(rows: np.ndarray) -> np.ndarray:
    """out[:, j, l] = prod_{i not in {j, l}} rows[:, i] for j != l; zero on the diagonal."""
    b, n = rows.shape
    prefix = np.ones((b, n + 1))
    np.cumprod(rows, axis=1, out=prefix[:, 1:])
    suffix = np.ones((b, n + 1))
    np.cumprod(rows[:, ::-1], axis=1, out=suffix[:, 1:])
    suffix = suffix[:, ::-1]
    out = np.zeros((b, n, n))
    for j in range(n - 1):
        # mid[:, m] = prod of rows j+1 .. j+m (m = 0 gives 1)
        mid = np.ones((b, n - j))
        if n - j - 1 > 0:
            np.cumprod(rows[:, j + 1:], axis=1, out=mid[:, 1:])
        for l in range(j + 1, n):
            val = prefix[:, j] * mid[:, l - j - 1] * suffix[:, l + 1]
            out[:, j, l] = val
            out[:, l, j] = val
    return out


def permanent_minors(matrix, second: bool = True):
    """Return ``(perm, first, second)`` for a square matrix.

    ``first[j, k]`` is the permanent of the matrix with row j and column k
    removed.  ``second[j, l, a, b]`` is the permanent with rows j, l and
    columns a, b removed; entries with j == l or a == b are set to zero.
    Pass ``second=False`` to skip the O(n^4 2^n) second-order table.
    """
    a = _check_square(matrix)
    n = a.shape[0]
    if n > MAX_MINORS_DIM:
        raise DimensionLimit(f"permanent minors support dimension <= {MAX_MINORS_DIM}, got {n}")
    if n == 0:
        return 1.0, np.zeros((0, 0)), np.zeros((0, 0, 0, 0))
    perm_parts = []
    first = np.zeros((n, n))
    sec = np.zeros((n * n, n * n)) if second else None
    for rows, sign, member in _ryser_blocks(a):
        perm_parts.append(float(np.sum(sign * np.prod(rows, axis=1))))
        first += (sign[:, None] * _products_without_one(rows)).T @ member
        if second:
            excl = (sign[:, None, None] * _products_without_two(rows)).reshape(len(sign), n * n)
            pairs = (member[:, :, None] * member[:, None, :]).reshape(len(sign), n * n)
            sec += excl.T @ pairs
    perm = float(np.sum(perm_parts))
    if second:
        sec = sec.reshape(n, n, n, n)
        idx = np.arange(n)
        sec[:, :, idx, idx] = 0.0
        sec[idx, idx, :, :] = 0.0
    return perm, first, sec


def heap_swaps(n: int) -> Iterator[Tuple[int, int]]:
    """Swaps of Heap's algorithm: applying them in turn to ``range(n)`` visits every
    permutation exactly once, each differing from the previous one in two places."""
    c = [0] * n
    i = 1
    while i < n:
        if c[i] < i:
            yield (0 if i % 2 == 0 else c[i]), i
            c[i] += 1
            i = 1
        else:
            c[i] = 0
            i += 1


def heap_permutations(n: int) -> Iterator[Tuple[int, ...]]:
    arrangement = list(range(n))
    yield tuple(arrangement)
    for p, q in heap_swaps(n):
        arrangement[p], arrangement[q] = arrangement[q], arrangement[p]
        yield tuple(arrangement)
