"""Fibbinary numbers and their Zeckendorf ranks.

A fibbinary number has no two adjacent 1 bits. Ranking the b-bit fibbinary
numbers in ascending order gives a bijection with ``0 .. Fib(b+2) - 1``, and
the rank of a code is read off its Zeckendorf expansion: bit ``k - 2`` of the
code is set exactly when ``F(k)`` appears in the expansion of the rank.

Fibonacci numbers use ``F(1) = F(2) = 1``; Zeckendorf indices are ``k >= 2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import DomainError

MAX_BITWIDTH = 16


@lru_cache(maxsize=None)
def fibonacci(k: int) -> int:
    """Return ``F(k)`` with ``F(0) = 0`` and ``F(1) = F(2) = 1``."""
    if k < 0:
        raise DomainError(f"Fibonacci index must be non-negative, got {k}")
    a, b = 0, 1
    for _ in range(k):
        a, b = b, a + b
    return a


def _check_bitwidth(bitwidth: int) -> None:
    if not 1 <= bitwidth <= MAX_BITWIDTH:
        raise DomainError(f"bitwidth must be in 1..{MAX_BITWIDTH}, got {bitwidth}")


def is_fibbinary(code: int, bitwidth: int) -> bool:
    _check_bitwidth(bitwidth)
    if not 0 <= code < (1 << bitwidth):
        raise DomainError(f"code {code} does not fit in {bitwidth} bits")
    return code & (code >> 1) == 0


@dataclass(frozen=True)
class ZeckendorfExpansion:
    """``value`` written as a sum of non-consecutive ``F(k)``, ``k >= 2``.

    ``indices`` is stored in descending order; the empty tuple represents 0.
    """

    indices: tuple[int, ...]
    value: int

    def __post_init__(self):
        if any(k < 2 for k in self.indices):
            raise DomainError("Zeckendorf indices start at 2")
        if any(a - b < 2 for a, b in zip(self.indices, self.indices[1:])):
            raise DomainError("Zeckendorf indices must be descending and non-adjacent")
        if sum(fibonacci(k) for k in self.indices) != self.value:
            raise DomainError("indices do not sum to value")


def zeckendorf(n: int) -> ZeckendorfExpansion:
    """Greedy Zeckendorf expansion of ``n >= 0``."""
    if n < 0:
        raise DomainError(f"cannot expand negative integer {n}")
    k = 2
    while fibonacci(k + 1) <= n:
        k += 1
    indices = []
    rest = n
    while rest:
        while fibonacci(k) > rest:
            k -= 1
        indices.append(k)
        rest -= fibonacci(k)
        # greedy choice already rules out F(k-1)
        k -= 2
    return ZeckendorfExpansion(tuple(indices), n)


def _rank_to_code(n: int) -> int:
    return sum(1 << (k - 2) for k in zeckendorf(n).indices)


def _code_to_rank(code: int) -> int:
    rank = 0
    k = 2
    while code:
        if code & 1:
            rank += fibonacci(k)
        code >>= 1
        k += 1
    return rank


@dataclass(frozen=True)
class FibbinaryTable:
    bitwidth: int
    values: tuple[int, ...]
    index_of: Mapping[int, int]

    def __len__(self) -> int:
        return len(self.values)

    @property
    def index_bits(self) -> int:
        """Bits needed to store any rank of this table (6 for b = 8)."""
        return max(1, (len(self.values) - 1).bit_length())

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.int64)


@lru_cache(maxsize=None)
def fibbinary_table(bitwidth: int = 8) -> FibbinaryTable:
    """Immutable, cached table of all ``bitwidth``-bit fibbinary codes."""
    _check_bitwidth(bitwidth)
    count = fibonacci(bitwidth + 2)
    values = tuple(_rank_to_code(n) for n in range(count))
    index_of = MappingProxyType({v: i for i, v in enumerate(values)})
    return FibbinaryTable(bitwidth, values, index_of)


def index_to_value(n: int, table: FibbinaryTable) -> int:
    if not 0 <= n < len(table):
        raise DomainError(f"rank {n} outside 0..{len(table) - 1}")
    return _rank_to_code(n)


def value_to_index(code: int, table: FibbinaryTable) -> int:
    if not is_fibbinary(code, table.bitwidth):
        raise DomainError(f"{code} is not a fibbinary number")
    return _code_to_rank(code)


def nearest_fibbinary(code: int, table: FibbinaryTable) -> int:
    """Closest table value to ``code``; ties go to the smaller value."""
    if not 0 <= code < (1 << table.bitwidth):
        raise DomainError(f"code {code} does not fit in {table.bitwidth} bits")
    return int(_nearest_lut(table.bitwidth)[code])


@lru_cache(maxsize=None)
def _nearest_lut(bitwidth: int) -> np.ndarray:
    values = fibbinary_table(bitwidth).as_array()
    codes = np.arange(1 << bitwidth)
    hi = np.searchsorted(values, codes, side="left").clip(max=len(values) - 1)
    lo = (hi - 1).clip(min=0)
    up, down = values[hi], values[lo]
    # ``<=`` sends ties to the lower neighbour
    lut = np.where(np.abs(codes - down) <= np.abs(up - codes), down, up)
    lut.setflags(write=False)
    return lut


def nearest_fibbinary_array(codes: np.ndarray, bitwidth: int = 8) -> np.ndarray:
    """Vectorised :func:`nearest_fibbinary` over an integer array."""
    codes = np.asarray(codes)
    if codes.size and (codes.min() < 0 or codes.max() >= (1 << bitwidth)):
        raise DomainError(f"codes do not fit in {bitwidth} bits")
    return _nearest_lut(bitwidth)[codes].astype(codes.dtype, copy=False)


def fibbinary_mask(codes: np.ndarray) -> np.ndarray:
    """Elementwise fibbinary predicate for non-negative integer arrays."""
    codes = np.asarray(codes).astype(np.int64)
    return (codes & (codes >> 1)) == 0


def ranks_of(codes: np.ndarray, bitwidth: int = 8) -> np.ndarray:
    """Vectorised :func:`value_to_index`; raises on the first non-fibbinary code."""
    codes = np.asarray(codes).astype(np.int64).ravel()
    bad = ~fibbinary_mask(codes) | (codes < 0) | (codes >= (1 << bitwidth))
    if bad.any():
        pos = int(np.flatnonzero(bad)[0])
        raise DomainError(f"code {int(codes[pos])} at position {pos} is not a {bitwidth}-bit fibbinary number")
    weights = np.array([fibonacci(k + 2) for k in range(bitwidth)], dtype=np.int64)
    bits = (codes[:, None] >> np.arange(bitwidth)) & 1
    return bits @ weights


def codes_of(ranks: np.ndarray, bitwidth: int = 8) -> np.ndarray:
    """Vectorised :func:`index_to_value`."""
    ranks = np.asarray(ranks).astype(np.int64).ravel()
    values = fibbinary_table(bitwidth).as_array()
    if ranks.size and (ranks.min() < 0 or ranks.max() >= len(values)):
        raise DomainError(f"rank outside 0..{len(values) - 1}")
    return values[ranks]
