"""Gate-level carry-save array multiplier and OR-gate replacement cost model.

Layout for an n-bit array computing ``w * x``. Partial product
``pp[r][j] = w_r & x_j`` has weight ``r + j``.

* Row 0 is pp[0] itself (sums), with no carries.
* Row 1 is n half adders: cell j adds pp[1][j] and the row-0 sum at j + 1.
* Rows 2 .. n-1 hold n full adders each, (n - 2) * n in total. Cell (r, j)
  adds pp[r][j], the sum of cell (r-1, j+1) and the carry of cell (r-1, j),
  all of weight r + j.
* The sum of cell (r, 0) is product bit r. The remaining sums and carries of
  row n-1 go through an exact ripple-carry adder, which is not counted.

Simulation is vectorised over operand pairs: every signal is a uint8 array
holding one bit per pair.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .errors import DomainError
from .fibbinary import fibbinary_table

OR_AREA_RATIO = 0.25  # OR gate area / FA area
OR_POWER_SAVING = 0.77  # OR gate power is 23% of an FA's


class CellKind(enum.Enum):
    HA = "HA"
    FA = "FA"
    OR = "OR"


Source = tuple  # ("pp", r, j) | ("sum", r, j) | ("carry", r, j) | ("zero",)


@dataclass(frozen=True)
class Cell:
    row: int
    col: int
    kind: CellKind
    inputs: tuple[Source, ...]


@dataclass(frozen=True)
class MultiplierArray:
    bitwidth: int
    cells: dict = field(hash=False)  # (row, col) -> Cell, in evaluation order

    @property
    def fa_positions(self) -> list[tuple[int, int]]:
        """Positions counted in the (n - 2) * n full-adder budget (FA or OR now)."""
        return [p for p, c in self.cells.items() if c.kind is not CellKind.HA]

    @property
    def or_positions(self) -> frozenset:
        return frozenset(p for p, c in self.cells.items() if c.kind is CellKind.OR)

    @property
    def fa_total(self) -> int:
        return len(self.fa_positions)

    def with_replacements(self, positions: Iterable[tuple[int, int]]) -> "MultiplierArray":
        """Copy with the given FA positions turned into OR cells. Wiring is kept."""
        positions = set(positions)
        unknown = positions - set(self.fa_positions)
        if unknown:
            raise DomainError(f"not full-adder positions: {sorted(unknown)}")
        cells = {
            p: replace(c, kind=CellKind.OR) if p in positions else c for p, c in self.cells.items()
        }
        return MultiplierArray(self.bitwidth, cells)


def build_array(n: int) -> MultiplierArray:
    if n < 3:
        raise DomainError(f"carry-save array needs n >= 3, got {n}")
    cells = {}
    for j in range(n):
        prev_sum = ("pp", 0, j + 1) if j + 1 < n else ("zero",)
        cells[(1, j)] = Cell(1, j, CellKind.HA, (("pp", 1, j), prev_sum))
    for r in range(2, n):
        for j in range(n):
            prev_sum = ("sum", r - 1, j + 1) if j + 1 < n else ("zero",)
            cells[(r, j)] = Cell(r, j, CellKind.FA, (("pp", r, j), prev_sum, ("carry", r - 1, j)))
    return MultiplierArray(n, cells)


def _bits(values: np.ndarray, n: int) -> list[np.ndarray]:
    return [((values >> i) & 1).astype(np.uint8) for i in range(n)]


def _simulate(array: MultiplierArray, w: np.ndarray, x: np.ndarray, probe: dict | None = None) -> np.ndarray:
    n = array.bitwidth
    w = np.asarray(w, dtype=np.int64)
    x = np.asarray(x, dtype=np.int64)
    wb, xb = _bits(w, n), _bits(x, n)
    zero = np.zeros(np.broadcast(w, x).shape, dtype=np.uint8)
    sums: dict = {}
    carries: dict = {}

    def signal(src):
        kind = src[0]
        if kind == "pp":
            return wb[src[1]] & xb[src[2]]
        if kind == "sum":
            return sums[src[1], src[2]]
        if kind == "carry":
            return carries[src[1], src[2]]
        return zero

    for pos, cell in array.cells.items():
        ins = [signal(s) for s in cell.inputs]
        total = sum(i.astype(np.uint8) for i in ins)
        if probe is not None and cell.kind is not CellKind.HA:
            probe[pos] = max(probe.get(pos, 0), int(total.max()) if total.size else 0)
        if cell.kind is CellKind.OR:
            s = ins[0]
            for i in ins[1:]:
                s = s | i
            sums[pos], carries[pos] = s, zero
        else:
            sums[pos], carries[pos] = total & 1, total >> 1

    product = np.zeros(zero.shape, dtype=np.int64)
    product += signal(("pp", 0, 0)).astype(np.int64)
    for r in range(1, n):
        product += sums[r, 0].astype(np.int64) << r
    # ripple-carry adder over the last row: sums j=1..n-1 and carries j=0..n-1
    last = n - 1
    carry = zero
    for j in range(n):
        a = sums[last, j + 1] if j + 1 < n else zero
        b = carries[last, j]
        t = a + b + carry
        product += (t & 1).astype(np.int64) << (n + j)
        carry = t >> 1
    product += carry.astype(np.int64) << (2 * n)
    return product


def array_multiply(array: MultiplierArray, w, x):
    """Evaluate the array (broadcasting over operand arrays)."""
    n = array.bitwidth
    wa, xa = np.asarray(w), np.asarray(x)
    if (wa < 0).any() or (xa < 0).any() or (wa >> n).any() or (xa >> n).any():
        raise DomainError(f"operands must fit in {n} bits")
    out = _simulate(array, wa, xa)
    return int(out) if out.ndim == 0 else out


def exact_multiply(array: MultiplierArray, w: int, x: int) -> int:
    """Product through an array with every cell exact, whatever its current kinds."""
    return array_multiply(build_array(array.bitwidth), w, x)


def or_multiply(array: MultiplierArray, w, x):
    """Product with OR cells computing ``sum = OR(inputs)``, ``carry = 0``."""
    return array_multiply(array, w, x)


def fibbinary_operand_grid(n: int) -> tuple[np.ndarray, np.ndarray]:
    """All (fibbinary w, arbitrary x) pairs as two flat arrays."""
    w = fibbinary_table(n).as_array()
    x = np.arange(1 << n, dtype=np.int64)
    ww, xx = np.meshgrid(w, x, indexing="ij")
    return ww.ravel(), xx.ravel()


def discover_replaceable(array: MultiplierArray, table=None) -> frozenset:
    """FA positions whose three inputs are never two-hot over every fibbinary-w pair."""
    n = array.bitwidth
    if table is not None and table.bitwidth != n:
        raise DomainError(f"table bitwidth {table.bitwidth} does not match array bitwidth {n}")
    w, x = fibbinary_operand_grid(n)
    probe: dict = {}
    _simulate(build_array(n), w, x, probe)
    return frozenset(pos for pos, peak in probe.items() if peak <= 1)


@dataclass(frozen=True)
class ErrorStats:
    w: int
    max_abs_error: int
    mean_abs_error: float
    mismatches: int

    def to_text(self) -> str:
        return (
            f"record=or_error w={self.w} max_abs_error={self.max_abs_error} "
            f"mean_abs_error={self.mean_abs_error:.4f} mismatches={self.mismatches}"
        )


def error_stats(array: MultiplierArray, w: int) -> ErrorStats:
    """Deviation of the approximate array from ``w * x`` over every x."""
    x = np.arange(1 << array.bitwidth, dtype=np.int64)
    err = np.abs(or_multiply(array, np.full_like(x, w), x) - w * x)
    return ErrorStats(w, int(err.max()), float(err.mean()), int((err != 0).sum()))


@dataclass(frozen=True)
class CostReport:
    n: int
    fa_total: int
    fa_replaced: int
    replaced_fraction: float
    area_saving: float
    power_saving: float
    discovered: int | None = None

    def percent(self, value: float) -> int:
        return int(np.floor(100 * value + 0.5))

    def to_text(self) -> str:
        line = (
            f"record=cost n={self.n} fa_total={self.fa_total} fa_replaced={self.fa_replaced} "
            f"replaced_fraction={self.replaced_fraction:.4f} area_saving={self.area_saving:.4f} "
            f"power_saving={self.power_saving:.4f} replaced_pct={self.percent(self.replaced_fraction)} "
            f"area_pct={self.percent(self.area_saving)} power_pct={self.percent(self.power_saving)}"
        )
        if self.discovered is not None:
            expected = (self.n * self.n - self.n) // 2
            line += f" discovered={self.discovered} reference_count={expected} match={str(self.discovered == expected).lower()}"
        return line


def cost_report(n: int, fa_replaced: int, discovered: int | None = None) -> CostReport:
    if n < 3:
        raise DomainError(f"carry-save array needs n >= 3, got {n}")
    fa_total = (n - 2) * n
    if not 0 <= fa_replaced <= fa_total:
        raise DomainError(f"fa_replaced must be in 0..{fa_total}, got {fa_replaced}")
    frac = fa_replaced / fa_total
    return CostReport(
        n,
        fa_total,
        fa_replaced,
        frac,
        frac * (1 - OR_AREA_RATIO),
        frac * OR_POWER_SAVING,
        discovered,
    )


def reference_replaced_count(n: int) -> int:
    """Reference OR-replacement count ``(n^2 - n) / 2`` used by the cost model."""
    return (n * n - n) // 2
