"""Per-tensor affine quantization (quint8 / quint16) and Fibonacci codeword rounding."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, UnsupportedError
from .fibbinary import fibbinary_mask, nearest_fibbinary_array


class Scheme(enum.Enum):
    UNIFORM = "uniform"
    FCQ = "fcq"


@dataclass(frozen=True)
class AffineParams:
    """Affine map ``x = (code - zero_point) * scale``.

    ``minimum`` is the calibration minimum. It is only needed to restore
    constant tensors, which quantize to scale 1 / zero point 0.
    """

    scale: float
    zero_point: int
    bitwidth: int
    minimum: float = 0.0

    def __post_init__(self):
        if self.bitwidth not in (8, 16):
            raise DomainError(f"bitwidth must be 8 or 16, got {self.bitwidth}")
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise DomainError(f"scale must be positive and finite, got {self.scale}")
        if not 0 <= self.zero_point < (1 << self.bitwidth):
            raise DomainError(f"zero_point {self.zero_point} outside {self.bitwidth}-bit range")

    @property
    def qmax(self) -> int:
        return (1 << self.bitwidth) - 1


def _code_dtype(bitwidth: int):
    return np.uint8 if bitwidth == 8 else np.uint16


@dataclass
class QuantizedTensor:
    name: str
    shape: tuple[int, ...]
    codes: np.ndarray
    params: AffineParams
    scheme: Scheme = Scheme.UNIFORM

    def __post_init__(self):
        self.shape = tuple(int(d) for d in self.shape)
        codes = np.asarray(self.codes)
        if codes.size != int(np.prod(self.shape, dtype=np.int64)):
            raise DomainError(f"{self.name}: {codes.size} codes for shape {self.shape}")
        if codes.size and (codes.min() < 0 or codes.max() > self.params.qmax):
            raise DomainError(f"{self.name}: codes exceed {self.params.bitwidth} bits")
        self.codes = codes.astype(_code_dtype(self.params.bitwidth)).reshape(-1)
        if self.scheme is Scheme.FCQ and not fibbinary_mask(self.codes).all():
            raise DomainError(f"{self.name}: FCQ tensor holds non-fibbinary codes")

    def __eq__(self, other):
        if not isinstance(other, QuantizedTensor):
            return NotImplemented
        return (
            self.name == other.name
            and self.shape == other.shape
            and self.params == other.params
            and self.scheme == other.scheme
            and np.array_equal(self.codes, other.codes)
        )


def round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize_uniform(values, bitwidth: int = 8, name: str = "tensor") -> QuantizedTensor:
    """Asymmetric min/max quantization of a whole tensor to ``bitwidth`` bits."""
    if bitwidth not in (8, 16):
        raise DomainError(f"bitwidth must be 8 or 16, got {bitwidth}")
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise DomainError(f"{name}: cannot quantize an empty tensor")
    if not np.isfinite(x).all():
        raise DomainError(f"{name}: tensor contains non-finite values")
    qmax = (1 << bitwidth) - 1
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        params = AffineParams(1.0, 0, bitwidth, lo)
        codes = np.zeros(x.size, dtype=np.int64)
    else:
        scale = (hi - lo) / qmax
        zero_point = int(np.clip(round_half_away(np.float64(-lo / scale)), 0, qmax))
        params = AffineParams(scale, zero_point, bitwidth, lo)
        codes = np.clip(round_half_away(x.ravel() / scale) + zero_point, 0, qmax).astype(np.int64)
    return QuantizedTensor(name, x.shape, codes, params, Scheme.UNIFORM)


def dequantize(q: QuantizedTensor) -> np.ndarray:
    codes = q.codes.astype(np.float64)
    return ((codes - q.params.zero_point) * q.params.scale).reshape(q.shape)


def is_degenerate(q: QuantizedTensor) -> bool:
    """Constant-tensor encoding: scale 1, zero point 0, every code 0."""
    p = q.params
    return p.scale == 1.0 and p.zero_point == 0 and not q.codes.any()


def reconstruct(q: QuantizedTensor) -> np.ndarray:
    """Like :func:`dequantize`, but a degenerate tensor comes back as its stored minimum."""
    if is_degenerate(q) and q.codes.size:
        return np.full(q.shape, q.params.minimum, dtype=np.float64)
    return dequantize(q)


def apply_fcq(q: QuantizedTensor) -> QuantizedTensor:
    """Round every 8-bit code to its nearest fibbinary code."""
    if q.params.bitwidth != 8:
        raise UnsupportedError(f"{q.name}: FCQ is defined on 8-bit codes only")
    if q.scheme is not Scheme.UNIFORM:
        raise UnsupportedError(f"{q.name}: expected a UNIFORM tensor, got {q.scheme.value}")
    return replace(q, codes=nearest_fibbinary_array(q.codes, 8), scheme=Scheme.FCQ)


def quantize_fcq(values, name: str = "tensor") -> QuantizedTensor:
    return apply_fcq(quantize_uniform(values, 8, name))


def mse(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DomainError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise DomainError("MSE of empty tensors is undefined")
    return float(np.mean((a - b) ** 2))
