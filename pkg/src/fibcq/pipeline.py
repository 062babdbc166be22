"""Container-level pipeline: quantize, compress, decompress, account.

Compressed FCQ tensors keep their affine parameters in a companion entry
named ``<tensor>#affine``: an empty u8 tensor whose header carries the scale,
minimum and zero point. This keeps every entry inside the FQZ1 dtype set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import (
    CODEWORD_BITS,
    CompressionReport,
    compress_grouped,
    compression_report,
    word_length_compress,
    word_length_decompress,
)
from .container import (
    Container,
    DType,
    TensorEntry,
    float_entry,
    quantized_entry,
    stream_entry,
)
from .errors import DomainError
from .fibbinary import fibbinary_mask
from .quantizer import Scheme, apply_fcq, mse, quantize_uniform, reconstruct

AFFINE_SUFFIX = "#affine"
SCHEMES = ("uniform8", "uniform16", "fcq8")


def is_bias(name: str) -> bool:
    return name.rsplit(".", 1)[-1].lower().endswith("bias")


def _affine_carrier(entry: TensorEntry) -> TensorEntry:
    return TensorEntry(entry.name + AFFINE_SUFFIX, DType.U8, (0,), b"", entry.scale, entry.minimum, entry.zero_point)


def is_fcq_entry(entry: TensorEntry) -> bool:
    """u8 weight tensor whose codes are all fibbinary."""
    if entry.dtype is not DType.U8 or is_bias(entry.name) or entry.name.endswith(AFFINE_SUFFIX):
        return False
    return bool(fibbinary_mask(entry.to_array()).all())


@dataclass(frozen=True)
class QuantizeRecord:
    name: str
    scheme: str
    mse: float

    def to_text(self) -> str:
        return f"record=quantize tensor={self.name} scheme={self.scheme} mse={self.mse:.6e}"


def quantize_container(src: Container, scheme: str) -> tuple[Container, list[QuantizeRecord]]:
    """Quantize every float tensor. Under ``fcq8`` biases stay uniform 8-bit."""
    if scheme not in SCHEMES:
        raise DomainError(f"unknown scheme {scheme!r}; choose from {', '.join(SCHEMES)}")
    out = Container()
    records = []
    for entry in sorted(src, key=lambda e: e.name):
        if entry.dtype is not DType.FLOAT32:
            out.add(entry)
            continue
        values = entry.to_array().astype(np.float64)
        if values.size == 0:
            out.add(entry)
            continue
        try:
            q = quantize_uniform(values, 16 if scheme == "uniform16" else 8, entry.name)
        except DomainError as exc:
            raise DomainError(f"tensor {entry.name}: {exc}") from None
        used = "uniform16" if scheme == "uniform16" else "uniform8"
        if scheme == "fcq8" and not is_bias(entry.name):
            q = apply_fcq(q)
            used = "fcq8"
        out.add(quantized_entry(q))
        records.append(QuantizeRecord(entry.name, used, mse(values, reconstruct(q))))
    return out, records


def compress_container(src: Container, group: int = 1) -> tuple[Container, CompressionReport]:
    """Word-length then word-count compress every FCQ tensor; pass the rest through.

    Tensors are grouped in name order, ``group`` at a time, for the choice of
    the common ranks. A container without any fibbinary weight tensor is an
    error rather than a silent no-op.
    """
    fcq = [e for e in sorted(src, key=lambda e: e.name) if is_fcq_entry(e)]
    if not fcq:
        weights = [e.name for e in src if e.dtype is DType.U8 and not is_bias(e.name)
                   and not e.name.endswith(AFFINE_SUFFIX)]
        detail = f"non-fibbinary u8 tensors: {', '.join(weights)}" if weights else "no u8 weight tensors"
        raise DomainError(f"nothing to compress; expected fcq8 weights ({detail})")
    seqs = [word_length_compress(e.to_array().ravel(), e.name) for e in fcq]
    streams = compress_grouped(seqs, group)
    compressed = {e.name: (e, s) for e, s in zip(fcq, streams)}
    out = Container()
    for entry in src:
        if entry.name in compressed:
            e, stream = compressed[entry.name]
            out.add(stream_entry(e.name, e.shape, stream))
            out.add(_affine_carrier(e))
        else:
            out.add(entry)
    groups = (len(streams) + group - 1) // group
    report = compression_report((e.size for e in fcq), streams, headers=groups)
    return out, report


def decompress_container(src: Container) -> Container:
    out = Container()
    for entry in src:
        if entry.name.endswith(AFFINE_SUFFIX) and entry.name[: -len(AFFINE_SUFFIX)] in src:
            continue
        if entry.dtype in (DType.WORD_COUNT, DType.FIB_INDEX):
            carrier_name = entry.name + AFFINE_SUFFIX
            if carrier_name not in src:
                raise DomainError(f"tensor {entry.name}: missing affine parameters entry {carrier_name}")
            carrier = src[carrier_name]
            codes = word_length_decompress(entry.to_indices())
            out.add(TensorEntry(entry.name, DType.U8, entry.shape, codes.tobytes(),
                                carrier.scale, carrier.minimum, carrier.zero_point))
        else:
            out.add(entry)
    return out


def compression_stats(src: Container) -> CompressionReport:
    """CR over the word-count tensors already present in ``src``."""
    entries = [e for e in src if e.dtype is DType.WORD_COUNT]
    return compression_report((e.size for e in entries), (e.to_stream() for e in entries))


# ---------------------------------------------------------------------------
# memory accounting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InventoryItem:
    name: str
    elements: int
    stored_bits: int
    compressed_octets: int | None = None

    @property
    def stored_total_bits(self) -> int:
        if self.compressed_octets is not None:
            return 8 * self.compressed_octets
        return self.elements * self.stored_bits


@dataclass(frozen=True)
class MemoryReport:
    inventory: tuple[InventoryItem, ...]
    total_16bit_bits: int
    total_8bit_bits: int
    total_compressed_bits: int

    @property
    def saving_vs_16b(self) -> float:
        return 1 - self.total_compressed_bits / self.total_16bit_bits if self.total_16bit_bits else 0.0

    @property
    def saving_vs_8b(self) -> float:
        return 1 - self.total_compressed_bits / self.total_8bit_bits if self.total_8bit_bits else 0.0

    def to_text(self) -> str:
        lines = [
            f"record=tensor name={i.name} elements={i.elements} stored_bits={i.stored_bits} "
            f"compressed_octets={'-' if i.compressed_octets is None else i.compressed_octets}"
            for i in self.inventory
        ]
        lines.append(
            f"record=memory total_16bit_bits={self.total_16bit_bits} total_8bit_bits={self.total_8bit_bits} "
            f"total_compressed_bits={self.total_compressed_bits} saving_vs_16b={self.saving_vs_16b:.4f} "
            f"saving_vs_8b={self.saving_vs_8b:.4f}"
        )
        return "\n".join(lines)


_STORED_BITS = {DType.FLOAT32: 32, DType.U8: 8, DType.U16: 16, DType.FIB_INDEX: 6, DType.WORD_COUNT: 8}

# reference whole-network savings, printed alongside measured ones
REFERENCE_SAVING_VS_16B = 0.638
REFERENCE_SAVING_VS_8B = 0.26


def memory_report(inventory) -> MemoryReport:
    items = tuple(sorted(inventory, key=lambda i: i.name))
    total16 = sum(16 * i.elements for i in items)
    total8 = sum(8 * i.elements for i in items)
    total_c = sum(i.stored_total_bits for i in items)
    return MemoryReport(items, total16, total8, total_c)


def container_inventory(src: Container) -> list[InventoryItem]:
    items = []
    for e in src:
        if e.name.endswith(AFFINE_SUFFIX) and e.size == 0:
            continue
        if e.dtype is DType.WORD_COUNT:
            # codewords only, matching the CR accounting
            items.append(InventoryItem(e.name, e.size, CODEWORD_BITS, e.to_stream().codeword_count))
        elif e.dtype is DType.FIB_INDEX:
            items.append(InventoryItem(e.name, e.size, 6, len(e.payload)))
        else:
            items.append(InventoryItem(e.name, e.size, _STORED_BITS[e.dtype]))
    return items


def params_to_container(params: dict) -> Container:
    return Container([float_entry(k, v) for k, v in sorted(params.items())])


def frozen_to_container(params: dict, frozen: dict) -> Container:
    """Frozen tensors as code entries, everything else as float32."""
    out = Container()
    for name in sorted(params):
        if name in frozen:
            out.add(quantized_entry(frozen[name]))
        else:
            out.add(float_entry(name, params[name]))
    return out


def fcq_scheme_of(entry: TensorEntry) -> Scheme:
    return Scheme.FCQ if is_fcq_entry(entry) else Scheme.UNIFORM
