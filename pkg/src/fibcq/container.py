"""FQZ1 tensor container.

Layout (integers little endian)::

    "FQZ1" | version u8 (=1) | tensor count u32
    per tensor:
        name length u16 | UTF-8 name | dtype u8 | rank u8 | dims u32 * rank
        [dtype 1, 2 only] scale f64 | min f64 | zero_point u32
        payload length u64 | payload

dtype 0 float32, 1 u8 codes, 2 u16 codes, 3 6-bit packed fibbinary ranks
(MSB first), 4 word-count stream (self-framing, see :mod:`fibcq.codec`).
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .codec import (
    CompressedStream,
    IndexSequence,
    pack_6bit,
    packed_6bit_size,
    unpack_6bit,
    word_count_decompress,
)
from .errors import CorruptStreamError, ContainerFormatError, DomainError
from .quantizer import AffineParams, QuantizedTensor, Scheme

MAGIC = b"FQZ1"
VERSION = 1


class DType(enum.IntEnum):
    FLOAT32 = 0
    U8 = 1
    U16 = 2
    FIB_INDEX = 3
    WORD_COUNT = 4


AFFINE_DTYPES = (DType.U8, DType.U16)


@dataclass
class TensorEntry:
    name: str
    dtype: DType
    shape: tuple[int, ...]
    payload: bytes
    scale: float | None = None
    minimum: float | None = None
    zero_point: int | None = None

    def __post_init__(self):
        self.dtype = DType(self.dtype)
        self.shape = tuple(int(d) for d in self.shape)
        self.payload = bytes(self.payload)
        if self.dtype in AFFINE_DTYPES and None in (self.scale, self.minimum, self.zero_point):
            raise DomainError(f"{self.name}: dtype {self.dtype.name} needs affine params")

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    # -- conversions ------------------------------------------------------

    def to_array(self) -> np.ndarray:
        if self.dtype is DType.FLOAT32:
            return np.frombuffer(self.payload, dtype="<f4").reshape(self.shape).copy()
        if self.dtype is DType.U8:
            return np.frombuffer(self.payload, dtype=np.uint8).reshape(self.shape).copy()
        if self.dtype is DType.U16:
            return np.frombuffer(self.payload, dtype="<u2").astype(np.uint16).reshape(self.shape)
        return self.to_indices().ranks.reshape(self.shape)

    def affine(self, bitwidth: int | None = None) -> AffineParams:
        if bitwidth is None:
            bitwidth = 16 if self.dtype is DType.U16 else 8
        return AffineParams(float(self.scale), int(self.zero_point), bitwidth, float(self.minimum))

    def to_quantized(self, scheme: Scheme = Scheme.UNIFORM) -> QuantizedTensor:
        if self.dtype not in AFFINE_DTYPES:
            raise DomainError(f"{self.name}: dtype {self.dtype.name} is not an affine code tensor")
        return QuantizedTensor(self.name, self.shape, self.to_array().ravel(), self.affine(), scheme)

    def to_indices(self) -> IndexSequence:
        if self.dtype is DType.FIB_INDEX:
            return unpack_6bit(self.payload, self.size)
        if self.dtype is DType.WORD_COUNT:
            return word_count_decompress(self.to_stream())
        raise DomainError(f"{self.name}: dtype {self.dtype.name} holds no rank sequence")

    def to_stream(self) -> CompressedStream:
        if self.dtype is not DType.WORD_COUNT:
            raise DomainError(f"{self.name}: not a word-count stream")
        return CompressedStream.from_bytes(self.payload)


def float_entry(name: str, values) -> TensorEntry:
    arr = np.asarray(values, dtype="<f4")
    return TensorEntry(name, DType.FLOAT32, arr.shape, arr.tobytes())


def quantized_entry(q: QuantizedTensor) -> TensorEntry:
    p = q.params
    if p.bitwidth == 8:
        dtype, payload = DType.U8, q.codes.astype(np.uint8).tobytes()
    else:
        dtype, payload = DType.U16, q.codes.astype("<u2").tobytes()
    return TensorEntry(q.name, dtype, q.shape, payload, p.scale, p.minimum, p.zero_point)


def index_entry(name: str, shape, seq: IndexSequence) -> TensorEntry:
    return TensorEntry(name, DType.FIB_INDEX, shape, pack_6bit(seq))


def stream_entry(name: str, shape, stream: CompressedStream) -> TensorEntry:
    return TensorEntry(name, DType.WORD_COUNT, shape, stream.to_bytes())


@dataclass
class Container:
    entries: list[TensorEntry] = field(default_factory=list)

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise DomainError("tensor names must be unique")

    def __iter__(self) -> Iterator[TensorEntry]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, name: str) -> TensorEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(e.name == name for e in self.entries)

    def add(self, entry: TensorEntry) -> None:
        if entry.name in self:
            raise DomainError(f"duplicate tensor name {entry.name!r}")
        self.entries.append(entry)

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]


def _expected_payload(entry: TensorEntry) -> int | None:
    n = entry.size
    return {
        DType.FLOAT32: 4 * n,
        DType.U8: n,
        DType.U16: 2 * n,
        DType.FIB_INDEX: packed_6bit_size(n),
    }.get(entry.dtype)


def write(container: Container | Iterable[TensorEntry]) -> bytes:
    entries = list(container)
    Container(entries)  # uniqueness check
    out = bytearray(MAGIC)
    out += struct.pack("<BI", VERSION, len(entries))
    for e in entries:
        expected = _expected_payload(e)
        if expected is not None and expected != len(e.payload):
            raise DomainError(f"{e.name}: payload of {len(e.payload)} octets, expected {expected}")
        name = e.name.encode("utf-8")
        if len(name) > 0xFFFF or len(e.shape) > 0xFF:
            raise DomainError(f"{e.name}: name or rank too large for the format")
        out += struct.pack("<H", len(name)) + name
        out += struct.pack("<BB", int(e.dtype), len(e.shape))
        out += struct.pack(f"<{len(e.shape)}I", *e.shape)
        if e.dtype in AFFINE_DTYPES:
            out += struct.pack("<ddI", e.scale, e.minimum, e.zero_point)
        out += struct.pack("<Q", len(e.payload)) + e.payload
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(bytes(data))
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise ContainerFormatError(f"truncated {what}: need {n} octets, {len(self.data) - self.pos} left", self.pos)
        chunk = self.data[self.pos : self.pos + n].tobytes()
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def read(data: bytes) -> Container:
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise ContainerFormatError("bad magic", 0)
    (version,) = r.unpack("<B", "version")
    if version != VERSION:
        raise ContainerFormatError(f"unsupported version {version}", 4)
    (count,) = r.unpack("<I", "tensor count")
    entries = []
    names: set = set()
    for _ in range(count):
        start = r.pos
        (name_len,) = r.unpack("<H", "name length")
        raw = r.take(name_len, "name")
        try:
            name = raw.decode("utf-8")
        except UnicodeDecodeError:
            raise ContainerFormatError("name is not valid UTF-8", start + 2) from None
        if name in names:
            raise ContainerFormatError(f"duplicate tensor name {name!r}", start)
        names.add(name)
        dtype_pos = r.pos
        dtype_raw, rank = r.unpack("<BB", "dtype and rank")
        try:
            dtype = DType(dtype_raw)
        except ValueError:
            raise ContainerFormatError(f"unknown dtype tag {dtype_raw}", dtype_pos) from None
        shape = r.unpack(f"<{rank}I", "dims")
        scale = minimum = zero_point = None
        if dtype in AFFINE_DTYPES:
            params_pos = r.pos
            scale, minimum, zero_point = r.unpack("<ddI", "affine params")
            try:
                AffineParams(scale, zero_point, 8 if dtype is DType.U8 else 16, minimum)
            except DomainError as exc:
                raise ContainerFormatError(f"{name}: {exc}", params_pos) from None
        (length,) = r.unpack("<Q", "payload length")
        payload_pos = r.pos
        payload = r.take(length, f"payload of {name!r}")
        entry = TensorEntry(name, dtype, shape, payload, scale, minimum, zero_point)
        expected = _expected_payload(entry)
        if expected is not None and expected != length:
            raise ContainerFormatError(f"{name}: payload length {length} does not match dims (expected {expected})", payload_pos - 8)
        _validate_payload(entry, payload_pos)
        entries.append(entry)
    if r.pos != len(r.data):
        raise ContainerFormatError(f"{len(r.data) - r.pos} trailing octets", r.pos)
    return Container(entries)


def _validate_payload(entry: TensorEntry, pos: int) -> None:
    try:
        if entry.dtype is DType.FIB_INDEX and entry.size:
            entry.to_indices()
        elif entry.dtype is DType.WORD_COUNT:
            decoded = entry.to_indices()
            if len(decoded) != entry.size:
                raise ContainerFormatError(
                    f"{entry.name}: stream decodes to {len(decoded)} ranks, dims give {entry.size}", pos
                )
    except CorruptStreamError as exc:
        # codeword k sits after the 6-octet stream header
        raise ContainerFormatError(f"{entry.name}: {exc}", pos + 6 + exc.offset) from None
    except DomainError as exc:
        raise ContainerFormatError(f"{entry.name}: {exc}", pos) from None


def save(container: Container, path) -> None:
    with open(path, "wb") as fh:
        fh.write(write(container))


def load(path) -> Container:
    with open(path, "rb") as fh:
        return read(fh.read())
