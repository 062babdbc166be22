"""Lossless two-stage compression of 8-bit fibbinary weight codes.

Stage one (word length) replaces each fibbinary code by its 6-bit Zeckendorf
rank. Stage two (word count) stores the two most frequent ranks A and B once
per stream and emits one octet per codeword::

    bit 1-2 (MSB first)   bits 3-8
    00  LIT               rank C
    01  A_THEN_LIT        rank C, preceded by one A
    10  B_THEN_LIT        rank C, preceded by one B
    11  RUN               last | mixed | count field

RUN payload: ``last`` is 0 for A and 1 for B. With ``mixed = 0`` the low four
bits are a count 1..15 of the ``last`` symbol. With ``mixed = 1`` bits 5-7
hold n in 1..7 copies of A and bit 8 is m = 1 copy of B; ``last`` says which
comes second (B -> ``A*n B``, A -> ``B A*n``).

Stream framing: a_rank (1 octet), b_rank (1 octet), codeword count (uint32
little endian), codewords.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import CorruptStreamError, DomainError
from .fibbinary import codes_of, fibbinary_table, ranks_of

RANK_LIMIT = len(fibbinary_table(8))  # 55
UNCOMPRESSED_BITS = 8
CODEWORD_BITS = 8
HEADER_OCTETS = 6

TAG_LIT, TAG_A_LIT, TAG_B_LIT, TAG_RUN = 0b00, 0b01, 0b10, 0b11
MAX_PURE_RUN = 15
MAX_MIXED_A = 7


@dataclass
class IndexSequence:
    ranks: np.ndarray
    source_tensor: str = ""

    def __post_init__(self):
        ranks = np.asarray(self.ranks, dtype=np.int64).ravel()
        if ranks.size and (ranks.min() < 0 or ranks.max() >= RANK_LIMIT):
            raise DomainError(f"{self.source_tensor or 'sequence'}: rank outside 0..{RANK_LIMIT - 1}")
        self.ranks = ranks.astype(np.uint8)

    def __len__(self) -> int:
        return int(self.ranks.size)

    def __eq__(self, other):
        if not isinstance(other, IndexSequence):
            return NotImplemented
        return np.array_equal(self.ranks, other.ranks)


@dataclass
class CompressedStream:
    a_rank: int
    b_rank: int
    codewords: bytes = b""

    @property
    def codeword_count(self) -> int:
        return len(self.codewords)

    def to_bytes(self) -> bytes:
        return struct.pack("<BBI", self.a_rank, self.b_rank, len(self.codewords)) + bytes(self.codewords)

    @classmethod
    def from_bytes(cls, data: bytes) -> "CompressedStream":
        if len(data) < HEADER_OCTETS:
            raise CorruptStreamError("stream shorter than its 6-octet header", 0)
        a, b, count = struct.unpack_from("<BBI", data)
        if len(data) != HEADER_OCTETS + count:
            raise CorruptStreamError(
                f"header announces {count} codewords but {len(data) - HEADER_OCTETS} follow",
                min(count, len(data) - HEADER_OCTETS),
            )
        return cls(a, b, bytes(data[HEADER_OCTETS:]))


@dataclass(frozen=True)
class CompressionReport:
    UL: int
    UB: int
    CL: int
    CB: int
    CR: float
    header_octets: int = 0
    effective_CR: float = field(default=float("nan"))

    def to_text(self) -> str:
        return (
            f"record=compression ul={self.UL} ub={self.UB} cl={self.CL} cb={self.CB} "
            f"cr={self.CR:.4f} header_octets={self.header_octets} effective_cr={self.effective_CR:.4f}"
        )


# ---------------------------------------------------------------------------
# word-length stage
# ---------------------------------------------------------------------------


def word_length_compress(codes, name: str = "") -> IndexSequence:
    return IndexSequence(ranks_of(codes, 8), name)


def word_length_decompress(seq: IndexSequence) -> np.ndarray:
    return codes_of(seq.ranks, 8).astype(np.uint8)


def pack_6bit(seq: IndexSequence | Sequence[int]) -> bytes:
    """Pack ranks 6 bits apiece, MSB first, zero padded to a whole octet."""
    ranks = seq.ranks if isinstance(seq, IndexSequence) else np.asarray(seq, dtype=np.uint8)
    if len(ranks) == 0:
        return b""
    bits = (ranks.astype(np.uint8)[:, None] >> np.arange(5, -1, -1, dtype=np.uint8)) & 1
    return np.packbits(bits.ravel()).tobytes()


def unpack_6bit(data: bytes, count: int) -> IndexSequence:
    if len(data) != packed_6bit_size(count):
        raise DomainError(f"{len(data)} octets cannot hold exactly {count} packed ranks")
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[: 6 * count].reshape(count, 6)
    ranks = bits.astype(np.int64) @ (1 << np.arange(5, -1, -1))
    return IndexSequence(ranks)


def packed_6bit_size(count: int) -> int:
    return (6 * count + 7) // 8


# ---------------------------------------------------------------------------
# word-count stage
# ---------------------------------------------------------------------------


def choose_common(*seqs: IndexSequence | Sequence[int]) -> tuple[int, int]:
    """The two most frequent ranks over all ``seqs``, ties broken by smaller rank."""
    counts = np.zeros(RANK_LIMIT, dtype=np.int64)
    for seq in seqs:
        ranks = seq.ranks if isinstance(seq, IndexSequence) else np.asarray(seq, dtype=np.int64)
        counts += np.bincount(ranks, minlength=RANK_LIMIT)
    if counts.sum() == 0:
        raise DomainError("cannot choose common ranks of an empty input")
    # stable sort on -count keeps smaller ranks first among equals
    order = np.argsort(-counts, kind="stable")
    a = int(order[0])
    b = int(order[1])
    if counts[b] == 0:
        b = 0 if a != 0 else 1
    return a, b


def _run_codeword(a_rank: int, segments: list[list[int]]) -> int:
    if len(segments) == 1:
        sym, count = segments[0]
        last = 0 if sym == a_rank else 1
        return 0xC0 | (last << 5) | count
    (first, n_first), (second, n_second) = segments
    if second == a_rank:  # B then A*n
        return 0xC0 | (0 << 5) | (1 << 4) | (n_second << 1) | 1
    return 0xC0 | (1 << 5) | (1 << 4) | (n_first << 1) | 1


class _RunEncoder:
    """Encoder state: the pending A/B run as at most two ``[symbol, count]`` segments."""

    def __init__(self, a_rank: int, b_rank: int):
        self.a = a_rank
        self.b = b_rank
        self.out = bytearray()
        self.run: list[list[int]] = []

    def flush(self):
        if self.run:
            self.out.append(_run_codeword(self.a, self.run))
            self.run = []

    def _room(self, sym: int) -> int:
        """How many more copies of ``sym`` the pending run can take."""
        run = self.run
        if not run:
            return MAX_PURE_RUN
        if len(run) == 1:
            s, c = run[0]
            if s == sym:
                return MAX_PURE_RUN - c
            if s == self.a and c <= MAX_MIXED_A:  # A*c B, m is capped at 1
                return 1
            if s == self.b and c == 1:  # B A*n
                return MAX_MIXED_A
            return 0
        (s0, _), (s1, c1) = run
        if s1 == sym == self.a:
            return MAX_MIXED_A - c1
        return 0

    def feed_run(self, sym: int, count: int):
        while count:
            room = self._room(sym)
            if room == 0:
                self.flush()
                continue
            take = min(room, count)
            if self.run and self.run[-1][0] == sym:
                self.run[-1][1] += take
            else:
                self.run.append([sym, take])
            count -= take

    def feed_literals(self, lits: np.ndarray):
        first = int(lits[0])
        if self.run == [[self.a, 1]]:
            self.out.append((TAG_A_LIT << 6) | first)
            self.run = []
        elif self.run == [[self.b, 1]]:
            self.out.append((TAG_B_LIT << 6) | first)
            self.run = []
        else:
            self.flush()
            self.out.append(first)
        # remaining literals are LIT codewords, whose octet equals the rank
        self.out.extend(lits[1:].tobytes())


def word_count_compress(seq: IndexSequence | Sequence[int], a_rank: int, b_rank: int) -> CompressedStream:
    """Encode ranks into tagged octets around the common ranks ``a_rank`` / ``b_rank``.

    The input is scanned as maximal segments (runs of A, runs of B, blocks of
    other ranks), which yields the same codewords as a symbol-by-symbol greedy
    scan: a run grows while it stays encodable and is flushed otherwise, and a
    lone pending A or B is folded into the literal that follows it.
    """
    if not isinstance(seq, IndexSequence):
        seq = IndexSequence(seq)
    if not (0 <= a_rank < RANK_LIMIT and 0 <= b_rank < RANK_LIMIT) or a_rank == b_rank:
        raise DomainError(f"invalid common ranks ({a_rank}, {b_rank})")
    ranks = seq.ranks
    enc = _RunEncoder(a_rank, b_rank)
    if ranks.size == 0:
        return CompressedStream(a_rank, b_rank, b"")

    cls = np.where(ranks == a_rank, 0, np.where(ranks == b_rank, 1, 2))
    # segment boundaries: class changes, or A/B symbol changes
    change = np.flatnonzero(cls[1:] != cls[:-1]) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [ranks.size]))
    for start, end in zip(starts.tolist(), ends.tolist()):
        kind = cls[start]
        if kind == 2:
            enc.feed_literals(ranks[start:end])
        else:
            enc.feed_run(a_rank if kind == 0 else b_rank, end - start)
    enc.flush()
    return CompressedStream(a_rank, b_rank, bytes(enc.out))


def word_count_decompress(stream: CompressedStream) -> IndexSequence:
    """Exact inverse of :func:`word_count_compress`; rejects malformed codewords."""
    a, b = stream.a_rank, stream.b_rank
    if not (0 <= a < RANK_LIMIT and 0 <= b < RANK_LIMIT) or a == b:
        raise CorruptStreamError(f"invalid common ranks ({a}, {b}) in header", 0)
    cw = np.frombuffer(bytes(stream.codewords), dtype=np.uint8).astype(np.int64)
    if cw.size == 0:
        return IndexSequence(np.zeros(0, dtype=np.int64))
    tag = cw >> 6
    payload = cw & 0x3F
    last = (cw >> 5) & 1
    mixed = (cw >> 4) & 1
    pure_count = cw & 0x0F
    n = (cw >> 1) & 0x07
    m = cw & 1

    is_run = tag == TAG_RUN
    lit = ~is_run
    bad = lit & ((payload >= RANK_LIMIT) | (payload == a) | (payload == b))
    bad |= is_run & (mixed == 0) & (pure_count == 0)
    bad |= is_run & (mixed == 1) & ((n == 0) | (m == 0))
    if bad.any():
        pos = int(np.flatnonzero(bad)[0])
        raise CorruptStreamError(f"malformed codeword 0x{int(cw[pos]):02X}", pos)

    # every codeword expands to at most three (symbol, count) pieces
    k = cw.size
    syms = np.zeros((k, 3), dtype=np.int64)
    counts = np.zeros((k, 3), dtype=np.int64)

    prefix = np.where(tag == TAG_A_LIT, a, b)
    has_prefix = (tag == TAG_A_LIT) | (tag == TAG_B_LIT)
    syms[:, 0] = np.where(lit, prefix, 0)
    counts[:, 0] = np.where(has_prefix, 1, 0)
    syms[:, 1] = np.where(lit, payload, 0)
    counts[:, 1] = np.where(lit, 1, 0)

    pure = is_run & (mixed == 0)
    last_sym = np.where(last == 0, a, b)
    syms[:, 2] = np.where(pure, last_sym, syms[:, 2])
    counts[:, 2] = np.where(pure, pure_count, counts[:, 2])

    mix_ab = is_run & (mixed == 1) & (last == 1)  # A*n then B
    mix_ba = is_run & (mixed == 1) & (last == 0)  # B then A*n
    syms[:, 0] = np.where(mix_ab, a, np.where(mix_ba, b, syms[:, 0]))
    counts[:, 0] = np.where(mix_ab, n, np.where(mix_ba, 1, counts[:, 0]))
    syms[:, 1] = np.where(mix_ab, b, np.where(mix_ba, a, syms[:, 1]))
    counts[:, 1] = np.where(mix_ab, 1, np.where(mix_ba, n, counts[:, 1]))

    return IndexSequence(np.repeat(syms.ravel(), counts.ravel()))


# ---------------------------------------------------------------------------
# grouping and accounting
# ---------------------------------------------------------------------------


def compress_sequence(seq: IndexSequence) -> CompressedStream:
    """Word-count compress one sequence with its own common ranks."""
    a, b = choose_common(seq) if len(seq) else (0, 1)
    return word_count_compress(seq, a, b)


def compress_grouped(tensors: Sequence[IndexSequence], k: int) -> list[CompressedStream]:
    """Share (A, B) across consecutive groups of ``k`` tensors; one stream per tensor."""
    if k < 1:
        raise DomainError(f"group size must be >= 1, got {k}")
    streams = []
    for g in range(0, len(tensors), k):
        group = tensors[g : g + k]
        if sum(len(t) for t in group):
            a, b = choose_common(*group)
        else:
            a, b = 0, 1
        streams.extend(word_count_compress(t, a, b) for t in group)
    return streams


def compression_ratio(UL: int, UB: int, CL: int, CB: int) -> float:
    if CL <= 0:
        raise DomainError("compressed length must be positive")
    if UL <= 0 or UB <= 0 or CB <= 0:
        raise DomainError("lengths and bitwidths must be positive")
    return (UL * UB) / (CL * CB)


def compression_report(
    sources: Iterable[int], streams: Iterable[CompressedStream], headers: int | None = None
) -> CompressionReport:
    """Aggregate CR over tensors.

    ``CR`` counts codewords only. ``effective_CR`` also charges the stream
    framing: ``headers`` stored (A, B) pairs at 2 octets plus a 4-octet count
    per stream. ``headers`` defaults to one pair per stream.
    """
    streams = list(streams)
    UL = int(sum(sources))
    CL = sum(s.codeword_count for s in streams)
    if headers is None:
        headers = len(streams)
    header_octets = 2 * headers + 4 * len(streams)
    if CL == 0:
        cr = eff = 1.0 if UL == 0 else float("inf")
    else:
        cr = compression_ratio(UL, UNCOMPRESSED_BITS, CL, CODEWORD_BITS) if UL else 0.0
        eff = (UL * UNCOMPRESSED_BITS) / ((CL + header_octets) * CODEWORD_BITS)
    return CompressionReport(UL, UNCOMPRESSED_BITS, CL, CODEWORD_BITS, cr, header_octets, eff)


def compress_codes(codes, name: str = "") -> CompressedStream:
    """Both stages on one tensor of 8-bit fibbinary codes."""
    return compress_sequence(word_length_compress(codes, name))


def decompress_codes(stream: CompressedStream) -> np.ndarray:
    return word_length_decompress(word_count_decompress(stream))

