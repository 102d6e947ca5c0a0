"""Canonical Huffman coding over octets plus an end-of-block symbol.

Tables travel as 257 code lengths; codes are rebuilt canonically (shorter
codes first, ties by symbol value). Code lengths are capped at 16 bits so
the decoder can index a 64 Ki-entry lookup table.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from itertools import count

import numpy as np

from ..errors import InvalidTable, TruncatedStream

EOB = 256
NUM_SYMBOLS = 257
MAX_CODE_LEN = 16

_DECODE_CHUNK = 1 << 20


def code_lengths(freqs, max_len: int = MAX_CODE_LEN) -> list[int]:
    """Huffman code lengths for a frequency table (0 means absent).

    When the optimal tree is deeper than `max_len`, counts are flattened
    (f -> 1 + f // 2) and the tree rebuilt until it fits.
    """
    freqs = [int(f) for f in freqs]
    if any(f < 0 for f in freqs):
        raise ValueError("negative frequency")
    while True:
        lengths = _tree_depths(freqs)
        if max(lengths, default=0) <= max_len:
            return lengths
        freqs = [0 if f == 0 else 1 + f // 2 for f in freqs]


def _tree_depths(freqs: list[int]) -> list[int]:
    lengths = [0] * len(freqs)
    tick = count()
    heap = [(f, next(tick), [s]) for s, f in enumerate(freqs) if f > 0]
    if len(heap) == 1:
        lengths[heap[0][2][0]] = 1
        return lengths
    heapq.heapify(heap)
    while len(heap) > 1:
        fa, _, a = heapq.heappop(heap)
        fb, _, b = heapq.heappop(heap)
        for s in a:
            lengths[s] += 1
        for s in b:
            lengths[s] += 1
        heapq.heappush(heap, (fa + fb, next(tick), a + b))
    return lengths


@dataclass(frozen=True)
class HuffmanTable:
    code_lengths: tuple[int, ...]

    def __post_init__(self):
        lengths = tuple(int(x) for x in self.code_lengths)
        object.__setattr__(self, "code_lengths", lengths)
        if len(lengths) != NUM_SYMBOLS:
            raise InvalidTable(f"expected {NUM_SYMBOLS} code lengths, got {len(lengths)}")
        if any(l < 0 or l > MAX_CODE_LEN for l in lengths):
            raise InvalidTable(f"code lengths must lie in [0, {MAX_CODE_LEN}]")
        if self.kraft_sum() > 1 << MAX_CODE_LEN:
            raise InvalidTable("code lengths violate the Kraft inequality")

    def kraft_sum(self) -> int:
        """Kraft sum scaled by 2**MAX_CODE_LEN (<= 2**MAX_CODE_LEN when valid)."""
        return sum(1 << (MAX_CODE_LEN - l) for l in self.code_lengths if l)

    def codes(self) -> list[int]:
        """Canonical code value for each symbol (0 for absent symbols)."""
        out = [0] * NUM_SYMBOLS
        code = 0
        prev = 0
        for length, sym in sorted((l, s) for s, l in enumerate(self.code_lengths) if l):
            code <<= length - prev
            out[sym] = code
            code += 1
            prev = length
        return out

    def to_bytes(self) -> bytes:
        return bytes(self.code_lengths)

    @classmethod
    def from_bytes(cls, raw) -> "HuffmanTable":
        return cls(tuple(bytes(raw)))

    def _lookup(self):
        # every 16-bit window maps to the (symbol, length) of the code it starts with
        sym = np.full(1 << MAX_CODE_LEN, -1, dtype=np.int32)
        size = np.zeros(1 << MAX_CODE_LEN, dtype=np.int32)
        for s, (c, l) in enumerate(zip(self.codes(), self.code_lengths)):
            if l:
                lo = c << (MAX_CODE_LEN - l)
                hi = lo + (1 << (MAX_CODE_LEN - l))
                sym[lo:hi] = s
                size[lo:hi] = l
        return sym, size


def huffman_encode(data) -> tuple[HuffmanTable, np.ndarray]:
    """Encode `data` followed by EOB; returns the table and a 0/1 uint8 array."""
    syms = np.frombuffer(bytes(data), dtype=np.uint8)
    if syms.size == 0:
        lengths = [0] * NUM_SYMBOLS
        lengths[EOB] = 1
        return HuffmanTable(tuple(lengths)), np.zeros(0, dtype=np.uint8)
    freqs = np.bincount(syms, minlength=NUM_SYMBOLS)
    freqs[EOB] = 1
    table = HuffmanTable(tuple(code_lengths(freqs)))
    codes = np.asarray(table.codes(), dtype=np.int64)
    lens = np.asarray(table.code_lengths, dtype=np.int64)
    seq = np.append(syms.astype(np.int64), EOB)
    c = codes[seq]
    l = lens[seq]
    starts = np.cumsum(l) - l
    bits = np.zeros(int(l.sum()), dtype=np.uint8)
    for j in range(int(l.max())):
        m = l > j
        bits[starts[m] + j] = (c[m] >> (l[m] - 1 - j)) & 1
    return table, bits


def huffman_decode(table: HuffmanTable, bits) -> bytes:
    if not isinstance(table, HuffmanTable):
        table = HuffmanTable(tuple(table))
    bits = np.asarray(bits, dtype=np.uint8)
    nbits = bits.size
    if nbits == 0:
        if sum(1 for l in table.code_lengths if l) == 1 and table.code_lengths[EOB]:
            return b""
        raise TruncatedStream("empty bit sequence without end-of-block")
    lut_sym, lut_len = table._lookup()
    buf = np.concatenate([np.packbits(bits), np.zeros(3, dtype=np.uint8)]).astype(np.uint32)

    # Compute, for every bit position in a chunk, which code starts there and
    # where the next one begins; then hop through those positions.
    out = []
    pos = 0
    while True:
        lo = pos
        hi = min(nbits, lo + _DECODE_CHUNK)
        p = np.arange(lo, hi, dtype=np.int64)
        b = p >> 3
        window = ((buf[b] << 16) | (buf[b + 1] << 8) | buf[b + 2]) >> (8 - (p & 7))
        window &= (1 << MAX_CODE_LEN) - 1
        size = lut_len[window]
        nxt = (p + size).tolist()
        visited = []
        while pos < hi:
            visited.append(pos)
            step = nxt[pos - lo]
            if step == pos:
                raise TruncatedStream(f"no code matches the bits at offset {pos}")
            pos = step
        if not visited:
            raise TruncatedStream("bit sequence ended without end-of-block")
        v = np.asarray(visited, dtype=np.int64) - lo
        syms = lut_sym[window[v]]
        ends = np.asarray(visited, dtype=np.int64) + size[v]
        stop = np.flatnonzero(syms == EOB)
        if stop.size:
            e = stop[0]
            if ends[e] > nbits:
                raise TruncatedStream("end-of-block code is cut short")
            out.append(syms[:e].astype(np.uint8))
            return b"".join(x.tobytes() for x in out)
        if ends[-1] > nbits:
            raise TruncatedStream("bit sequence ends in the middle of a code")
        out.append(syms.astype(np.uint8))
        if pos >= nbits:
            raise TruncatedStream("bit sequence ended without end-of-block")
