"""Block compressor: Huffman(MTF(BWT(block))) in a self-checking container.

Container layout (all integers little-endian u32)::

    b"MRP1" | block_size | block_count
    per block: bit_length | primary_index | 257 code lengths | payload bits
               (MSB-first, zero-padded to a whole octet)
    CRC-32 of everything above

The output is deliberately not a bzip2 file: there are no run-length
passes and no multi-table selectors.
"""
from __future__ import annotations

import enum
import struct
import zlib
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..errors import (CorruptContainer, IndexOutOfRange, InputTooLarge,
                      InvalidTable, TruncatedStream)
from .bwt import (DEFAULT_BLOCK_SIZE, MAX_BLOCK_SIZE, MIN_BLOCK_SIZE, BwtBlock,
                  bwt_forward, bwt_inverse)
from .huffman import NUM_SYMBOLS, HuffmanTable, huffman_decode, huffman_encode
from .mtf import mtf_forward, mtf_inverse

MAGIC = b"MRP1"
MAX_INPUT_BYTES = 4 * 1024 * 1024

_HEAD = struct.Struct("<4sII")
_BLOCK_HEAD = struct.Struct("<II")
_CRC = struct.Struct("<I")


class Stage(enum.IntEnum):
    RAW = 0
    BWT = 1
    MTF = 2
    COMPRESSED = 3


@dataclass(frozen=True)
class ByteStream:
    """Payload bytes tagged with how far along the pipeline they are."""

    data: bytes
    stage: Stage = Stage.RAW

    def advance(self, data, stage: Stage) -> "ByteStream":
        """Next (or, when decoding, previous) stage; skipping stages is an error."""
        if abs(int(stage) - int(self.stage)) != 1:
            raise ValueError(f"cannot move from {self.stage.name} to {stage.name}")
        return ByteStream(bytes(data), stage)

    def __len__(self):
        return len(self.data)


@dataclass(frozen=True)
class CompressionStats:
    original_size_bytes: int
    compressed_size_bytes: int

    @property
    def exact_ratio(self) -> Fraction:
        return Fraction(self.original_size_bytes, self.compressed_size_bytes)

    @property
    def compression_ratio(self) -> float:
        """ODS / CDS."""
        return self.original_size_bytes / self.compressed_size_bytes

    @property
    def data_density(self) -> float:
        """1 / CDS, in reciprocal bytes."""
        return 1.0 / self.compressed_size_bytes


def _as_bytes(data, expected: Stage) -> bytes:
    if isinstance(data, ByteStream):
        if data.stage != expected:
            raise ValueError(f"expected a {expected.name} stream, got {data.stage.name}")
        return data.data
    return bytes(data)


def encode_block(block: bytes) -> tuple[int, HuffmanTable, np.ndarray]:
    raw = ByteStream(block)
    b = bwt_forward(raw.data)
    s1 = raw.advance(b.data, Stage.BWT)
    s2 = s1.advance(mtf_forward(s1.data), Stage.MTF)
    table, bits = huffman_encode(s2.data)
    return b.primary_index, table, bits


def decode_block(primary_index: int, table: HuffmanTable, bits) -> bytes:
    mtf = huffman_decode(table, bits)
    if not mtf:
        raise CorruptContainer("empty block in container")
    last = mtf_inverse(mtf)
    return bwt_inverse(BwtBlock(last, primary_index))


def compress(data, block_size: int = DEFAULT_BLOCK_SIZE,
             max_input_bytes: int | None = MAX_INPUT_BYTES) -> tuple[ByteStream, CompressionStats]:
    raw = _as_bytes(data, Stage.RAW)
    if not MIN_BLOCK_SIZE <= block_size <= MAX_BLOCK_SIZE:
        raise ValueError(f"block_size must lie in [{MIN_BLOCK_SIZE}, {MAX_BLOCK_SIZE}]")
    if max_input_bytes is not None and len(raw) > max_input_bytes:
        raise InputTooLarge(
            f"{len(raw)} bytes exceeds the {max_input_bytes}-byte input limit")
    blocks = [raw[i:i + block_size] for i in range(0, len(raw), block_size)]
    parts = [_HEAD.pack(MAGIC, block_size, len(blocks))]
    for block in blocks:
        primary, table, bits = encode_block(block)
        parts.append(_BLOCK_HEAD.pack(bits.size, primary))
        parts.append(table.to_bytes())
        parts.append(np.packbits(bits).tobytes())
    body = b"".join(parts)
    out = body + _CRC.pack(zlib.crc32(body))
    return ByteStream(out, Stage.COMPRESSED), CompressionStats(len(raw), len(out))


def container_blocks(container: bytes):
    """Parse a container into (block_size, [(primary, table, bits), ...])."""
    if len(container) < _HEAD.size + _CRC.size:
        raise CorruptContainer("container shorter than its fixed header")
    body, (crc,) = container[:-_CRC.size], _CRC.unpack(container[-_CRC.size:])
    magic, block_size, count = _HEAD.unpack_from(body)
    if magic != MAGIC:
        raise CorruptContainer(f"bad magic {magic!r}")
    if zlib.crc32(body) != crc:
        raise CorruptContainer("container CRC-32 mismatch")
    if not MIN_BLOCK_SIZE <= block_size <= MAX_BLOCK_SIZE:
        raise CorruptContainer(f"implausible block size {block_size}")
    off = _HEAD.size
    out = []
    for _ in range(count):
        if off + _BLOCK_HEAD.size + NUM_SYMBOLS > len(body):
            raise CorruptContainer("truncated block header")
        nbits, primary = _BLOCK_HEAD.unpack_from(body, off)
        off += _BLOCK_HEAD.size
        try:
            table = HuffmanTable.from_bytes(body[off:off + NUM_SYMBOLS])
        except InvalidTable as exc:
            raise CorruptContainer(str(exc)) from exc
        off += NUM_SYMBOLS
        nbytes = (nbits + 7) // 8
        if off + nbytes > len(body):
            raise CorruptContainer("truncated block payload")
        packed = np.frombuffer(body, dtype=np.uint8, count=nbytes, offset=off)
        out.append((primary, table, np.unpackbits(packed)[:nbits]))
        off += nbytes
    if off != len(body):
        raise CorruptContainer(f"{len(body) - off} unexpected trailing bytes")
    return block_size, out


def decompress(data) -> ByteStream:
    container = _as_bytes(data, Stage.COMPRESSED)
    block_size, blocks = container_blocks(container)
    out = []
    for primary, table, bits in blocks:
        try:
            block = decode_block(primary, table, bits)
        except (TruncatedStream, IndexOutOfRange) as exc:
            raise CorruptContainer(str(exc)) from exc
        if len(block) > block_size:
            raise CorruptContainer("decoded block exceeds the declared block size")
        out.append(block)
    return ByteStream(b"".join(out), Stage.RAW)
