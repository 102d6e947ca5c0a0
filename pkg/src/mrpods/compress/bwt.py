"""Rotation Burrows-Wheeler transform with an explicit primary index.

No sentinel octet is used: payloads span the whole 0-255 alphabet, so the
original rotation is identified by its row in the sorted rotation matrix.
Identical rotations are ordered by starting offset, which puts the
original (offset 0) first among any rotations equal to it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyBlock, IndexOutOfRange

DEFAULT_BLOCK_SIZE = 900_000
MIN_BLOCK_SIZE = 4 * 1024
MAX_BLOCK_SIZE = 4 * 1024 * 1024


@dataclass(frozen=True)
class BwtBlock:
    data: bytes
    primary_index: int

    def __post_init__(self):
        if self.data and not 0 <= self.primary_index < len(self.data):
            raise IndexOutOfRange(
                f"primary_index {self.primary_index} outside [0, {len(self.data)})")


def sorted_rotations(block) -> np.ndarray:
    """Starting offsets of all cyclic rotations of `block`, in sorted order.

    Prefix doubling over cyclic substrings: after round j every rotation is
    ranked by its first 2**j octets. Once the compared length reaches the
    block length, equal ranks mean equal rotations and the final stable
    pass orders those by offset.
    """
    a = np.frombuffer(bytes(block), dtype=np.uint8)
    n = a.size
    idx = np.arange(n, dtype=np.int64)
    rank = a.astype(np.int64)
    span = 1
    while span < n:
        nxt = rank[(idx + span) % n]
        key = rank * (n + 256) + nxt
        _, rank = np.unique(key, return_inverse=True)
        rank = rank.astype(np.int64).ravel()
        span *= 2
        if rank.max() == n - 1:
            break
    return np.lexsort((idx, rank))


def bwt_forward(block) -> BwtBlock:
    block = bytes(block)
    n = len(block)
    if n == 0:
        raise EmptyBlock("cannot transform an empty block")
    if n > MAX_BLOCK_SIZE:
        raise ValueError(f"block of {n} octets exceeds {MAX_BLOCK_SIZE}")
    order = sorted_rotations(block)
    a = np.frombuffer(block, dtype=np.uint8)
    last = a[(order - 1) % n]
    primary = int(np.flatnonzero(order == 0)[0])
    return BwtBlock(last.tobytes(), primary)


def bwt_inverse(block: BwtBlock) -> bytes:
    data = bytes(block.data)
    n = len(data)
    if n == 0:
        return b""
    if not 0 <= block.primary_index < n:
        raise IndexOutOfRange(
            f"primary_index {block.primary_index} outside [0, {n})")
    last = np.frombuffer(data, dtype=np.uint8)
    # stable sort of the last column gives the first column; following it
    # from the primary row walks the original text front to back
    nxt = np.argsort(last, kind="stable").tolist()
    out = bytearray(n)
    i = nxt[block.primary_index]
    for pos in range(n):
        out[pos] = data[i]
        i = nxt[i]
    return bytes(out)
