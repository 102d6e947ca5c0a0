"""Systematic Reed-Solomon codes over GF(256) with errors-and-erasures decoding.

Codeword symbol i is the coefficient of x**(n-1-i); the first k symbols are
the message. The generator polynomial has roots alpha**0 .. alpha**(n-k-1).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import LengthMismatch, RatioUnrealizable, UncorrectableCodeword
from .gf256 import EXP, EXP_NP, LOG, LOG_NP, MUL, gf_div, poly_mul

MAX_N = 255


def parse_ratio(ratio) -> tuple[int, int]:
    """Accept (parity, data) pairs or "P:D" strings."""
    if isinstance(ratio, str):
        m = re.fullmatch(r"\s*(\d+)\s*:\s*(\d+)\s*", ratio)
        if not m:
            raise ValueError(f"redundancy must look like 'P:D', got {ratio!r}")
        ratio = (int(m.group(1)), int(m.group(2)))
    parity, data = (int(x) for x in ratio)
    if parity <= 0 or data <= 0:
        raise ValueError(f"ratio components must be positive, got {parity}:{data}")
    return parity, data


@dataclass(frozen=True)
class RsParams:
    n: int
    k: int
    redundancy_ratio: tuple[int, int] = (1, 5)

    def __post_init__(self):
        if not 1 <= self.k < self.n <= MAX_N:
            raise ValueError(f"need 1 <= k < n <= {MAX_N}, got n={self.n}, k={self.k}")

    @property
    def nsym(self) -> int:
        return self.n - self.k

    @property
    def realized_ratio(self) -> float:
        """Parity symbols per data symbol actually achieved."""
        return self.nsym / self.k


@dataclass(frozen=True)
class Codeword:
    symbols: bytes
    erasure_flags: tuple[bool, ...] | None = None

    @property
    def erasures(self) -> list[int]:
        if not self.erasure_flags:
            return []
        return [i for i, bad in enumerate(self.erasure_flags) if bad]


@dataclass(frozen=True)
class CorrectionReport:
    corrected_positions: tuple[int, ...] = ()
    erasure_count: int = 0

    @property
    def corrections(self) -> int:
        return len(self.corrected_positions)


def redundancy_to_params(ratio, block_symbols: int) -> RsParams:
    parity, data = parse_ratio(ratio)
    k = int(block_symbols)
    if not 1 <= k <= MAX_N:
        raise ValueError(f"block_symbols must lie in [1, {MAX_N}]")
    n = k + math.ceil(k * parity / data)
    if n > MAX_N:
        raise RatioUnrealizable(
            f"{parity}:{data} on {k} data symbols needs n={n} > {MAX_N}; shrink k")
    return RsParams(n, k, (parity, data))


def max_data_symbols(ratio) -> int:
    """Largest k whose codeword still fits in 255 symbols at this ratio."""
    parity, data = parse_ratio(ratio)
    k = MAX_N * data // (data + parity)
    while k > 0 and k + math.ceil(k * parity / data) > MAX_N:
        k -= 1
    if k < 1:
        raise RatioUnrealizable(f"{parity}:{data} leaves no room for data symbols")
    return k


@lru_cache(maxsize=None)
def generator_poly(nsym: int) -> tuple[int, ...]:
    g = [1]
    for i in range(nsym):
        g = poly_mul(g, [1, EXP[i]])
    return tuple(g)


def rs_encode(data, params: RsParams) -> Codeword:
    data = bytes(data)
    if len(data) != params.k:
        raise LengthMismatch(f"expected {params.k} data symbols, got {len(data)}")
    parity = rs_encode_batch(np.frombuffer(data, dtype=np.uint8)[None, :], params)[0]
    return Codeword(data + parity.tobytes())


def _parity_lfsr(data: np.ndarray, nsym: int) -> np.ndarray:
    gen = np.asarray(generator_poly(nsym)[1:], dtype=np.uint8)
    rem = np.zeros((data.shape[0], nsym), dtype=np.uint8)
    for i in range(data.shape[1]):
        fb = data[:, i] ^ rem[:, 0]
        rem[:, :-1] = rem[:, 1:]
        rem[:, -1] = 0
        rem ^= MUL[fb[:, None], gen[None, :]]
    return rem


def _bit_basis(length: int) -> np.ndarray:
    """One row per input bit: symbol i holding bit j (MSB first), all else zero."""
    basis = np.zeros((length * 8, length), dtype=np.uint8)
    idx = np.arange(length * 8)
    basis[idx, idx // 8] = 128 >> (idx % 8)
    return basis


def _gf2_apply(words: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    # any GF(256)-linear map is a GF(2) matrix on the bits; sums stay < 2**24
    # so float32 BLAS is exact
    bits = np.unpackbits(words, axis=1).astype(np.float32)
    out = (bits @ matrix).astype(np.int32) & 1
    return np.packbits(out.astype(np.uint8), axis=1)


@lru_cache(maxsize=None)
def _parity_matrix(k: int, nsym: int) -> np.ndarray:
    rows = _parity_lfsr(_bit_basis(k), nsym)
    return np.unpackbits(rows, axis=1).astype(np.float32)


def rs_encode_batch(data: np.ndarray, params: RsParams) -> np.ndarray:
    """Parity rows for a (count, k) uint8 array of messages."""
    data = np.asarray(data, dtype=np.uint8)
    if data.ndim != 2 or data.shape[1] != params.k:
        raise LengthMismatch(f"expected rows of {params.k} data symbols")
    if data.shape[0] < 8:
        return _parity_lfsr(data, params.nsym)
    return _gf2_apply(data, _parity_matrix(params.k, params.nsym))


def _syndromes_horner(words: np.ndarray, nsym: int) -> np.ndarray:
    roots = np.asarray(EXP[:nsym], dtype=np.uint8)[None, :]
    s = np.zeros((words.shape[0], nsym), dtype=np.uint8)
    for i in range(words.shape[1]):
        s = MUL[s, roots] ^ words[:, i:i + 1]
    return s


@lru_cache(maxsize=None)
def _syndrome_matrix(n: int, nsym: int) -> np.ndarray:
    rows = _syndromes_horner(_bit_basis(n), nsym)
    return np.unpackbits(rows, axis=1).astype(np.float32)


def syndromes_batch(words: np.ndarray, nsym: int) -> np.ndarray:
    """Syndromes S_j = c(alpha**j) for every row of a (count, n) array."""
    words = np.asarray(words, dtype=np.uint8)
    if words.shape[0] < 8:
        return _syndromes_horner(words, nsym)
    return _gf2_apply(words, _syndrome_matrix(words.shape[1], nsym))


def _syndromes(word, nsym: int) -> list[int]:
    c = np.frombuffer(bytes(word), dtype=np.uint8)
    powers = np.arange(c.size - 1, -1, -1)
    nz = c != 0
    if not nz.any():
        return [0] * nsym
    logs = LOG_NP[c[nz]]
    j = np.arange(nsym)[:, None]
    terms = EXP_NP[(logs[None, :] + j * powers[nz][None, :]) % 255]
    return np.bitwise_xor.reduce(terms, axis=1).tolist()


def rs_decode(word, params: RsParams, erasures=None) -> tuple[bytes, CorrectionReport]:
    """Recover the k message symbols; raises UncorrectableCodeword past 2e+s <= n-k."""
    if isinstance(word, Codeword):
        if erasures is None:
            erasures = word.erasures
        word = word.symbols
    word = list(bytes(word))
    n, k, nsym = params.n, params.k, params.nsym
    if len(word) != n:
        raise LengthMismatch(f"expected {n} symbols, got {len(word)}")
    erasures = sorted(set(int(e) for e in (() if erasures is None else erasures)))
    if any(not 0 <= e < n for e in erasures):
        raise ValueError("erasure position outside the codeword")
    if len(erasures) > nsym:
        raise UncorrectableCodeword(f"{len(erasures)} erasures exceed the {nsym}-symbol budget")

    synd = _syndromes(word, nsym)
    if not any(synd):
        return bytes(word[:k]), CorrectionReport((), len(erasures))
    S = np.asarray(synd, dtype=np.uint8)

    # Berlekamp-Massey seeded with the erasure locator; arrays hold lowest degree first
    size = nsym + 2
    lam = np.zeros(size, dtype=np.uint8)
    lam[0] = 1
    for e in erasures:
        lam[1:] = lam[1:] ^ MUL[EXP[n - 1 - e], lam[:-1]]
    prev = lam.copy()
    s = len(erasures)
    L = s
    for r in range(s + 1, nsym + 1):
        delta = int(np.bitwise_xor.reduce(MUL[lam[:r], S[r - 1::-1]]))
        shifted = np.concatenate(([0], prev[:-1])).astype(np.uint8)
        if delta == 0:
            prev = shifted
            continue
        update = lam ^ MUL[delta, shifted]
        if 2 * L <= r + s - 1:
            prev = MUL[gf_div(1, delta), lam]
            L = r + s - L
        else:
            prev = shifted
        lam = update
    nz = np.flatnonzero(lam)
    degree = int(nz[-1])
    lam = lam[:degree + 1]
    if degree != L or 2 * (L - s) + s > nsym:
        raise UncorrectableCodeword("error locator is inconsistent with the syndromes")

    # Chien search over the n valid positions
    positions = np.asarray(_locator_roots(lam, n), dtype=np.int64)
    if positions.size != degree:
        raise UncorrectableCodeword(
            f"locator of degree {degree} has {positions.size} roots inside the codeword")

    # Forney: e = X * Omega(X^-1) / Lambda'(X^-1) for roots starting at alpha**0
    omega = np.zeros(nsym, dtype=np.uint8)
    for j in range(min(degree + 1, nsym)):
        if lam[j]:
            omega[j:] ^= MUL[lam[j], S[:nsym - j]]
    dlam = lam[1:].copy()
    dlam[1::2] = 0
    power = n - 1 - positions
    inv_exp = (255 - power) % 255
    num = _eval_at(omega, inv_exp)
    den = _eval_at(dlam, inv_exp)
    if not den.all():
        raise UncorrectableCodeword("zero derivative in Forney evaluation")
    mag = np.where(num == 0, 0,
                   EXP_NP[(power + LOG_NP[num] - LOG_NP[den]) % 255]).astype(np.uint8)
    hit = mag != 0
    for i, m in zip(positions[hit].tolist(), mag[hit].tolist()):
        word[i] ^= m
    if any(_syndromes(word, nsym)):
        raise UncorrectableCodeword("correction did not produce a valid codeword")
    return bytes(word[:k]), CorrectionReport(tuple(positions[hit].tolist()), len(erasures))


def _eval_at(p, exps: np.ndarray) -> np.ndarray:
    """Evaluate a lowest-degree-first polynomial at alpha**e for every e in exps."""
    acc = np.zeros(len(exps), dtype=np.uint8)
    for j, c in enumerate(np.asarray(p).tolist()):
        if c:
            acc ^= EXP_NP[(LOG[c] + j * exps) % 255]
    return acc


def _locator_roots(lam, n: int) -> list[int]:
    """Codeword positions i whose inverse locator alpha**-(n-1-i) is a root of lam."""
    exps = (255 - (n - 1 - np.arange(n))) % 255
    return np.flatnonzero(_eval_at(lam, exps) == 0).tolist()
