"""Arithmetic in GF(2^8) built on the primitive polynomial 0x11D (alpha = 2)."""
from __future__ import annotations

import numpy as np

PRIMITIVE = 0x11D


def _build_tables():
    exp = [0] * 512
    log = [0] * 256
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & 0x100:
            x ^= PRIMITIVE
    for i in range(255, 512):
        exp[i] = exp[i - 255]
    return exp, log


EXP, LOG = _build_tables()

EXP_NP = np.asarray(EXP, dtype=np.uint8)
LOG_NP = np.asarray(LOG, dtype=np.int32)


def _mul_table() -> np.ndarray:
    a = np.arange(256)
    la = LOG_NP[a]
    table = EXP_NP[(la[:, None] + la[None, :]) % 255].copy()
    table[0, :] = 0
    table[:, 0] = 0
    return table


# MUL[a, b] = a*b; lets whole arrays of products be computed by fancy indexing
MUL = _mul_table()


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return EXP[LOG[a] + LOG[b]]


def gf_div(a: int, b: int) -> int:
    if b == 0:
        raise ZeroDivisionError("division by zero in GF(256)")
    if a == 0:
        return 0
    return EXP[(LOG[a] - LOG[b]) % 255]


def gf_inv(a: int) -> int:
    return gf_div(1, a)


def gf_pow(a: int, power: int) -> int:
    if a == 0:
        return 0 if power else 1
    return EXP[(LOG[a] * power) % 255]


# Polynomials below are coefficient lists, highest degree first.

def poly_mul(p, q):
    out = [0] * (len(p) + len(q) - 1)
    for j, b in enumerate(q):
        if b:
            lb = LOG[b]
            for i, a in enumerate(p):
                if a:
                    out[i + j] ^= EXP[LOG[a] + lb]
    return out


def poly_eval(p, x: int) -> int:
    y = 0
    for c in p:
        y = gf_mul(y, x) ^ c
    return y
