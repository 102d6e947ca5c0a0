"""Move-to-front recoding over the full octet alphabet."""
from __future__ import annotations


def mtf_forward(data) -> bytes:
    alphabet = bytearray(range(256))
    out = bytearray(len(data))
    for pos, sym in enumerate(bytes(data)):
        i = alphabet.index(sym)
        out[pos] = i
        if i:
            del alphabet[i]
            alphabet.insert(0, sym)
    return bytes(out)


def mtf_inverse(data) -> bytes:
    alphabet = bytearray(range(256))
    out = bytearray(len(data))
    for pos, i in enumerate(bytes(data)):
        sym = alphabet[i]
        out[pos] = sym
        if i:
            del alphabet[i]
            alphabet.insert(0, sym)
    return bytes(out)
