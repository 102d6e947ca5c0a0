import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mrpods.compress import (EOB, BwtBlock, ByteStream, CompressionStats, HuffmanTable, Stage,
                             bwt_forward, bwt_inverse, code_lengths, compress, decompress,
                             huffman_decode, huffman_encode, mtf_forward, mtf_inverse)
from mrpods.compress.huffman import MAX_CODE_LEN, NUM_SYMBOLS
from mrpods.errors import (CorruptContainer, EmptyBlock, IndexOutOfRange, InputTooLarge,
                           InvalidTable, TruncatedStream)

from oracles import bwt_brute, mtf_list


# --- BWT ------------------------------------------------------------------

def test_bwt_banana_matches_rotation_sort():
    b = bwt_forward(b"banana")
    assert (b.data, b.primary_index) == bwt_brute(b"banana")
    assert b.data == b"nnbaaa" and b.primary_index == 3
    assert bwt_inverse(b) == b"banana"


def test_bwt_single_octet():
    b = bwt_forward(b"A")
    assert (b.data, b.primary_index) == (b"A", 0)
    assert bwt_inverse(BwtBlock(b"A", 0)) == b"A"


def test_bwt_constant_block_takes_index_zero():
    b = bwt_forward(b"aaaa")
    assert (b.data, b.primary_index) == (b"aaaa", 0)


def test_bwt_empty_rejected():
    with pytest.raises(EmptyBlock):
        bwt_forward(b"")


def test_bwt_bad_index():
    with pytest.raises(IndexOutOfRange):
        bad = BwtBlock(b"abc", 0)
        object.__setattr__(bad, "primary_index", 7)
        bwt_inverse(bad)
    with pytest.raises(IndexOutOfRange):
        BwtBlock(b"abc", 3)


def test_bwt_periodic_inputs_against_oracle():
    for s in [b"abab", b"abcabc", b"\x00\x01" * 7, b"xyzxyzxy", bytes(range(5)) * 3]:
        assert (lambda b: (b.data, b.primary_index))(bwt_forward(s)) == bwt_brute(s)


def test_bwt_random_1k_blocks_round_trip():
    rng = np.random.default_rng(11)
    for _ in range(300):
        alpha = int(rng.integers(1, 257))
        block = rng.integers(0, alpha, 1024, dtype=np.uint16).astype(np.uint8).tobytes()
        out = bwt_forward(block)
        assert sorted(out.data) == sorted(block)
        assert bwt_inverse(out) == block


@settings(max_examples=200, deadline=None)
@given(st.binary(min_size=1, max_size=300))
def test_bwt_property_round_trip(data):
    out = bwt_forward(data)
    assert len(out.data) == len(data)
    assert bwt_inverse(out) == data


@settings(max_examples=200, deadline=None)
@given(st.binary(min_size=1, max_size=40))
def test_bwt_property_matches_brute_force(data):
    out = bwt_forward(data)
    assert (out.data, out.primary_index) == bwt_brute(data)


# --- MTF ------------------------------------------------------------------

@pytest.mark.parametrize("data,coded", [
    ([0, 0, 0, 0], [0, 0, 0, 0]),
    ([1, 1, 2, 2], [1, 0, 2, 0]),
    ([], []),
])
def test_mtf_examples(data, coded):
    assert list(mtf_forward(bytes(data))) == coded == mtf_list(data)
    assert list(mtf_inverse(bytes(coded))) == data


def test_mtf_inverse_small():
    assert mtf_inverse(bytes([1, 0, 2, 0])) == bytes([1, 1, 2, 2])
    assert mtf_inverse(bytes(3)) == bytes(3)


def test_mtf_random_64k_round_trip():
    rng = np.random.default_rng(5)
    for _ in range(3):
        data = rng.integers(0, 256, 65536, dtype=np.uint8).tobytes()
        coded = mtf_forward(data)
        assert len(coded) == len(data)
        assert mtf_inverse(coded) == data
    small = rng.integers(0, 256, 3000, dtype=np.uint8).tobytes()
    assert list(mtf_forward(small)) == mtf_list(small)


# --- Huffman --------------------------------------------------------------

def test_code_lengths_two_equal_symbols_get_one_bit():
    freqs = [0] * NUM_SYMBOLS
    freqs[ord("a")] = freqs[ord("b")] = 50
    lens = code_lengths(freqs)
    assert lens[ord("a")] == lens[ord("b")] == 1
    assert sum(1 for n in lens if n) == 2


def test_huffman_constant_input_costs_about_one_bit_per_symbol():
    table, bits = huffman_encode(bytes(1000))
    assert bits.size <= 1020
    assert huffman_decode(table, bits) == bytes(1000)


def test_huffman_two_symbol_input_round_trip():
    data = b"ab" * 400
    table, bits = huffman_encode(data)
    assert bits.size <= 2 * len(data) + 2
    assert huffman_decode(table, bits) == data


def test_huffman_random_is_incompressible():
    for seed in range(100):
        data = np.random.default_rng(seed).integers(0, 256, 4096, dtype=np.uint8).tobytes()
        table, bits = huffman_encode(data)
        # the payload cannot beat 8 bits/symbol by more than what a table can shave off
        assert bits.size >= 8 * 4096 - 8 * NUM_SYMBOLS
        assert bits.size <= 8 * 4096 + 8 * 4096 // 8 + MAX_CODE_LEN
        if seed < 5:
            assert huffman_decode(table, bits) == data


def test_huffman_empty_input():
    table, bits = huffman_encode(b"")
    assert bits.size == 0
    assert [i for i, n in enumerate(table.code_lengths) if n] == [EOB]


def test_huffman_table_canonical_and_kraft():
    data = bytes(np.random.default_rng(1).zipf(1.3, 20000).clip(0, 255).astype(np.uint8))
    table, bits = huffman_encode(data)
    assert table.kraft_sum() <= 1 << MAX_CODE_LEN
    assert max(table.code_lengths) <= MAX_CODE_LEN
    assert HuffmanTable.from_bytes(table.to_bytes()) == table
    codes = table.codes()
    used = sorted((n, s) for s, n in enumerate(table.code_lengths) if n)
    # canonical: codes increase with (length, symbol)
    vals = [codes[s] << (MAX_CODE_LEN - n) for n, s in used]
    assert vals == sorted(vals) and len(set(vals)) == len(vals)
    assert huffman_decode(table, bits) == data


def test_huffman_long_codes_are_capped():
    freqs = [0] * NUM_SYMBOLS
    for i in range(40):
        freqs[i] = 2 ** min(i, 30)
    lens = code_lengths(freqs)
    assert max(lens) <= MAX_CODE_LEN
    assert sum(2 ** (MAX_CODE_LEN - n) for n in lens if n) <= 2 ** MAX_CODE_LEN


def test_huffman_kraft_violation_rejected():
    lens = [0] * NUM_SYMBOLS
    lens[0] = lens[1] = lens[2] = 1
    with pytest.raises(InvalidTable):
        HuffmanTable(tuple(lens))


def test_huffman_truncated_stream():
    table, bits = huffman_encode(b"hello world")
    with pytest.raises(TruncatedStream):
        huffman_decode(table, bits[:-1])
    with pytest.raises(TruncatedStream):
        huffman_decode(table, bits[:3])


# --- container --------------------------------------------------------------

def test_stats_are_exact():
    s = CompressionStats(100, 50)
    assert s.compression_ratio == 2.0
    assert s.data_density == 0.02
    assert s.exact_ratio == Fraction(2)


def test_stats_identity_holds_on_real_data():
    data = b"the quick brown fox " * 500
    _, s = compress(data)
    assert abs(s.compression_ratio * s.compressed_size_bytes - s.original_size_bytes) \
        <= 1e-12 * s.original_size_bytes
    assert s.data_density == 1 / s.compressed_size_bytes


def test_stage_transitions():
    raw = ByteStream(b"x")
    with pytest.raises(ValueError):
        raw.advance(b"x", Stage.MTF)
    assert raw.advance(b"y", Stage.BWT).stage is Stage.BWT
    with pytest.raises(ValueError):
        decompress(raw)


@pytest.mark.parametrize("payload", [b"", b"\x00", b"abc", bytes(range(256)) * 40])
def test_container_round_trip_small(payload):
    out, _ = compress(payload)
    assert out.data[:4] == b"MRP1"
    assert decompress(out).data == payload


def test_container_multi_block():
    rng = np.random.default_rng(3)
    data = rng.integers(0, 8, 20000, dtype=np.uint8).tobytes()
    out, _ = compress(data, block_size=4096)
    assert int.from_bytes(out.data[8:12], "little") == 5
    assert decompress(out).data == data


def test_container_random_payloads_round_trip():
    rng = np.random.default_rng(7)
    for _ in range(60):
        n = int(rng.integers(1, 5000))
        alpha = int(rng.integers(1, 257))
        data = rng.integers(0, alpha, n, dtype=np.uint16).astype(np.uint8).tobytes()
        assert decompress(compress(data)[0]).data == data


def test_repetitive_text_compresses_well():
    line = b"It was the best of times, it was the worst of times; "
    text = (line * (2 ** 20 // len(line) + 1))[:2 ** 20]
    _, stats = compress(text)
    assert stats.compression_ratio > 3
    # no run-length stage, so one bit per symbol is the floor
    assert 2 ** 20 // 8 <= stats.compressed_size_bytes < 2 ** 20 // 8 + 4000


def test_input_limit():
    with pytest.raises(InputTooLarge):
        compress(bytes(4 * 1024 * 1024 + 1))
    out, _ = compress(bytes(5000), max_input_bytes=4000 + 1000)
    assert decompress(out).data == bytes(5000)


def test_corrupt_containers_are_detected():
    good, _ = compress(b"some payload that is long enough " * 20)
    data = bytearray(good.data)
    with pytest.raises(CorruptContainer):
        decompress(b"XXXX" + bytes(data[4:]))
    with pytest.raises(CorruptContainer):
        decompress(bytes(data[:-5]))
    data[20] ^= 0x40
    with pytest.raises(CorruptContainer):
        decompress(bytes(data))
    with pytest.raises(CorruptContainer):
        decompress(b"MR")


def test_bwt_all_short_strings_exhaustive_small():
    # a quick slice of the exhaustive check; the full 6,561 run is an acceptance criterion
    for n in range(1, 6):
        for t in itertools.product(b"abc", repeat=n):
            s = bytes(t)
            b = bwt_forward(s)
            assert (b.data, b.primary_index) == bwt_brute(s)
