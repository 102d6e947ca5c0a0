"""BWT -> MTF -> Huffman compression stage."""
from .bwt import DEFAULT_BLOCK_SIZE, BwtBlock, bwt_forward, bwt_inverse, sorted_rotations
from .huffman import EOB, HuffmanTable, code_lengths, huffman_decode, huffman_encode
from .mtf import mtf_forward, mtf_inverse
from .pipeline import (MAX_INPUT_BYTES, ByteStream, CompressionStats, Stage, compress,
                       decompress)

__all__ = [
    "DEFAULT_BLOCK_SIZE", "MAX_INPUT_BYTES", "EOB",
    "BwtBlock", "ByteStream", "CompressionStats", "HuffmanTable", "Stage",
    "bwt_forward", "bwt_inverse", "sorted_rotations", "code_lengths",
    "compress", "decompress", "huffman_decode", "huffman_encode",
    "mtf_forward", "mtf_inverse",
]
