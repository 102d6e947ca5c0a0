"""Version-1 sheet format: geometry, page header, addressed blocks, pagination.

Cell layout of one sheet (a cell is one data dot, 1 = ink)::

    rows/cols 0-1          solid frame
    row/col 2 and n-3      timing ring, cell (r, c) inked when r + c is even
    header band (top)      RS(64, 44)-protected header, row-major
    tiles                  32x32-cell tiles separated by 3-cell gutters
    header band (bottom)   second copy of the header

Tiles hold the page's physical byte stream (128 bytes per tile, row-major,
MSB first). That stream is the page's Reed-Solomon codewords interleaved
symbol by symbol across the whole page (byte j belongs to codeword
j mod C), followed by zero filler. The codewords' message bytes carry the
page's block records back to back.

Block record: address (u32 LE) | 122 payload bytes | CRC-16/CCITT (u16 LE).
Address bit 31 marks padding blocks on the last page.
"""
from __future__ import annotations

import binascii
import hashlib
import math
import struct
import zlib
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .ecc import (RsParams, max_data_symbols, parse_ratio, rs_decode,
                  rs_encode_batch, syndromes_batch)
from .errors import (BadHeaderCrc, ConfigInvalid, HeaderConflict, InputTooLarge,
                     MixedPayloads, UncorrectableCodeword, UnknownVersion)

FORMAT_VERSION = 1
FRAME = 2
BORDER = 3  # frame + timing ring
TILE = 32
GUTTER = 3
TILE_BYTES = TILE * TILE // 8

HEADER_SIZE = 44
HEADER_CODE = RsParams(64, HEADER_SIZE, (20, 44))
HEADER_BITS = HEADER_CODE.n * 8

BLOCK_PAYLOAD = 122
BLOCK_RECORD = 4 + BLOCK_PAYLOAD + 2
PAD_FLAG = 0x8000_0000
OMITTED = 0xFFFF_FFFF
OMITTED_SIZE = 0xFFFF_FFFF_FFFF_FFFF
FLAG_FINAL = 0x01
ERASURE_SPARE = 4  # parity symbols never spent on erasures

_HEADER = struct.Struct("<BBBB16sIIBBHQ")
_BLOCK_ADDR = struct.Struct("<I")
_CRC16 = struct.Struct("<H")


# --------------------------------------------------------------------------
# configuration and capacity

@dataclass(frozen=True)
class SheetConfig:
    dots_per_inch: int = 200
    dot_size_percent: int = 70
    redundancy: tuple[int, int] = (1, 5)
    page_width_in: float = 8.5
    page_height_in: float = 11.0
    margin_in: float = 0.0
    omit_total_pages: bool = False

    def __post_init__(self):
        try:
            object.__setattr__(self, "redundancy", parse_ratio(self.redundancy))
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from exc
        if not 50 <= self.dots_per_inch <= 600:
            raise ConfigInvalid("dots_per_inch must lie in [50, 600]")
        if not 10 <= self.dot_size_percent <= 100:
            raise ConfigInvalid("dot_size_percent must lie in [10, 100]")
        if self.page_width_in <= 0 or self.page_height_in <= 0:
            raise ConfigInvalid("page dimensions must be positive")
        if self.margin_in < 0:
            raise ConfigInvalid("margin must be non-negative")
        cols, rows = self.grid_size
        if cols < 16 or rows < 16:
            raise ConfigInvalid(f"grid of {cols}x{rows} cells is below 16x16")

    @property
    def grid_size(self) -> tuple[int, int]:
        w = self.page_width_in - 2 * self.margin_in
        h = self.page_height_in - 2 * self.margin_in
        return (math.floor(w * self.dots_per_inch + 1e-9),
                math.floor(h * self.dots_per_inch + 1e-9))

    @property
    def rs_params(self) -> RsParams:
        return _page_code(self.redundancy)


def _page_code(ratio) -> RsParams:
    parity, data = parse_ratio(ratio)
    k = max_data_symbols((parity, data))
    return RsParams(k + math.ceil(k * parity / data), k, (parity, data))


def header_cells(cols: int, rows: int, copy: int) -> tuple[np.ndarray, np.ndarray]:
    """Header bit positions; they depend only on the grid size."""
    width = cols - 2 * BORDER
    band = -(-HEADER_BITS // width)
    i = np.arange(HEADER_BITS)
    r0 = BORDER if copy == 0 else rows - BORDER - band
    return r0 + i // width, BORDER + i % width


@dataclass(frozen=True)
class SheetLayout:
    """Where everything sits on a cols x rows grid for a given page code."""

    cols: int
    rows: int
    rs_n: int
    rs_k: int

    def __post_init__(self):
        if self.tiles_x < 1 or self.tiles_y < 1 or self.codewords < 1 or self.blocks_per_page < 1:
            raise ConfigInvalid(
                f"a {self.cols}x{self.rows} grid cannot hold a single block at n={self.rs_n}")

    @property
    def inner_width(self) -> int:
        return self.cols - 2 * BORDER

    @property
    def inner_height(self) -> int:
        return self.rows - 2 * BORDER

    @property
    def header_rows(self) -> int:
        return -(-HEADER_BITS // max(self.inner_width, 1))

    @property
    def tiles_x(self) -> int:
        return (self.inner_width - GUTTER) // (TILE + GUTTER)

    @property
    def tiles_y(self) -> int:
        return (self.inner_height - 2 * self.header_rows - GUTTER) // (TILE + GUTTER)

    @property
    def tiles(self) -> int:
        return max(self.tiles_x, 0) * max(self.tiles_y, 0)

    @property
    def physical_bytes(self) -> int:
        return self.tiles * TILE_BYTES

    @property
    def codewords(self) -> int:
        return self.physical_bytes // self.rs_n

    @property
    def data_bytes(self) -> int:
        return self.codewords * self.rs_k

    @property
    def blocks_per_page(self) -> int:
        return self.data_bytes // BLOCK_RECORD

    @property
    def rs(self) -> RsParams:
        return RsParams(self.rs_n, self.rs_k)

    def header_cells(self, copy: int) -> tuple[np.ndarray, np.ndarray]:
        """(rows, cols) of the 512 header bits for copy 0 (top) or 1 (bottom)."""
        return header_cells(self.cols, self.rows, copy)

    def tile_cells(self) -> tuple[np.ndarray, np.ndarray]:
        """(rows, cols) of every tile bit in physical stream order."""
        t = np.arange(self.tiles)
        ty, tx = t // self.tiles_x, t % self.tiles_x
        b = np.arange(TILE * TILE)
        by, bx = b // TILE, b % TILE
        top = BORDER + self.header_rows + GUTTER
        left = BORDER + GUTTER
        rows = top + (ty * (TILE + GUTTER))[:, None] + by[None, :]
        cols = left + (tx * (TILE + GUTTER))[:, None] + bx[None, :]
        return rows.ravel(), cols.ravel()

    def fixed_pattern(self) -> np.ndarray:
        """uint8 grid with frame (2) and inked timing cells (1); all else 0."""
        return _fixed_pattern(self.rows, self.cols).copy()


@lru_cache(maxsize=8)
def _fixed_pattern(rows: int, cols: int) -> np.ndarray:
    g = np.zeros((rows, cols), dtype=np.uint8)
    rr, cc = np.indices(g.shape)
    ring = ((rr == FRAME) | (rr == rows - 1 - FRAME) |
            (cc == FRAME) | (cc == cols - 1 - FRAME))
    inside = ((rr >= FRAME) & (rr < rows - FRAME) &
              (cc >= FRAME) & (cc < cols - FRAME))
    g[ring & inside & ((rr + cc) % 2 == 0)] = 1
    g[~inside] = 2
    g.flags.writeable = False
    return g


def layout_for(config: SheetConfig) -> SheetLayout:
    cols, rows = config.grid_size
    code = _page_code(config.redundancy)
    return SheetLayout(cols, rows, code.n, code.k)


@dataclass(frozen=True)
class CapacityReport:
    cols: int
    rows: int
    raw_dots: int
    border_cells: int
    header_cells: int
    tile_cells: int
    unused_cells: int
    physical_bytes: int
    rs_n: int
    rs_k: int
    codewords: int
    parity_bytes: int
    filler_bytes: int
    data_bytes: int
    blocks_per_page: int
    block_overhead_bytes: int
    block_slack_bytes: int
    usable_payload_bytes: int

    @property
    def raw_bytes(self) -> float:
        return self.raw_dots / 8

    def lines(self) -> list[str]:
        return [
            f"grid                 {self.cols} x {self.rows} cells = {self.raw_dots} dots"
            f" ({self.raw_bytes:,.0f} raw bytes)",
            f"frame + timing       {self.border_cells} cells",
            f"header bands (x2)    {self.header_cells} cells",
            f"gutters and slack    {self.unused_cells} cells",
            f"tiles                {self.tile_cells} cells = {self.physical_bytes} bytes",
            f"RS({self.rs_n},{self.rs_k}) x {self.codewords}"
            f"  parity {self.parity_bytes} bytes, filler {self.filler_bytes} bytes",
            f"block records        {self.blocks_per_page} x {BLOCK_RECORD} bytes"
            f" (address+CRC {self.block_overhead_bytes} bytes, slack {self.block_slack_bytes})",
            f"usable payload       {self.usable_payload_bytes} bytes per page",
        ]


def page_capacity(config: SheetConfig) -> CapacityReport:
    lay = layout_for(config)
    raw = lay.cols * lay.rows
    border = raw - lay.inner_width * lay.inner_height
    header = 2 * lay.header_rows * lay.inner_width
    tiles = lay.tiles * TILE * TILE
    return CapacityReport(
        cols=lay.cols, rows=lay.rows, raw_dots=raw,
        border_cells=border, header_cells=header, tile_cells=tiles,
        unused_cells=raw - border - header - tiles,
        physical_bytes=lay.physical_bytes, rs_n=lay.rs_n, rs_k=lay.rs_k,
        codewords=lay.codewords,
        parity_bytes=lay.codewords * (lay.rs_n - lay.rs_k),
        filler_bytes=lay.physical_bytes - lay.codewords * lay.rs_n,
        data_bytes=lay.data_bytes,
        blocks_per_page=lay.blocks_per_page,
        block_overhead_bytes=lay.blocks_per_page * (BLOCK_RECORD - BLOCK_PAYLOAD),
        block_slack_bytes=lay.data_bytes - lay.blocks_per_page * BLOCK_RECORD,
        usable_payload_bytes=lay.blocks_per_page * BLOCK_PAYLOAD,
    )


# --------------------------------------------------------------------------
# header

@dataclass(frozen=True)
class PageHeader:
    payload_id: bytes
    page_index: int
    total_pages: int | None
    rs_n: int
    rs_k: int
    dots_per_inch: int
    payload_total_bytes: int | None
    dot_size_percent: int = 70
    final_page: bool = False
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if len(self.payload_id) != 16:
            raise ValueError("payload_id must be 16 octets")
        if self.total_pages is not None and not 0 <= self.page_index < self.total_pages:
            raise ValueError(f"page_index {self.page_index} outside total {self.total_pages}")

    @property
    def total_withheld(self) -> bool:
        return self.total_pages is None

    @property
    def header_crc(self) -> int:
        return zlib.crc32(self._body())

    def _body(self) -> bytes:
        return _HEADER.pack(
            self.format_version, FLAG_FINAL if self.final_page else 0,
            self.dot_size_percent, 0, bytes(self.payload_id), self.page_index,
            OMITTED if self.total_pages is None else self.total_pages,
            self.rs_n, self.rs_k, self.dots_per_inch,
            OMITTED_SIZE if self.payload_total_bytes is None else self.payload_total_bytes)


def header_serialize(h: PageHeader) -> bytes:
    body = h._body()
    return body + struct.pack("<I", zlib.crc32(body))


def header_parse(record) -> PageHeader:
    record = bytes(record)
    if len(record) != HEADER_SIZE:
        raise BadHeaderCrc(f"header record must be {HEADER_SIZE} octets, got {len(record)}")
    body, (crc,) = record[:-4], struct.unpack("<I", record[-4:])
    if zlib.crc32(body) != crc:
        raise BadHeaderCrc("header CRC-32 mismatch")
    (version, flags, dot, _reserved, pid, index, total, n, k, dpi, size) = _HEADER.unpack(body)
    if version != FORMAT_VERSION:
        raise UnknownVersion(f"unsupported sheet format version {version}")
    try:
        return PageHeader(
            payload_id=pid, page_index=index,
            total_pages=None if total == OMITTED else total,
            rs_n=n, rs_k=k, dots_per_inch=dpi,
            payload_total_bytes=None if size == OMITTED_SIZE else size,
            dot_size_percent=dot, final_page=bool(flags & FLAG_FINAL),
            format_version=version)
    except ValueError as exc:
        raise BadHeaderCrc(f"header fields inconsistent: {exc}") from exc


def header_codeword(h: PageHeader) -> bytes:
    record = header_serialize(h)
    parity = rs_encode_batch(np.frombuffer(record, dtype=np.uint8)[None, :], HEADER_CODE)[0]
    return record + parity.tobytes()


def header_from_codeword(word, erasures=()) -> tuple[PageHeader, int]:
    """Correct and parse one on-sheet header copy; returns (header, corrections)."""
    erasures = list(erasures)
    if len(erasures) > HEADER_CODE.nsym:
        erasures = []
    try:
        record, report = rs_decode(bytes(word), HEADER_CODE, erasures)
    except UncorrectableCodeword:
        if not erasures:
            raise BadHeaderCrc("header copy is beyond repair")
        try:
            record, report = rs_decode(bytes(word), HEADER_CODE)
        except UncorrectableCodeword as exc:
            raise BadHeaderCrc("header copy is beyond repair") from exc
    return header_parse(record), report.corrections


# --------------------------------------------------------------------------
# blocks and pages

def crc16(data: bytes) -> int:
    return binascii.crc_hqx(data, 0xFFFF)


@dataclass(frozen=True)
class DataBlock:
    address: int
    payload: bytes

    def __post_init__(self):
        if len(self.payload) != BLOCK_PAYLOAD:
            raise ValueError(f"block payload must be {BLOCK_PAYLOAD} octets")

    @property
    def index(self) -> int:
        return self.address & ~PAD_FLAG

    @property
    def is_padding(self) -> bool:
        return bool(self.address & PAD_FLAG)

    @property
    def crc16(self) -> int:
        return crc16(_BLOCK_ADDR.pack(self.address) + self.payload)

    def to_bytes(self) -> bytes:
        head = _BLOCK_ADDR.pack(self.address) + self.payload
        return head + _CRC16.pack(crc16(head))

    @classmethod
    def from_bytes(cls, record) -> "DataBlock | None":
        """Parse one record; None when its CRC does not verify."""
        record = bytes(record)
        head = record[:-2]
        (crc,) = _CRC16.unpack(record[-2:])
        if crc16(head) != crc:
            return None
        (addr,) = _BLOCK_ADDR.unpack(head[:4])
        return cls(addr, head[4:])


@dataclass(frozen=True)
class PageDamage:
    """What decoding one sheet had to repair or give up on."""

    corrected_symbols: int = 0
    erasures: int = 0
    failed_codewords: tuple[int, ...] = ()
    failed_blocks: tuple[int, ...] = ()
    header_copies_ok: int = 2
    bit_errors_estimate: int | None = None

    @property
    def complete(self) -> bool:
        return not self.failed_codewords and not self.failed_blocks


@dataclass(frozen=True)
class Page:
    header: PageHeader
    blocks: tuple[DataBlock, ...]
    damage: PageDamage | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        addrs = [b.address for b in self.blocks]
        if any(a >= b for a, b in zip(addrs, addrs[1:])):
            raise ValueError("block addresses must be strictly increasing")


def payload_digest(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=16).digest()


def paginate(compressed, config: SheetConfig) -> list[Page]:
    data = bytes(getattr(compressed, "data", compressed))
    if not data:
        raise ValueError("nothing to paginate")
    lay = layout_for(config)
    per_page = lay.blocks_per_page
    nblocks = -(-len(data) // BLOCK_PAYLOAD)
    npages = -(-nblocks // per_page)
    if npages * per_page >= PAD_FLAG:
        raise InputTooLarge(f"{npages * per_page} blocks exceed the 2**31 address space")
    pid = payload_digest(data)
    pages = []
    for p in range(npages):
        final = p == npages - 1
        blocks = []
        for a in range(p * per_page, (p + 1) * per_page):
            chunk = data[a * BLOCK_PAYLOAD:(a + 1) * BLOCK_PAYLOAD]
            if chunk:
                blocks.append(DataBlock(a, chunk.ljust(BLOCK_PAYLOAD, b"\0")))
            else:
                blocks.append(DataBlock(a | PAD_FLAG, bytes(BLOCK_PAYLOAD)))
        withheld = config.omit_total_pages
        header = PageHeader(
            payload_id=pid, page_index=p,
            total_pages=None if withheld else npages,
            rs_n=lay.rs_n, rs_k=lay.rs_k, dots_per_inch=config.dots_per_inch,
            payload_total_bytes=None if withheld and not final else len(data),
            dot_size_percent=config.dot_size_percent,
            final_page=final)
        pages.append(Page(header, tuple(blocks)))
    return pages


@dataclass(frozen=True)
class MissingReport:
    missing_pages: tuple[int, ...] | None
    missing_blocks: tuple[int, ...] = ()
    reason: str = ""

    @property
    def total_unknown(self) -> bool:
        return self.missing_pages is None


def assemble(pages) -> bytes | MissingReport:
    pages = list(pages)
    if not pages:
        return MissingReport(None, (), "no pages supplied")
    first = pages[0].header
    by_index: dict[int, Page] = {}
    blocks: dict[int, bytes] = {}
    for page in pages:
        h = page.header
        if h.payload_id != first.payload_id:
            raise MixedPayloads("pages belong to different payloads")
        if (h.rs_n, h.rs_k) != (first.rs_n, first.rs_k):
            raise MixedPayloads("pages disagree on their error-correction parameters")
        seen = by_index.get(h.page_index)
        if seen is not None and seen.header != h:
            raise HeaderConflict(f"two different headers claim page {h.page_index}")
        by_index[h.page_index] = page
        for b in page.blocks:
            if not b.is_padding:
                blocks[b.address] = b.payload

    total = next((p.header.total_pages for p in pages if p.header.total_pages is not None), None)
    if total is None:
        total = next((p.header.page_index + 1 for p in pages if p.header.final_page), None)
    size = next((p.header.payload_total_bytes for p in pages
                 if p.header.payload_total_bytes is not None), None)
    if total is None or size is None:
        return MissingReport(None, (), "total count withheld")

    missing_pages = tuple(i for i in range(total) if i not in by_index)
    nblocks = -(-size // BLOCK_PAYLOAD)
    missing_blocks = tuple(a for a in range(nblocks) if a not in blocks)
    if missing_pages or missing_blocks:
        reason = "pages missing" if missing_pages else "blocks unrecoverable"
        return MissingReport(missing_pages, missing_blocks, reason)
    data = b"".join(blocks[a] for a in range(nblocks))[:size]
    if payload_digest(data) != first.payload_id:
        return MissingReport((), (), "payload digest mismatch")
    return data


# --------------------------------------------------------------------------
# physical byte stream of one page

def page_to_physical(page: Page, layout: SheetLayout) -> np.ndarray:
    """Interleaved codeword bytes filling the page's tiles (uint8, P bytes)."""
    rs = layout.rs
    data = np.zeros(layout.data_bytes, dtype=np.uint8)
    records = b"".join(b.to_bytes() for b in page.blocks)
    if len(records) > data.size:
        raise ValueError("page carries more blocks than its layout holds")
    data[:len(records)] = np.frombuffer(records, dtype=np.uint8)
    msgs = data.reshape(layout.codewords, rs.k)
    words = np.concatenate([msgs, rs_encode_batch(msgs, rs)], axis=1)
    phys = np.zeros(layout.physical_bytes, dtype=np.uint8)
    phys[:words.size] = words.T.ravel()
    return phys


def physical_to_page(header: PageHeader, layout: SheetLayout, phys: np.ndarray,
                     erased: np.ndarray | None = None,
                     reliability: np.ndarray | None = None) -> Page:
    """Deinterleave, correct and split a physical stream back into blocks.

    `erased` flags unreliable physical bytes. When a codeword has more
    flags than parity symbols and `reliability` (higher is better) is
    given, only the least reliable flagged bytes are treated as erasures.
    Codewords that cannot be corrected poison only the blocks they carry;
    every returned block has passed both Reed-Solomon decoding and its CRC-16.
    """
    rs = layout.rs
    count = layout.codewords
    used = count * rs.n
    words = np.asarray(phys[:used], dtype=np.uint8).reshape(rs.n, count).T.copy()
    if erased is None:
        erased = np.zeros(layout.physical_bytes, dtype=bool)
    flags = np.asarray(erased[:used], dtype=bool).reshape(rs.n, count).T
    rel = None
    if reliability is not None:
        rel = np.asarray(reliability[:used], dtype=np.float64).reshape(rs.n, count).T

    synd = syndromes_batch(words, rs.nsym)
    dirty = np.flatnonzero(synd.any(axis=1))
    good = np.ones(count, dtype=bool)
    corrected = 0
    for j in dirty:
        er = np.flatnonzero(flags[j])
        if rel is not None:
            # least reliable first; keep a few parity symbols spare so a decode is
            # still checked, and retry with fewer erasures to leave room for errors
            er = er[np.argsort(rel[j, er], kind="stable")][:max(0, rs.nsym - ERASURE_SPARE)]
            attempts = [er[:m] for m in _erasure_counts(er.size)]
        else:
            attempts = [er] if 0 < er.size <= rs.nsym else []
        attempts.append(())
        fixed = None
        for e in attempts:
            try:
                fixed, rep = rs_decode(words[j].tobytes(), rs, e)
                corrected += rep.corrections
                break
            except UncorrectableCodeword:
                continue
        if fixed is None:
            good[j] = False
        else:
            words[j, :rs.k] = np.frombuffer(fixed, dtype=np.uint8)

    data = words[:, :rs.k].ravel()
    ok_byte = np.repeat(good, rs.k)
    blocks = []
    failed = []
    first = header.page_index * layout.blocks_per_page
    for i in range(layout.blocks_per_page):
        lo, hi = i * BLOCK_RECORD, (i + 1) * BLOCK_RECORD
        block = DataBlock.from_bytes(data[lo:hi].tobytes()) if ok_byte[lo:hi].all() else None
        # every slot's address is implied by its position on the page
        if block is None or block.index != first + i:
            failed.append(i)
        else:
            blocks.append(block)
    damage = PageDamage(
        corrected_symbols=corrected,
        erasures=int(flags.sum()),
        failed_codewords=tuple(int(j) for j in np.flatnonzero(~good)),
        failed_blocks=tuple(failed))
    return Page(header, tuple(blocks), damage)


def _erasure_counts(flagged: int) -> list[int]:
    counts = []
    for frac in (4, 3, 2, 1):
        m = flagged * frac // 4
        if m and m not in counts:
            counts.append(m)
    return counts


# --------------------------------------------------------------------------
# ".mrp" pre-raster container

def page_to_bytes(page: Page) -> bytes:
    return header_serialize(page.header) + b"".join(b.to_bytes() for b in page.blocks)


def page_from_bytes(raw) -> Page:
    raw = bytes(raw)
    header = header_parse(raw[:HEADER_SIZE])
    body = raw[HEADER_SIZE:]
    if len(body) % BLOCK_RECORD:
        raise ValueError("truncated block record in .mrp stream")
    blocks = []
    for off in range(0, len(body), BLOCK_RECORD):
        b = DataBlock.from_bytes(body[off:off + BLOCK_RECORD])
        if b is None:
            raise ValueError(f"block record at offset {HEADER_SIZE + off} fails its CRC")
        blocks.append(b)
    return Page(header, tuple(blocks))
