"""Page <-> grayscale raster.

Pixel coordinates used throughout are index coordinates: pixel (x, y)
has its centre at (x, y) and covers [x - 0.5, x + 0.5). Grid geometry is
an affine map from continuous cell coordinates (col, row), where cell
(c, r) spans [c, c + 1) x [r, r + 1), to pixel coordinates. Positive
rotation is counter-clockwise as seen on screen.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import (BadHeaderCrc, DpiTooLow, ExcessiveSkew, GridNotFound,
                     HeaderConflict, UncorrectableCodeword)
from .sheet import (FRAME, Page, PageDamage, SheetConfig,
                    SheetLayout, header_cells, header_codeword, header_from_codeword, layout_for,
                    page_to_physical, physical_to_page)

DEFAULT_RENDER_DPI = 600
ERASURE_CUTOFF = 0.15
MAX_SKEW_DEG = 5.0
MIN_PITCH_PX = 2.0


@dataclass(frozen=True, eq=False)
class RasterImage:
    """8-bit grayscale image, 0 = ink, 255 = paper."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError("RasterImage needs a 2-D pixel array")
        if px.dtype != np.uint8:
            px = np.clip(np.rint(px), 0, 255).astype(np.uint8)
        object.__setattr__(self, "pixels", px)

    @property
    def width_px(self) -> int:
        return self.pixels.shape[1]

    @property
    def height_px(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(self.pixels, other.pixels)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.width_px}x{self.height_px}".encode())
        h.update(self.pixels.tobytes())
        return h.hexdigest()

    def save(self, path) -> None:
        from PIL import Image
        path = Path(path)
        im = Image.fromarray(self.pixels, mode="L")
        if path.suffix.lower() == ".pbm":
            im = im.point(lambda v: 255 if v >= 128 else 0).convert("1")
        im.save(path)

    @classmethod
    def load(cls, path) -> "RasterImage":
        from PIL import Image
        with Image.open(path) as im:
            return cls(np.asarray(im.convert("L"), dtype=np.uint8))


@dataclass(frozen=True)
class GridGeometry:
    origin_px: tuple[float, float]
    cell_pitch_px: float
    rotation_deg: float
    cols: int
    rows: int
    affine: tuple[tuple[float, float, float], tuple[float, float, float]]

    def __post_init__(self):
        if not self.cell_pitch_px > MIN_PITCH_PX:
            raise GridNotFound(
                f"cell pitch {self.cell_pitch_px:.2f}px is below {MIN_PITCH_PX}px; not sampling")

    def to_pixels(self, col, row):
        """Pixel coordinates of continuous cell coordinates."""
        (a, b, tx), (c, d, ty) = self.affine
        col = np.asarray(col, dtype=np.float64)
        row = np.asarray(row, dtype=np.float64)
        return a * col + b * row + tx, c * col + d * row + ty

    @classmethod
    def from_affine(cls, matrix, cols: int, rows: int) -> "GridGeometry":
        (a, b, tx), (c, d, ty) = matrix
        pitch = 0.5 * (math.hypot(a, c) + math.hypot(b, d))
        rot = math.degrees(math.atan2(-c, a))
        ox, oy = a * 0.5 + b * 0.5 + tx, c * 0.5 + d * 0.5 + ty
        return cls((ox, oy), pitch, rot, cols, rows,
                   ((float(a), float(b), float(tx)), (float(c), float(d), float(ty))))


def dot_side_px(pitch: float, dot_size_percent: int) -> int:
    return max(1, math.floor(pitch * math.sqrt(dot_size_percent / 100.0) + 0.5))


def _round_half_up(x):
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)


# --------------------------------------------------------------------------
# rendering

def page_cells(page: Page, layout: SheetLayout) -> np.ndarray:
    """Cell grid of a page: 0 paper, 1 dot, 2 solid frame."""
    grid = layout.fixed_pattern()
    word = np.frombuffer(header_codeword(page.header), dtype=np.uint8)
    hbits = np.unpackbits(word)
    for copy in (0, 1):
        r, c = layout.header_cells(copy)
        grid[r, c] = hbits
    r, c = layout.tile_cells()
    grid[r, c] = np.unpackbits(page_to_physical(page, layout))
    return grid


def render(page: Page, config: SheetConfig, render_dpi: int = DEFAULT_RENDER_DPI) -> RasterImage:
    if render_dpi < config.dots_per_inch:
        raise DpiTooLow(f"render dpi {render_dpi} is below the data dpi {config.dots_per_inch}")
    layout = layout_for(config)
    h = page.header
    if (h.rs_n, h.rs_k) != (layout.rs_n, layout.rs_k) or h.dots_per_inch != config.dots_per_inch:
        raise ValueError("page header does not match the sheet configuration")
    cells = page_cells(page, layout)
    return render_cells(cells, config, render_dpi)


def render_cells(cells: np.ndarray, config: SheetConfig, render_dpi: int) -> RasterImage:
    width = int(_round_half_up(config.page_width_in * render_dpi))
    height = int(_round_half_up(config.page_height_in * render_dpi))
    ppc = render_dpi / config.dots_per_inch
    origin = config.margin_in * render_dpi
    side = dot_side_px(ppc, config.dot_size_percent)
    rows, cols = cells.shape
    ink = np.zeros((height, width), dtype=bool)

    edge_x = _round_half_up(origin + np.arange(cols + 1) * ppc)
    edge_y = _round_half_up(origin + np.arange(rows + 1) * ppc)
    ink[edge_y[0]:edge_y[rows], edge_x[0]:edge_x[cols]] = True
    ink[edge_y[FRAME]:edge_y[rows - FRAME], edge_x[FRAME]:edge_x[cols - FRAME]] = False

    dots = cells[FRAME:rows - FRAME, FRAME:cols - FRAME] == 1
    xs = _round_half_up(origin + (np.arange(FRAME, cols - FRAME) + 0.5) * ppc - side / 2)
    ys = _round_half_up(origin + (np.arange(FRAME, rows - FRAME) + 0.5) * ppc - side / 2)
    if np.all(np.diff(xs) >= side) and np.all(np.diff(ys) >= side):
        # dots never overlap: map every pixel row/column to the cell it inks
        col_of = np.full(width, dots.shape[1])
        row_of = np.full(height, dots.shape[0])
        for k in range(side):
            col_of[xs + k] = np.arange(xs.size)
            row_of[ys + k] = np.arange(ys.size)
        padded = np.zeros((dots.shape[0] + 1, dots.shape[1] + 1), dtype=bool)
        padded[:-1, :-1] = dots
        ink |= padded.take(row_of, axis=0).take(col_of, axis=1)
    else:
        for dy in range(side):
            for dx in range(side):
                ink[np.ix_(ys + dy, xs + dx)] |= dots
    return RasterImage((~ink).view(np.uint8) * np.uint8(255))


def render_geometry(config: SheetConfig, render_dpi: int = DEFAULT_RENDER_DPI) -> GridGeometry:
    """Ground-truth geometry of a freshly rendered sheet."""
    ppc = render_dpi / config.dots_per_inch
    o = config.margin_in * render_dpi - 0.5
    cols, rows = config.grid_size
    return GridGeometry.from_affine(((ppc, 0.0, o), (0.0, ppc, o)), cols, rows)


# --------------------------------------------------------------------------
# thresholds

def otsu_threshold(values, bins: int = 256, lo: float = 0.0, hi: float = 255.0):
    """Otsu threshold of `values`; returns (threshold, separability in [0, 1])."""
    v = np.asarray(values)
    if v.dtype == np.uint8:
        return _otsu_from_hist(np.bincount(v.ravel(), minlength=256), np.arange(257) - 0.5)
    v = v.astype(np.float64).ravel()
    v = v[(v >= lo) & (v <= hi)]
    idx = np.minimum(((v - lo) * (bins / (hi - lo))).astype(np.intp), bins - 1)
    return _otsu_from_hist(np.bincount(idx, minlength=bins), np.linspace(lo, hi, bins + 1))


def _otsu_from_hist(hist: np.ndarray, edges: np.ndarray):
    lo, hi = float(edges[0]), float(edges[-1])
    centers = 0.5 * (edges[:-1] + edges[1:])
    total = hist.sum()
    if total == 0:
        return 0.5 * (lo + hi), 0.0
    p = hist / total
    w0 = np.cumsum(p)
    m = np.cumsum(p * centers)
    mt = m[-1]
    var_t = float((p * (centers - mt) ** 2).sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        between = (mt * w0 - m) ** 2 / (w0 * (1 - w0))
    between[~np.isfinite(between)] = 0.0
    i = int(np.argmax(between))
    if var_t <= 0 or between[i] <= 0:
        return float(mt), 0.0
    return float(edges[i + 1]), float(between[i] / var_t)


# --------------------------------------------------------------------------
# grid location

def _first_dark(profiles: np.ndarray, thr: float, run: int = 3):
    """Sub-pixel index where each column of `profiles` first turns dark."""
    dark = profiles < thr
    ok = dark[:len(dark) - run + 1].copy()
    for j in range(1, run):
        ok &= dark[j:len(dark) - run + 1 + j]
    found = ok.any(axis=0)
    first = np.argmax(ok, axis=0)
    pos = np.full(first.shape, np.nan)
    length = np.full(first.shape, np.nan)
    for j in np.flatnonzero(found):
        i = first[j]
        col = profiles[:, j]
        if i == 0:
            pos[j] = -0.5
        else:
            a, b = col[i - 1], col[i]
            pos[j] = i - 1 + (a - thr) / (a - b) if a != b else i - 0.5
        light = np.flatnonzero(~dark[i:, j])
        if light.size:
            e = i + light[0]
            a, b = col[e - 1], col[e]
            end = e - 1 + (thr - a) / (b - a) if a != b else e - 0.5
            length[j] = end - pos[j]
    return pos, length


def _robust_line(t, u):
    """Fit u = a + b t, discarding outliers; returns (a, b)."""
    t = np.asarray(t, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    keep = np.isfinite(u)
    if keep.sum() < 6:
        raise GridNotFound("frame edge not found")
    for _ in range(4):
        b, a = np.polyfit(t[keep], u[keep], 1)
        res = np.abs(u - (a + b * t))
        mad = np.median(res[keep])
        new = keep & (res <= max(1.0, 4.0 * mad))
        if new.sum() < 6 or np.array_equal(new, keep):
            break
        keep = new
    return a, b


def _frame_edges(img: np.ndarray, thr: float):
    h, w = img.shape
    xs = np.linspace(0.3 * w, 0.7 * w, 64).astype(int)
    ys = np.linspace(0.3 * h, 0.7 * h, 64).astype(int)
    cols = (img[:, np.clip(xs - 1, 0, w - 1)] + img[:, xs] + img[:, np.clip(xs + 1, 0, w - 1)]) / 3
    rows = (img[np.clip(ys - 1, 0, h - 1), :] + img[ys, :] + img[np.clip(ys + 1, 0, h - 1), :]).T / 3
    top, lt = _first_dark(cols, thr)
    bot, lb = _first_dark(cols[::-1], thr)
    left, ll = _first_dark(rows, thr)
    right, lr = _first_dark(rows[::-1], thr)
    lines = {
        "top": _robust_line(xs, top),
        "bottom": _robust_line(xs, (h - 1) - bot),
        "left": _robust_line(ys, left),
        "right": _robust_line(ys, (w - 1) - right),
    }
    thickness = np.concatenate([lt, lb, ll, lr])
    return lines, thickness[np.isfinite(thickness)]


def _intersect(hline, vline):
    """Intersection of y = a1 + b1 x and x = a2 + b2 y."""
    a1, b1 = hline
    a2, b2 = vline
    y = (a1 + b1 * a2) / (1 - b1 * b2)
    return np.array([a2 + b2 * y, y])


def _line_profile(img, origin, d, nrm, length, pitch):
    step = 0.25
    s = np.arange(0.0, length, step)
    acc = np.zeros_like(s)
    for off in (-0.3 * pitch, 0.0, 0.3 * pitch):
        x = origin[0] + s * d[0] + off * nrm[0]
        y = origin[1] + s * d[1] + off * nrm[1]
        acc += ndimage.map_coordinates(img, [y, x], order=1, mode="nearest")
    prof = acc / 3
    win = 2 * int(0.2 * pitch / step) + 1
    if win > 1:
        prof = ndimage.uniform_filter1d(prof, win, mode="nearest")
    return s, prof


def _dark_runs(s, prof, thr):
    dark = prof < thr
    edges = np.flatnonzero(np.diff(dark.astype(np.int8)))
    starts = [0.0] if dark[0] else []
    ends = []
    for i in edges:
        a, b = prof[i], prof[i + 1]
        x = s[i] + (s[i + 1] - s[i]) * ((a - thr) / (a - b) if a != b else 0.5)
        if dark[i + 1]:
            starts.append(x)
        else:
            ends.append(x)
    if dark[-1]:
        ends.append(s[-1])
    return np.array(starts[:len(ends)]), np.array(ends[:len(starts)])


def _timing_marks(img, origin, d, nrm, length, pitch, parity, thr):
    """Centre offsets along a timing line and their cell indices."""
    s, prof = _line_profile(img, origin + 2.5 * pitch * nrm, d, nrm, length, pitch)
    inner = prof[(s > 4 * pitch) & (s < length - 4 * pitch)]
    if inner.size:
        # small or faded marks: split at the profile's own contrast midpoint
        lo, hi = np.percentile(inner, [5, 95])
        thr = max(thr, 0.5 * (lo + hi))
    starts, ends = _dark_runs(s, prof, thr)
    width = ends - starts
    centers = 0.5 * (starts + ends)
    keep = ((starts > 1.5 * pitch) & (ends < length - 1.5 * pitch) &
            (width > 0.3 * pitch) & (width < 1.8 * pitch))
    centers = centers[keep]
    if centers.size < 4:
        raise GridNotFound("timing marks not found")
    gaps = np.diff(centers)
    near = (gaps > 1.2 * pitch) & (gaps < 3.0 * pitch)
    alpha, beta = 0.0, float(np.median(gaps[near]) / 2) if near.any() else pitch

    def assign(a, b):
        u = (centers - a) / b - 0.5
        idx = 2 * np.round((u - parity) / 2).astype(np.int64) + parity
        return idx, np.abs(centers - (a + b * (idx + 0.5)))

    # grow the fitted span gradually so a slightly wrong pitch never slips an index
    span = 32.0
    while True:
        within = centers < alpha + beta * (span + 0.5)
        idx, res = assign(alpha, beta)
        keep = within & (res < 0.3 * beta)
        if keep.sum() >= 4:
            beta, alpha = np.polyfit(idx[keep] + 0.5, centers[keep], 1)
        if within.all():
            break
        span *= 2
    idx, res = assign(alpha, beta)
    keep = res < 0.25 * beta
    # one mark per index: a noise run next to a real mark loses
    order = np.lexsort((res, idx))
    first = np.ones(order.size, dtype=bool)
    first[1:] = idx[order][1:] != idx[order][:-1]
    chosen = np.zeros(centers.size, dtype=bool)
    chosen[order[first]] = True
    keep &= chosen
    if keep.sum() < 4:
        raise GridNotFound("timing marks do not form a regular sequence")
    beta, alpha = np.polyfit(idx[keep] + 0.5, centers[keep], 1)
    return centers[keep], idx[keep], beta


def locate_grid(img: RasterImage) -> GridGeometry:
    hist = np.bincount(img.pixels.ravel(), minlength=256)
    thr, sep = _otsu_from_hist(hist, np.arange(257) - 0.5)
    if sep < 0.5 or not hist[:int(math.floor(thr)) + 1].any():
        raise GridNotFound("no contrast: image holds no sheet")
    # edges sit halfway between solid ink (the frame) and bare paper
    cdf = np.cumsum(hist) / hist.sum()
    ink, paper = np.searchsorted(cdf, 0.01), np.searchsorted(cdf, 0.99)
    thr = 0.5 * (float(ink) + float(paper))
    px = img.pixels.astype(np.float32)
    lines, thickness = _frame_edges(px, thr)
    angles = [-math.atan(lines["top"][1]), -math.atan(lines["bottom"][1]),
              math.atan(lines["left"][1]), math.atan(lines["right"][1])]
    rotation = math.degrees(float(np.mean(angles)))
    if abs(rotation) > MAX_SKEW_DEG:
        raise ExcessiveSkew(f"skew {rotation:.2f} deg exceeds {MAX_SKEW_DEG} deg")
    if thickness.size < 8:
        raise GridNotFound("frame thickness not measurable")
    pitch0 = float(np.percentile(thickness, 25)) * math.cos(math.radians(rotation)) / 2
    if pitch0 <= MIN_PITCH_PX * 0.75:
        raise GridNotFound(f"frame implies a {pitch0:.2f}px pitch; too fine to sample")

    tl = _intersect(lines["top"], lines["left"])
    tr = _intersect(lines["top"], lines["right"])
    bl = _intersect(lines["bottom"], lines["left"])
    br = _intersect(lines["bottom"], lines["right"])

    def unit(v):
        return v / np.hypot(*v)

    d_top, d_bot = unit(tr - tl), unit(br - bl)
    d_left, d_right = unit(bl - tl), unit(br - tr)
    len_top, len_left = np.hypot(*(tr - tl)), np.hypot(*(bl - tl))
    n_top = np.array([-d_top[1], d_top[0]])
    n_left = np.array([d_left[1], -d_left[0]])
    n_bot = np.array([d_bot[1], -d_bot[0]])
    n_right = np.array([-d_right[1], d_right[0]])

    c_top, i_top, b_top = _timing_marks(px, tl, d_top, n_top, len_top, pitch0, 0, thr)
    if abs(b_top - pitch0) > 0.05 * pitch0:
        # the frame gave a rough pitch; rescan with the one the marks imply
        pitch0 = b_top
        c_top, i_top, b_top = _timing_marks(px, tl, d_top, n_top, len_top, pitch0, 0, thr)
    cols = int(round(len_top / b_top))
    c_left, i_left, b_left = _timing_marks(px, tl, d_left, n_left, len_left, pitch0, 0, thr)
    rows = int(round(len_left / b_left))
    c_bot, i_bot, _ = _timing_marks(px, bl, d_bot, n_bot, np.hypot(*(br - bl)), pitch0,
                                    (rows - 1 - FRAME) % 2, thr)
    c_right, i_right, _ = _timing_marks(px, tr, d_right, n_right, np.hypot(*(br - tr)), pitch0,
                                        (cols - 1 - FRAME) % 2, thr)

    eqs, rhs = [], []

    def add(origin, d, nrm, centers, qx, qy):
        o = origin + 2.5 * pitch0 * nrm
        for s, x, y in zip(centers, np.broadcast_to(qx, centers.shape),
                           np.broadcast_to(qy, centers.shape)):
            eqs.append([d[0] * x, d[0] * y, d[1] * x, d[1] * y, d[0], d[1]])
            rhs.append(s + d @ o)

    add(tl, d_top, n_top, c_top, i_top + 0.5, FRAME + 0.5)
    add(bl, d_bot, n_bot, c_bot, i_bot + 0.5, rows - 1 - FRAME + 0.5)
    add(tl, d_left, n_left, c_left, FRAME + 0.5, i_left + 0.5)
    add(tr, d_right, n_right, c_right, cols - 1 - FRAME + 0.5, i_right + 0.5)
    sol, *_ = np.linalg.lstsq(np.asarray(eqs), np.asarray(rhs), rcond=None)
    a, b, c, dd, tx, ty = sol
    return GridGeometry.from_affine(((a, b, tx), (c, dd, ty)), cols, rows)


# --------------------------------------------------------------------------
# sampling

@dataclass(frozen=True)
class CellSample:
    means: np.ndarray
    bits: np.ndarray
    confidence: np.ndarray
    threshold: float
    erasure_cutoff: float = ERASURE_CUTOFF

    @property
    def erasures(self) -> np.ndarray:
        return self.confidence < self.erasure_cutoff


def cell_means(img: RasterImage, geom: GridGeometry, dot_size_percent: int = 70) -> np.ndarray:
    px = img.pixels.astype(np.float32)
    region = geom.cell_pitch_px * math.sqrt(dot_size_percent / 100.0) * 0.5
    box = max(1, 2 * int(region // 2) + 1)
    if box > 1:
        px = ndimage.uniform_filter(px, box, mode="nearest")
    rr, cc = np.mgrid[0:geom.rows, 0:geom.cols]
    x, y = geom.to_pixels(cc + 0.5, rr + 0.5)
    return ndimage.map_coordinates(px, [y.ravel(), x.ravel()], order=1,
                                   mode="constant", cval=255.0).reshape(geom.rows, geom.cols)


def classify(means: np.ndarray, erasure_cutoff: float = ERASURE_CUTOFF,
             region: int = 64) -> CellSample:
    """Threshold cell means (Otsu) into ink bits with per-cell confidence."""
    thr, sep = otsu_threshold(means)
    thresholds = np.full(means.shape, thr)
    if sep < 0.5:
        # global histogram is not bimodal: fall back to per-region thresholds
        for r0 in range(0, means.shape[0], region):
            for c0 in range(0, means.shape[1], region):
                t, s = otsu_threshold(means[r0:r0 + region, c0:c0 + region])
                thresholds[r0:r0 + region, c0:c0 + region] = t if s >= 0.5 else np.nan
    bits = (means < thresholds).astype(np.uint8)
    conf = np.zeros(means.shape, dtype=np.float32)
    finite = np.isfinite(thresholds)
    if finite.any():
        dark = bits.astype(bool) & finite
        light = ~bits.astype(bool) & finite
        mu_dark = means[dark].mean() if dark.any() else np.nan
        mu_light = means[light].mean() if light.any() else np.nan
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(bits == 1, thresholds - mu_dark, mu_light - thresholds)
            c = np.abs(means - thresholds) / scale
        c[~np.isfinite(c)] = 0.0
        conf = np.clip(c, 0.0, 1.0).astype(np.float32)
    return CellSample(means, bits, conf, thr, erasure_cutoff)


def sample_cells(img: RasterImage, geom: GridGeometry, dot_size_percent: int = 70,
                 erasure_cutoff: float = ERASURE_CUTOFF) -> CellSample:
    return classify(cell_means(img, geom, dot_size_percent), erasure_cutoff)


# --------------------------------------------------------------------------
# decoding

@dataclass(frozen=True)
class SheetDecode:
    page: Page
    geometry: GridGeometry
    sample: CellSample = field(repr=False)
    layout: SheetLayout = field(repr=False)


def _bytes_and_erasures(bits: np.ndarray, erased: np.ndarray):
    data = np.packbits(bits)
    bad = erased.reshape(-1, 8).any(axis=1)
    return data, bad


def read_header(sample: CellSample, geom: GridGeometry):
    """Decode both header copies; returns (header, copies_ok, corrections)."""
    found = []
    errors = []
    for copy in (0, 1):
        r, c = header_cells(geom.cols, geom.rows, copy)
        word, bad = _bytes_and_erasures(sample.bits[r, c], sample.erasures[r, c])
        try:
            found.append(header_from_codeword(word, np.flatnonzero(bad)))
        except BadHeaderCrc as exc:
            errors.append(exc)
    if not found:
        raise BadHeaderCrc(f"both header copies unreadable: {errors[0]}")
    if len(found) == 2 and found[0][0] != found[1][0]:
        raise HeaderConflict("top and bottom header copies disagree")
    return found[0][0], len(found), sum(f[1] for f in found)


def decode_sheet_full(img: RasterImage, erasure_cutoff: float = ERASURE_CUTOFF) -> SheetDecode:
    geom = locate_grid(img)
    sample = sample_cells(img, geom, 70, erasure_cutoff)
    header, copies, _ = read_header(sample, geom)
    if header.dot_size_percent != 70:
        sample = sample_cells(img, geom, header.dot_size_percent, erasure_cutoff)
    layout = SheetLayout(geom.cols, geom.rows, header.rs_n, header.rs_k)
    r, c = layout.tile_cells()
    bits = sample.bits[r, c]
    phys, bad = _bytes_and_erasures(bits, sample.erasures[r, c])
    reliability = sample.confidence[r, c].reshape(-1, 8).min(axis=1)
    page = physical_to_page(header, layout, phys, bad, reliability)
    damage = page.damage
    bit_errors = None
    if damage.complete:
        truth = np.unpackbits(page_to_physical(page, layout))
        bit_errors = int(np.count_nonzero(truth != bits))
    damage = replace(damage, header_copies_ok=copies, bit_errors_estimate=bit_errors)
    page = Page(page.header, page.blocks, damage)
    if not page.blocks and damage.failed_blocks:
        raise UncorrectableCodeword(
            f"no block on page {header.page_index} survived error correction")
    return SheetDecode(page, geom, sample, layout)


def decode_sheet(img: RasterImage, erasure_cutoff: float = ERASURE_CUTOFF) -> Page:
    """Locate, sample and error-correct one sheet image.

    The returned page carries a `damage` report (corrected symbols,
    erasures, failed codewords and blocks); only blocks that passed both
    Reed-Solomon decoding and their CRC are included.
    """
    return decode_sheet_full(img, erasure_cutoff).page
