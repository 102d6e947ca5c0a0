"""Synthetic print-and-scan channel and the experiments built on it.

`degrade` runs five independent stages in a fixed order: dot gain,
Gaussian blur, rotate-then-scale, additive Gaussian noise, impulse noise.
Every random draw comes from numpy's PCG64 generator seeded with the
profile's seed, so a (image, profile) pair always yields the same bytes.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from itertools import product

import numpy as np
from scipy import ndimage

from .errors import MrpodsError
from .raster import (DEFAULT_RENDER_DPI, ERASURE_CUTOFF, RasterImage, classify, cell_means,
                     decode_sheet_full, locate_grid, page_cells, render)
from .sheet import FRAME, SheetConfig, assemble, layout_for, page_capacity, paginate


@dataclass(frozen=True)
class DegradationProfile:
    gaussian_noise_sigma: float = 0.0
    blur_radius_px: float = 0.0
    rotation_deg: float = 0.0
    scale_factor: float = 1.0
    dot_gain_percent: float = 0.0
    salt_pepper_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.gaussian_noise_sigma < 0:
            raise ValueError("gaussian_noise_sigma must be >= 0")
        if self.blur_radius_px < 0:
            raise ValueError("blur_radius_px must be >= 0")
        if not self.scale_factor > 0:
            raise ValueError("scale_factor must be > 0")
        if not -20 <= self.dot_gain_percent <= 40:
            raise ValueError("dot_gain_percent must lie in [-20, 40]")
        if not 0 <= self.salt_pepper_rate <= 1:
            raise ValueError("salt_pepper_rate must lie in [0, 1]")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if not math.isfinite(self.rotation_deg):
            raise ValueError("rotation_deg must be finite")

    @property
    def is_identity(self) -> bool:
        return (self.gaussian_noise_sigma == 0 and self.blur_radius_px == 0 and
                self.rotation_deg == 0 and self.scale_factor == 1 and
                self.dot_gain_percent == 0 and self.salt_pepper_rate == 0)

    def with_seed(self, seed: int) -> "DegradationProfile":
        return replace(self, seed=int(seed))

    @classmethod
    def parse(cls, text: str, base: "DegradationProfile | None" = None) -> "DegradationProfile":
        """Build a profile from a preset name and/or "key=value,..." overrides."""
        base = base or cls()
        values = {}
        for item in filter(None, (p.strip() for p in text.split(","))):
            if "=" not in item:
                if item not in PROFILES:
                    raise ValueError(f"unknown profile {item!r}; known: {', '.join(PROFILES)}")
                base = replace(PROFILES[item], seed=base.seed)
                continue
            key, val = (s.strip() for s in item.split("=", 1))
            key = profile_field(key)
            values[key] = int(val) if key == "seed" else float(val)
        return replace(base, **values)


_ALIASES = {"sigma": "gaussian_noise_sigma", "noise": "gaussian_noise_sigma",
            "blur": "blur_radius_px", "rotation": "rotation_deg", "rot": "rotation_deg",
            "scale": "scale_factor", "gain": "dot_gain_percent",
            "salt_pepper": "salt_pepper_rate", "sp": "salt_pepper_rate"}


def profile_field(key: str) -> str:
    """Canonical DegradationProfile field for a name or short alias."""
    key = key.strip().replace("-", "_")
    key = _ALIASES.get(key, key)
    if key not in {f.name for f in fields(DegradationProfile)}:
        raise ValueError(f"unknown profile field {key!r}")
    return key


IDENTITY = DegradationProfile()

# Presets. "mild" and "office-scan" model a decent flatbed; "duplication-hostile"
# is the channel used for the copy-attack experiment.
PROFILES = {
    "identity": IDENTITY,
    "mild": DegradationProfile(gaussian_noise_sigma=6.0, blur_radius_px=0.5, rotation_deg=0.3,
                               dot_gain_percent=5.0, salt_pepper_rate=1e-4),
    "office-scan": DegradationProfile(gaussian_noise_sigma=14.0, blur_radius_px=0.7,
                                      rotation_deg=0.8, scale_factor=0.995,
                                      dot_gain_percent=10.0, salt_pepper_rate=5e-4),
    "duplication-hostile": DegradationProfile(gaussian_noise_sigma=20.0, blur_radius_px=0.9,
                                              rotation_deg=0.7, scale_factor=1.0,
                                              dot_gain_percent=30.0, salt_pepper_rate=1e-3),
}


def _rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream)]))


def _spread_ink(ink: np.ndarray, percent: float) -> np.ndarray:
    """Grow (or shrink) ink coverage by percent/100 of a pixel at every edge."""
    amount = abs(percent) / 100.0
    op = ndimage.grey_dilation if percent > 0 else ndimage.grey_erosion
    while amount > 0:
        step = min(amount, 1.0)
        moved = op(ink, size=(3, 3), mode="nearest")
        ink = ink + step * (moved - ink)
        amount -= step
    return ink


def _rotate_scale(px: np.ndarray, rotation_deg: float, scale: float) -> np.ndarray:
    """Counter-clockwise rotation then scaling about the centre; canvas grows to fit."""
    h, w = px.shape
    t = math.radians(rotation_deg)
    c, s = math.cos(t), math.sin(t)
    out_w = max(1, math.ceil(scale * (w * abs(c) + h * abs(s)) - 1e-9))
    out_h = max(1, math.ceil(scale * (w * abs(s) + h * abs(c)) - 1e-9))
    # maps output (row, col) back to input (row, col)
    m = np.array([[c, s], [-s, c]]) / scale
    centre_in = np.array([(h - 1) / 2, (w - 1) / 2])
    centre_out = np.array([(out_h - 1) / 2, (out_w - 1) / 2])
    offset = centre_in - m @ centre_out
    return ndimage.affine_transform(px, m, offset=offset, output_shape=(out_h, out_w),
                                    output=np.float32, order=1, mode="constant", cval=255.0)


def degrade(img: RasterImage, profile: DegradationProfile) -> RasterImage:
    if profile.is_identity:
        return RasterImage(img.pixels.copy())
    px = img.pixels.astype(np.float32)
    if profile.dot_gain_percent:
        ink = _spread_ink(1.0 - px / 255.0, profile.dot_gain_percent)
        px = 255.0 * (1.0 - ink)
    if profile.blur_radius_px > 0:
        px = ndimage.gaussian_filter(px, profile.blur_radius_px, mode="nearest")
    if profile.rotation_deg or profile.scale_factor != 1:
        px = _rotate_scale(px, profile.rotation_deg, profile.scale_factor)
    rng = _rng(profile.seed)
    if profile.gaussian_noise_sigma > 0:
        px = px + rng.standard_normal(px.shape, dtype=np.float32) * np.float32(
            profile.gaussian_noise_sigma)
    if profile.salt_pepper_rate > 0:
        hit = rng.random(px.shape, dtype=np.float32) < profile.salt_pepper_rate
        salt = rng.random(px.shape, dtype=np.float32) < 0.5
        px = np.where(hit, np.where(salt, 255.0, 0.0), px)
    return RasterImage(np.clip(np.rint(px), 0, 255).astype(np.uint8))


def reprint(img: RasterImage) -> RasterImage:
    """What a copier prints from a scan: the scan binarised at mid-grey."""
    return RasterImage(np.where(img.pixels < 128, 0, 255).astype(np.uint8))


# --------------------------------------------------------------------------
# scoring a degraded sheet against the sheet it came from

@dataclass(frozen=True)
class Trial:
    ber: float
    corrected_symbols: int
    decode_ok: bool
    failed_blocks: int = 0
    recovered_blocks: int = 0


def _data_cells(shape) -> np.ndarray:
    rows, cols = shape
    m = np.ones(shape, dtype=bool)
    m[:FRAME + 1, :] = m[rows - FRAME - 1:, :] = False
    m[:, :FRAME + 1] = m[:, cols - FRAME - 1:] = False
    return m


def score(img: RasterImage, truth_cells: np.ndarray, expected_payload: bytes | None,
          erasure_cutoff: float = ERASURE_CUTOFF) -> Trial:
    """Bit error rate of the sampled grid plus whether the page decodes."""
    interior = _data_cells(truth_cells.shape)
    truth = truth_cells[interior].astype(bool)
    try:
        res = decode_sheet_full(img, erasure_cutoff)
    except MrpodsError:
        try:
            geom = locate_grid(img)
        except MrpodsError:
            return Trial(float("nan"), 0, False)
        if (geom.rows, geom.cols) != truth_cells.shape:
            return Trial(float("nan"), 0, False)
        bits = classify(cell_means(img, geom), erasure_cutoff).bits
        return Trial(float(np.mean(bits[interior].astype(bool) != truth)), 0, False)
    if res.sample.bits.shape != truth_cells.shape:
        return Trial(float("nan"), 0, False)
    ber = float(np.mean(res.sample.bits[interior].astype(bool) != truth))
    page = res.page
    ok = page.damage.complete
    if ok and expected_payload is not None:
        ok = assemble([page]) == expected_payload
    return Trial(ber, page.damage.corrected_symbols, bool(ok), len(page.damage.failed_blocks),
                 len(page.blocks))


# --------------------------------------------------------------------------
# copy attack

@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    ber: float
    decode_ok: bool
    corrected_symbols: int


@dataclass(frozen=True)
class Specimen:
    """A rendered one-page sheet plus everything needed to score copies of it."""

    config: SheetConfig
    render_dpi: int
    payload: bytes
    image: RasterImage
    cells: np.ndarray


def make_specimen(config: SheetConfig, render_dpi: int = DEFAULT_RENDER_DPI,
                  payload_bytes: int | None = None, seed: int = 0) -> Specimen:
    """Fill one sheet with random bytes and render it."""
    cap = page_capacity(config).usable_payload_bytes
    size = cap if payload_bytes is None else min(payload_bytes, cap)
    payload = _rng(seed, 1).integers(0, 256, size, dtype=np.uint8).tobytes()
    (page,) = paginate(payload, config)
    cells = page_cells(page, layout_for(config))
    return Specimen(config, render_dpi, payload, render(page, config, render_dpi), cells)


def rescan_attack(img: RasterImage, generations: int, profile: DegradationProfile,
                  truth_cells: np.ndarray | None = None,
                  expected_payload: bytes | None = None) -> list[GenerationRecord]:
    """Scan, reprint, rescan... and score every scan.

    Generation 0 is a scan of the original sheet. Generation g > 0 scans a
    reprint made from scan g-1. Each scan draws fresh noise (the seed is
    mixed with the generation number).
    """
    if generations < 1:
        raise ValueError("generations must be >= 1")
    if truth_cells is None:
        truth_cells = decode_truth(img)
    records = []
    sheet = img
    for g in range(generations + 1):
        scan = degrade(sheet, profile.with_seed(_generation_seed(profile.seed, g)))
        t = score(scan, truth_cells, expected_payload)
        records.append(GenerationRecord(g, t.ber, t.decode_ok, t.corrected_symbols))
        sheet = reprint(scan)
    return records


def _generation_seed(seed: int, generation: int) -> int:
    if generation == 0:
        return int(seed)
    return int(np.random.SeedSequence([int(seed), generation]).generate_state(1, np.uint64)[0])


def decode_truth(img: RasterImage) -> np.ndarray:
    """Cell grid of a clean sheet, read back from the image itself."""
    res = decode_sheet_full(img)
    return page_cells(res.page, res.layout)


# --------------------------------------------------------------------------
# sweeps

CONFIG_COLUMNS = ("dots_per_inch", "dot_size_percent", "redundancy", "page_width_in",
                  "page_height_in", "render_dpi")
PROFILE_COLUMNS = tuple(f.name for f in fields(DegradationProfile) if f.name != "seed")
TRIAL_COLUMNS = CONFIG_COLUMNS + PROFILE_COLUMNS + (
    "seed", "ber", "corrected_symbols", "payload_recovered")
SUMMARY_COLUMNS = CONFIG_COLUMNS + PROFILE_COLUMNS + (
    "trials", "mean_ber", "mean_corrected_symbols", "recovery_rate")


@dataclass(frozen=True)
class SweepCase:
    config: SheetConfig
    render_dpi: int = DEFAULT_RENDER_DPI


def expand_grid(base, **axes) -> list:
    """Full factorial of dataclass variants: expand_grid(cfg, dots_per_inch=[100, 200])."""
    keys = list(axes)
    return [replace(base, **dict(zip(keys, combo))) for combo in product(*axes.values())]


def _config_row(case: SweepCase) -> dict:
    c = case.config
    p, d = c.redundancy
    return {"dots_per_inch": c.dots_per_inch, "dot_size_percent": c.dot_size_percent,
            "redundancy": f"{p}:{d}", "page_width_in": c.page_width_in,
            "page_height_in": c.page_height_in, "render_dpi": case.render_dpi}


def _profile_row(profile: DegradationProfile) -> dict:
    d = asdict(profile)
    d.pop("seed")
    return d


def _run_cell(args):
    case, profile, seeds, payload_bytes, cutoff = args
    specimen = make_specimen(case.config, case.render_dpi, payload_bytes)
    rows = []
    for seed in seeds:
        t = score(degrade(specimen.image, profile.with_seed(seed)), specimen.cells, specimen.payload, cutoff)
        rows.append({**_config_row(case), **_profile_row(profile), "seed": seed, "ber": t.ber,
                     "corrected_symbols": t.corrected_symbols, "payload_recovered": t.decode_ok})
    return rows


@dataclass
class SweepResult:
    trials: list[dict]

    def summary(self) -> list[dict]:
        groups: dict[tuple, list[dict]] = {}
        for row in self.trials:
            key = tuple(row[c] for c in CONFIG_COLUMNS + PROFILE_COLUMNS)
            groups.setdefault(key, []).append(row)
        out = []
        for key, rows in groups.items():
            bers = [r["ber"] for r in rows if not math.isnan(r["ber"])]
            out.append({**dict(zip(CONFIG_COLUMNS + PROFILE_COLUMNS, key)),
                        "trials": len(rows),
                        "mean_ber": float(np.mean(bers)) if bers else float("nan"),
                        "mean_corrected_symbols": float(np.mean([r["corrected_symbols"] for r in rows])),
                        "recovery_rate": float(np.mean([r["payload_recovered"] for r in rows]))})
        return out

    def to_csv(self, summary: bool = False) -> str:
        rows = self.summary() if summary else self.trials
        cols = SUMMARY_COLUMNS if summary else TRIAL_COLUMNS
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
        return buf.getvalue()


def worker_count(default: int | None = None) -> int:
    env = os.environ.get("MRPODS_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cap))
        except ValueError:
            pass
    return default or 1


def robustness_sweep(config_grid, profile_grid, seeds=10, payload_bytes: int | None = None,
                     erasure_cutoff: float = ERASURE_CUTOFF, workers: int | None = None) -> SweepResult:
    """Full factorial of sheet configurations x degradation profiles x seeds.

    `config_grid` holds SheetConfig or SweepCase items (the latter also fix
    the render resolution); `seeds` is a count or an explicit list.
    """
    cases = [c if isinstance(c, SweepCase) else SweepCase(c) for c in config_grid]
    seed_list = list(range(seeds)) if isinstance(seeds, int) else [int(s) for s in seeds]
    if not cases or not profile_grid or not seed_list:
        raise ValueError("sweep grids must be non-empty")
    jobs = [(c, p, seed_list, payload_bytes, erasure_cutoff) for c in cases for p in profile_grid]
    workers = workers or worker_count()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_run_cell, jobs))
    else:
        chunks = [_run_cell(j) for j in jobs]
    return SweepResult([row for chunk in chunks for row in chunk])


def erasure_cutoff_sweep(specimen: Specimen, profile: DegradationProfile, cutoffs, seeds=10):
    """Recovery rate and mean corrections per erasure cutoff on one specimen."""
    seed_list = list(range(seeds)) if isinstance(seeds, int) else list(seeds)
    scans = [degrade(specimen.image, profile.with_seed(s)) for s in seed_list]
    out = []
    for cut in cutoffs:
        trials = [score(img, specimen.cells, specimen.payload, cut) for img in scans]
        out.append({"erasure_cutoff": cut,
                    "recovery_rate": float(np.mean([t.decode_ok for t in trials])),
                    "mean_recovered_blocks": float(np.mean([t.recovered_blocks for t in trials])),
                    "mean_corrected_symbols": float(np.mean([t.corrected_symbols for t in trials]))})
    return out
