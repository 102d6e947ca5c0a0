import numpy as np
import pytest

from mrpods.channel import DegradationProfile, degrade
from mrpods.errors import DpiTooLow, GridNotFound, UncorrectableCodeword
from mrpods.raster import (GridGeometry, RasterImage, classify, decode_sheet,
                           decode_sheet_full, dot_side_px, locate_grid, page_cells, render,
                           render_cells, render_geometry, sample_cells)
from mrpods.sheet import (FRAME, SheetConfig, assemble, layout_for, page_capacity,
                          paginate)

DEFAULT = SheetConfig()
SMALL = SheetConfig(page_width_in=2.0, page_height_in=2.0)


def _payload(n, seed=0):
    return np.random.default_rng(seed).integers(0, 256, n, dtype=np.uint8).tobytes()


@pytest.fixture(scope="module")
def default_page():
    page = paginate(_payload(page_capacity(DEFAULT).usable_payload_bytes, 9), DEFAULT)[0]
    return page, render(page, DEFAULT)


@pytest.fixture(scope="module")
def small_page():
    page = paginate(_payload(page_capacity(SMALL).usable_payload_bytes, 4), SMALL)[0]
    return page, render(page, SMALL)


# --- render -----------------------------------------------------------------

def test_pixel_accounting_one_block_page():
    page = paginate(_payload(100), DEFAULT)[0]
    img = render(page, DEFAULT)
    cells = page_cells(page, layout_for(DEFAULT))
    side = dot_side_px(3.0, 70)
    assert side == 3
    frame = 1700 * 3 * 2200 * 3 - (1700 - 2 * FRAME) * 3 * (2200 - 2 * FRAME) * 3
    expected = int((cells == 1).sum()) * side * side + frame
    assert (img.width_px, img.height_px) == (5100, 6600)
    assert int((img.pixels == 0).sum()) == expected
    assert set(np.unique(img.pixels)) == {0, 255}


def test_pixel_accounting_small_dots_by_brute_force():
    cfg = SheetConfig(page_width_in=0.5, page_height_in=0.5, dots_per_inch=100,
                      dot_size_percent=30)
    cells = np.zeros((50, 50), np.uint8)
    cells[:FRAME, :] = cells[-FRAME:, :] = cells[:, :FRAME] = cells[:, -FRAME:] = 2
    rng = np.random.default_rng(0)
    cells[FRAME:-FRAME, FRAME:-FRAME] = rng.integers(0, 2, (46, 46))
    img = render_cells(cells, cfg, 700)
    side = dot_side_px(7.0, 30)
    want = np.full((350, 350), 255, np.uint8)
    want[:14, :] = want[-14:, :] = want[:, :14] = want[:, -14:] = 0
    for r, c in zip(*np.nonzero(cells == 1)):
        x0 = int(np.floor((c + 0.5) * 7 - side / 2 + 0.5))
        y0 = int(np.floor((r + 0.5) * 7 - side / 2 + 0.5))
        want[y0:y0 + side, x0:x0 + side] = 0
    assert np.array_equal(img.pixels, want)


def test_full_dots_merge_into_runs():
    cfg = SheetConfig(page_width_in=0.5, page_height_in=0.5, dots_per_inch=100,
                      dot_size_percent=100)
    cells = np.zeros((50, 50), np.uint8)
    cells[10, 10:20] = 1
    img = render_cells(cells, cfg, 300).pixels
    assert (img[31, 30:60] == 0).all()


def test_render_is_deterministic(small_page):
    page, img = small_page
    again = render(page, SMALL)
    assert again == img and again.digest() == img.digest()


def test_render_dpi_floor(small_page):
    with pytest.raises(DpiTooLow):
        render(small_page[0], SMALL, 150)


def test_image_io_round_trip(tmp_path, small_page):
    img = small_page[1]
    for ext in ("png", "pgm", "pbm"):
        path = tmp_path / f"s.{ext}"
        img.save(path)
        assert RasterImage.load(path) == img


# --- geometry ------------------------------------------------------------------

def test_clean_geometry_is_exact(default_page):
    geom = locate_grid(default_page[1])
    truth = render_geometry(DEFAULT)
    assert (geom.cols, geom.rows) == (1700, 2200)
    assert abs(geom.rotation_deg) <= 0.05
    assert geom.cell_pitch_px == pytest.approx(3.0, abs=0.01)
    dx = np.subtract(geom.origin_px, truth.origin_px)
    assert np.abs(dx).max() <= 0.25 * 3.0


@pytest.mark.parametrize("angle", [1.0, -1.0])
def test_rotation_estimate(default_page, angle):
    img = degrade(default_page[1], DegradationProfile(rotation_deg=angle))
    assert locate_grid(img).rotation_deg == pytest.approx(angle, abs=0.1)


def test_blank_and_gray_images():
    with pytest.raises(GridNotFound):
        locate_grid(RasterImage(np.full((600, 600), 255, np.uint8)))
    with pytest.raises(GridNotFound):
        locate_grid(RasterImage(np.full((600, 600), 128, np.uint8)))


def test_gray_cells_are_all_erasures():
    sample = classify(np.full((40, 40), 128.0))
    assert sample.erasures.all()


def test_pitch_floor():
    with pytest.raises(GridNotFound):
        GridGeometry.from_affine(((1.5, 0, 0), (0, 1.5, 0)), 100, 100)


# --- sampling and decode -----------------------------------------------------

def test_clean_sample_has_no_erasures(small_page):
    page, img = small_page
    geom = locate_grid(img)
    sample = sample_cells(img, geom)
    cells = page_cells(page, layout_for(SMALL))
    inner = np.s_[FRAME:-FRAME, FRAME:-FRAME]
    assert not sample.erasures[inner].any()
    assert np.array_equal(sample.bits[inner], cells[inner])


@pytest.mark.parametrize("cfg", [
    SMALL,
    SheetConfig(page_width_in=2.0, page_height_in=2.0, dots_per_inch=100, redundancy="1:1"),
    SheetConfig(page_width_in=1.5, page_height_in=2.5, dots_per_inch=300, dot_size_percent=40,
                omit_total_pages=True, redundancy="1:10"),
    SheetConfig(page_width_in=2.0, page_height_in=2.0, margin_in=0.2, dot_size_percent=100),
])
def test_noiseless_round_trip(cfg):
    data = _payload(2 * page_capacity(cfg).usable_payload_bytes - 77, 3)
    pages = paginate(data, cfg)
    back = [decode_sheet(render(p, cfg, 3 * cfg.dots_per_inch)) for p in pages]
    assert back == pages
    assert all(p.damage.corrected_symbols == 0 for p in back)
    assert assemble(back) == data


def test_noise_sigma_30_ber_below_one_percent(default_page):
    page, img = default_page
    noisy = degrade(img, DegradationProfile(gaussian_noise_sigma=30, seed=1))
    out = decode_sheet_full(noisy)
    truth = page_cells(page, layout_for(DEFAULT))
    inner = np.s_[FRAME:-FRAME, FRAME:-FRAME]
    ber = np.mean(out.sample.bits[inner] != truth[inner])
    assert ber < 0.01
    assert out.page == page


def test_office_scan_needs_corrections(small_page):
    from mrpods.channel import PROFILES
    page, img = small_page
    out = decode_sheet(degrade(img, PROFILES["office-scan"].with_seed(2)))
    assert out == page and out.damage.corrected_symbols > 0


def test_destructive_damage_is_partial_not_wrong(small_page):
    page, img = small_page
    px = img.pixels.copy()
    h, w = px.shape
    # a band sized to sit right at the per-codeword budget: some codewords fail, some survive
    band = np.s_[h // 3: h // 3 + 100, 40:w - 40]
    px[band] = 255 - px[band]
    out = decode_sheet(RasterImage(px))
    assert not out.damage.complete
    good = {b.address: b for b in page.blocks}
    assert out.blocks and all(good[b.address] == b for b in out.blocks)


def test_total_loss_raises(small_page):
    page, img = small_page
    px = img.pixels.copy()
    h, w = px.shape
    rng = np.random.default_rng(0)
    band = slice(30, h - 30)
    px[band, 30:w - 30] = rng.integers(0, 2, (h - 60, w - 60)).astype(np.uint8) * 255
    with pytest.raises((UncorrectableCodeword, GridNotFound)):
        decode_sheet(RasterImage(px))
