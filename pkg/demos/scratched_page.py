"""Print a small file onto one sheet, scuff the scan, and read it back.

    python demos/scratched_page.py [file]

Without an argument a paragraph of generated text is used. The scan gets a
slight tilt, some sensor noise and a dark scratch across the middle; the
decoder reports how many symbols it had to repair.
"""
import sys
from pathlib import Path

import numpy as np

from mrpods.channel import DegradationProfile, degrade
from mrpods.compress import compress, decompress
from mrpods.raster import RasterImage, decode_sheet, render
from mrpods.sheet import SheetConfig, assemble, page_capacity, paginate

cfg = SheetConfig(page_width_in=3, page_height_in=3)

if len(sys.argv) > 1:
    data = Path(sys.argv[1]).read_bytes()
else:
    data = b"".join(b"line %d: the quick brown fox jumps over the lazy dog\n" % i
                    for i in range(400))

stream, stats = compress(data)
pages = paginate(stream, cfg)
print(f"{stats.original_size_bytes} bytes -> {stats.compressed_size_bytes} compressed, "
      f"{len(pages)} page(s) of {page_capacity(cfg).usable_payload_bytes} usable bytes")

decoded = []
for i, page in enumerate(pages):
    img = render(page, cfg)
    scan = degrade(img, DegradationProfile(rotation_deg=0.7, gaussian_noise_sigma=20, seed=i))
    px = scan.pixels.copy()
    mid = px.shape[0] // 2
    px[mid:mid + 14, px.shape[1] // 5:] = 40  # a scratch
    got = decode_sheet(RasterImage(px))
    d = got.damage
    print(f"page {i}: {d.corrected_symbols} symbols repaired, "
          f"{len(d.failed_blocks)} blocks lost")
    decoded.append(got)

out = assemble(decoded)
if isinstance(out, bytes):
    print("recovered byte-exact:", decompress(out).data == data)
else:
    print("missing pages:", out.missing_pages)
