"""Copy a sheet three times through a lossy scanner and watch it die.

    python demos/photocopy_generations.py [seed]

The sheet is dense (240 dpi) with small dots, so a good scan of the original
reads fine while each reprint smears and thresholds the dots further.
"""
import sys

from mrpods.channel import PROFILES, make_specimen, rescan_attack
from mrpods.sheet import SheetConfig

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
cfg = SheetConfig(page_width_in=2, page_height_in=2, dots_per_inch=240,
                  dot_size_percent=40, redundancy="1:10")
specimen = make_specimen(cfg, render_dpi=720)
profile = PROFILES["duplication-hostile"].with_seed(seed)

for rec in rescan_attack(specimen.image, 3, profile, specimen.cells, specimen.payload):
    label = "original" if rec.generation == 0 else f"copy {rec.generation}"
    print(f"{label:9s} bit errors {rec.ber:6.2%}  "
          f"{'decodes' if rec.decode_ok else 'unreadable'}")
