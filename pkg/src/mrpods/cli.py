"""Command-line front end: encode, decode, inspect, simulate, cost.

Exit codes
    0  success (decode: full recovery)
    2  invalid flags, configuration or input set
    3  file could not be read or written
    4  input larger than the limit (use --allow-large)
    5  decode recovered only part of the payload
    6  nothing recoverable (no grid found, no readable page)
"""
from __future__ import annotations

import argparse
import json
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .channel import (DegradationProfile, SweepCase, degrade, expand_grid, profile_field,
                      rescan_attack, robustness_sweep, score, worker_count)
from .compress import MAX_INPUT_BYTES, compress, decompress
from .cost import (HddCostParams, PrintCostParams, crossover_year, pages_cost_csv, tco_csv)
from .errors import (ConfigInvalid, CorruptContainer, GridNotFound, InputTooLarge,
                     MixedPayloads, HeaderConflict, MrpodsError)
from .raster import (DEFAULT_RENDER_DPI, RasterImage, decode_sheet_full, page_cells, render)
from .sheet import (BLOCK_PAYLOAD, MissingReport, SheetConfig, assemble, page_capacity,
                    paginate)

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_TOO_LARGE, EXIT_PARTIAL, EXIT_NONE = 0, 2, 3, 4, 5, 6


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _page_size(text: str) -> tuple[float, float]:
    named = {"letter": (8.5, 11.0), "a4": (8.27, 11.69), "legal": (8.5, 14.0)}
    if text.lower() in named:
        return named[text.lower()]
    m = re.fullmatch(r"\s*([\d.]+)\s*[xX]\s*([\d.]+)\s*", text)
    if not m:
        raise argparse.ArgumentTypeError(f"page must be WxH in inches or a name, got {text!r}")
    return float(m.group(1)), float(m.group(2))


def _sheet_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("sheet")
    g.add_argument("--dpi", type=int, default=200, help="data dots per inch (default 200)")
    g.add_argument("--dot-size", type=int, default=70, help="dot area, percent of a cell")
    g.add_argument("--redundancy", default="1:5", help="parity:data ratio (default 1:5)")
    g.add_argument("--page", type=_page_size, default=(8.5, 11.0),
                   help="WxH inches or letter/a4/legal (default 8.5x11)")
    g.add_argument("--margin", type=float, default=0.0, help="margin in inches (default 0)")
    g.add_argument("--omit-total-pages", action="store_true",
                   help="leave the page count off every header but the last")
    g.add_argument("--render-dpi", type=int, default=DEFAULT_RENDER_DPI,
                   help=f"image resolution (default {DEFAULT_RENDER_DPI})")


def _config(args) -> SheetConfig:
    try:
        return SheetConfig(dots_per_inch=args.dpi, dot_size_percent=args.dot_size,
                           redundancy=args.redundancy, page_width_in=args.page[0],
                           page_height_in=args.page[1], margin_in=args.margin,
                           omit_total_pages=args.omit_total_pages)
    except (ConfigInvalid, ValueError) as exc:
        raise CliError(f"invalid sheet configuration: {exc}", EXIT_CONFIG) from exc


def _config_echo(cfg: SheetConfig, render_dpi: int) -> dict:
    return {"dots_per_inch": cfg.dots_per_inch, "dot_size_percent": cfg.dot_size_percent,
            "redundancy": "%d:%d" % cfg.redundancy,
            "page_in": [cfg.page_width_in, cfg.page_height_in], "margin_in": cfg.margin_in,
            "omit_total_pages": cfg.omit_total_pages, "render_dpi": render_dpi}


def _map(fn, items):
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _read(path: Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_IO) from exc


def _write(path: Path, data) -> None:
    try:
        Path(path).write_bytes(data.encode() if isinstance(data, str) else data)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}", EXIT_IO) from exc


def _load_image(path) -> RasterImage:
    try:
        return RasterImage.load(path)
    except OSError as exc:
        raise CliError(f"cannot read image {path}: {exc}", EXIT_IO) from exc


# --------------------------------------------------------------------------
# encode

def _render_job(job):
    page, cfg, dpi = job
    return render(page, cfg, dpi)


def cmd_encode(args) -> int:
    cfg = _config(args)
    if args.render_dpi < cfg.dots_per_inch:
        raise CliError("--render-dpi must be at least --dpi", EXIT_CONFIG)
    src = Path(args.input)
    raw = _read(src)
    if not raw:
        raise CliError(f"{src} is empty; nothing to encode", EXIT_CONFIG)
    try:
        stream, stats = compress(raw, max_input_bytes=None if args.allow_large else MAX_INPUT_BYTES)
        pages = paginate(stream.data, cfg)
    except InputTooLarge as exc:
        raise CliError(f"{exc} (pass --allow-large to override)", EXIT_TOO_LARGE) from exc
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {out}: {exc.strerror}", EXIT_IO) from exc
    images = _map(_render_job, [(p, cfg, args.render_dpi) for p in pages])
    entries = []
    for page, img in zip(pages, images):
        name = f"{src.stem}_p{page.header.page_index}.{args.format}"
        try:
            img.save(out / name)
        except OSError as exc:
            raise CliError(f"cannot write {out / name}: {exc}", EXIT_IO) from exc
        entries.append({"index": page.header.page_index, "file": name,
                        "image_sha256": img.digest(), "blocks": len(page.blocks)})
    cap = page_capacity(cfg)
    manifest = {
        "format": "mrpods-manifest", "version": 1, "tool_version": __version__,
        "source": src.name, "payload_id": pages[0].header.payload_id.hex(),
        "original_bytes": stats.original_size_bytes,
        "compressed_bytes": stats.compressed_size_bytes,
        "compression_ratio": round(stats.compression_ratio, 4),
        "page_count": len(pages), "config": _config_echo(cfg, args.render_dpi),
        "usable_bytes_per_page": cap.usable_payload_bytes, "pages": entries,
    }
    _write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    print(f"{src.name}: {stats.original_size_bytes} bytes -> {stats.compressed_size_bytes} "
          f"compressed (ratio {stats.compression_ratio:.3f}) -> {len(pages)} page(s) in {out}")
    if args.verbose:
        print("\n".join(cap.lines()))
    return EXIT_OK


# --------------------------------------------------------------------------
# decode

def _decode_job(img: RasterImage):
    try:
        res = decode_sheet_full(img)
        return res.page, None
    except MrpodsError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _recovered_spans(pages) -> tuple[bytes, list[list[int]]]:
    """Best-effort compressed stream with zero-filled gaps, plus the gap byte ranges."""
    blocks = {}
    size = None
    for page in pages:
        if page.header.payload_total_bytes is not None:
            size = page.header.payload_total_bytes
        for b in page.blocks:
            if not b.is_padding:
                blocks[b.address] = b.payload
    if not blocks:
        return b"", []
    if size is None:
        size = (max(blocks) + 1) * BLOCK_PAYLOAD
    nblocks = -(-size // BLOCK_PAYLOAD)
    buf = bytearray(nblocks * BLOCK_PAYLOAD)
    gaps = []
    for a in range(nblocks):
        if a in blocks:
            buf[a * BLOCK_PAYLOAD:(a + 1) * BLOCK_PAYLOAD] = blocks[a]
        else:
            lo, hi = a * BLOCK_PAYLOAD, min(size, (a + 1) * BLOCK_PAYLOAD)
            if gaps and gaps[-1][1] == lo:
                gaps[-1][1] = hi
            else:
                gaps.append([lo, hi])
    return bytes(buf[:size]), gaps


def cmd_decode(args) -> int:
    paths = [Path(p) for p in args.images]
    images, seen = [], set()
    names = []
    for p in paths:
        img = _load_image(p)
        d = img.digest()
        if d in seen:
            continue
        seen.add(d)
        images.append(img)
        names.append(p.name)
    results = _map(_decode_job, images)
    report = {"images": [], "missing_pages": [], "missing_blocks": 0, "status": ""}
    pages = []
    for name, (page, err) in zip(names, results):
        entry = {"file": name}
        if page is None:
            entry["error"] = err
        else:
            dmg = page.damage
            entry.update(page_index=page.header.page_index,
                         total_pages=page.header.total_pages,
                         corrected_symbols=dmg.corrected_symbols, erasures=dmg.erasures,
                         failed_codewords=len(dmg.failed_codewords),
                         failed_blocks=len(dmg.failed_blocks),
                         header_copies_ok=dmg.header_copies_ok)
            pages.append(page)
        report["images"].append(entry)

    out = Path(args.out)
    report_path = Path(args.report) if args.report else out.with_name(out.name + ".report.json")
    code = EXIT_OK
    if not pages:
        report["status"] = "no readable page"
        code = EXIT_NONE
    else:
        try:
            result = assemble(pages)
        except (MixedPayloads, HeaderConflict) as exc:
            raise CliError(f"inconsistent page set: {exc}", EXIT_CONFIG) from exc
        if isinstance(result, MissingReport):
            report["missing_pages"] = (list(result.missing_pages)
                                       if result.missing_pages is not None else None)
            report["missing_blocks"] = len(result.missing_blocks)
            report["status"] = f"partial: {result.reason}"
            partial, gaps = _recovered_spans(pages)
            report["gap_map"] = gaps
            part_path = out.with_name(out.name + ".partial")
            _write(part_path, partial)
            report["partial_file"] = part_path.name
            code = EXIT_PARTIAL
        else:
            try:
                data = decompress(result).data
            except CorruptContainer as exc:
                report["status"] = f"container unreadable: {exc}"
                code = EXIT_NONE
            else:
                _write(out, data)
                report["status"] = "complete"
                report["bytes"] = len(data)
    _write(report_path, json.dumps(report, indent=2) + "\n")
    _print_decode_report(report)
    return code


def _print_decode_report(report) -> None:
    for e in report["images"]:
        if "error" in e:
            print(f"{e['file']}: unreadable ({e['error']})")
        else:
            print(f"{e['file']}: page {e['page_index']}, {e['corrected_symbols']} symbols "
                  f"corrected, {e['erasures']} erasures, {e['failed_blocks']} failed blocks")
    mp = report["missing_pages"]
    if mp is None:
        print("missing pages: unknown (total count withheld)")
    elif mp:
        print("missing pages: " + ", ".join(map(str, mp)))
    print(f"status: {report['status']}")


# --------------------------------------------------------------------------
# inspect

def cmd_inspect(args) -> int:
    img = _load_image(args.image)
    try:
        res = decode_sheet_full(img)
    except GridNotFound as exc:
        raise CliError(f"no sheet found: {exc}", EXIT_NONE) from exc
    except MrpodsError as exc:
        raise CliError(f"sheet found but unreadable: {exc}", EXIT_NONE) from exc
    g, h, page = res.geometry, res.page.header, res.page
    dmg = page.damage
    print(f"image             {img.width_px} x {img.height_px} px")
    print(f"grid              {g.cols} x {g.rows} cells, pitch {g.cell_pitch_px:.3f} px, "
          f"rotation {g.rotation_deg:+.3f} deg, origin ({g.origin_px[0]:.2f}, {g.origin_px[1]:.2f})")
    print(f"format version    {h.format_version}")
    print(f"payload id        {h.payload_id.hex()}")
    print(f"page index        {h.page_index}" + ("  (final)" if h.final_page else ""))
    print(f"total pages       {'withheld' if h.total_pages is None else h.total_pages}")
    print(f"payload bytes     "
          f"{'withheld' if h.payload_total_bytes is None else h.payload_total_bytes}")
    print(f"code              RS({h.rs_n},{h.rs_k}) at {h.dots_per_inch} dpi, "
          f"{h.dot_size_percent}% dots")
    print(f"header copies ok  {dmg.header_copies_ok}/2")
    print(f"blocks            {len(page.blocks)} ok, {len(dmg.failed_blocks)} failed CRC/ECC"
          + (f" (slots {', '.join(map(str, dmg.failed_blocks[:20]))}"
             f"{'...' if len(dmg.failed_blocks) > 20 else ''})" if dmg.failed_blocks else ""))
    print(f"corrections       {dmg.corrected_symbols} symbols, {dmg.erasures} erasures, "
          f"{len(dmg.failed_codewords)} failed codewords")
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate

_CONFIG_AXES = {"dpi": "dots_per_inch", "dots_per_inch": "dots_per_inch",
                "dot_size": "dot_size_percent", "dot_size_percent": "dot_size_percent",
                "redundancy": "redundancy"}


def _parse_vary(items):
    """--vary key=v1,v2 -> (config axes, profile axes)."""
    cfg_axes, prof_axes = {}, {}
    for item in items or ():
        if "=" not in item:
            raise CliError(f"--vary expects key=v1,v2,..., got {item!r}", EXIT_CONFIG)
        key, vals = item.split("=", 1)
        key = key.strip().replace("-", "_")
        values = [v.strip() for v in vals.split(",") if v.strip()]
        if not values:
            raise CliError(f"--vary {key} has no values", EXIT_CONFIG)
        try:
            if key in _CONFIG_AXES:
                name = _CONFIG_AXES[key]
                cfg_axes[name] = values if name == "redundancy" else [int(v) for v in values]
            else:
                name = profile_field(key)
                if name == "seed":
                    raise ValueError("use --seed/--seeds for seeds")
                prof_axes[name] = [float(v) for v in values]
        except ValueError as exc:
            raise CliError(f"bad --vary {item!r}: {exc}", EXIT_CONFIG) from exc
    return cfg_axes, prof_axes


def cmd_simulate(args) -> int:
    try:
        base = DegradationProfile.parse(args.profile or "", DegradationProfile(seed=args.seed))
    except ValueError as exc:
        raise CliError(f"invalid --profile: {exc}", EXIT_CONFIG) from exc
    cfg_axes, prof_axes = _parse_vary(args.vary)
    try:
        profiles = expand_grid(base, **prof_axes)
    except ValueError as exc:
        raise CliError(f"invalid profile grid: {exc}", EXIT_CONFIG) from exc
    if args.seeds < 1:
        raise CliError("--seeds must be at least 1", EXIT_CONFIG)
    seeds = [args.seed + i for i in range(args.seeds)]

    if args.inputs:
        if cfg_axes:
            raise CliError("sheet axes can only be varied for synthetic sweeps", EXIT_CONFIG)
        text = _simulate_images(args, profiles, seeds)
    else:
        cfg = _config(args)
        try:
            configs = expand_grid(cfg, **cfg_axes)
        except (ConfigInvalid, ValueError) as exc:
            raise CliError(f"invalid sheet grid: {exc}", EXIT_CONFIG) from exc
        if args.attack:
            raise CliError("--attack needs input images", EXIT_CONFIG)
        result = robustness_sweep([SweepCase(c, args.render_dpi) for c in configs], profiles,
                                  seeds, payload_bytes=args.payload_bytes)
        text = result.to_csv(summary=args.summary)
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _image_inputs(inputs) -> list[Path]:
    paths = []
    for item in inputs:
        p = Path(item)
        if p.suffix == ".json":
            try:
                manifest = json.loads(_read(p))
                paths += [p.parent / e["file"] for e in manifest["pages"]]
            except (KeyError, ValueError) as exc:
                raise CliError(f"{p} is not a manifest: {exc}", EXIT_CONFIG) from exc
        else:
            paths.append(p)
    return paths


def _simulate_images(args, profiles, seeds) -> str:
    import csv
    import io
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    prof_cols = [f for f in DegradationProfile.__dataclass_fields__ if f != "seed"]
    if args.attack:
        w.writerow(["image", *prof_cols, "seed", "generation", "ber", "corrected_symbols",
                    "decode_ok"])
    else:
        w.writerow(["image", *prof_cols, "seed", "ber", "corrected_symbols", "payload_recovered"])
    for path in _image_inputs(args.inputs):
        img = _load_image(path)
        try:
            clean = decode_sheet_full(img)
        except MrpodsError as exc:
            raise CliError(f"{path.name} does not decode cleanly: {exc}", EXIT_NONE) from exc
        truth = page_cells(clean.page, clean.layout)
        for prof in profiles:
            row0 = [path.name, *(getattr(prof, f) for f in prof_cols)]
            for seed in seeds:
                if args.attack:
                    for r in rescan_attack(img, args.attack, prof.with_seed(seed), truth):
                        w.writerow(row0 + [seed, r.generation, repr(r.ber), r.corrected_symbols,
                                           r.decode_ok])
                else:
                    t = score(degrade(img, prof.with_seed(seed)), truth, None)
                    w.writerow(row0 + [seed, repr(t.ber), t.corrected_symbols, t.decode_ok])
    return buf.getvalue()


# --------------------------------------------------------------------------
# cost

def _sizes(text: str) -> list[float]:
    m = re.fullmatch(r"([\d.]+):([\d.]+):([\d.]+)", text.strip())
    if m:
        lo, hi, step = (float(g) for g in m.groups())
        if step <= 0 or hi < lo:
            raise CliError("--sizes range must be LO:HI:STEP with STEP > 0", EXIT_CONFIG)
        return [round(v, 6) for v in np.arange(lo, hi + step / 2, step)]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise CliError(f"bad --sizes {text!r}", EXIT_CONFIG) from exc


def cmd_cost(args) -> int:
    try:
        prt = PrintCostParams(args.page_cost, args.pages)
        if args.figure == "fig3":
            hdd = HddCostParams(args.unit_cost, args.lifespan, args.watts, args.kwh_price,
                                args.horizon, args.discount_rate)
            text = tco_csv(hdd, prt)
            year = crossover_year(hdd, prt)
            print(f"crossover year: {'never' if year is None else year}", file=sys.stderr)
        else:
            if args.page_cost <= 0:
                raise ValueError("page cost must be positive")
            text = pages_cost_csv(_sizes(args.sizes), _config(args), args.page_cost)
    except (ValueError, ConfigInvalid) as exc:
        raise CliError(f"invalid cost parameters: {exc}", EXIT_CONFIG) from exc
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mrpods", description="Printable optical data sheets.")
    ap.add_argument("--version", action="version", version=f"mrpods {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="compress a file and render it as page images")
    p.add_argument("input")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", choices=("png", "pgm", "pbm"), default="png")
    p.add_argument("--allow-large", action="store_true", help="lift the input size limit")
    p.add_argument("-v", "--verbose", action="store_true", help="print the capacity breakdown")
    _sheet_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="recover a file from page images")
    p.add_argument("images", nargs="+")
    p.add_argument("--out", required=True, help="recovered file")
    p.add_argument("--report", help="JSON report path (default <out>.report.json)")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("inspect", help="describe one page image")
    p.add_argument("image")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("simulate", help="degrade sheets and measure recovery")
    p.add_argument("inputs", nargs="*", help="page images or a manifest.json; none = synthetic")
    p.add_argument("--profile", default="", help="preset and/or key=value,... overrides")
    p.add_argument("--vary", action="append", metavar="KEY=V1,V2",
                   help="sweep axis (profile field, dpi, dot_size or redundancy); repeatable")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--attack", type=int, default=0, metavar="GENERATIONS",
                   help="run the scan-and-reprint experiment instead")
    p.add_argument("--payload-bytes", type=int, default=None)
    p.add_argument("--summary", action="store_true", help="one row per grid cell")
    p.add_argument("--out", help="CSV path (default stdout)")
    _sheet_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cost", help="emit storage cost series as CSV")
    p.add_argument("figure", choices=("fig2", "fig3"),
                   help="fig2: pages and cost by size; fig3: cost over years")
    p.add_argument("--unit-cost", type=float, default=60.0, help="disk price, USD")
    p.add_argument("--lifespan", type=int, default=5, help="disk lifespan, years")
    p.add_argument("--watts", type=float, default=6.0)
    p.add_argument("--kwh-price", type=float, default=0.15)
    p.add_argument("--horizon", type=int, default=100)
    p.add_argument("--discount-rate", type=float, default=0.0)
    p.add_argument("--page-cost", type=float, default=0.10, help="USD per printed page")
    p.add_argument("--pages", type=int, default=20, help="pages in the print run")
    p.add_argument("--sizes", default="0.5:10:0.5", help="MB list or LO:HI:STEP")
    p.add_argument("--out", help="CSV path (default stdout)")
    _sheet_flags(p)
    p.set_defaults(func=cmd_cost)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"mrpods {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
