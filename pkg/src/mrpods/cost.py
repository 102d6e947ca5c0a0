"""Storage cost arithmetic: spinning-disk TCO over time vs. a one-off print run.

Dollar defaults are illustrative placeholders, not measured prices.
Sizes in megabytes are decimal (1 MB = 10**6 bytes).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigInvalid, YearOutOfRange
from .sheet import SheetConfig, page_capacity

HOURS_PER_YEAR = 8766
BYTES_PER_MB = 10 ** 6


@dataclass(frozen=True)
class HddCostParams:
    unit_cost_usd: float = 60.0
    lifespan_years: int = 5
    power_watts: float = 6.0
    electricity_usd_per_kwh: float = 0.15
    horizon_years: int = 100
    discount_rate: float = 0.0

    def __post_init__(self):
        for name in ("unit_cost_usd", "lifespan_years", "power_watts",
                     "electricity_usd_per_kwh", "horizon_years"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.lifespan_years > self.horizon_years:
            raise ValueError("lifespan_years cannot exceed horizon_years")
        if not 0 <= self.discount_rate < 1:
            raise ValueError("discount_rate must lie in [0, 1)")

    @property
    def electricity_per_year_usd(self) -> float:
        return self.power_watts / 1000 * HOURS_PER_YEAR * self.electricity_usd_per_kwh


@dataclass(frozen=True)
class PrintCostParams:
    cost_per_page_usd: float = 0.10
    page_count: int = 20

    def __post_init__(self):
        if self.cost_per_page_usd < 0 or self.page_count <= 0:
            raise ValueError("cost_per_page_usd must be >= 0 and page_count > 0")


def hdd_cumulative_cost(p: HddCostParams, year: int) -> float:
    """Purchases at year 0 and every lifespan, plus electricity for `year` years.

    With a non-zero discount rate each purchase and each year's electricity
    is discounted to year-0 money.
    """
    if not 0 <= year <= p.horizon_years or int(year) != year:
        raise YearOutOfRange(f"year {year} outside 0..{p.horizon_years}")
    year = int(year)
    if p.discount_rate == 0:
        return p.unit_cost_usd * (1 + year // p.lifespan_years) + year * p.electricity_per_year_usd
    f = 1.0 / (1.0 + p.discount_rate)
    buys = sum(p.unit_cost_usd * f ** t for t in range(0, year + 1, p.lifespan_years))
    power = sum(p.electricity_per_year_usd * f ** t for t in range(1, year + 1))
    return buys + power


def print_fixed_cost(p: PrintCostParams) -> float:
    return p.cost_per_page_usd * p.page_count


def crossover_year(hdd: HddCostParams, prt: PrintCostParams) -> int | None:
    """First year the disk has cost more than the print run; None if never."""
    fixed = print_fixed_cost(prt)
    for year in range(hdd.horizon_years + 1):
        if hdd_cumulative_cost(hdd, year) > fixed:
            return year
    return None


def tco_series(hdd: HddCostParams, prt: PrintCostParams) -> list[tuple[int, float, float]]:
    fixed = print_fixed_cost(prt)
    return [(y, hdd_cumulative_cost(hdd, y), fixed) for y in range(hdd.horizon_years + 1)]


def pages_for(size_bytes: int, usable_per_page: int) -> int:
    return max(1, -(-int(size_bytes) // usable_per_page))


def pages_and_cost_series(sizes_mb, config: SheetConfig, cost_per_page: float):
    """(size_mb, pages, cost_usd) for each size; pages use the sheet's usable capacity."""
    if cost_per_page < 0:
        raise ConfigInvalid("cost_per_page must be >= 0")
    usable = page_capacity(config).usable_payload_bytes
    if usable <= 0:
        raise ConfigInvalid("configuration leaves no usable payload per page")
    rows = []
    for size in sizes_mb:
        if not size > 0:
            raise ConfigInvalid(f"size {size} MB is not positive")
        pages = pages_for(math.ceil(size * BYTES_PER_MB), usable)
        rows.append((size, pages, pages * cost_per_page))
    return rows


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{v:.4f}" if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def tco_csv(hdd: HddCostParams, prt: PrintCostParams) -> str:
    return _csv(("year", "hdd_cumulative_usd", "print_fixed_usd"), tco_series(hdd, prt))


def pages_cost_csv(sizes_mb, config: SheetConfig, cost_per_page: float) -> str:
    rows = [(f"{s:g}", p, c) for s, p, c in pages_and_cost_series(sizes_mb, config, cost_per_page)]
    return _csv(("size_mb", "pages", "cost_usd"), rows)


def linear_fit_r2(xs, ys) -> float:
    """Coefficient of determination of the least-squares line through (xs, ys)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    slope, icpt = np.polyfit(x, y, 1)
    ss_res = float(((y - (slope * x + icpt)) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    return 1.0 - ss_res / ss_tot if ss_tot else 1.0
