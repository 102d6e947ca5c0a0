import csv
import io

import numpy as np
import pytest

from mrpods.cost import (HddCostParams, PrintCostParams, crossover_year, hdd_cumulative_cost,
                         linear_fit_r2, pages_and_cost_series, pages_cost_csv, print_fixed_cost,
                         tco_csv, tco_series)
from mrpods.errors import ConfigInvalid, YearOutOfRange
from mrpods.sheet import SheetConfig, page_capacity

from oracles import hdd_cost_by_accumulation

HDD = HddCostParams()
ELEC = 6 / 1000 * 8766 * 0.15


def test_year_zero_and_first_replacement():
    assert hdd_cumulative_cost(HDD, 0) == 60.0
    assert hdd_cumulative_cost(HDD, 5) == pytest.approx(120 + 5 * ELEC)
    assert hdd_cumulative_cost(HDD, 4) == pytest.approx(60 + 4 * ELEC)


@pytest.mark.parametrize("params", [
    HDD,
    HddCostParams(unit_cost_usd=85, lifespan_years=3, power_watts=9.5,
                  electricity_usd_per_kwh=0.31),
    HddCostParams(unit_cost_usd=40, lifespan_years=7, power_watts=4, horizon_years=60),
])
def test_series_matches_year_by_year_accumulation(params):
    for year, cost, _ in tco_series(params, PrintCostParams()):
        want = hdd_cost_by_accumulation(params.unit_cost_usd, params.lifespan_years,
                                        params.power_watts, params.electricity_usd_per_kwh,
                                        year)
        assert cost == pytest.approx(want, rel=1e-12)


def test_increments_are_power_plus_purchases():
    costs = [c for _, c, _ in tco_series(HDD, PrintCostParams())]
    steps = np.diff(costs)
    for year, step in enumerate(steps, start=1):
        want = ELEC + (60 if year % 5 == 0 else 0)
        assert step == pytest.approx(want)


def test_year_range():
    with pytest.raises(YearOutOfRange):
        hdd_cumulative_cost(HDD, 101)
    with pytest.raises(YearOutOfRange):
        hdd_cumulative_cost(HDD, -1)


def test_invalid_params():
    with pytest.raises(ValueError):
        HddCostParams(lifespan_years=0)
    with pytest.raises(ValueError):
        HddCostParams(lifespan_years=200)
    with pytest.raises(ValueError):
        PrintCostParams(cost_per_page_usd=-1)


def test_print_cost():
    assert print_fixed_cost(PrintCostParams(0.10, 20)) == pytest.approx(2.0)
    assert print_fixed_cost(PrintCostParams(0.0, 7)) == 0.0
    assert {p for _, _, p in tco_series(HDD, PrintCostParams())} == {print_fixed_cost(PrintCostParams())}


def test_crossover_examples():
    assert crossover_year(HDD, PrintCostParams(0.10, 20)) == 0
    assert crossover_year(HDD, PrintCostParams(1e9, 20)) is None
    prt = PrintCostParams(5.0, 20)  # $100 of printing
    year = crossover_year(HDD, prt)
    brute = next(y for y in range(101) if hdd_cumulative_cost(HDD, y) > 100)
    assert year == brute == 5  # the replacement drive at year 5 tips it over
    assert hdd_cumulative_cost(HDD, year - 1) <= 100 < hdd_cumulative_cost(HDD, year)


def test_discounting_lowers_cost():
    d = HddCostParams(discount_rate=0.03)
    assert hdd_cumulative_cost(d, 0) == 60
    assert hdd_cumulative_cost(d, 50) < hdd_cumulative_cost(HDD, 50)


def test_tco_csv_layout():
    rows = list(csv.reader(io.StringIO(tco_csv(HDD, PrintCostParams()))))
    assert rows[0] == ["year", "hdd_cumulative_usd", "print_fixed_usd"]
    assert len(rows) == 102 and rows[1] == ["0", "60.0000", "2.0000"]


def test_pages_series():
    cfg = SheetConfig()
    usable = page_capacity(cfg).usable_payload_bytes
    (row,) = pages_and_cost_series([usable / 1e6], cfg, 0.1)
    assert row[1] == 1
    sizes = list(range(1, 11))
    series = pages_and_cost_series(sizes, cfg, 0.1)
    pages = [p for _, p, _ in series]
    assert pages == sorted(pages)
    by_size = dict(zip(sizes, pages))
    for s in range(1, 6):
        assert by_size[2 * s] <= 2 * by_size[s] + 1
    assert all(c == pytest.approx(p * 0.1) for _, p, c in series)


def test_pages_series_errors():
    with pytest.raises(ConfigInvalid):
        pages_and_cost_series([0], SheetConfig(), 0.1)
    with pytest.raises(ConfigInvalid):
        pages_and_cost_series([1], SheetConfig(), -0.1)


def test_fig2_is_linear():
    sizes = np.arange(0.5, 10.0001, 0.5)
    series = pages_and_cost_series(sizes, SheetConfig(), 0.1)
    assert linear_fit_r2(sizes, [c for _, _, c in series]) > 0.999
    rows = list(csv.DictReader(io.StringIO(pages_cost_csv(sizes, SheetConfig(), 0.1))))
    assert [r["size_mb"] for r in rows[:2]] == ["0.5", "1"]


def test_r2_of_perfect_line():
    assert linear_fit_r2([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert linear_fit_r2([1, 2, 3], [5, 5, 5]) == 1.0
