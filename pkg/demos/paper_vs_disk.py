"""Compare keeping 20 printed sheets against keeping a spinning drive.

    python demos/paper_vs_disk.py

Prints the running drive cost every decade and the first year it passes
the one-off print bill, for a few per-page prices.
"""
from mrpods.cost import HddCostParams, PrintCostParams, crossover_year, hdd_cumulative_cost, print_fixed_cost

hdd = HddCostParams()
print("year  drive cost")
for year in range(0, 101, 10):
    print(f"{year:4d}  {hdd_cumulative_cost(hdd, year):9.2f}")

for per_page in (0.10, 3.0, 10.0):
    prt = PrintCostParams(per_page, 20)
    year = crossover_year(hdd, prt)
    when = "never within 100 years" if year is None else f"from year {year}"
    print(f"${per_page:.2f}/page (${print_fixed_cost(prt):.2f} total): drive costs more {when}")
