#!/usr/bin/env python3
"""Print the occupancy grids of a playtest report as ASCII heatmaps."""

import argparse
import csv
from collections import defaultdict

SHADES = " .:-=+*#%@"


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("csv", help="occupancy.csv written by `bossraid playtest --format csv`")
    args = p.parse_args()
    grids = defaultdict(dict)
    with open(args.csv, newline="") as f:
        for row in csv.DictReader(f):
            grids[row["setting"]][int(row["row"]), int(row["col"])] = float(row["mean_ticks"])
    for setting, cells in grids.items():
        n = max(r for r, _ in cells) + 1
        peak = max(cells.values()) or 1.0
        print(setting)
        for r in reversed(range(n)):  # row 0 is the bottom of the arena
            print("".join(SHADES[min(int(cells[r, c] / peak * len(SHADES)), len(SHADES) - 1)] * 2
                          for c in range(n)))
        print()


if __name__ == "__main__":
    main()
