"""Robust and viable region areas over an energy sweep, with the crossover energy.

    python3 scripts/region_sweep.py --grid 101 --cache .cache
"""
import argparse
import math

import numpy as np

from slipgait.dynamics import ModelParams
from slipgait.regions import GridSpec, region_area, robust_region, viability_region
from slipgait.section import GaitKind
from slipgait.store import ResultStore


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--e-start", type=float, default=780.0)
    ap.add_argument("--e-stop", type=float, default=900.0)
    ap.add_argument("--e-step", type=float, default=10.0)
    ap.add_argument("--delta", type=float, default=1.0, help="window width in degrees")
    ap.add_argument("--grid", type=int, default=51)
    ap.add_argument("--cache", default=".cache")
    args = ap.parse_args()

    p = ModelParams()
    store = ResultStore(args.cache)
    delta = math.radians(args.delta)
    print(f"{'E':>6} {'V walk':>7} {'rho walk':>8} {'V run':>7} {'rho run':>8}")
    prev = None
    for E in np.arange(args.e_start, args.e_stop + 1e-9, args.e_step):
        table = store.table(float(E), GridSpec(args.grid, args.grid), p)
        areas = []
        for g in (GaitKind.WALKING, GaitKind.RUNNING):
            areas.append(region_area(viability_region(table, g, delta)))
            areas.append(region_area(robust_region(table, g, delta)))
        print(f"{E:6.0f} {areas[0]:7.3f} {areas[1]:8.3f} {areas[2]:7.3f} {areas[3]:8.3f}")
        sign = np.sign(areas[1] - areas[3])
        if prev is not None and sign != prev and sign != 0:
            print(f"       robust areas cross below {E:.0f} J")
        prev = sign if sign != 0 else prev


if __name__ == "__main__":
    main()
