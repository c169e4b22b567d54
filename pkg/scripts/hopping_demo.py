"""Alternate walking and running steps and print per-cycle phase sequences."""
import argparse
import math

import numpy as np

from slipgait.dynamics import ModelParams
from slipgait.regions import GridSpec
from slipgait.store import ResultStore
from slipgait.transitions import execute_plan, planning_context, synthesize_hopping

NAMES = {0: "flight", 1: "single", 2: "double"}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--energy", type=float, default=840.0)
    ap.add_argument("--cycles", type=int, default=10)
    ap.add_argument("--grid", type=int, default=41)
    ap.add_argument("--cache", default=".cache")
    args = ap.parse_args()

    table = ResultStore(args.cache).table(args.energy, GridSpec(args.grid, args.grid),
                                          ModelParams())
    ctx = planning_context(table, math.radians(1.0))
    plan = synthesize_hopping(args.energy, ctx.delta_alpha, args.cycles, context=ctx)
    tr = execute_plan(plan, context=ctx).trajectory
    st = tr.section_times
    for c in range(args.cycles):
        ph = tr.phase[(tr.t >= st[2 * c]) & (tr.t < st[2 * c + 2])]
        keep = np.append(True, ph[1:] != ph[:-1])
        alphas = [math.degrees(s.alpha) for s in plan.steps[2 * c:2 * c + 2]]
        print(f"cycle {c:2d}: {' > '.join(NAMES[int(p)] for p in ph[keep])}  "
              f"angles {alphas[0]:.2f} / {alphas[1]:.2f} deg")
    grf = tr.ground_reaction_forces()
    print("max force in flight:", float(np.abs(grf[tr.phase == 0]).max(initial=0.0)))


if __name__ == "__main__":
    main()
