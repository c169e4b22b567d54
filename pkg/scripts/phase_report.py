"""Transition index and phase change of simulated hip traces, one row per plan."""
import argparse
import math

from slipgait.dynamics import ModelParams
from slipgait.regions import GridSpec
from slipgait.section import GaitKind
from slipgait.signal_analysis import analyze, hip_series
from slipgait.store import ResultStore
from slipgait.transitions import (Strategy, execute_plan, extend_plan, plan_transition,
                                  planning_context)

W, R = GaitKind.WALKING, GaitKind.RUNNING


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--energy", type=float, default=840.0)
    ap.add_argument("--grid", type=int, default=41)
    ap.add_argument("--settle", type=int, default=8, help="extra settling steps each side")
    ap.add_argument("--cache", default=".cache")
    args = ap.parse_args()

    table = ResultStore(args.cache).table(args.energy, GridSpec(args.grid, args.grid),
                                          ModelParams())
    ctx = planning_context(table, math.radians(1.0))
    print(f"{'direction':9s} {'strategy':8s} {'index':>6s} {'dphi deg':>9s}")
    for a, b in ((W, R), (R, W)):
        for name in ("froude", "hip", "fit"):
            plan = plan_transition(a, b, args.energy, ctx.delta_alpha, Strategy.parse(name),
                                   context=ctx)
            plan = extend_plan(plan, args.settle, args.settle)
            res = analyze(hip_series(execute_plan(plan, context=ctx, tol=1e-3).trajectory))
            dphi = "-" if res.delta_phi is None else f"{math.degrees(res.delta_phi):9.1f}"
            print(f"{a.short + '->' + b.short:9s} {name:8s} {res.transition_index!s:>6s} {dphi:>9s}")


if __name__ == "__main__":
    main()
