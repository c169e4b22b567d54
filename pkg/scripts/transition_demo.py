"""Plan and execute walk-to-run and run-to-walk transitions for each strategy."""
import argparse
import math

from slipgait.dynamics import ModelParams
from slipgait.regions import GridSpec
from slipgait.section import GaitKind
from slipgait.store import ResultStore
from slipgait.transitions import Strategy, execute_plan, plan_transition, planning_context

W, R = GaitKind.WALKING, GaitKind.RUNNING


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--energy", type=float, default=840.0)
    ap.add_argument("--delta", type=float, default=1.0, help="window width in degrees")
    ap.add_argument("--grid", type=int, default=41)
    ap.add_argument("--cache", default=".cache")
    args = ap.parse_args()

    table = ResultStore(args.cache).table(args.energy, GridSpec(args.grid, args.grid),
                                          ModelParams())
    ctx = planning_context(table, math.radians(args.delta))
    for a, b in ((W, R), (R, W)):
        for name in ("froude", "hip", "fit"):
            plan = plan_transition(a, b, args.energy, ctx.delta_alpha, Strategy.parse(name),
                                   context=ctx)
            ex = execute_plan(plan, context=ctx)
            print(f"{a.short}->{b.short} {name:6s} {len(plan)} steps, "
                  f"objective {plan.meta['objective']:.3g}, verified {ex.roles_verified}")
            for o in ex.observables:
                print(f"    {o.index}: {o.gait.value:8s} {o.role:10s} Fr {o.froude:.3f} "
                      f"hip {100 * o.hip_excursion:5.2f} cm duty {o.duty_factor:.2f}")


if __name__ == "__main__":
    main()
