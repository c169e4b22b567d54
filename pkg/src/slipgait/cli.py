"""Command-line front end.

    slipgait regions --energy 780:900:10 --delta-alpha 0.5,1,2 --grid 101x101 --out runs/a
    slipgait sweep-summary --out runs/a
    slipgait transition --from walking --to running --strategy froude --energy 840 --out runs/b
    slipgait transition --replay runs/b/plan.json --out runs/c
    slipgait hopping --energy 840 --cycles 10 --out runs/d
    slipgait analyze hip.csv --kind hip --out runs/e

Exit codes: 0 success, 2 configuration error, 3 infeasible, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config, parse_energy, parse_grid, parse_params
from .dynamics import ContractError, SingularityError
from .regions import (
    GAITS,
    ConvergenceError,
    froude_range,
    region_area,
    transition_regions,
)
from .section import GaitKind
from .signal_analysis import (
    SignalDomainError,
    analyze,
    estimate_touchdown_angles,
    read_series,
)
from .store import ResultStore, energy_label
from .transitions import (
    ExecutionError,
    PlanningError,
    StepPlan,
    Strategy,
    execute_plan,
    planning_context,
    plan_transition,
    synthesize_hopping,
)

log = logging.getLogger("slipgait")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 2, 3, 4
SUMMARY_COLUMNS = ("E", "gait", "delta_alpha_deg", "viability_area", "robust_area",
                   "to_robust_area", "froude_min", "froude_max")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file")
    common.add_argument("--params", help="model parameters, 'm=80,k=20000' or a config file")
    common.add_argument("--energy", help="energy in J, or start:stop:step")
    common.add_argument("--delta-alpha", help="window widths in degrees, comma separated")
    common.add_argument("--grid", help="section grid, e.g. 101x101")
    common.add_argument("--angle-step", type=float, help="angle sampling in degrees")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="worker threads for table sweeps")
    common.add_argument("--seed", type=int, help="recorded in outputs; searches are exhaustive")
    common.add_argument("--cache", help="cache directory (default: <out>/cache)")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="slipgait", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("regions", parents=[common], help="viability and robust regions over a sweep")
    s = sub.add_parser("sweep-summary", parents=[common], help="crossover report from summary.csv")
    s.add_argument("summary", nargs="?", help="summary CSV (default: <out>/summary.csv)")
    t = sub.add_parser("transition", parents=[common], help="plan and execute a gait transition")
    t.add_argument("--from", dest="source", default="walking")
    t.add_argument("--to", dest="target", default="running")
    t.add_argument("--strategy", default="froude",
                   help="froude, hip, or fit[:ratio] (hip excursion ratio new/old)")
    t.add_argument("--mechanism", default="auto", choices=("auto", "robust", "viable"))
    t.add_argument("--replay", help="execute a saved plan instead of planning")
    h = sub.add_parser("hopping", parents=[common], help="alternating walk-run steps")
    h.add_argument("--cycles", type=int, default=10)
    a = sub.add_parser("analyze", parents=[common], help="phase analysis of a recorded series")
    a.add_argument("series", help="CSV with time and value columns")
    a.add_argument("--kind", choices=("hip", "limb"), default="hip")
    return ap


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    kw = {}
    if args.params:
        kw["params"] = parse_params(args.params, cfg.params)
    if args.energy:
        kw["e_start"], kw["e_stop"], kw["e_step"] = parse_energy(args.energy)
    if args.delta_alpha:
        try:
            kw["delta_alphas_deg"] = tuple(float(x) for x in args.delta_alpha.split(","))
        except ValueError as exc:
            raise ConfigError(f"cannot read window widths {args.delta_alpha!r}") from exc
    if args.grid:
        kw["grid"] = parse_grid(args.grid)
    if args.angle_step:
        from .regions import AngleGrid
        try:
            kw["angles"] = AngleGrid(cfg.angles.lo_deg, cfg.angles.hi_deg, args.angle_step)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if args.out:
        kw["out"] = Path(args.out)
    kw["seed"] = args.seed
    kw["threads"] = args.threads
    return cfg.with_overrides(**kw)


def _store(args, cfg: RunConfig) -> ResultStore:
    return ResultStore(Path(args.cache) if args.cache else cfg.out / "cache")


def cmd_regions(cfg: RunConfig, store: ResultStore) -> int:
    reg_dir = cfg.out / "regions"
    reg_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for E in cfg.energies:
        table = store.table(float(E), cfg.grid, cfg.params, cfg.angles, threads=cfg.threads)
        for d_deg, d in zip(cfg.delta_alphas_deg, cfg.delta_alphas):
            tr = {}

            def regions(tr=tr, d=d):
                if "x" not in tr:
                    tr["x"] = transition_regions(table, d, lookup=cfg.lookup)
                return tr["x"]

            for g in GAITS:
                V = store.region(table, g, "viability", d, cfg.lookup,
                                 lambda g=g: regions().viability[g])
                rho = store.region(table, g, "robust", d, cfg.lookup,
                                   lambda g=g: regions().robust[g])
                to_r = store.region(table, g, "to_robust", d, cfg.lookup,
                                    lambda g=g: regions().to_robust[g])
                stem = f"E{energy_label(float(E))}_{g.value}_da{d_deg:g}"
                for grid in (V, rho, to_r):
                    grid.save(reg_dir / f"{stem}_{grid.kind}")
                fmin, fmax = froude_range(rho, cfg.params) if rho.count() else (math.nan,
                                                                                   math.nan)
                rows.append([repr(float(E)), g.value, repr(float(d_deg)), repr(region_area(V)),
                             repr(region_area(rho)), repr(region_area(to_r)),
                             "" if math.isnan(fmin) else repr(fmin),
                             "" if math.isnan(fmax) else repr(fmax)])
                log.info("E=%g %s da=%g: V=%.3f rho=%.3f", E, g.value, d_deg,
                         region_area(V), region_area(rho))
    with open(cfg.out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        w.writerows(rows)
    print(f"wrote {len(rows)} summary rows to {cfg.out / 'summary.csv'}")
    return EXIT_OK


def read_summary(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k in SUMMARY_COLUMNS:
            if k != "gait":
                r[k] = float(r[k]) if r[k] != "" else math.nan
    return rows


def crossover(rows: list[dict], delta_deg: float) -> dict:
    """Energies where robust running first exceeds robust walking, and sign changes."""
    sel = [r for r in rows if r["delta_alpha_deg"] == delta_deg]
    by_e = {}
    for r in sel:
        by_e.setdefault(r["E"], {})[r["gait"]] = r["robust_area"]
    Es = sorted(by_e)
    diff = [by_e[E].get("running", math.nan) - by_e[E].get("walking", math.nan) for E in Es]
    first = next((E for E, d in zip(Es, diff) if d > 0), None)
    signs = [np.sign(d) for d in diff if d != 0 and not math.isnan(d)]
    changes = sum(1 for a, b in zip(signs, signs[1:]) if a != b)
    walk = [by_e[E].get("walking", math.nan) for E in Es]
    run = [by_e[E].get("running", math.nan) for E in Es]
    return {
        "delta_alpha_deg": delta_deg,
        "energies": Es,
        "robust_walking": walk,
        "robust_running": run,
        "first_running_exceeds_walking": first,
        "sign_changes": changes,
        "walking_nonincreasing": bool(all(b <= a for a, b in zip(walk, walk[1:]))),
        "running_nondecreasing": bool(all(b >= a for a, b in zip(run, run[1:]))),
    }


def cmd_sweep_summary(cfg: RunConfig, path: Path) -> int:
    if not path.exists():
        raise ConfigError(f"summary file {path} not found; run 'regions' first")
    rows = read_summary(path)
    deltas = sorted({r["delta_alpha_deg"] for r in rows})
    report = [crossover(rows, d) for d in deltas]
    out = cfg.out / "sweep_summary.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2, sort_keys=True))
    for rep in report:
        print(f"delta_alpha={rep['delta_alpha_deg']:g} deg: crossover at "
              f"{rep['first_running_exceeds_walking']} J, sign changes {rep['sign_changes']}")
    return EXIT_OK


def _write_outputs(ex, out: Path, seed: int | None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    ex.plan.meta.setdefault("seed", seed)
    ex.plan.save(out / "plan.json")
    ex.trajectory.to_csv(out / "trajectory.csv")
    with open(out / "observables.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "gait", "role", "t0", "t1", "froude", "hip_excursion_m",
                    "duty_factor"])
        for o in ex.observables:
            w.writerow([o.index, o.gait.value, o.role] + [repr(float(v)) for v in (
                o.t0, o.t1, o.froude, o.hip_excursion, o.duty_factor)])
    grf = ex.trajectory.ground_reaction_forces()
    flight = ~ex.trajectory.contact.any(axis=1)
    with open(out / "grf.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "grf_leg1_norm", "grf_leg2_norm", "flight"])
        for t, f, fl in zip(ex.trajectory.t, grf, flight):
            w.writerow([repr(float(t)), repr(float(f[0])), repr(float(f[1])), int(fl)])


def cmd_transition(cfg: RunConfig, store: ResultStore, args) -> int:
    if args.replay:
        plan = StepPlan.load(args.replay)
        ex = execute_plan(plan, plan.params)
    else:
        source, target = GaitKind.parse(args.source), GaitKind.parse(args.target)
        strategy = Strategy.parse(args.strategy)
        E = float(cfg.energies[0])
        d = cfg.delta_alphas[0]
        table = store.table(E, cfg.grid, cfg.params, cfg.angles, threads=cfg.threads)
        ctx = planning_context(table, d)
        plan = plan_transition(source, target, E, d, strategy, cfg.params, context=ctx,
                               mechanism=args.mechanism)
        ex = execute_plan(plan, cfg.params, context=ctx)
    _write_outputs(ex, cfg.out, cfg.seed)
    print(f"{len(ex.plan)}-step {ex.plan.source.value} to {ex.plan.target.value} plan "
          f"({ex.plan.mechanism}) written to {cfg.out}")
    return EXIT_OK


def cmd_hopping(cfg: RunConfig, store: ResultStore, args) -> int:
    E = float(cfg.energies[0])
    d = cfg.delta_alphas[0]
    table = store.table(E, cfg.grid, cfg.params, cfg.angles, threads=cfg.threads)
    ctx = planning_context(table, d)
    plan = synthesize_hopping(E, d, args.cycles, cfg.params, context=ctx)
    ex = execute_plan(plan, cfg.params, context=ctx)
    _write_outputs(ex, cfg.out, cfg.seed)
    print(f"{args.cycles} hopping cycles written to {cfg.out}")
    return EXIT_OK


def cmd_analyze(cfg: RunConfig, args) -> int:
    series = read_series(args.series)
    cfg.out.mkdir(parents=True, exist_ok=True)
    if args.kind == "hip":
        result = analyze(series).to_dict()
    else:
        hits = estimate_touchdown_angles(series)
        result = {"status": "ok", "touchdowns": [
            {"index": i, "time": i / series.sample_rate, "angle": a} for i, a in hits]}
    out = cfg.out / "analysis.json"
    out.write_text(json.dumps(result, indent=2, sort_keys=True))
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "regions":
            return cmd_regions(cfg, _store(args, cfg))
        if args.command == "sweep-summary":
            path = Path(args.summary) if args.summary else cfg.out / "summary.csv"
            return cmd_sweep_summary(cfg, path)
        if args.command == "transition":
            return cmd_transition(cfg, _store(args, cfg), args)
        if args.command == "hopping":
            return cmd_hopping(cfg, _store(args, cfg), args)
        if args.command == "analyze":
            return cmd_analyze(cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PlanningError as exc:
        print(f"infeasible ({exc.stage}): {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SingularityError, ContractError, ExecutionError, ConvergenceError,
            FloatingPointError, SignalDomainError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FileNotFoundError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
