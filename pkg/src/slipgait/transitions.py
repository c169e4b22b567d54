"""Multi-step gait transitions and the hopping gait.

A plan is a list of steps, each a gait, an angle of attack and the role of
the state the step departs from:

* ``start``: a symmetric robust state of the initial gait;
* ``robust``: a robust state of the gait the step uses;
* ``transition``: a state whose step lands in the robust region of the
  other gait (or, walking to running, in the bridge set);
* ``viable``: a walking-viable, non-robust state on the way to running;
* ``target``: a symmetric robust state of the final gait.

Planning is a bounded search over angles sampled on the step table's grid.
An angle is admissible when it is the center of a window of ``delta_alpha``
whose every sampled angle realizes the gait and lands in the required set;
the landing state used for planning is the exact one from that center angle.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from . import _kernels as K
from .dynamics import DEFAULT_OPTIONS, FailureKind, IntegratorOptions, ModelParams
from .observables import duty_factor, froude_number, hip_excursion
from .regions import (
    AngleGrid,
    GridSpec,
    RegionGrid,
    StepTable,
    TransitionRegions,
    as_table,
    fixed_points,
    transition_regions,
    window_count,
)
from .section import GaitKind, SectionState, angle_outcomes, step
from .trajectory import Trajectory, from_steps

W, R = GaitKind.WALKING, GaitKind.RUNNING

# relative hip-excursion change from walking to running measured in people
# (about 5.2 cm before and 8.3 cm after the transition)
EXPERIMENTAL_EXCURSION_RATIO = 8.3 / 5.2

ROLES = ("start", "robust", "transition", "viable", "target")


class PlanningError(RuntimeError):
    """No feasible plan; ``stage`` names the search stage that ran dry."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


class ExecutionError(RuntimeError):
    def __init__(self, index: int, failure: FailureKind | None, message: str = ""):
        super().__init__(f"step {index} failed ({failure.name if failure else 'mismatch'})"
                         + (f": {message}" if message else ""))
        self.index = index
        self.failure = failure


class StrategyKind(enum.Enum):
    CONSTANT_FROUDE = "constant_froude"
    CONSTANT_HIP_EXCURSION = "constant_hip_excursion"
    FIT_HIP_EXCURSION = "fit_hip_excursion"


@dataclass(frozen=True)
class Strategy:
    """How the target gait is chosen among the reachable symmetric states.

    ``ratio`` is the desired hip excursion of the new gait over that of the
    old one (fit strategy only). ``None`` means the experimental ratio for
    walking to running and its inverse the other way.
    """

    kind: StrategyKind
    ratio: float | None = None

    def __post_init__(self):
        if self.ratio is not None:
            if self.kind is not StrategyKind.FIT_HIP_EXCURSION:
                raise ValueError("only the fit strategy takes a ratio")
            if not (math.isfinite(self.ratio) and self.ratio > 0):
                raise ValueError("excursion ratio must be finite and positive")

    @classmethod
    def constant_froude(cls) -> "Strategy":
        return cls(StrategyKind.CONSTANT_FROUDE)

    @classmethod
    def constant_hip_excursion(cls) -> "Strategy":
        return cls(StrategyKind.CONSTANT_HIP_EXCURSION)

    @classmethod
    def fit_hip_excursion(cls, ratio: float | None = None) -> "Strategy":
        return cls(StrategyKind.FIT_HIP_EXCURSION, ratio)

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        t = text.strip().lower().replace("-", "_")
        if t in ("froude", "constant_froude"):
            return cls.constant_froude()
        if t in ("hip", "constant_hip", "constant_hip_excursion"):
            return cls.constant_hip_excursion()
        if t.startswith("fit"):
            _, _, val = t.partition(":")
            return cls.fit_hip_excursion(float(val) if val else None)
        raise ValueError(f"unknown strategy {text!r}")

    def target_ratio(self, src: GaitKind, dst: GaitKind) -> float:
        if self.ratio is not None:
            return self.ratio
        return EXPERIMENTAL_EXCURSION_RATIO if src is W else 1.0 / EXPERIMENTAL_EXCURSION_RATIO

    def objective(self, start: "SymmetricGait", end: "SymmetricGait") -> float:
        if self.kind is StrategyKind.CONSTANT_FROUDE:
            return abs(end.froude - start.froude)
        if self.kind is StrategyKind.CONSTANT_HIP_EXCURSION:
            return abs(end.hip_excursion - start.hip_excursion)
        ratio = self.target_ratio(start.gait, end.gait)
        return abs(end.hip_excursion / start.hip_excursion - ratio)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "ratio": self.ratio}

    @classmethod
    def from_dict(cls, d: dict) -> "Strategy":
        return cls(StrategyKind(d["kind"]), d.get("ratio"))


@dataclass(frozen=True)
class SymmetricGait:
    """A ``vy = 0`` state mapped onto itself by ``gait`` with angle ``alpha``."""

    state: SectionState
    alpha: float
    gait: GaitKind
    froude: float
    hip_excursion: float
    window: tuple[float, float]


@dataclass(frozen=True)
class PlannedStep:
    gait: GaitKind
    alpha: float
    role: str
    state: SectionState
    predicted: SectionState
    window: tuple[float, float]

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")


@dataclass
class StepPlan:
    E: float
    delta_alpha: float
    strategy: Strategy | None
    source: GaitKind
    target: GaitKind
    steps: list[PlannedStep]
    mechanism: str = "robust"
    params: ModelParams = field(default_factory=ModelParams)
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def start(self) -> SectionState:
        return self.steps[0].state

    @property
    def end(self) -> SectionState:
        return self.steps[-1].predicted

    def transition_index(self) -> int:
        """Index of the first step departing from a transition (or viable) state."""
        for i, s in enumerate(self.steps):
            if s.role in ("transition", "viable"):
                return i
        raise ValueError("plan has no transition step")

    def to_dict(self) -> dict:
        return {
            "E": self.E,
            "delta_alpha_deg": math.degrees(self.delta_alpha),
            "strategy": self.strategy.to_dict() if self.strategy else None,
            "from": self.source.value,
            "to": self.target.value,
            "mechanism": self.mechanism,
            "params": asdict(self.params),
            "steps": [{
                "gait": s.gait.value,
                "alpha_deg": math.degrees(s.alpha),
                "alpha_rad": s.alpha,
                "role": s.role,
                "state": {"r": s.state.r, "vy": s.state.vy},
                "predicted": {"r": s.predicted.r, "vy": s.predicted.vy},
                "window_deg": [math.degrees(s.window[0]), math.degrees(s.window[1])],
            } for s in self.steps],
            "meta": self.meta,
        }

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        return path

    @classmethod
    def from_dict(cls, d: dict) -> "StepPlan":
        E = float(d["E"])
        steps = []
        for s in d["steps"]:
            alpha = s["alpha_rad"] if "alpha_rad" in s else math.radians(s["alpha_deg"])
            steps.append(PlannedStep(
                GaitKind(s["gait"]), float(alpha), s["role"],
                SectionState(float(s["state"]["r"]), float(s["state"]["vy"]), E),
                SectionState(float(s["predicted"]["r"]), float(s["predicted"]["vy"]), E),
                tuple(math.radians(w) for w in s.get("window_deg", (math.nan, math.nan)))))
        strat = Strategy.from_dict(d["strategy"]) if d.get("strategy") else None
        return cls(E, math.radians(d["delta_alpha_deg"]), strat, GaitKind(d["from"]),
                   GaitKind(d["to"]), steps, d.get("mechanism", "robust"),
                   ModelParams(**d["params"]), d.get("meta", {}))

    @classmethod
    def load(cls, path: str | Path) -> "StepPlan":
        return cls.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# planning context


@dataclass
class PlanningContext:
    """Step table, region grids and symmetric robust gaits at one energy."""

    table: StepTable
    regions: TransitionRegions
    delta_alpha: float
    opts: IntegratorOptions
    symmetric: dict[GaitKind, list[SymmetricGait]]
    _options: dict = field(default_factory=dict, repr=False)

    @property
    def E(self) -> float:
        return self.table.E

    @property
    def params(self) -> ModelParams:
        return self.table.params

    def robust(self, g: GaitKind) -> RegionGrid:
        return self.regions.robust[g]

    def region_for(self, role: str, gait: GaitKind, other: GaitKind | None) -> RegionGrid:
        """Grid a departing state with ``role`` must belong to."""
        if role in ("start", "robust", "target"):
            return self.regions.robust[gait]
        if role == "viable":
            return self.regions.bridge
        if other is None:
            raise ValueError("transition role needs the gait reached")
        return self.regions.robust_to_robust[(gait, other)]

    def options(self, s: SectionState, gait: GaitKind, target: RegionGrid, name: str
                ) -> list["_Option"]:
        """Admissible centered angles from ``s`` into ``target``, with exact landings."""
        key = (s.r, s.vy, gait, name)
        if key not in self._options:
            self._options[key] = _options(self, s, gait, target)
        return self._options[key]


@dataclass(frozen=True)
class _Option:
    alpha: float
    landing: SectionState
    window: tuple[float, float]     # sampled run containing the window
    core: tuple[float, float]       # admissible centers in that run

    @property
    def width(self) -> float:
        return self.window[1] - self.window[0]


def _options(ctx: PlanningContext, s: SectionState, gait: GaitKind, target: RegionGrid
             ) -> list[_Option]:
    p = ctx.params
    alphas = ctx.table.alphas
    if not s.is_valid(p):
        return []
    status, gcode, rn, vn = angle_outcomes(s, gait, alphas, p, ctx.opts)
    good = (status == K.ST_OK) & (gcode == gait.code)
    good &= target.contains_many(np.where(good, rn, np.nan), np.where(good, vn, np.nan))
    L = window_count(ctx.delta_alpha, ctx.table.angles.resolution)
    half = (L - 1) // 2
    out = []
    i = 0
    n = len(good)
    while i < n:
        if not good[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and good[j + 1]:
            j += 1
        if j - i + 1 >= L:
            win = (float(alphas[i]), float(alphas[j]))
            c0, c1 = i + half, j - (L - 1 - half)
            core = (float(alphas[c0]), float(alphas[c1]))
            for c in range(c0, c1 + 1):
                out.append(_Option(float(alphas[c]), SectionState(float(rn[c]), float(vn[c]), s.E),
                                   win, core))
        i = j + 1
    return out


def _spread(items: list, k: int) -> list:
    """Up to ``k`` items evenly spaced through the list."""
    if len(items) <= k:
        return list(items)
    idx = np.unique(np.linspace(0, len(items) - 1, k).round().astype(int))
    return [items[i] for i in idx]


def symmetric_gait(ctx: PlanningContext, s: SectionState, gait: GaitKind,
                   alpha_hint: float | None = None) -> SymmetricGait | None:
    """Symmetric robust gait through ``s`` (``vy = 0``), or None.

    The fixed-point angle must lie inside the admissible centers of a window
    landing in the gait's robust region.
    """
    p = ctx.params
    s = SectionState(s.r, 0.0, s.E)
    rob = ctx.robust(gait)
    if not rob.contains(s):
        return None
    opts = ctx.options(s, gait, rob, "robust")
    cores = sorted({o.core + o.window for o in opts})
    if not cores:
        return None
    fps = fixed_points(s, gait, ctx.table.alphas, p, ctx.opts)
    cands = []
    for fp in fps:
        for c0, c1, w0, w1 in cores:
            if c0 - 1e-12 <= fp.alpha <= c1 + 1e-12:
                cands.append((fp.alpha, (w0, w1)))
    if not cands:
        return None
    if alpha_hint is not None:
        cands.sort(key=lambda c: abs(c[0] - alpha_hint))
    alpha, win = cands[0]
    o = step(s, gait, alpha, p, ctx.opts, record=True)
    if not o.matches_request:
        return None
    hip = hip_excursion(o.trajectory, (0.0, o.duration))
    return SymmetricGait(s, alpha, gait, froude_number(s, p), hip, win)


def planning_context(E: float | StepTable, delta_alpha: float, p: ModelParams | None = None,
                     grid: GridSpec | None = None, angles: AngleGrid = AngleGrid(),
                     opts: IntegratorOptions = DEFAULT_OPTIONS, threads: int = 1,
                     regions: TransitionRegions | None = None) -> PlanningContext:
    """Build the table, regions and symmetric robust gaits used by the planners."""
    table = E if isinstance(E, StepTable) else as_table(E, grid or GridSpec(61, 61),
                                                        p or ModelParams(), angles, opts, threads)
    regs = regions or transition_regions(table, delta_alpha, gaits=(R, W))
    ctx = PlanningContext(table, regs, delta_alpha, opts, {})
    for g in (R, W):
        found = []
        for r in table.r_axis:
            s = SectionState(float(r), 0.0, table.E)
            if s.is_valid(table.params):
                sg = symmetric_gait(ctx, s, g)
                if sg is not None:
                    found.append(sg)
        ctx.symmetric[g] = found
    return ctx


# ---------------------------------------------------------------------------
# transition planning


@dataclass
class _Candidate:
    score: float
    n_steps: int
    min_width: float
    steps: list[PlannedStep]
    start: SymmetricGait
    end: SymmetricGait
    mechanism: str

    def key(self, tol: float) -> tuple:
        return (round(self.score / tol), self.n_steps, -self.min_width)


def _settle(sg: SymmetricGait, n: int, role: str) -> list[PlannedStep]:
    return [PlannedStep(sg.gait, sg.alpha, role, sg.state, sg.state, sg.window)
            for _ in range(n)]


def _landing_roots(ctx: PlanningContext, y: SectionState, gait: GaitKind) -> list[tuple]:
    """Centered angles from ``y`` landing exactly on ``vy = 0`` inside the robust region."""
    p = ctx.params
    opts = ctx.options(y, gait, ctx.robust(gait), "robust")
    out = []
    for a, b in zip(opts, opts[1:]):
        if a.core != b.core or a.landing.vy * b.landing.vy > 0:
            continue

        def f(alpha):
            o = step(y, gait, alpha, p, ctx.opts, record=False)
            return o.next.vy if o.matches_request else math.nan

        try:
            alpha = brentq(f, a.alpha, b.alpha, xtol=1e-13, rtol=4 * np.finfo(float).eps)
        except ValueError:
            continue
        o = step(y, gait, alpha, p, ctx.opts, record=False)
        if not o.matches_request:
            continue
        out.append((alpha, o.next, a.window))
    return out


def plan_transition(source: GaitKind, target: GaitKind, E: float, delta_alpha: float,
                    strategy: Strategy, p: ModelParams | None = None, *,
                    context: PlanningContext | None = None, start: SectionState | None = None,
                    mechanism: str = "auto", grid: GridSpec | None = None,
                    angles: AngleGrid = AngleGrid(), opts: IntegratorOptions = DEFAULT_OPTIONS,
                    max_steps: int = 8, settle: int = 2, max_approach: int = 2,
                    max_post: int = 2, branch: int = 6, max_starts: int = 6,
                    tol: float = 1e-9) -> StepPlan:
    """Plan a transition from a symmetric robust ``source`` gait to a symmetric ``target`` gait.

    The plan walks (or runs) ``settle`` steps on the starting symmetric gait,
    takes up to ``max_approach`` steps inside the source robust region to
    reach a transition state, takes the transition step, then up to
    ``max_post`` steps of the new gait ending on one of its symmetric robust
    states, followed by ``settle`` steps there.

    ``mechanism`` is ``"robust"``, ``"viable"`` (walking to running only) or
    ``"auto"`` (both, best plan wins). Candidates are ranked by the strategy
    objective, then by fewer steps, then by a wider narrowest window.
    """
    if source is target:
        raise ValueError("source and target gaits must differ")
    if context is None:
        context = planning_context(E, delta_alpha, p, grid, angles, opts)
    ctx = context
    if abs(ctx.E - E) > 1e-9 * max(1.0, abs(E)):
        raise ValueError(f"context energy {ctx.E} J does not match requested {E} J")
    if abs(ctx.delta_alpha - delta_alpha) > 1e-12:
        raise ValueError("context window width does not match delta_alpha")
    mechs = {"auto": ("robust", "viable"), "robust": ("robust",), "viable": ("viable",)}[mechanism]
    if "viable" in mechs and not (source is W and target is R):
        if mechanism == "viable":
            raise ValueError("the viable mechanism only runs from walking to running")
        mechs = ("robust",)
    regs = ctx.regions
    if all(_transition_set(regs, source, target, m).count() == 0 for m in mechs):
        raise PlanningError("regions", f"no {source.value} to {target.value} transition states "
                                       f"at E={E} J")

    if start is not None:
        sg = symmetric_gait(ctx, start, source)
        if sg is None:
            raise PlanningError("start", f"{start} is not a symmetric robust {source.value} state")
        starts = [sg]
    else:
        starts = list(ctx.symmetric[source])
    if not starts:
        raise PlanningError("start", f"no symmetric robust {source.value} states at E={E} J")
    ends = ctx.symmetric[target]
    if ends:
        starts.sort(key=lambda s0: min(strategy.objective(s0, z) for z in ends))
    starts = starts[:max_starts]

    best: _Candidate | None = None
    n_found = 0
    stage_counts = {"approach": 0, "transition": 0, "target": 0}
    for s0 in starts:
        for mech in mechs:
            for cand in _search_from(ctx, s0, source, target, mech, strategy, max_steps, settle,
                                     max_approach, max_post, branch, stage_counts):
                n_found += 1
                if best is None or cand.key(tol) < best.key(tol):
                    best = cand
    if best is not None:
        best = _polish(ctx, best, strategy, source, target, max_steps, settle, max_post, tol)
    if best is None:
        stage = next((k for k in ("approach", "transition", "target") if stage_counts[k] == 0),
                     "target")
        raise PlanningError(stage, f"no {source.value} to {target.value} plan within "
                                   f"{max_steps} steps at E={E} J")
    return StepPlan(
        ctx.E, delta_alpha, strategy, source, target, best.steps, best.mechanism, ctx.params,
        meta={
            "objective": best.score,
            "start_froude": best.start.froude,
            "end_froude": best.end.froude,
            "start_hip_excursion": best.start.hip_excursion,
            "end_hip_excursion": best.end.hip_excursion,
            "start_alpha_deg": math.degrees(best.start.alpha),
            "end_alpha_deg": math.degrees(best.end.alpha),
            "candidates": n_found,
            "starts_tried": len(starts),
            "tie_break": "objective, then fewer steps, then wider narrowest window",
            "grid": [len(ctx.table.r_axis), len(ctx.table.vy_axis)],
            "angle_step_deg": ctx.table.angles.step_deg,
        })


def _transition_set(regs: TransitionRegions, a: GaitKind, b: GaitKind, mech: str) -> RegionGrid:
    return regs.robust_to_viable if mech == "viable" else regs.robust_to_robust[(a, b)]


def _search_from(ctx, s0: SymmetricGait, A: GaitKind, B: GaitKind, mech: str,
                 strategy: Strategy, max_steps: int, settle: int, max_approach: int,
                 max_post: int, branch: int, counts: dict):
    regs = ctx.regions
    rhoA, rhoB = ctx.robust(A), ctx.robust(B)
    T = _transition_set(regs, A, B, mech)
    fixed = 2 * settle + (2 if mech == "viable" else 1)

    # approach: paths of A-steps inside the robust region of A ending in T
    paths: list[list[PlannedStep]] = []
    frontier: list[tuple[SectionState, list[PlannedStep]]] = [(s0.state, [])]
    for depth in range(max_approach + 1):
        nxt = []
        for x, path in frontier:
            if T.contains(x):
                paths.append(path)
            if depth == max_approach or fixed + depth + 1 + 1 > max_steps:
                continue
            role = "start" if not path else "robust"
            opts = ctx.options(x, A, rhoA, "robust")
            into_t = [o for o in opts if T.contains(o.landing)]
            for o in _spread(into_t, branch):
                nxt.append((o.landing, path + [PlannedStep(A, o.alpha, role, x, o.landing,
                                                           o.window)]))
        frontier = nxt
    counts["approach"] += len(paths)

    for path in paths:
        xt = path[-1].predicted if path else s0.state
        if mech == "viable":
            heads = []
            for o in _spread(ctx.options(xt, A, regs.bridge, "bridge"), branch):
                first = PlannedStep(A, o.alpha, "transition", xt, o.landing, o.window)
                for o2 in _spread(ctx.options(o.landing, A, rhoB, f"robust-{B.value}"), branch):
                    heads.append(path + [first, PlannedStep(A, o2.alpha, "viable", o.landing,
                                                            o2.landing, o2.window)])
        else:
            heads = [path + [PlannedStep(A, o.alpha, "transition", xt, o.landing, o.window)]
                     for o in _spread(ctx.options(xt, A, rhoB, f"robust-{B.value}"), branch)]
        counts["transition"] += len(heads)
        for head in heads:
            used = settle + len(head)
            depth = min(max_post, max_steps - used - settle)
            for x, tail, alpha, z_state, win in _tails(ctx, head[-1].predicted, B, depth, branch):
                z = symmetric_gait(ctx, z_state, B)
                if z is None:
                    continue
                counts["target"] += 1
                steps = (_settle(s0, settle, "start") + head + tail
                         + [PlannedStep(B, alpha, "robust", x,
                                        SectionState(z_state.r, z_state.vy, ctx.E), win)]
                         + _settle(z, settle, "target"))
                yield _Candidate(strategy.objective(s0, z), len(steps),
                                 min(st.window[1] - st.window[0] for st in steps),
                                 steps, s0, z, mech)


def _tails(ctx, x: SectionState, B: GaitKind, depth: int, branch: int | None):
    """Post-transition tails from ``x``: (steps before the landing step, alpha, landing, window).

    ``branch=None`` explores every admissible angle.
    """
    rhoB = ctx.robust(B)
    frontier = [(x, [])]
    for d in range(depth):
        nxt = []
        for y, tail in frontier:
            for alpha, z_state, win in _landing_roots(ctx, y, B):
                yield y, tail, alpha, z_state, win
            if d + 1 < depth:
                opts = ctx.options(y, B, rhoB, "robust")
                if branch is not None:
                    opts = _spread(opts, branch)
                for o in opts:
                    nxt.append((o.landing, tail + [PlannedStep(B, o.alpha, "robust", y,
                                                               o.landing, o.window)]))
        frontier = nxt


def _polish(ctx, best: "_Candidate", strategy: Strategy, A: GaitKind, B: GaitKind,
            max_steps: int, settle: int, max_post: int, tol: float, rounds: int = 8
            ) -> "_Candidate":
    """Local search on the last step of the source gait.

    Every admissible centered angle of that step is tried, each followed by
    an exhaustive search over tails; repeats while the plan improves.
    """
    for _ in range(rounds):
        steps = best.steps
        i = max(k for k, st in enumerate(steps) if st.gait is A and st.role != "start")
        st = steps[i]
        head = steps[:i]
        room = max_steps - (len(head) + 1 + settle)
        improved = False
        opts = ctx.options(st.state, A, ctx.robust(B), f"robust-{B.value}")
        for o in opts:
            if not (o.core[0] - 1e-12 <= st.alpha <= o.core[1] + 1e-12):
                continue
            moved = PlannedStep(A, o.alpha, st.role, st.state, o.landing, o.window)
            for y, tail, alpha, z_state, win in _tails(ctx, o.landing, B, min(max_post, room),
                                                         None):
                z = symmetric_gait(ctx, z_state, B)
                if z is None:
                    continue
                new = (head + [moved] + tail
                       + [PlannedStep(B, alpha, "robust", y,
                                      SectionState(z_state.r, z_state.vy, ctx.E), win)]
                       + _settle(z, settle, "target"))
                cand = _Candidate(strategy.objective(best.start, z), len(new),
                                  min(s.window[1] - s.window[0] for s in new), new,
                                  best.start, z, best.mechanism)
                if cand.key(tol) < best.key(tol):
                    best, improved = cand, True
        if not improved:
            break
    return best


def extend_plan(plan: StepPlan, before: int = 0, after: int = 0) -> StepPlan:
    """Add settling steps on the symmetric start and target gaits."""
    first, last = plan.steps[0], plan.steps[-1]
    if before and not (first.role == "start" and first.predicted == first.state):
        raise ValueError("plan does not start with a symmetric settling step")
    if after and not (last.role == "target" and last.predicted == last.state):
        raise ValueError("plan does not end with a symmetric settling step")
    steps = [first] * before + list(plan.steps) + [last] * after
    return StepPlan(plan.E, plan.delta_alpha, plan.strategy, plan.source, plan.target, steps,
                    plan.mechanism, plan.params, {**plan.meta, "extended": [before, after]})


# ---------------------------------------------------------------------------
# hopping


def hopping_sets(ctx: PlanningContext) -> tuple[RegionGrid, RegionGrid]:
    """Greatest pair of sets (walking side, running side) closed under alternating windows.

    The walking side is a subset of the walking-to-running transition set,
    the running side of the running-to-walking one; each walking window
    lands in the running side and each running window in the walking side.
    """
    from .regions import windows_into
    table = ctx.table
    regs = ctx.regions
    a = regs.robust_to_robust[(W, R)].member.ravel()[table.nodes].copy()
    b = regs.robust_to_robust[(R, W)].member.ravel()[table.nodes].copy()
    while True:
        na = a & windows_into(table, W, b, ctx.delta_alpha)[0]
        nb = b & windows_into(table, R, na, ctx.delta_alpha)[0]
        if np.array_equal(na, a) and np.array_equal(nb, b):
            break
        a, b = na, nb
    ga = regs.robust_to_robust[(W, R)].with_member(table.full(a, False), "hopping_walk")
    gb = regs.robust_to_robust[(R, W)].with_member(table.full(b, False), "hopping_run")
    return ga, gb


def _depth(grid: RegionGrid, s: SectionState) -> int:
    """Member nodes in the 3x3 neighbourhood of the node nearest ``s``."""
    ra, va = grid.r_axis, grid.vy_axis
    i = int(round((s.r - ra[0]) / (ra[1] - ra[0])))
    j = int(round((s.vy - va[0]) / (va[1] - va[0])))
    sub = grid.member[max(i - 1, 0):i + 2, max(j - 1, 0):j + 2]
    return int(sub.sum())


def synthesize_hopping(E: float, delta_alpha: float, n_cycles: int,
                       p: ModelParams | None = None, *, context: PlanningContext | None = None,
                       grid: GridSpec | None = None, angles: AngleGrid = AngleGrid(),
                       opts: IntegratorOptions = DEFAULT_OPTIONS, max_tries: int = 64
                       ) -> StepPlan:
    """Alternate walking and running steps between the two transition sets.

    Each angle is the admissible window center whose exact landing sits
    deepest inside the other set; dead ends are backtracked.
    """
    if n_cycles < 1:
        raise ValueError("n_cycles must be positive")
    ctx = context or planning_context(E, delta_alpha, p, grid, angles, opts)
    hw, hr = hopping_sets(ctx)
    if hw.count() == 0 or hr.count() == 0:
        raise PlanningError("regions", f"no hopping 2-cycle at E={E} J")
    sets = {W: hw, R: hr}
    other = {W: R, R: W}
    starts = sorted(hw.member_states(), key=lambda s: (-_depth(hw, s), abs(s.vy), -s.r))
    budget = [max_tries]

    def extend(x: SectionState, gait: GaitKind, left: int) -> list[PlannedStep] | None:
        if left == 0:
            return []
        tgt = sets[other[gait]]
        opts_ = ctx.options(x, gait, tgt, f"hop-{gait.value}")
        centre = {}
        for o in opts_:
            centre.setdefault(o.core, 0.5 * (o.core[0] + o.core[1]))
        opts_ = sorted(opts_, key=lambda o: (-_depth(tgt, o.landing), abs(o.alpha - centre[o.core])))
        for o in opts_[:3]:
            if budget[0] <= 0:
                return None
            budget[0] -= 1
            rest = extend(o.landing, other[gait], left - 1)
            if rest is not None:
                return [PlannedStep(gait, o.alpha, "transition", x, o.landing, o.window)] + rest
        return None

    for s in starts[:8]:
        budget[0] = max_tries
        steps = extend(s, W, 2 * n_cycles)
        if steps is not None:
            return StepPlan(ctx.E, delta_alpha, None, W, R, steps, "hopping", ctx.params,
                            meta={"cycles": n_cycles, "walk_set": hw.count(),
                                  "run_set": hr.count()})
    raise PlanningError("hopping", f"no sustained {n_cycles}-cycle hopping sequence at E={E} J")


# ---------------------------------------------------------------------------
# execution


@dataclass(frozen=True)
class StepObservables:
    index: int
    gait: GaitKind
    role: str
    t0: float
    t1: float
    froude: float
    hip_excursion: float
    duty_factor: float


@dataclass
class ExecutedPlan:
    plan: StepPlan
    trajectory: Trajectory
    states: list[SectionState]
    observables: list[StepObservables]
    role_checks: list[bool | None]
    max_deviation: float

    @property
    def roles_verified(self) -> bool:
        return all(c is not False for c in self.role_checks)

    def step_span(self, i: int) -> tuple[float, float]:
        st = self.trajectory.section_times
        return st[i], st[i + 1]


def execute_plan(plan: StepPlan, p: ModelParams | None = None,
                 opts: IntegratorOptions = DEFAULT_OPTIONS,
                 context: PlanningContext | None = None, tol: float = 1e-6) -> ExecutedPlan:
    """Simulate a plan step by step with dense recording.

    Each step must realize its planned gait and land within ``tol`` of the
    predicted state. When ``context`` is given, each departing state is
    checked against the region grid its role names.
    """
    p = p or plan.params
    if not plan.steps:
        raise ValueError("empty plan")
    x = plan.steps[0].state
    t, foot = 0.0, 0.0
    records = []
    states = [x]
    dev = 0.0
    for i, ps in enumerate(plan.steps):
        o = step(x, ps.gait, ps.alpha, p, opts, record=True, t0=t, foot0=foot,
                 support_leg=i % 2)
        if not o.ok:
            raise ExecutionError(i, o.failure)
        if o.gait is not ps.gait:
            raise ExecutionError(i, FailureKind.FORBIDDEN_TRANSITION,
                                 f"realized {o.gait.value}, planned {ps.gait.value}")
        d = max(abs(o.next.r - ps.predicted.r), abs(o.next.vy - ps.predicted.vy))
        if d > tol:
            raise ExecutionError(i, None, f"landing off the prediction by {d:.3g}")
        dev = max(dev, d)
        records.append(o.record)
        t += o.duration
        foot = o.foot_end
        x = o.next
        states.append(x)
    traj = from_steps(p, records)

    checks: list[bool | None] = []
    for i, ps in enumerate(plan.steps):
        if context is None:
            checks.append(None)
            continue
        if ps.role == "transition":
            nxt = plan.steps[i + 1].gait if i + 1 < len(plan.steps) else plan.target
            reach = nxt if nxt is not ps.gait else plan.target
            if plan.mechanism == "hopping":
                reach = R if ps.gait is W else W
            if plan.mechanism == "viable":
                grid = context.regions.robust_to_viable
            else:
                grid = context.regions.robust_to_robust[(ps.gait, reach)]
        else:
            grid = context.region_for(ps.role, ps.gait, None)
        checks.append(grid.contains(states[i]))

    n = len(plan.steps)
    st = traj.section_times
    obs = []
    for i, ps in enumerate(plan.steps):
        j = i if i + 2 <= n else max(n - 2, 0)
        cyc = (st[j], st[min(j + 2, n)])
        leg = traj.step_legs[j]
        obs.append(StepObservables(i, ps.gait, ps.role, float(st[i]), float(st[i + 1]),
                                   float(froude_number(states[i], p)),
                                   float(hip_excursion(traj, (st[i], st[i + 1]))),
                                   float(duty_factor(traj, cyc, leg))))
    return ExecutedPlan(plan, traj, states, obs, checks, dev)
