"""The section S (support leg vertical) and the step maps acting on it.

A section state is ``(r, vy)`` at fixed total energy ``E``; the forward
speed follows from energy conservation. A step simulates from S back to S
through the phase sequence of the requested gait:

* running: stance, flight, stance on the other leg;
* walking and grounded running: stance, double stance, stance on the other leg.

The gait is a control choice. In a running step the swing leg is kept off
the ground until the body is airborne; in a walking step the swing leg is
placed while the body is still supported, and an earlier takeoff is a
forbidden transition. Walking and grounded running share a phase sequence
and are told apart by the sign of the vertical velocity at the
stance-to-double switch.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .dynamics import (
    DEFAULT_OPTIONS,
    FailureKind,
    IntegratorOptions,
    ModelParams,
    StanceState,
    energy,
)
from .trajectory import StepRecord, Trajectory, buffer_rows, from_steps


class DomainError(ValueError):
    """A section state lies outside the energy ellipsoid."""


class GaitKind(enum.Enum):
    RUNNING = "running"
    WALKING = "walking"
    GROUNDED_RUNNING = "grounded_running"

    @property
    def mode(self) -> int:
        return K.MODE_RUN if self is GaitKind.RUNNING else K.MODE_WALK

    @property
    def code(self) -> int:
        return _GAIT_CODES[self]

    @property
    def short(self) -> str:
        return {"running": "R", "walking": "W", "grounded_running": "G"}[self.value]

    @classmethod
    def parse(cls, text: str) -> "GaitKind":
        t = text.strip().lower()
        for g in cls:
            if t in (g.value, g.short.lower(), g.name.lower()):
                return g
        if t in ("run", "walk", "grounded"):
            return {"run": cls.RUNNING, "walk": cls.WALKING, "grounded": cls.GROUNDED_RUNNING}[t]
        raise ValueError(f"unknown gait {text!r}")


_GAIT_CODES = {
    GaitKind.RUNNING: K.GAIT_RUNNING,
    GaitKind.WALKING: K.GAIT_WALKING,
    GaitKind.GROUNDED_RUNNING: K.GAIT_GROUNDED,
}
_GAIT_FROM_CODE = {v: g for g, v in _GAIT_CODES.items()}
_FAILURE_FROM_STATUS = {
    K.ST_FALL: FailureKind.FALL,
    K.ST_FORBIDDEN: FailureKind.FORBIDDEN_TRANSITION,
    K.ST_BACKWARDS: FailureKind.BACKWARDS,
}


def gait_from_code(code: int) -> GaitKind | None:
    return _GAIT_FROM_CODE.get(int(code))


def failure_from_status(status: int) -> FailureKind | None:
    return _FAILURE_FROM_STATUS.get(int(status))


@dataclass(frozen=True)
class SectionState:
    r: float
    vy: float
    E: float

    def vx(self, p: ModelParams) -> float:
        """Forward speed, or NaN outside the energy ellipsoid."""
        v = K.section_vx(self.r, self.vy, self.E, p.m, p.k, p.r0, p.g)
        return v if v >= 0.0 else math.nan

    def is_valid(self, p: ModelParams) -> bool:
        return self.r > 0 and self.r <= p.r0 and not math.isnan(self.vx(p))


def ellipsoid_slack(r, vy, E, p: ModelParams):
    """``E`` minus the non-horizontal energy; >= 0 inside the ellipsoid."""
    return E - 0.5 * p.k * (p.r0 - r) ** 2 - 0.5 * p.m * vy ** 2 - p.m * p.g * r


def embed(s: SectionState, p: ModelParams, foot_x: float = 0.0) -> StanceState:
    """Stance state with a vertical leg; forward motion has ``thetadot > 0``."""
    vx = s.vx(p)
    if math.isnan(vx) or not s.r > 0:
        raise DomainError(f"section state {s} lies outside the energy ellipsoid")
    return StanceState(s.r, 0.5 * math.pi, s.vy, vx / s.r, foot_x=foot_x)


def observe(st: StanceState, p: ModelParams, tol: float = 1e-8) -> SectionState:
    """Section coordinates of a stance state with its leg vertical."""
    if abs(st.theta - 0.5 * math.pi) > tol:
        raise DomainError(f"leg is not vertical (theta={st.theta})")
    return SectionState(st.r, st.rdot, energy(st, p))


@dataclass
class StepOutcome:
    """Result of one step from the section back to the section."""

    start: SectionState
    requested: GaitKind
    alpha: float
    next: SectionState | None
    gait: GaitKind | None
    failure: FailureKind | None
    duration: float
    vy_switch: float = math.nan
    foot_end: float = 0.0
    events: list[tuple[str, float]] = field(default_factory=list)
    trajectory: Trajectory | None = None
    record: StepRecord | None = None

    @property
    def ok(self) -> bool:
        return self.failure is None

    @property
    def matches_request(self) -> bool:
        return self.ok and self.gait is self.requested


def _run_kernel(s: SectionState, mode: int, alpha: float, p: ModelParams,
                opts: IntegratorOptions, record: bool, t0: float, foot0: float):
    rows = buffer_rows(p, opts.stride, opts.horizon) if record else 1
    buf = np.empty((rows, K.N_ROW))
    events = np.empty((8, 2))
    s_final = np.empty(4)
    out = K.simulate_step(float(s.r), float(s.vy), float(s.E), float(alpha), int(mode),
                          p.m, p.k, p.r0, p.g, opts.rtol, opts.atol, opts.h_max, opts.t_max(p),
                          bool(record), opts.stride, float(t0), float(foot0), buf, events, s_final)
    return out, buf, events, s_final


def step(s: SectionState, gait: GaitKind, alpha: float, p: ModelParams,
         opts: IntegratorOptions = DEFAULT_OPTIONS, record: bool = True,
         t0: float = 0.0, foot0: float = 0.0, support_leg: int = 0) -> StepOutcome:
    """One step of ``gait`` with angle of attack ``alpha`` (rad from the horizontal).

    A walking request that realizes grounded running (or the reverse) is
    reported with the realized gait, not as a failure.
    """
    if not s.is_valid(p):
        return StepOutcome(s, gait, alpha, None, None, FailureKind.FORBIDDEN_TRANSITION, 0.0)
    (status, gcode, t_end, nrows, foot_end, n_ev, vy_sw), buf, events, s_final = _run_kernel(
        s, gait.mode, alpha, p, opts, record, t0, foot0)
    ev_list = [(_event_name(int(events[i, 0])), float(events[i, 1])) for i in range(n_ev)]
    realized = gait_from_code(gcode)
    failure = failure_from_status(status) if status != K.ST_OK else None
    nxt = None
    if status == K.ST_OK:
        nxt = SectionState(float(s_final[0]), float(s_final[2]), s.E)
    rec = None
    traj = None
    if record:
        rec = StepRecord(buf[:nrows].copy(), events[:n_ev].copy(), float(t0), float(t_end),
                         support_leg, realized.value if realized else "none", status == K.ST_OK)
        traj = from_steps(p, [rec])
    return StepOutcome(s, gait, alpha, nxt, realized, failure, float(t_end) - t0, float(vy_sw),
                       float(foot_end), ev_list, traj, rec)


def _event_name(code: int) -> str:
    names = {K.EV_TOUCHDOWN: "touchdown", K.EV_TAKEOFF: "takeoff",
             K.EV_STANCE_TO_DOUBLE: "stance_to_double", K.EV_DOUBLE_TO_STANCE: "double_to_stance",
             K.EV_SECTION: "section", K.EV_FALL: "fall", K.EV_BACKWARDS: "backwards",
             K.EV_FRONT_LIFTOFF: "front_liftoff", K.EV_TIMEOUT: "timeout"}
    return names.get(code, str(code))


@dataclass
class HoppingOutcome:
    """A walking step with ``alpha`` followed by a running step with ``beta``."""

    start: SectionState
    alpha: float
    beta: float
    substeps: list[StepOutcome]
    next: SectionState | None
    failure: FailureKind | None

    @property
    def ok(self) -> bool:
        return self.failure is None

    @property
    def intermediate(self) -> SectionState | None:
        return self.substeps[0].next if self.substeps else None


def step_hopping(s: SectionState, alpha: float, beta: float, p: ModelParams,
                 opts: IntegratorOptions = DEFAULT_OPTIONS, record: bool = False) -> HoppingOutcome:
    """Hopping map: walk with ``alpha``, then run with ``beta``; observed after each."""
    first = step(s, GaitKind.WALKING, alpha, p, opts, record=record)
    if not first.ok:
        return HoppingOutcome(s, alpha, beta, [first], None, first.failure)
    if first.gait is not GaitKind.WALKING:
        return HoppingOutcome(s, alpha, beta, [first], None, FailureKind.FORBIDDEN_TRANSITION)
    second = step(first.next, GaitKind.RUNNING, beta, p, opts, record=record,
                  t0=first.duration, foot0=first.foot_end, support_leg=1)
    if not second.ok:
        return HoppingOutcome(s, alpha, beta, [first, second], None, second.failure)
    return HoppingOutcome(s, alpha, beta, [first, second], second.next, None)


def angle_outcomes(s: SectionState, gait: GaitKind, alphas: np.ndarray, p: ModelParams,
                   opts: IntegratorOptions = DEFAULT_OPTIONS):
    """Status, realized gait code and landing ``(r, vy)`` for each angle."""
    alphas = np.ascontiguousarray(alphas, dtype=float)
    n = len(alphas)
    status = np.empty((1, n), np.int8)
    gcode = np.empty((1, n), np.int8)
    rn = np.empty((1, n))
    vn = np.empty((1, n))
    K.step_table(np.array([s.r], float), np.array([s.vy], float), float(s.E), alphas, gait.mode,
                 p.m, p.k, p.r0, p.g, opts.rtol, opts.atol, opts.h_max, opts.t_max(p),
                 status, gcode, rn, vn)
    return status[0], gcode[0], rn[0], vn[0]


def _accept(gait: GaitKind, target, status, gcode, rn, vn):
    good = (status == K.ST_OK) & (gcode == gait.code)
    if target is not None:
        good &= target.contains_many(rn, vn)
    return good


def valid_angle_set(s: SectionState, gait: GaitKind, p: ModelParams, target=None,
                    resolution: float = math.radians(0.05), lo: float = 0.0,
                    hi: float = 0.5 * math.pi, refine: bool = True,
                    opts: IntegratorOptions = DEFAULT_OPTIONS) -> list[tuple[float, float]]:
    """Maximal angle intervals where a step realizes ``gait`` (and lands in ``target``).

    The open interval ``(lo, hi)`` is swept at ``resolution``; endpoints are
    then refined by bisection to ``resolution / 10``. ``target`` is anything
    with a ``contains_many(r, vy)`` method, such as a region grid.
    """
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    if not s.is_valid(p):
        return []
    n = int(math.floor((hi - lo) / resolution))
    alphas = lo + resolution * np.arange(1, n + 1)
    alphas = alphas[alphas < hi]
    if len(alphas) == 0:
        return []
    good = _accept(gait, target, *angle_outcomes(s, gait, alphas, p, opts))

    def ok_at(a):
        return bool(_accept(gait, target, *angle_outcomes(s, gait, np.array([a]), p, opts))[0])

    out = []
    i = 0
    while i < len(good):
        if not good[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(good) and good[j + 1]:
            j += 1
        a, b = float(alphas[i]), float(alphas[j])
        if refine:
            if i > 0:
                a = _bisect(ok_at, float(alphas[i - 1]), a, resolution / 10.0)
            if j + 1 < len(good):
                b = _bisect(ok_at, float(alphas[j + 1]), b, resolution / 10.0)
        out.append((a, b))
        i = j + 1
    return out


def _bisect(ok_at, bad: float, good: float, tol: float) -> float:
    """Move ``good`` toward ``bad`` while keeping the predicate true."""
    while abs(good - bad) > tol:
        mid = 0.5 * (good + bad)
        if ok_at(mid):
            good = mid
        else:
            bad = mid
    return good
