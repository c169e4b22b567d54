"""Densely sampled multi-step trajectories.

Legs are labelled 0 and 1. Within a step the kernels call the support leg
at the section "A" and the leg placed during the step "B"; :func:`from_step`
maps those onto the global labels, which alternate from step to step.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .dynamics import ModelParams

CSV_COLUMNS = ("time", "x", "y", "vx", "vy", "phase", "grf_leg1_norm", "grf_leg2_norm",
               "contact1", "contact2")


@dataclass
class Trajectory:
    """Uniformly sampled CoM path with per-leg contact bookkeeping.

    ``contact_intervals[leg]`` holds exact (on, off) times taken from the
    event times, clipped to the trajectory span. ``section_times`` marks the
    step boundaries (leg vertical), starting with the initial time.
    """

    params: ModelParams
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    phase: np.ndarray
    foot: np.ndarray
    contact: np.ndarray
    section_times: list[float] = field(default_factory=list)
    step_legs: list[int] = field(default_factory=list)
    step_gaits: list[str] = field(default_factory=list)
    contact_intervals: tuple[list, list] = field(default_factory=lambda: ([], []))
    events: list[tuple[float, str, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def t_start(self) -> float:
        return self.section_times[0] if self.section_times else float(self.t[0])

    @property
    def t_end(self) -> float:
        return self.section_times[-1] if self.section_times else float(self.t[-1])

    def leg_lengths(self) -> np.ndarray:
        dx = self.x[:, None] - self.foot
        return np.hypot(dx, self.y[:, None])

    def ground_reaction_forces(self, normalized: bool = True) -> np.ndarray:
        """Vertical force of each leg, zero while the leg is off the ground."""
        p = self.params
        L = self.leg_lengths()
        with np.errstate(invalid="ignore", divide="ignore"):
            f = p.k * (p.r0 - L) * (self.y[:, None] / L)
        f = np.where(self.contact, f, 0.0)
        return f / p.weight if normalized else f

    def energy(self) -> np.ndarray:
        """Total mechanical energy at every sample, counting each loaded leg."""
        p = self.params
        e = 0.5 * p.m * (self.vx ** 2 + self.vy ** 2) + p.m * p.g * self.y
        L = self.leg_lengths()
        springs = np.where(self.contact, 0.5 * p.k * (p.r0 - np.nan_to_num(L)) ** 2, 0.0)
        return e + springs.sum(axis=1)

    def window(self, t0: float, t1: float) -> np.ndarray:
        """Boolean mask of samples with ``t0 <= t <= t1``."""
        return (self.t >= t0 - 1e-12) & (self.t <= t1 + 1e-12)

    def contact_time(self, leg: int, t0: float, t1: float) -> float:
        total = 0.0
        for on, off in self.contact_intervals[leg]:
            total += max(0.0, min(off, t1) - max(on, t0))
        return total

    def to_csv(self, path: str | Path) -> None:
        grf = self.ground_reaction_forces()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for i in range(len(self.t)):
                w.writerow([repr(float(self.t[i])), repr(float(self.x[i])), repr(float(self.y[i])),
                            repr(float(self.vx[i])), repr(float(self.vy[i])), int(self.phase[i]),
                            repr(float(grf[i, 0])), repr(float(grf[i, 1])),
                            int(self.contact[i, 0]), int(self.contact[i, 1])])


def read_trajectory_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Columns of a trajectory CSV written by :meth:`Trajectory.to_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float).reshape(len(body), len(header))
    return {name: data[:, j] for j, name in enumerate(header)}


_EVENT_NAMES = {
    K.EV_TOUCHDOWN: "touchdown",
    K.EV_TAKEOFF: "takeoff",
    K.EV_STANCE_TO_DOUBLE: "stance_to_double",
    K.EV_DOUBLE_TO_STANCE: "double_to_stance",
    K.EV_SECTION: "section",
    K.EV_FALL: "fall",
    K.EV_BACKWARDS: "backwards",
    K.EV_FRONT_LIFTOFF: "front_liftoff",
    K.EV_TIMEOUT: "timeout",
}


@dataclass
class StepRecord:
    """Raw output of one recorded kernel step."""

    rows: np.ndarray
    events: np.ndarray
    t0: float
    t1: float
    support_leg: int
    gait: str
    ok: bool


def from_steps(params: ModelParams, steps: list[StepRecord]) -> Trajectory:
    """Stitch recorded steps into one trajectory with global leg labels."""
    if not steps:
        raise ValueError("no steps to assemble")
    blocks = []
    intervals: tuple[list, list] = ([], [])
    open_on = [None, None]
    events = []
    t_first = steps[0].t0
    open_on[steps[0].support_leg] = t_first
    for rec in steps:
        a = rec.support_leg
        b = 1 - a
        rows = rec.rows
        if len(rows):
            blk = rows.copy()
            if a == 1:
                blk[:, [K.ROW_FOOT_A, K.ROW_FOOT_B]] = rows[:, [K.ROW_FOOT_B, K.ROW_FOOT_A]]
                blk[:, [K.ROW_CONTACT_A, K.ROW_CONTACT_B]] = rows[:, [K.ROW_CONTACT_B,
                                                                      K.ROW_CONTACT_A]]
            blocks.append(blk)
        for code, t in rec.events:
            code = int(code)
            name = _EVENT_NAMES.get(code, str(code))
            if code == K.EV_TAKEOFF:
                leg = a
                if open_on[a] is not None:
                    intervals[a].append((open_on[a], t))
                    open_on[a] = None
            elif code == K.EV_TOUCHDOWN or code == K.EV_STANCE_TO_DOUBLE:
                leg = b
                open_on[b] = t
            elif code == K.EV_DOUBLE_TO_STANCE:
                leg = a
                if open_on[a] is not None:
                    intervals[a].append((open_on[a], t))
                    open_on[a] = None
            else:
                leg = b
            events.append((float(t), name, leg))
    t_last = steps[-1].t1
    for leg in (0, 1):
        if open_on[leg] is not None:
            intervals[leg].append((open_on[leg], t_last))
    rows = np.vstack(blocks) if blocks else np.empty((0, K.N_ROW))
    return Trajectory(
        params=params,
        t=rows[:, K.ROW_T],
        x=rows[:, K.ROW_X],
        y=rows[:, K.ROW_Y],
        vx=rows[:, K.ROW_VX],
        vy=rows[:, K.ROW_VY],
        phase=rows[:, K.ROW_PHASE].astype(np.int8),
        foot=rows[:, [K.ROW_FOOT_A, K.ROW_FOOT_B]],
        contact=rows[:, [K.ROW_CONTACT_A, K.ROW_CONTACT_B]] > 0.5,
        section_times=[steps[0].t0] + [rec.t1 for rec in steps if rec.ok],
        step_legs=[rec.support_leg for rec in steps],
        step_gaits=[rec.gait for rec in steps],
        contact_intervals=intervals,
        events=events,
    )


def buffer_rows(params: ModelParams, stride: float, horizon: float) -> int:
    """Row capacity for one recorded step (three phases at most)."""
    return int(3 * horizon * math.sqrt(params.r0 / params.g) / stride) + 8
