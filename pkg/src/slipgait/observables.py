"""Biomechanical observables: Froude number, hip excursion, duty factor, vertical GRF."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .dynamics import ModelParams
from .section import SectionState
from .trajectory import Trajectory


@dataclass(frozen=True)
class ObservableSummary:
    froude: float
    hip_excursion: float
    duty_factor: float
    mean_speed: float


def froude_number(s: SectionState, p: ModelParams) -> float:
    """``w^2 r0 / g`` with ``w`` the angular velocity about the foot at the section."""
    vx = s.vx(p)
    if math.isnan(vx):
        raise ValueError(f"section state {s} lies outside the energy ellipsoid")
    w = vx / s.r
    return w * w * p.r0 / p.g


def _check_cycle(traj: Trajectory, cycle: tuple[float, float]) -> np.ndarray:
    t0, t1 = cycle
    if not t1 > t0:
        raise ValueError("cycle end must come after its start")
    mask = traj.window(t0, t1)
    if mask.sum() < 2:
        raise ValueError("cycle holds fewer than two samples")
    return mask


def hip_excursion(traj: Trajectory, cycle: tuple[float, float]) -> float:
    """Peak-to-peak height of the CoM over ``cycle``.

    Extremes between samples are recovered from the cubic Hermite
    interpolant through (y, vy) wherever vy changes sign.
    """
    mask = _check_cycle(traj, cycle)
    y = traj.y[mask]
    vy = traj.vy[mask]
    t = traj.t[mask]
    lo, hi = float(y.min()), float(y.max())
    for i in np.flatnonzero(np.sign(vy[:-1]) * np.sign(vy[1:]) < 0):
        ye = _hermite_extremum(t[i], t[i + 1], y[i], y[i + 1], vy[i], vy[i + 1])
        lo, hi = min(lo, ye), max(hi, ye)
    return hi - lo


def _hermite_extremum(t0, t1, y0, y1, d0, d1) -> float:
    h = t1 - t0
    # derivative of the Hermite cubic in s in [0, 1] is a quadratic
    a = 6 * y0 + 3 * h * d0 - 6 * y1 + 3 * h * d1
    b = -6 * y0 - 4 * h * d0 + 6 * y1 - 2 * h * d1
    c = h * d0
    roots = np.roots([a, b, c]) if abs(a) > 1e-300 else np.array([-c / b])
    best = None
    for s in roots:
        if abs(s.imag) < 1e-12 and 0.0 <= s.real <= 1.0:
            s = s.real
            h00 = 2 * s**3 - 3 * s**2 + 1
            h10 = s**3 - 2 * s**2 + s
            h01 = -2 * s**3 + 3 * s**2
            h11 = s**3 - s**2
            val = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
            best = val if best is None else (max(best, val) if d0 > 0 else min(best, val))
    return float(best) if best is not None else float(y0)


def duty_factor(traj: Trajectory, cycle: tuple[float, float], leg: int = 0) -> float:
    """Fraction of ``cycle`` during which ``leg`` touches the ground (exact event times)."""
    t0, t1 = cycle
    if not t1 > t0:
        raise ValueError("cycle end must come after its start")
    if t0 < traj.t_start - 1e-9 or t1 > traj.t_end + 1e-9:
        raise ValueError("cycle extends beyond the trajectory")
    return traj.contact_time(leg, t0, t1) / (t1 - t0)


def gait_cycles(traj: Trajectory, leg: int = 0) -> list[tuple[float, float]]:
    """Intervals between consecutive section crossings with ``leg`` as support (two steps)."""
    st = traj.section_times
    out = []
    for i in range(len(traj.step_legs)):
        if traj.step_legs[i] == leg and i + 2 < len(st):
            out.append((st[i], st[i + 2]))
    return out


def ground_reaction_forces(traj: Trajectory, p: ModelParams | None = None) -> np.ndarray:
    """Vertical force of each leg divided by body weight, shape (n, 2)."""
    if p is not None and p != traj.params:
        traj = Trajectory(**{**traj.__dict__, "params": p})
    return traj.ground_reaction_forces(normalized=True)


def stance_episodes(traj: Trajectory, leg: int) -> list[tuple[float, float]]:
    """Contact intervals of ``leg`` that start and end inside the trajectory."""
    t_lo, t_hi = traj.t_start, traj.t_end
    return [(a, b) for a, b in traj.contact_intervals[leg]
            if a > t_lo + 1e-12 and b < t_hi - 1e-12]


def force_peaks(traj: Trajectory, leg: int, episode: tuple[float, float],
                prominence: float = 0.005) -> tuple[np.ndarray, np.ndarray]:
    """Times and values of local maxima of one leg's normalized force in an episode."""
    grf = traj.ground_reaction_forces()[:, leg]
    mask = traj.window(*episode)
    f = grf[mask]
    t = traj.t[mask]
    # pad with zeros so maxima at the episode edges still count
    idx, _ = find_peaks(np.concatenate(([0.0], f, [0.0])), prominence=prominence)
    idx = idx - 1
    return t[idx], f[idx]


def newton_residual(traj: Trajectory) -> float:
    """Largest |sum of vertical GRF - weight - m a_y| over interior samples, in body weights.

    Accelerations come from central differences on the sampling grid;
    samples next to a phase switch are skipped.
    """
    p = traj.params
    t, y = traj.t, traj.y
    if len(t) < 3:
        raise ValueError("need at least three samples")
    dt = np.diff(t)
    same = (traj.phase[:-2] == traj.phase[1:-1]) & (traj.phase[1:-1] == traj.phase[2:])
    even = np.abs(dt[:-1] - dt[1:]) < 1e-9 * dt[1:]
    ok = same & even
    acc = (y[2:] - 2 * y[1:-1] + y[:-2]) / (dt[1:] ** 2)
    f = traj.ground_reaction_forces(normalized=False).sum(axis=1)[1:-1]
    res = np.abs(f - p.weight - p.m * acc) / p.weight
    return float(res[ok].max()) if ok.any() else 0.0


def summarize(traj: Trajectory, cycle: tuple[float, float], start: SectionState,
              leg: int = 0) -> ObservableSummary:
    mask = _check_cycle(traj, cycle)
    x = traj.x[mask]
    t = traj.t[mask]
    speed = float((x[-1] - x[0]) / (t[-1] - t[0]))
    return ObservableSummary(froude_number(start, traj.params), hip_excursion(traj, cycle),
                             duty_factor(traj, cycle, leg), speed)
