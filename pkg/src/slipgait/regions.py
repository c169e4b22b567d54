"""Viability, robust, symmetric and transition regions on (r, vy) grids.

Everything here is computed from a :class:`StepTable`: the outcome of every
(grid node, sampled angle, phase sequence) triple at one energy. One table
serves every gait and every window width, so the expensive simulation is
done once per energy and grid.

Conventions
-----------
* A window of width ``delta`` is a run of consecutive sampled angles whose
  span ``(n - 1) * resolution`` is at least ``delta``; every angle in the run
  must succeed.
* A landing state belongs to a set when its nearest grid node does
  (``lookup="nearest"``), or when all four surrounding nodes do
  (``lookup="conservative"``).
* Areas are member-node counts over the number of nodes inside the energy
  ellipsoid.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from . import _kernels as K
from .dynamics import DEFAULT_OPTIONS, IntegratorOptions, ModelParams
from .section import GaitKind, SectionState, angle_outcomes, ellipsoid_slack, step

GAITS = (GaitKind.RUNNING, GaitKind.WALKING, GaitKind.GROUNDED_RUNNING)
_EPS = 1e-9


class ConvergenceError(RuntimeError):
    """Fixed-point pruning did not settle within the iteration cap."""


def section_bounds(E: float, p: ModelParams) -> tuple[float, float, float]:
    """Leg-length range and largest |vy| of the section at energy ``E``.

    The ellipsoid is cut at ``r = r0`` since a loaded leg cannot be longer
    than its rest length.
    """
    a = 0.5 * p.k
    b = -(p.k * p.r0 - p.m * p.g)
    c = 0.5 * p.k * p.r0 ** 2 - E
    disc = b * b - 4 * a * c
    if disc <= 0:
        raise ValueError(f"energy {E} J is below the minimum of the section")
    r_lo = (-b - math.sqrt(disc)) / (2 * a)
    r_hi = min(p.r0, (-b + math.sqrt(disc)) / (2 * a))
    if r_hi <= r_lo:
        raise ValueError(f"energy {E} J leaves no room in the section")
    r_star = min(max(p.r0 - p.m * p.g / p.k, r_lo), r_hi)
    vy_max = math.sqrt(max(2.0 * ellipsoid_slack(r_star, 0.0, E, p) / p.m, 0.0))
    return r_lo, r_hi, vy_max


@dataclass(frozen=True)
class GridSpec:
    """Uniform (r, vy) grid; bounds default to the section's extent at each energy."""

    n_r: int = 201
    n_vy: int = 201
    r_min: float | None = None
    r_max: float | None = None
    vy_max: float | None = None

    def __post_init__(self):
        if self.n_r < 2 or self.n_vy < 2:
            raise ValueError("grid needs at least two nodes per axis")

    def axes(self, E: float, p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
        r_lo, r_hi, vmax = section_bounds(E, p)
        r_lo = r_lo if self.r_min is None else self.r_min
        r_hi = r_hi if self.r_max is None else self.r_max
        vmax = vmax if self.vy_max is None else self.vy_max
        return np.linspace(r_lo, r_hi, self.n_r), np.linspace(-vmax, vmax, self.n_vy)

    def key(self) -> str:
        return f"{self.n_r}x{self.n_vy}:{self.r_min}:{self.r_max}:{self.vy_max}"


@dataclass(frozen=True)
class AngleGrid:
    """Sampled angles of attack, in degrees, ``lo <= alpha < hi``."""

    lo_deg: float = 50.0
    hi_deg: float = 90.0
    step_deg: float = 0.25

    def __post_init__(self):
        if not (self.step_deg > 0 and self.hi_deg > self.lo_deg):
            raise ValueError("angle grid needs step > 0 and hi > lo")

    def values(self) -> np.ndarray:
        n = int(math.ceil((self.hi_deg - self.lo_deg) / self.step_deg - 1e-9))
        return np.radians(self.lo_deg + self.step_deg * np.arange(n))

    @property
    def resolution(self) -> float:
        return math.radians(self.step_deg)

    def key(self) -> str:
        return f"{self.lo_deg}:{self.hi_deg}:{self.step_deg}"


@dataclass
class ModeTable:
    status: np.ndarray
    gait: np.ndarray
    r_next: np.ndarray
    vy_next: np.ndarray


@dataclass
class StepTable:
    """Outcome of every (valid node, angle) pair for both phase sequences."""

    E: float
    params: ModelParams
    grid: GridSpec
    angles: AngleGrid
    r_axis: np.ndarray
    vy_axis: np.ndarray
    valid: np.ndarray          # (n_r, n_vy) bool
    nodes: np.ndarray          # flat indices of valid nodes
    modes: dict[int, ModeTable]
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def alphas(self) -> np.ndarray:
        return self.angles.values()

    @property
    def n_valid(self) -> int:
        return len(self.nodes)

    def success(self, gait: GaitKind) -> np.ndarray:
        """(n_valid, n_angles) mask of steps that realize ``gait``."""
        mt = self.modes[gait.mode]
        return (mt.status == K.ST_OK) & (mt.gait == gait.code)

    def landing(self, gait: GaitKind, lookup: str = "nearest") -> np.ndarray:
        """Valid-node positions of landing states; -1 where there is none.

        Shape ``(n_valid, n_angles)`` for nearest lookup and
        ``(n_valid, n_angles, 4)`` for conservative lookup.
        """
        key = (gait.mode, lookup)
        if key not in self._cache:
            mt = self.modes[gait.mode]
            self._cache[key] = landing_nodes(self, mt.r_next, mt.vy_next, lookup)
        return self._cache[key]

    def full(self, values: np.ndarray, fill=False) -> np.ndarray:
        """Scatter a per-valid-node vector onto the full grid."""
        out = np.full(self.valid.size, fill, dtype=np.asarray(values).dtype)
        out[self.nodes] = values
        return out.reshape(self.valid.shape)

    def section_states(self) -> tuple[np.ndarray, np.ndarray]:
        R, V = np.meshgrid(self.r_axis, self.vy_axis, indexing="ij")
        return R.ravel()[self.nodes], V.ravel()[self.nodes]


def landing_nodes(table: StepTable, r: np.ndarray, vy: np.ndarray, lookup: str) -> np.ndarray:
    ra, va = table.r_axis, table.vy_axis
    pos = -np.ones(table.valid.size, dtype=np.int64)
    pos[table.nodes] = np.arange(table.n_valid)
    fi = (r - ra[0]) / (ra[1] - ra[0])
    fj = (vy - va[0]) / (va[1] - va[0])
    with np.errstate(invalid="ignore"):
        if lookup == "nearest":
            i = np.rint(fi)
            j = np.rint(fj)
            ok = np.isfinite(i) & (i >= 0) & (i < len(ra)) & (j >= 0) & (j < len(va))
            flat = np.where(ok, i * len(va) + j, 0).astype(np.int64)
            return np.where(ok, pos[flat], -1)
        if lookup == "conservative":
            i0 = np.floor(fi)
            j0 = np.floor(fj)
            out = np.empty(r.shape + (4,), dtype=np.int64)
            for c, (di, dj) in enumerate(((0, 0), (1, 0), (0, 1), (1, 1))):
                i = i0 + di
                j = j0 + dj
                ok = np.isfinite(i) & (i >= 0) & (i < len(ra)) & (j >= 0) & (j < len(va))
                flat = np.where(ok, i * len(va) + j, 0).astype(np.int64)
                out[..., c] = np.where(ok, pos[flat], -1)
            return out
    raise ValueError(f"unknown lookup {lookup!r}")


def compute_step_table(E: float, grid: GridSpec, p: ModelParams,
                       angles: AngleGrid = AngleGrid(),
                       opts: IntegratorOptions = DEFAULT_OPTIONS,
                       threads: int = 1, modes=(K.MODE_RUN, K.MODE_WALK)) -> StepTable:
    """Simulate every valid node against every sampled angle."""
    ra, va = grid.axes(E, p)
    R, V = np.meshgrid(ra, va, indexing="ij")
    valid = (ellipsoid_slack(R, V, E, p) >= 0) & (R > 0) & (R <= p.r0)
    nodes = np.flatnonzero(valid.ravel())
    rs = np.ascontiguousarray(R.ravel()[nodes])
    vs = np.ascontiguousarray(V.ravel()[nodes])
    alphas = angles.values()
    out = {}
    for mode in modes:
        n, na = len(rs), len(alphas)
        mt = ModeTable(np.empty((n, na), np.int8), np.empty((n, na), np.int8),
                       np.empty((n, na)), np.empty((n, na)))
        chunks = np.array_split(np.arange(n), max(1, threads))

        def run(ix, mt=mt, mode=mode):
            if len(ix) == 0:
                return
            sl = slice(ix[0], ix[-1] + 1)
            K.step_table(rs[sl], vs[sl], float(E), alphas, mode, p.m, p.k, p.r0, p.g,
                         opts.rtol, opts.atol, opts.h_max, opts.t_max(p),
                         mt.status[sl], mt.gait[sl], mt.r_next[sl], mt.vy_next[sl])

        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                list(pool.map(run, chunks))
        else:
            run(np.arange(n))
        out[mode] = mt
    return StepTable(float(E), p, grid, angles, ra, va, valid, nodes, out)


def window_count(delta: float, resolution: float) -> int:
    """Number of consecutive samples whose span covers ``delta``."""
    return int(math.ceil(delta / resolution - _EPS)) + 1


def longest_runs(good: np.ndarray) -> np.ndarray:
    """Length of the longest run of True in each row."""
    n, m = good.shape
    pad = np.zeros((n, m + 2), np.int8)
    pad[:, 1:-1] = good
    d = np.diff(pad, axis=1)
    starts = np.argwhere(d == 1)
    ends = np.argwhere(d == -1)
    out = np.zeros(n, dtype=np.int64)
    if len(starts):
        np.maximum.at(out, starts[:, 0], ends[:, 1] - starts[:, 1])
    return out


def landing_in(table: StepTable, gait: GaitKind, member: np.ndarray, lookup: str) -> np.ndarray:
    """(n_valid, n_angles) mask of steps of ``gait`` landing in ``member`` (per valid node)."""
    land = table.landing(gait, lookup)
    if lookup == "nearest":
        hit = np.where(land >= 0, member[np.maximum(land, 0)], False)
    else:
        hit = np.all(np.where(land >= 0, member[np.maximum(land, 0)], False), axis=-1)
    return table.success(gait) & hit


@dataclass
class RegionGrid:
    """Membership over the (r, vy) grid at one energy."""

    E: float
    gait: GaitKind
    delta_alpha: float
    kind: str
    r_axis: np.ndarray
    vy_axis: np.ndarray
    valid: np.ndarray
    member: np.ndarray
    interval: np.ndarray
    params: ModelParams = field(default_factory=ModelParams)
    lookup: str = "nearest"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.member = self.member & self.valid

    def count(self) -> int:
        return int(self.member.sum())

    def contains_many(self, r, vy) -> np.ndarray:
        r = np.asarray(r, float)
        vy = np.asarray(vy, float)
        ra, va = self.r_axis, self.vy_axis
        fi = (r - ra[0]) / (ra[1] - ra[0])
        fj = (vy - va[0]) / (va[1] - va[0])
        with np.errstate(invalid="ignore"):
            if self.lookup == "nearest":
                corners = [(np.rint(fi), np.rint(fj))]
            else:
                i0, j0 = np.floor(fi), np.floor(fj)
                corners = [(i0 + a, j0 + b) for a, b in ((0, 0), (1, 0), (0, 1), (1, 1))]
            hit = np.ones(np.broadcast(r, vy).shape, bool)
            for i, j in corners:
                ok = np.isfinite(i) & (i >= 0) & (i < len(ra)) & (j >= 0) & (j < len(va))
                ii = np.where(ok, i, 0).astype(np.int64)
                jj = np.where(ok, j, 0).astype(np.int64)
                hit &= ok & self.member[ii, jj]
        return hit

    def contains(self, s: SectionState) -> bool:
        return bool(self.contains_many(s.r, s.vy))

    def member_states(self) -> list[SectionState]:
        ii, jj = np.nonzero(self.member)
        return [SectionState(float(self.r_axis[i]), float(self.vy_axis[j]), self.E)
                for i, j in zip(ii, jj)]

    def with_member(self, member: np.ndarray, kind: str, interval=None, **meta) -> "RegionGrid":
        return RegionGrid(self.E, self.gait, self.delta_alpha, kind, self.r_axis, self.vy_axis,
                          self.valid, member, self.interval if interval is None else interval,
                          self.params, self.lookup, {**self.meta, **meta})

    def envelope(self) -> dict:
        return {
            "E": self.E,
            "gait": self.gait.value,
            "kind": self.kind,
            "delta_alpha_deg": math.degrees(self.delta_alpha),
            "grid": {"n_r": len(self.r_axis), "n_vy": len(self.vy_axis),
                     "r_min": float(self.r_axis[0]), "r_max": float(self.r_axis[-1]),
                     "vy_min": float(self.vy_axis[0]), "vy_max": float(self.vy_axis[-1])},
            "params": asdict(self.params),
            "params_hash": self.params.digest(),
            "lookup": self.lookup,
            "area": region_area(self),
            "meta": self.meta,
        }

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "vy", "member", "interval_len_rad"])
            for i, r in enumerate(self.r_axis):
                for j, v in enumerate(self.vy_axis):
                    iv = self.interval[i, j]
                    w.writerow([repr(float(r)), repr(float(v)), int(self.member[i, j]),
                                "" if not np.isfinite(iv) else repr(float(iv))])

    def save(self, stem: str | Path) -> tuple[Path, Path]:
        stem = Path(stem)
        csv_path = stem.with_suffix(".csv")
        json_path = stem.with_suffix(".json")
        self.to_csv(csv_path)
        json_path.write_text(json.dumps(self.envelope(), indent=2, sort_keys=True))
        return csv_path, json_path


def load_region(stem: str | Path) -> RegionGrid:
    """Inverse of :meth:`RegionGrid.save`."""
    stem = Path(stem)
    env = json.loads(stem.with_suffix(".json").read_text())
    with open(stem.with_suffix(".csv"), newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    n_r, n_vy = env["grid"]["n_r"], env["grid"]["n_vy"]
    r = np.array([float(x[0]) for x in rows]).reshape(n_r, n_vy)
    v = np.array([float(x[1]) for x in rows]).reshape(n_r, n_vy)
    member = np.array([x[2] == "1" for x in rows]).reshape(n_r, n_vy)
    interval = np.array([float(x[3]) if x[3] else np.nan for x in rows]).reshape(n_r, n_vy)
    p = ModelParams(**env["params"])
    valid = ellipsoid_slack(r, v, env["E"], p) >= 0
    return RegionGrid(env["E"], GaitKind(env["gait"]), math.radians(env["delta_alpha_deg"]),
                      env["kind"], r[:, 0].copy(), v[0].copy(), valid, member, interval, p,
                      env["lookup"], env.get("meta", {}))


def _grid(table: StepTable, gait: GaitKind, delta: float, kind: str, member_v: np.ndarray,
          runs: np.ndarray, lookup: str) -> RegionGrid:
    res = table.angles.resolution
    interval = np.where(runs > 0, (runs - 1) * res, 0.0)
    return RegionGrid(table.E, gait, delta, kind, table.r_axis, table.vy_axis, table.valid,
                      table.full(member_v, False), table.full(interval.astype(float), np.nan),
                      table.params, lookup)


def windows_into(table: StepTable, gait: GaitKind, target: np.ndarray, delta: float,
                 lookup: str = "nearest") -> tuple[np.ndarray, np.ndarray]:
    """Per valid node: has a ``delta``-wide window landing in ``target``, and the longest run."""
    runs = longest_runs(landing_in(table, gait, target, lookup))
    return runs >= window_count(delta, table.angles.resolution), runs


def one_step_set(table: StepTable, gait: GaitKind) -> np.ndarray:
    """Valid nodes from which at least one sampled angle realizes ``gait``."""
    return table.success(gait).any(axis=1)


def as_table(source, grid: GridSpec | None = None, p: ModelParams | None = None,
             angles: AngleGrid = AngleGrid(), opts: IntegratorOptions = DEFAULT_OPTIONS,
             threads: int = 1) -> StepTable:
    """Pass a step table through, or compute one for energy ``source``."""
    if isinstance(source, StepTable):
        return source
    return compute_step_table(float(source), grid or GridSpec(), p or ModelParams(), angles,
                              opts, threads)


def viability_region(source, gait: GaitKind, delta_alpha: float, grid: GridSpec | None = None,
                     p: ModelParams | None = None, *, angles: AngleGrid = AngleGrid(),
                     lookup: str = "nearest", target: str = "same_gait") -> RegionGrid:
    """Nodes with a ``delta_alpha``-wide window of steps of ``gait`` into states of the same gait.

    ``target="any"`` relaxes the landing condition to any node inside the
    ellipsoid. ``source`` is a :class:`StepTable` or an energy, in which case
    a table is computed on ``grid`` and ``angles``.
    """
    table = as_table(source, grid, p, angles)
    if not delta_alpha > 0:
        raise ValueError("delta_alpha must be positive")
    if target == "same_gait":
        tgt = one_step_set(table, gait)
    elif target == "any":
        tgt = np.ones(table.n_valid, bool)
    else:
        raise ValueError(f"unknown viability target {target!r}")
    member, runs = windows_into(table, gait, tgt, delta_alpha, lookup)
    return _grid(table, gait, delta_alpha, "viability", member, runs, lookup)


def robust_region(source, gait: GaitKind, delta_alpha: float, grid: GridSpec | None = None,
                  p: ModelParams | None = None, *, angles: AngleGrid = AngleGrid(),
                  lookup: str = "nearest", max_iter: int = 200,
                  viability: RegionGrid | None = None) -> RegionGrid:
    """Greatest subset of the viability region that maps into itself through a window.

    Starts from the viability region and removes nodes without a window
    into the current set until a sweep removes nothing.
    """
    table = as_table(source, grid, p, angles)
    V = viability or viability_region(table, gait, delta_alpha, lookup=lookup)
    member = V.member.ravel()[table.nodes].copy()
    runs = np.zeros(table.n_valid, np.int64)
    for it in range(max_iter):
        ok, runs = windows_into(table, gait, member, delta_alpha, lookup)
        new = member & ok
        if np.array_equal(new, member):
            g = _grid(table, gait, delta_alpha, "robust", member, runs, lookup)
            g.meta["iterations"] = it + 1
            return g
        member = new
    raise ConvergenceError(f"robust region for {gait.value} at E={table.E} did not settle "
                           f"in {max_iter} sweeps ({int(member.sum())} nodes left)")


def prune_once(table: StepTable, region: RegionGrid) -> RegionGrid:
    """One extra pruning sweep; a fixed point comes back unchanged."""
    member = region.member.ravel()[table.nodes]
    ok, runs = windows_into(table, region.gait, member, region.delta_alpha, region.lookup)
    return _grid(table, region.gait, region.delta_alpha, region.kind, member & ok, runs,
                 region.lookup)


def region_area(g: RegionGrid) -> float:
    n = int(g.valid.sum())
    return float((g.member & g.valid).sum()) / n if n else 0.0


def froude_of(r, vy, E, p: ModelParams):
    vx = np.sqrt(np.maximum(2.0 * ellipsoid_slack(r, vy, E, p) / p.m, 0.0))
    return (vx / r) ** 2 * p.r0 / p.g


def froude_range(states, p: ModelParams) -> tuple[float, float]:
    """Smallest and largest Froude number over section states or a region's members."""
    if isinstance(states, RegionGrid):
        ii, jj = np.nonzero(states.member)
        fr = froude_of(states.r_axis[ii], states.vy_axis[jj], states.E, p)
    else:
        sts = [getattr(s, "state", s) for s in states]
        fr = np.array([float(froude_of(s.r, s.vy, s.E, p)) for s in sts])
    if len(fr) == 0:
        raise ValueError("froude_range of an empty set")
    return float(fr.min()), float(fr.max())


@dataclass(frozen=True)
class SymmetricState:
    state: SectionState
    alpha: float
    gait: GaitKind
    residual: float


def symmetric_locus(E: float, gait: GaitKind, grid: GridSpec, p: ModelParams,
                    angles: AngleGrid = AngleGrid(), opts: IntegratorOptions = DEFAULT_OPTIONS,
                    tol: float = 1e-6) -> list[SymmetricState]:
    """States ``(r, 0)`` on the grid's r axis that return to themselves under ``gait``.

    For each r the angles are scanned for sign changes of the landing
    vertical velocity, each bracket is refined by Brent's method, and roots
    whose full return residual exceeds ``tol`` are dropped.
    """
    r_axis, _ = grid.axes(E, p)
    alphas = angles.values()
    out = []
    for r in r_axis:
        s = SectionState(float(r), 0.0, float(E))
        if not s.is_valid(p):
            continue
        out.extend(fixed_points(s, gait, alphas, p, opts, tol))
    return out


def fixed_points(s: SectionState, gait: GaitKind, alphas: np.ndarray, p: ModelParams,
                 opts: IntegratorOptions = DEFAULT_OPTIONS, tol: float = 1e-6
                 ) -> list[SymmetricState]:
    """Angles that bring a ``vy = 0`` state back to itself."""
    status, gcode, rn, vn = angle_outcomes(s, gait, alphas, p, opts)
    good = (status == K.ST_OK) & (gcode == gait.code)
    found = []
    for j in range(len(alphas) - 1):
        if not (good[j] and good[j + 1]) or vn[j] * vn[j + 1] > 0:
            continue
        a = landing_root(s, gait, float(alphas[j]), float(alphas[j + 1]), p, opts)
        if a is None:
            continue
        o = step(s, gait, a, p, opts, record=False)
        if not o.matches_request:
            continue
        res = max(abs(o.next.r - s.r), abs(o.next.vy - s.vy))
        if res <= tol:
            found.append(SymmetricState(s, a, gait, res))
    return found


def landing_root(s: SectionState, gait: GaitKind, a: float, b: float, p: ModelParams,
                 opts: IntegratorOptions = DEFAULT_OPTIONS, vy_target: float = 0.0) -> float | None:
    """Angle in ``[a, b]`` whose step lands with vertical velocity ``vy_target``."""

    def f(alpha):
        o = step(s, gait, alpha, p, opts, record=False)
        if not o.matches_request:
            return math.nan
        return o.next.vy - vy_target

    fa, fb = f(a), f(b)
    if not (np.isfinite(fa) and np.isfinite(fb)) or fa * fb > 0:
        return None
    if fa == 0:
        return a
    if fb == 0:
        return b
    try:
        return brentq(f, a, b, xtol=1e-13, rtol=4 * np.finfo(float).eps)
    except ValueError:
        return None


def locus_segments(locus: list[SymmetricState], r_axis: np.ndarray) -> list[tuple[float, float]]:
    """Group locus states into r-intervals of consecutive grid nodes."""
    if not locus:
        return []
    idx = sorted({int(np.argmin(np.abs(r_axis - s.state.r))) for s in locus})
    segs = []
    start = prev = idx[0]
    for i in idx[1:]:
        if i != prev + 1:
            segs.append((float(r_axis[start]), float(r_axis[prev])))
            start = i
        prev = i
    segs.append((float(r_axis[start]), float(r_axis[prev])))
    return segs


@dataclass
class TransitionRegions:
    """Transition sets at one energy and window width.

    ``robust_to_robust[(A, B)]``: nodes of the robust region of A with a
    window of A-steps into the robust region of B.
    ``bridge``: non-robust walking-viable nodes with a window of walking
    steps into robust running. ``robust_to_viable``: robust walking nodes
    with a window of walking steps into ``bridge``.
    """

    E: float
    delta_alpha: float
    viability: dict[GaitKind, RegionGrid]
    robust: dict[GaitKind, RegionGrid]
    robust_to_robust: dict[tuple[GaitKind, GaitKind], RegionGrid]
    bridge: RegionGrid
    robust_to_viable: RegionGrid
    to_robust: dict[GaitKind, RegionGrid]


def transition_regions(source, delta_alpha: float, grid: GridSpec | None = None,
                       p: ModelParams | None = None, *, angles: AngleGrid = AngleGrid(),
                       lookup: str = "nearest", gaits=GAITS) -> TransitionRegions:
    table = as_table(source, grid, p, angles)
    W, R = GaitKind.WALKING, GaitKind.RUNNING
    V = {g: viability_region(table, g, delta_alpha, lookup=lookup) for g in gaits}
    rho = {g: robust_region(table, g, delta_alpha, lookup=lookup, viability=V[g]) for g in gaits}
    vec = {g: rho[g].member.ravel()[table.nodes] for g in gaits}
    r2r = {}
    for a in gaits:
        for b in gaits:
            if a is b:
                continue
            ok, runs = windows_into(table, a, vec[b], delta_alpha, lookup)
            g = _grid(table, a, delta_alpha, "robust_to_robust", vec[a] & ok, runs, lookup)
            g.meta["target_gait"] = b.value
            r2r[(a, b)] = g
    vW = V[W].member.ravel()[table.nodes]
    ok, runs = windows_into(table, W, vec[R], delta_alpha, lookup)
    bridge_v = vW & ~vec[W] & ok
    bridge = _grid(table, W, delta_alpha, "bridge", bridge_v, runs, lookup)
    ok, runs = windows_into(table, W, bridge_v, delta_alpha, lookup)
    r2v = _grid(table, W, delta_alpha, "robust_to_viable", vec[W] & ok, runs, lookup)
    # outside a gait's robust region, reaching it with a window of any gait's steps
    to_rob = {}
    for b in gaits:
        reach = np.zeros(table.n_valid, bool)
        for a in gaits:
            reach |= windows_into(table, a, vec[b], delta_alpha, lookup)[0]
        g = _grid(table, b, delta_alpha, "to_robust", reach & ~vec[b],
                  np.zeros(table.n_valid, np.int64), lookup)
        to_rob[b] = g
    return TransitionRegions(table.E, delta_alpha, V, rho, r2r, bridge, r2v, to_rob)
