"""Phase analysis of hip-height series and touchdown detection in limb-angle series.

The transition point of a hip series is where the instantaneous frequency
(the time derivative of the unwrapped analytic-signal phase) peaks. The
phase change across the transition is the difference of the intercepts of
straight-line fits to the phase on either side, with the transition as the
time origin.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import median_filter, uniform_filter1d
from scipy.signal import detrend

NO_TRANSITION = "no transition detected"


class SignalDomainError(ValueError):
    """A series is too short, non-uniform or lacks enough cycles."""


class NoTransitionDetected(RuntimeError):
    def __init__(self, message: str = NO_TRANSITION):
        super().__init__(message)


@dataclass(frozen=True)
class TimeSeries:
    values: np.ndarray
    sample_rate: float
    unit: str = ""
    name: str = ""

    def __post_init__(self):
        v = np.asarray(self.values)
        if np.iscomplexobj(v):
            raise SignalDomainError("series values must be real")
        v = v.astype(float)
        if v.ndim != 1:
            raise SignalDomainError("series must be one-dimensional")
        if not np.all(np.isfinite(v)):
            raise SignalDomainError("series contains non-finite values")
        if not (math.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise SignalDomainError("sample rate must be positive")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def time(self) -> np.ndarray:
        return np.arange(len(self.values)) / self.sample_rate


@dataclass
class PhaseAnalysis:
    phase: np.ndarray
    frequency: np.ndarray
    transition_index: int | None
    delta_phi: float | None
    status: str = "ok"
    meta: dict = field(default_factory=dict)

    def to_dict(self, include_series: bool = False) -> dict:
        d = {
            "status": self.status,
            "transition_index": self.transition_index,
            "delta_phi_rad": self.delta_phi,
            "delta_phi_deg": None if self.delta_phi is None else math.degrees(self.delta_phi),
            "meta": self.meta,
        }
        if include_series:
            d["phase"] = self.phase.tolist()
            d["frequency"] = self.frequency.tolist()
        return d

    def save(self, path: str | Path, include_series: bool = False) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(include_series), indent=2, sort_keys=True))
        return path


def _values(s) -> tuple[np.ndarray, float]:
    if isinstance(s, TimeSeries):
        return s.values, s.sample_rate
    return TimeSeries(np.asarray(s), 1.0).values, 1.0


def analytic_signal(s, detrended: bool = True) -> np.ndarray:
    """Analytic signal through the FFT, zero-padded to a power of two.

    Negative frequencies are zeroed and positive ones doubled. The mean and
    linear trend are removed first unless ``detrended`` is False.
    """
    x, _ = _values(s)
    n = len(x)
    if n < 8:
        raise SignalDomainError("analytic signal needs at least 8 samples")
    if detrended:
        x = detrend(x, type="linear")
    m = 1 << (n - 1).bit_length()
    X = np.fft.fft(x, m)
    h = np.zeros(m)
    h[0] = 1.0
    h[1:m // 2] = 2.0
    h[m // 2] = 1.0
    return np.fft.ifft(X * h)[:n]


def wrap_angle(a: float) -> float:
    """Map an angle into (-pi, pi]."""
    w = math.remainder(a, 2 * math.pi)
    return math.pi if w == -math.pi else w


def instantaneous_phase(s) -> np.ndarray:
    return np.unwrap(np.angle(analytic_signal(s)))


def instantaneous_frequency(s) -> np.ndarray:
    """Time derivative of the unwrapped phase, rad/s."""
    _, fs = _values(s)
    return np.gradient(instantaneous_phase(s)) * fs


def _inner(n: int, edge: float) -> slice:
    k = int(math.floor(edge * n))
    return slice(k, n - k)


def transition_point(s, smooth: float = 0.05, edge: float = 0.1,
                     flat_tol: float = 0.02, baseline: float = 0.2) -> int:
    """Index of the peak of the instantaneous frequency.

    A running median spanning ``baseline`` of the series is subtracted
    first, so a plain change of frequency between the two gaits still shows
    up as a peak at the switch. The residual is smoothed with a moving
    average spanning ``smooth`` of the series, its maximum is searched away
    from the outer ``edge`` fraction, and then refined to the largest
    unsmoothed residual within one smoothing width.

    Raises :class:`NoTransitionDetected` when the smoothed peak stands less
    than ``flat_tol`` times the median frequency above the median residual.
    """
    x, fs = _values(s)
    n = len(x)
    freq = instantaneous_frequency(s)
    w = max(1, int(round(smooth * n)))
    wb = max(3, int(round(baseline * n)) | 1)
    res = freq - median_filter(freq, size=wb, mode="nearest")
    sm = uniform_filter1d(res, w, mode="nearest")
    inner = _inner(n, edge)
    seg = sm[inner]
    if len(seg) == 0:
        raise SignalDomainError("series too short for the edge margins")
    scale = abs(float(np.median(freq[inner])))
    if float(seg.max()) - float(np.median(seg)) <= flat_tol * max(scale, 1e-300):
        raise NoTransitionDetected()
    coarse = inner.start + int(np.argmax(seg))
    lo = max(inner.start, coarse - w)
    hi = min(inner.stop, coarse + w + 1)
    return lo + int(np.argmax(res[lo:hi]))


def phase_change(s, index: int, edge: float = 0.1, gap: float = 0.025) -> float:
    """Jump in initial phase across ``index``, wrapped into (-pi, pi].

    Lines are fitted to the unwrapped phase on each side with ``index`` as
    the time origin. The outer ``edge`` fraction of the series and ``gap``
    of it around the index are left out of the fits.
    """
    x, fs = _values(s)
    n = len(x)
    if not 0 < index < n - 1:
        raise SignalDomainError(f"index {index} outside the series")
    phase = instantaneous_phase(s)
    t = (np.arange(n) - index) / fs
    e = int(math.floor(edge * n))
    g = int(math.ceil(gap * n))
    before = slice(e, max(e, index - g))
    after = slice(min(index + g + 1, n - e), n - e)
    icpt = []
    for sl in (before, after):
        ph = phase[sl]
        if len(ph) < 4 or abs(ph[-1] - ph[0]) < 2 * (2 * math.pi):
            raise SignalDomainError("fewer than two cycles on one side of the transition")
        slope, b = np.polyfit(t[sl], ph, 1)
        icpt.append(b)
    return wrap_angle(icpt[1] - icpt[0])


def analyze(s, smooth: float = 0.05, edge: float = 0.1, flat_tol: float = 0.02,
            baseline: float = 0.2) -> PhaseAnalysis:
    """Transition point and phase change of a hip series, as one record."""
    x, fs = _values(s)
    phase = instantaneous_phase(s)
    freq = np.gradient(phase) * fs
    meta = {"n": len(x), "sample_rate": fs, "smooth": smooth, "edge": edge}
    try:
        idx = transition_point(s, smooth, edge, flat_tol, baseline)
    except NoTransitionDetected:
        return PhaseAnalysis(phase, freq, None, None, NO_TRANSITION, meta)
    meta["transition_time"] = idx / fs
    try:
        dphi = phase_change(s, idx, edge)
    except SignalDomainError as exc:
        return PhaseAnalysis(phase, freq, idx, None, f"phase change unavailable: {exc}", meta)
    return PhaseAnalysis(phase, freq, idx, dphi, "ok", meta)


def estimate_touchdown_angles(s, window: float = 0.05, ratio: float = 0.5
                              ) -> list[tuple[int, float]]:
    """Indices where the limb's angular speed drops sharply, with the angle there.

    The mean absolute first difference over ``window`` seconds after each
    sample is compared with that over the window before it; a drop below
    ``ratio`` marks an impact, and each run of such samples reports its
    sharpest drop.
    """
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    x, fs = _values(s)
    n = len(x)
    if n < 3:
        raise SignalDomainError("need at least three samples")
    v = np.abs(np.diff(x))
    m = max(1, int(round(window * fs)))
    if len(v) < 2 * m:
        return []
    c = np.concatenate(([0.0], np.cumsum(v)))
    idx = np.arange(m, len(v) - m + 1)
    before = (c[idx] - c[idx - m]) / m
    after = (c[idx + m] - c[idx]) / m
    scale = max(float(v.max()), 1e-300)
    with np.errstate(invalid="ignore", divide="ignore"):
        score = np.where(before > 1e-12 * scale, after / before, np.inf)
    hit = score < ratio
    out = []
    i = 0
    while i < len(idx):
        if not hit[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(idx) and hit[j + 1]:
            j += 1
        k = i + int(np.argmin(score[i:j + 1]))
        out.append((int(idx[k]), float(x[idx[k]])))
        i = j + 1
    return out


def read_series(path: str | Path) -> TimeSeries:
    """Two-column CSV (time, value); ``# key: value`` lines may give unit and sample_rate.

    Without a declared rate it is taken from the time column, which must be
    uniformly spaced.
    """
    meta = {}
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                meta[key.strip().lower()] = val.strip()
            elif line.strip():
                rows.append(line)
    body = list(csv.reader(rows))
    header = [h.strip() for h in body[0]]
    try:
        float(header[0])
        data_rows = body
        header = ["time", "value"]
    except ValueError:
        data_rows = body[1:]
    data = np.array([[float(a) for a in r[:2]] for r in data_rows])
    if len(data) < 2:
        raise SignalDomainError("series file holds fewer than two samples")
    t, vals = data[:, 0], data[:, 1]
    dt = np.diff(t)
    if "sample_rate" in meta:
        fs = float(meta["sample_rate"])
    else:
        if np.any(dt <= 0) or np.ptp(dt) > 1e-6 * np.mean(dt):
            raise SignalDomainError("time column is not uniformly sampled")
        fs = 1.0 / float(np.mean(dt))
    return TimeSeries(vals, fs, meta.get("unit", ""), header[1] if len(header) > 1 else "")


def write_series(s: TimeSeries, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(f"# unit: {s.unit}\n# sample_rate: {s.sample_rate!r}\n")
        w = csv.writer(fh)
        w.writerow(["time", s.name or "value"])
        for t, v in zip(s.time, s.values):
            w.writerow([repr(float(t)), repr(float(v))])
    return path


def hip_series(traj, resample: float | None = None) -> TimeSeries:
    """Hip (CoM) height of a trajectory as a uniformly sampled series."""
    t, y = traj.t, traj.y
    keep = np.concatenate(([True], np.diff(t) > 1e-12))
    t, y = t[keep], y[keep]
    dt = resample or float(np.median(np.diff(t)))
    grid = np.arange(t[0], t[-1] + 0.5 * dt, dt)
    grid = grid[grid <= t[-1] + 1e-12]
    return TimeSeries(np.interp(grid, t, y), 1.0 / dt, "m", "hip_height")
