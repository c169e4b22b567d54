"""Run configuration: flat ``key = value`` files with sections, overridable from the CLI.

Example::

    [model]
    m = 80
    k = 20000

    [sweep]
    e_start = 780
    e_stop = 900
    e_step = 10
    delta_alpha = 0.5, 1, 2

    [grid]
    n_r = 101
    n_vy = 101

    [angles]
    lo = 50
    hi = 90
    step = 0.25
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dynamics import ModelParams
from .regions import AngleGrid, GridSpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams = field(default_factory=ModelParams)
    e_start: float = 780.0
    e_stop: float = 900.0
    e_step: float = 10.0
    delta_alphas_deg: tuple[float, ...] = (1.0,)
    grid: GridSpec = field(default_factory=lambda: GridSpec(101, 101))
    angles: AngleGrid = field(default_factory=AngleGrid)
    out: Path = Path("out")
    seed: int = 0
    threads: int = 1
    lookup: str = "nearest"

    def __post_init__(self):
        if not self.e_step > 0:
            raise ConfigError("energy sweep step must be positive")
        if self.e_stop < self.e_start:
            raise ConfigError("energy sweep stop lies below its start")
        if not self.delta_alphas_deg or any(not d > 0 for d in self.delta_alphas_deg):
            raise ConfigError("window widths must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.lookup not in ("nearest", "conservative"):
            raise ConfigError(f"unknown lookup {self.lookup!r}")

    @property
    def energies(self) -> np.ndarray:
        n = int(math.floor((self.e_stop - self.e_start) / self.e_step + 1e-9))
        return self.e_start + self.e_step * np.arange(n + 1)

    @property
    def delta_alphas(self) -> list[float]:
        return [math.radians(d) for d in self.delta_alphas_deg]

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        try:
            return replace(self, **kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())


def parse_params(text: str, base: ModelParams | None = None) -> ModelParams:
    """Model parameters from ``m=80,k=2e4`` or from the [model] section of a file."""
    base = base or ModelParams()
    path = Path(text)
    if path.exists():
        cp = configparser.ConfigParser()
        cp.read(path)
        items = dict(cp["model"]) if cp.has_section("model") else {}
    else:
        items = {}
        for part in text.split(","):
            if not part.strip():
                continue
            key, sep, val = part.partition("=")
            if not sep:
                raise ConfigError(f"cannot read parameter {part!r}")
            items[key.strip()] = val
    known = {"m", "k", "r0", "g"}
    extra = set(items) - known
    if extra:
        raise ConfigError(f"unknown model parameters: {sorted(extra)}")
    try:
        return replace(base, **{k: float(v) for k, v in items.items()})
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_grid(text: str) -> GridSpec:
    """``101x101`` or a single node count for both axes."""
    try:
        parts = [int(t) for t in text.lower().split("x")]
    except ValueError as exc:
        raise ConfigError(f"cannot read grid {text!r}") from exc
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2:
        raise ConfigError(f"cannot read grid {text!r}")
    try:
        return GridSpec(parts[0], parts[1])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_energy(text: str) -> tuple[float, float, float]:
    """``840`` or ``start:stop:step``."""
    try:
        vals = [float(t) for t in text.split(":")]
    except ValueError as exc:
        raise ConfigError(f"cannot read energy {text!r}") from exc
    if len(vals) == 1:
        return vals[0], vals[0], 1.0
    if len(vals) == 3:
        return vals[0], vals[1], vals[2]
    raise ConfigError(f"cannot read energy {text!r}")


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    cp = configparser.ConfigParser()
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    kw = {}
    try:
        if cp.has_section("model"):
            kw["params"] = parse_params(str(path))
        if cp.has_section("sweep"):
            s = cp["sweep"]
            for key in ("e_start", "e_stop", "e_step"):
                if key in s:
                    kw[key] = s.getfloat(key)
            if "delta_alpha" in s:
                kw["delta_alphas_deg"] = _floats(s["delta_alpha"])
        if cp.has_section("grid"):
            g = cp["grid"]
            kw["grid"] = GridSpec(g.getint("n_r", 101), g.getint("n_vy", 101))
        if cp.has_section("angles"):
            a = cp["angles"]
            kw["angles"] = AngleGrid(a.getfloat("lo", 50.0), a.getfloat("hi", 90.0),
                                     a.getfloat("step", 0.25))
        if cp.has_section("run"):
            r = cp["run"]
            if "out" in r:
                kw["out"] = Path(r["out"])
            if "seed" in r:
                kw["seed"] = r.getint("seed")
            if "threads" in r:
                kw["threads"] = r.getint("threads")
            if "lookup" in r:
                kw["lookup"] = r["lookup"].strip()
        return RunConfig(**kw)
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
