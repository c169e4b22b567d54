"""Content-addressed cache for step tables and region grids.

Keys hash everything that determines the result: model parameters, energy,
grid, angle sampling, integrator settings and, for regions, gait, kind,
window width and lookup rule. Arrays are stored in ``.npz`` files, so a hit
returns bit-identical data.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .dynamics import DEFAULT_OPTIONS, IntegratorOptions, ModelParams
from .regions import (
    AngleGrid,
    GridSpec,
    ModeTable,
    RegionGrid,
    StepTable,
    compute_step_table,
)
from .section import GaitKind

FORMAT_VERSION = 1


def _digest(payload: dict) -> str:
    text = json.dumps(payload, sort_keys=True, default=repr)
    return hashlib.sha256(text.encode()).hexdigest()


def table_key(E: float, grid: GridSpec, p: ModelParams, angles: AngleGrid,
              opts: IntegratorOptions) -> str:
    return _digest({"what": "table", "v": FORMAT_VERSION, "E": repr(float(E)),
                    "params": p.digest(), "grid": grid.key(), "angles": angles.key(),
                    "opts": asdict(opts)})


def region_key(table_id: str, gait: GaitKind, kind: str, delta_alpha: float,
               lookup: str) -> str:
    return _digest({"what": "region", "v": FORMAT_VERSION, "table": table_id,
                    "gait": gait.value, "kind": kind, "delta": repr(float(delta_alpha)),
                    "lookup": lookup})


class ResultStore:
    """Directory-backed cache; ``root=None`` disables caching."""

    def __init__(self, root: str | Path | None):
        self.root = Path(root) if root is not None else None
        self.hits = 0
        self.misses = 0

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.npz"

    def _write(self, key: str, arrays: dict) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".npz")
        os.close(fd)
        np.savez(tmp, **arrays)
        os.replace(tmp, path)

    def _read(self, key: str):
        if self.root is None:
            return None
        path = self._path(key)
        if not path.exists():
            return None
        with np.load(path, allow_pickle=False) as z:
            return {k: z[k] for k in z.files}

    def table(self, E: float, grid: GridSpec, p: ModelParams, angles: AngleGrid = AngleGrid(),
              opts: IntegratorOptions = DEFAULT_OPTIONS, threads: int = 1) -> StepTable:
        key = table_key(E, grid, p, angles, opts)
        data = self._read(key)
        if data is not None:
            self.hits += 1
            return _table_from(data, E, grid, p, angles, key)
        self.misses += 1
        t = compute_step_table(E, grid, p, angles, opts, threads)
        t._cache["store_key"] = key
        if self.root is not None:
            self._write(key, _table_arrays(t))
        return t

    def region(self, table: StepTable, gait: GaitKind, kind: str, delta_alpha: float,
               lookup: str, compute) -> RegionGrid:
        """Cached region of ``kind``; ``compute()`` builds it on a miss."""
        tid = table._cache.get("store_key") or table_key(table.E, table.grid, table.params,
                                                         table.angles, DEFAULT_OPTIONS)
        key = region_key(tid, gait, kind, delta_alpha, lookup)
        data = self._read(key)
        if data is not None:
            self.hits += 1
            meta = json.loads(str(data["meta"]))
            return RegionGrid(table.E, gait, delta_alpha, kind, data["r_axis"], data["vy_axis"],
                              data["valid"], data["member"], data["interval"], table.params,
                              lookup, meta)
        self.misses += 1
        g = compute()
        if self.root is not None:
            self._write(key, {"r_axis": g.r_axis, "vy_axis": g.vy_axis, "valid": g.valid,
                              "member": g.member, "interval": g.interval,
                              "meta": np.array(json.dumps(g.meta, sort_keys=True))})
        return g


def _table_arrays(t: StepTable) -> dict:
    out = {"r_axis": t.r_axis, "vy_axis": t.vy_axis, "valid": t.valid, "nodes": t.nodes}
    for mode, mt in t.modes.items():
        out[f"m{mode}_status"] = mt.status
        out[f"m{mode}_gait"] = mt.gait
        out[f"m{mode}_r"] = mt.r_next
        out[f"m{mode}_vy"] = mt.vy_next
    return out


def _table_from(d: dict, E, grid, p, angles, key: str) -> StepTable:
    modes = {}
    for name in d:
        if name.endswith("_status"):
            mode = int(name[1:-len("_status")])
            modes[mode] = ModeTable(d[f"m{mode}_status"], d[f"m{mode}_gait"], d[f"m{mode}_r"],
                                    d[f"m{mode}_vy"])
    t = StepTable(float(E), p, grid, angles, d["r_axis"], d["vy_axis"], d["valid"], d["nodes"],
                  modes)
    t._cache["store_key"] = key
    return t


def energy_label(E: float) -> str:
    return f"{E:g}".replace(".", "p") if math.isfinite(E) else "nan"
