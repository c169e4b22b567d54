import json
import math

import numpy as np
import pytest

from slipgait.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, crossover, main, read_summary
from slipgait.config import ConfigError, RunConfig, load_config, parse_energy, parse_grid, parse_params
from slipgait.dynamics import ModelParams
from slipgait.signal_analysis import TimeSeries, write_series
from slipgait.store import ResultStore
from slipgait.regions import AngleGrid, GridSpec

FAST = ["--grid", "11x11", "--angle-step", "1.0"]


def test_parse_helpers():
    assert parse_grid("31x21") == GridSpec(31, 21)
    assert parse_grid("15") == GridSpec(15, 15)
    assert parse_energy("840") == (840.0, 840.0, 1.0)
    assert parse_energy("780:900:10") == (780.0, 900.0, 10.0)
    assert parse_params("k=21000, m=75") == ModelParams(m=75.0, k=21000.0)
    for bad in ("1x", "ax3", "3x3x3"):
        with pytest.raises(ConfigError):
            parse_grid(bad)
    with pytest.raises(ConfigError):
        parse_energy("1:2")
    with pytest.raises(ConfigError):
        parse_params("q=1")
    with pytest.raises(ConfigError):
        parse_params("m=-3")


def test_config_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[model]\nk = 21000\n[sweep]\ne_start = 800\ne_stop = 820\ne_step = 10\n"
                    "delta_alpha = 0.5, 1\n[grid]\nn_r = 21\nn_vy = 31\n[angles]\nstep = 0.5\n"
                    "[run]\nout = res\nlookup = conservative\n")
    cfg = load_config(path)
    assert cfg.params.k == 21000.0
    assert cfg.energies.tolist() == [800.0, 810.0, 820.0]
    assert cfg.delta_alphas_deg == (0.5, 1.0)
    assert cfg.grid == GridSpec(21, 31)
    assert cfg.angles == AngleGrid(50.0, 90.0, 0.5)
    assert cfg.lookup == "conservative"
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")
    with pytest.raises(ConfigError):
        RunConfig(e_start=900.0, e_stop=800.0)
    with pytest.raises(ConfigError):
        RunConfig(delta_alphas_deg=(0.0,))


@pytest.mark.parametrize("argv", [
    ["regions", "--energy", "700"],
    ["regions", "--grid", "1x"],
    ["regions", "--delta-alpha", "x"],
    ["regions", "--config", "nope.ini"],
    ["regions", "--params", "k=0"],
    ["transition", "--replay", "missing.json"],
    ["transition", "--strategy", "fastest", "--energy", "840"] + FAST,
])
def test_bad_input_exits_2(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)]) == EXIT_CONFIG


def test_regions_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["regions", "--energy", "800:820:20", "--delta-alpha", "1,2"] + FAST
    assert main(args + ["--out", str(a)]) == EXIT_OK
    assert main(args + ["--out", str(b), "--cache", str(tmp_path / "cb")]) == EXIT_OK
    assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()
    files = sorted(p.name for p in (a / "regions").iterdir())
    assert files == sorted(p.name for p in (b / "regions").iterdir())
    for name in files:
        assert (a / "regions" / name).read_bytes() == (b / "regions" / name).read_bytes()
    rows = read_summary(a / "summary.csv")
    assert len(rows) == 2 * 2 * 3
    for r in rows:
        assert 0.0 <= r["robust_area"] <= r["viability_area"] <= 1.0
    env = json.loads((a / "regions" / "E800_walking_da1_robust.json").read_text())
    assert env["kind"] == "robust" and env["params_hash"] == ModelParams().digest()


def test_cache_hits_are_bit_identical(tmp_path):
    cache = tmp_path / "cache"
    s1 = ResultStore(cache)
    t1 = s1.table(820.0, GridSpec(9, 9), ModelParams(), AngleGrid(60, 80, 1.0))
    s2 = ResultStore(cache)
    t2 = s2.table(820.0, GridSpec(9, 9), ModelParams(), AngleGrid(60, 80, 1.0))
    assert (s1.misses, s2.hits) == (1, 1)
    for mode in t1.modes:
        for field in ("status", "gait", "r_next", "vy_next"):
            x, y = getattr(t1.modes[mode], field), getattr(t2.modes[mode], field)
            assert np.array_equal(x, y, equal_nan=field in ("r_next", "vy_next"))
    assert ResultStore(None).table(820.0, GridSpec(9, 9), ModelParams(),
                                   AngleGrid(60, 80, 1.0)).n_valid == t1.n_valid


def test_sweep_summary(tmp_path):
    assert main(["regions", "--energy", "800:840:20", "--out", str(tmp_path)] + FAST) == EXIT_OK
    assert main(["sweep-summary", "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "sweep_summary.json").read_text())
    assert rep[0]["energies"] == [800.0, 820.0, 840.0]
    assert main(["sweep-summary", str(tmp_path / "none.csv"), "--out", str(tmp_path)]) \
        == EXIT_CONFIG


def test_crossover_counts_sign_changes():
    rows = []
    for E, w, r in ((780, 0.3, 0.1), (790, 0.2, 0.2), (800, 0.1, 0.3), (810, 0.05, 0.4)):
        rows.append({"E": E, "gait": "walking", "delta_alpha_deg": 1.0, "robust_area": w})
        rows.append({"E": E, "gait": "running", "delta_alpha_deg": 1.0, "robust_area": r})
    rep = crossover(rows, 1.0)
    assert rep["first_running_exceeds_walking"] == 800
    assert rep["sign_changes"] == 1
    assert rep["walking_nonincreasing"] and rep["running_nondecreasing"]


def test_analyze_hip_series(tmp_path):
    fs = 200.0
    t = np.arange(2400) / fs
    x = np.where(t < 6.0, 0.03 * np.cos(2 * math.pi * t),
                 0.05 * np.cos(2 * math.pi * 1.4 * (t - 6.0) + 2 * math.pi * 6.0 + math.pi / 2))
    write_series(TimeSeries(1.0 + x, fs, "m", "hip"), tmp_path / "hip.csv")
    assert main(["analyze", str(tmp_path / "hip.csv"), "--out", str(tmp_path)]) == EXIT_OK
    res = json.loads((tmp_path / "analysis.json").read_text())
    assert abs(res["transition_index"] - 1200) <= 3
    flat = TimeSeries(1.0 + 0.03 * np.cos(2 * math.pi * t), fs, "m", "hip")
    write_series(flat, tmp_path / "flat.csv")
    assert main(["analyze", str(tmp_path / "flat.csv"), "--out", str(tmp_path)]) == EXIT_OK
    assert json.loads((tmp_path / "analysis.json").read_text())["status"] == \
        "no transition detected"


def test_analyze_limb_series(tmp_path):
    cycle = np.concatenate([np.linspace(0.0, 1.0, 21)[:-1], np.linspace(1.0, 0.0, 71)[:-1]])
    write_series(TimeSeries(np.tile(cycle, 5), 200.0, "rad", "limb"), tmp_path / "limb.csv")
    assert main(["analyze", str(tmp_path / "limb.csv"), "--kind", "limb",
                 "--out", str(tmp_path)]) == EXIT_OK
    res = json.loads((tmp_path / "analysis.json").read_text())
    assert [d["index"] for d in res["touchdowns"]] == [20, 110, 200, 290, 380]


def test_short_series_exit_4(tmp_path):
    write_series(TimeSeries(np.ones(5), 100.0), tmp_path / "short.csv")
    assert main(["analyze", str(tmp_path / "short.csv"), "--out", str(tmp_path)]) == 4


def test_infeasible_transition_exits_3(tmp_path):
    argv = ["transition", "--energy", "900", "--grid", "21x21", "--from", "walking",
            "--to", "running", "--out", str(tmp_path)]
    assert main(argv) == EXIT_INFEASIBLE


@pytest.mark.slow
def test_transition_and_replay(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    base = ["--energy", "840", "--grid", "41x41", "--cache", str(tmp_path / "cache")]
    assert main(["transition", "--from", "R", "--to", "W", "--strategy", "hip",
                 "--out", str(a)] + base) == EXIT_OK
    plan = json.loads((a / "plan.json").read_text())
    assert 3 <= len(plan["steps"]) <= 8
    assert main(["transition", "--replay", str(a / "plan.json"), "--out", str(b)]) == EXIT_OK
    for name in ("trajectory.csv", "observables.csv", "grf.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    header = (a / "grf.csv").read_text().splitlines()[0]
    assert header == "time,grf_leg1_norm,grf_leg2_norm,flight"
