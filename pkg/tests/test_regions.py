import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slipgait.dynamics import ModelParams
from slipgait.regions import (
    AngleGrid,
    GridSpec,
    compute_step_table,
    fixed_points,
    load_region,
    locus_segments,
    longest_runs,
    prune_once,
    region_area,
    robust_region,
    section_bounds,
    symmetric_locus,
    transition_regions,
    viability_region,
    window_count,
)
from slipgait.section import GaitKind, SectionState, step

P = ModelParams()
E = 840.0
GRID = GridSpec(11, 11)
ANGLES = AngleGrid(60.0, 88.0, 0.5)
W, R = GaitKind.WALKING, GaitKind.RUNNING


@pytest.fixture(scope="module")
def table():
    return compute_step_table(E, GRID, P, ANGLES)


def brute_force(gait, delta):
    """Viability and robust membership from individual steps and plain loops."""
    ra, va = GRID.axes(E, P)
    alphas = ANGLES.values()
    L = math.ceil(delta / ANGLES.resolution - 1e-9) + 1
    nodes = [(i, j) for i in range(len(ra)) for j in range(len(va))
             if SectionState(ra[i], va[j], E).is_valid(P)]
    land = {}
    for i, j in nodes:
        row = []
        for a in alphas:
            o = step(SectionState(ra[i], va[j], E), gait, a, P, record=False)
            if not o.matches_request:
                row.append(None)
                continue
            ii = int(round((o.next.r - ra[0]) / (ra[1] - ra[0])))
            jj = int(round((o.next.vy - va[0]) / (va[1] - va[0])))
            row.append((ii, jj) if (ii, jj) in set(nodes) else None)
        land[(i, j)] = row

    def has_window(node, target):
        run = 0
        for lj in land[node]:
            run = run + 1 if lj is not None and lj in target else 0
            if run >= L:
                return True
        return False

    one_step = {n for n in nodes if any(x is not None for x in land[n])}
    V = {n for n in nodes if has_window(n, one_step)}
    rho = set(V)
    while True:
        nxt = {n for n in rho if has_window(n, rho)}
        if nxt == rho:
            break
        rho = nxt
    return V, rho


def members(g):
    return {(int(i), int(j)) for i, j in zip(*np.nonzero(g.member))}


@pytest.mark.parametrize("gait", [W, R])
def test_regions_match_brute_force(table, gait):
    delta = math.radians(1.0)
    V, rho = brute_force(gait, delta)
    assert members(viability_region(table, gait, delta)) == V
    assert members(robust_region(table, gait, delta)) == rho


@pytest.mark.parametrize("gait", [W, R])
def test_robust_inside_viability_and_monotone(table, gait):
    prev = None
    for d in (0.5, 1.0, 2.0):
        delta = math.radians(d)
        V = viability_region(table, gait, delta)
        rho = robust_region(table, gait, delta)
        assert not (rho.member & ~V.member).any()
        assert 0.0 <= region_area(rho) <= region_area(V) <= 1.0
        if prev is not None:
            # wider windows are harder to find
            assert not (V.member & ~prev.member).any()
        prev = V


@pytest.mark.parametrize("gait", [W, R])
def test_robust_region_is_a_fixed_point(table, gait):
    rho = robust_region(table, gait, math.radians(1.0))
    again = prune_once(table, rho)
    assert np.array_equal(again.member, rho.member)


def test_conservative_lookup_is_stricter(table):
    for gait in (W, R):
        near = robust_region(table, gait, math.radians(1.0))
        cons = robust_region(table, gait, math.radians(1.0), lookup="conservative")
        assert not (cons.member & ~near.member).any()


def test_save_and_load_roundtrip(table, tmp_path):
    g = robust_region(table, W, math.radians(1.0))
    g.save(tmp_path / "rho")
    back = load_region(tmp_path / "rho")
    assert np.array_equal(back.member, g.member)
    assert np.array_equal(back.valid, g.valid)
    assert np.allclose(back.r_axis, g.r_axis, rtol=0, atol=0)
    assert np.array_equal(np.isnan(back.interval), np.isnan(g.interval))
    assert back.gait is g.gait and back.kind == g.kind
    assert back.delta_alpha == pytest.approx(g.delta_alpha)
    assert region_area(back) == region_area(g)


def test_contains_agrees_with_membership(table):
    g = robust_region(table, R, math.radians(1.0))
    for s in g.member_states():
        assert g.contains(s)
    assert not g.contains(SectionState(-1.0, 0.0, E))


@given(st.lists(st.lists(st.booleans(), min_size=1, max_size=30), min_size=1, max_size=8)
       .filter(lambda rows: len({len(r) for r in rows}) == 1))
def test_longest_runs(rows):
    good = np.array(rows, bool)
    expect = []
    for row in rows:
        best = run = 0
        for b in row:
            run = run + 1 if b else 0
            best = max(best, run)
        expect.append(best)
    assert longest_runs(good).tolist() == expect


@given(st.floats(0.01, 5.0), st.floats(0.05, 1.0))
def test_window_count_covers_delta(delta, res):
    n = window_count(delta, res)
    assert (n - 1) * res >= delta - 1e-9 * res
    assert (n - 2) * res < delta


def test_section_bounds_reject_low_energy():
    with pytest.raises(ValueError):
        section_bounds(100.0, P)


def test_symmetric_locus_returns_to_itself():
    loc = symmetric_locus(E, R, GridSpec(11, 11), P, ANGLES)
    assert loc
    for s in loc:
        o = step(s.state, R, s.alpha, P, record=False)
        assert o.matches_request
        assert abs(o.next.r - s.state.r) <= 1e-6 and abs(o.next.vy) <= 1e-6
    segs = locus_segments(loc, GridSpec(11, 11).axes(E, P)[0])
    assert all(a <= b for a, b in segs)


def test_fixed_points_need_a_sign_change():
    s = SectionState(0.9, 0.0, E)
    assert fixed_points(s, R, np.radians([60.0, 60.5]), P) == []


def test_transition_set_algebra(table):
    tr = transition_regions(table, math.radians(1.0), gaits=(R, W))
    rho = tr.robust
    for (a, b), g in tr.robust_to_robust.items():
        assert not (g.member & ~rho[a].member).any()
    assert not (tr.bridge.member & rho[W].member).any()
    assert not (tr.bridge.member & ~tr.viability[W].member).any()
    assert not (tr.robust_to_viable.member & ~rho[W].member).any()
    for g in (R, W):
        assert not (tr.to_robust[g].member & rho[g].member).any()
