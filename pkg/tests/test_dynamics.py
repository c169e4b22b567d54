import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from slipgait import _kernels as K
from slipgait.dynamics import (
    ContractError,
    DoubleStanceState,
    EventKind,
    FailureKind,
    FlightState,
    ModelParams,
    Phase,
    SingularityError,
    StanceState,
    TransitionFailure,
    back_leg_length,
    derivatives,
    energy,
    evaluate_event,
    integrate_until_event,
    switch_phase,
)

P = ModelParams()


def world_accel(s, d):
    """Cartesian acceleration implied by chart derivatives (rdd, thdd)."""
    r, th, rd, thd = s.r, s.theta, s.rdot, s.thetadot
    rdd, thdd = d[2], d[3]
    c, sn = math.cos(th), math.sin(th)
    ax = -rdd * c + 2 * rd * thd * sn + r * thdd * sn + r * thd**2 * c
    ay = rdd * sn + 2 * rd * thd * c + r * thdd * c - r * thd**2 * sn
    return ax, ay


def newton_accel(s, p):
    """Sum of spring forces and gravity in Cartesian coordinates, divided by mass."""
    x, y = s.position()
    feet = [s.foot_x]
    if isinstance(s, DoubleStanceState):
        feet.append(s.back_foot_x)
    ax, ay = 0.0, -p.g
    for f in feet:
        dx, dy = x - f, y
        L = math.hypot(dx, dy)
        mag = p.k * (p.r0 - L) / p.m
        ax += mag * dx / L
        ay += mag * dy / L
    return ax, ay


stance_states = st.builds(
    StanceState,
    r=st.floats(0.8, 1.0),
    theta=st.floats(0.6, 2.5),
    rdot=st.floats(-1.5, 1.5),
    thetadot=st.floats(-2.0, 3.0),
    foot_x=st.floats(-2.0, 2.0),
)

double_states = st.builds(
    DoubleStanceState,
    r=st.floats(0.8, 1.0),
    theta=st.floats(0.9, 1.55),
    rdot=st.floats(-1.0, 1.0),
    thetadot=st.floats(0.2, 2.5),
    x_sep=st.floats(0.2, 0.9),
    foot_x=st.floats(-1.0, 1.0),
)


@given(stance_states)
def test_single_stance_matches_newton(s):
    ax, ay = world_accel(s, derivatives(s, P))
    nx, ny = newton_accel(s, P)
    assert ax == pytest.approx(nx, rel=1e-9, abs=1e-9)
    assert ay == pytest.approx(ny, rel=1e-9, abs=1e-9)


@given(double_states)
def test_double_stance_matches_newton(s):
    ax, ay = world_accel(s, derivatives(s, P))
    nx, ny = newton_accel(s, P)
    assert ax == pytest.approx(nx, rel=1e-9, abs=1e-9)
    assert ay == pytest.approx(ny, rel=1e-9, abs=1e-9)


def test_back_leg_length_is_distance_to_back_foot():
    s = DoubleStanceState(0.95, 1.2, 0.0, 1.0, x_sep=0.6, foot_x=0.3)
    x, y = s.position()
    assert back_leg_length(s) == pytest.approx(math.hypot(x - s.back_foot_x, y), rel=1e-14)


def test_singular_states_raise():
    with pytest.raises(SingularityError):
        derivatives(StanceState(0.0, 1.0, 0.0, 0.0), P)
    # back foot directly under the mass at zero height cannot happen; force r_b -> 0
    with pytest.raises(SingularityError):
        derivatives(DoubleStanceState(0.5, 0.0, 0.0, 0.0, x_sep=0.5), P)


@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_params_reject_nonpositive(bad):
    with pytest.raises(ValueError):
        ModelParams(m=bad)


def test_params_digest_tracks_values():
    assert ModelParams().digest() == ModelParams().digest()
    assert ModelParams(k=21000.0).digest() != ModelParams().digest()


@given(st.floats(0.5, 3.0), st.floats(0.001, 0.3), st.floats(-1.0, 2.0),
       st.floats(math.radians(55), math.radians(85)))
def test_flight_is_ballistic(vx, lift, vy0, alpha):
    # start above the landing height so touchdown is reachable
    y0 = P.r0 * math.sin(alpha) + lift
    s0 = FlightState(0.0, y0, vx, vy0)
    ev, seg = integrate_until_event(s0, alpha, P, (EventKind.TOUCHDOWN,))
    assert ev.kind is EventKind.TOUCHDOWN
    t = seg.rows[:, K.ROW_T]
    x_exact = vx * t
    y_exact = y0 + vy0 * t - 0.5 * P.g * t**2
    scale = max(1.0, float(np.abs(x_exact).max()))
    assert np.abs(seg.rows[:, K.ROW_X] - x_exact).max() <= 1e-9 * scale
    assert np.abs(seg.rows[:, K.ROW_Y] - y_exact).max() <= 1e-9 * scale
    # touchdown height is the landing leg's vertical extent
    assert ev.state.y == pytest.approx(P.r0 * math.sin(alpha), abs=1e-9)


@given(stance_states.filter(lambda s: s.thetadot > 0.5 and 1.0 < s.theta < 1.6))
def test_stance_phase_conserves_energy(s):
    e0 = energy(s, P)
    ev, seg = integrate_until_event(s, math.radians(70), P)
    e1 = energy(ev.state, P)
    assert abs(e1 - e0) <= 1e-7 * abs(e0)


def test_double_stance_conserves_energy():
    s = DoubleStanceState(0.97, 1.25, -0.1, 1.3, x_sep=0.55)
    e0 = energy(s, P)
    ev, _ = integrate_until_event(s, math.radians(70), P)
    assert ev.kind in (EventKind.DOUBLE_TO_STANCE, EventKind.FAILURE)
    assert abs(energy(ev.state, P) - e0) <= 1e-7 * e0


def test_event_residuals_and_guards():
    alpha = math.radians(68)
    f = FlightState(0.0, P.r0 * math.sin(alpha), 1.0, -0.5)
    res = evaluate_event(EventKind.TOUCHDOWN, f, alpha, P)
    assert res.residual == pytest.approx(0.0, abs=1e-15)
    assert res.guard
    rising = FlightState(0.0, 0.95, 1.0, 0.5)
    assert not evaluate_event(EventKind.TOUCHDOWN, rising, alpha, P).guard
    s = StanceState(P.r0, 1.2, 0.3, 1.0)
    assert evaluate_event(EventKind.TAKEOFF, s, alpha, P).residual == pytest.approx(0.0)
    assert evaluate_event(EventKind.SECTION, s, alpha, P).residual == pytest.approx(1.2 - math.pi / 2)
    with pytest.raises(ContractError):
        evaluate_event(EventKind.TOUCHDOWN, s, alpha, P)


@given(st.floats(0.5, 3.0), st.floats(-2.0, -0.01), st.floats(math.radians(55), math.radians(85)))
def test_touchdown_preserves_position_and_velocity(vx, vy, alpha):
    f = FlightState(0.3, P.r0 * math.sin(alpha), vx, vy)
    s = switch_phase(EventKind.TOUCHDOWN, f, alpha, P)
    assert s.r == pytest.approx(P.r0) and s.theta == pytest.approx(alpha)
    assert s.position() == pytest.approx(f.position(), abs=1e-12)
    assert s.velocity() == pytest.approx(f.velocity(), abs=1e-12)
    back = switch_phase(EventKind.TAKEOFF, s, alpha, P)
    assert back.velocity() == pytest.approx(f.velocity(), abs=1e-12)
    assert back.position() == pytest.approx(f.position(), abs=1e-12)


def test_stance_to_double_places_front_leg():
    alpha = math.radians(70)
    # support leg past vertical, mass at the front leg's landing height
    theta = math.pi - 1.2
    s = StanceState(P.r0 * math.sin(alpha) / math.sin(theta), theta, 0.2, 1.1)
    d = switch_phase(EventKind.STANCE_TO_DOUBLE, s, alpha, P)
    assert d.x_sep > 0
    assert d.r == pytest.approx(P.r0) and d.theta == pytest.approx(alpha)
    assert d.position() == pytest.approx(s.position(), abs=1e-9)
    assert d.velocity() == pytest.approx(s.velocity(), abs=1e-12)
    assert back_leg_length(d) == pytest.approx(s.r, abs=1e-9)
    assert energy(d, P) == pytest.approx(energy(s, P), rel=1e-12)


def test_stance_to_double_rejects_foot_behind():
    s = StanceState(0.96, 1.2, 0.0, 1.0)
    with pytest.raises(TransitionFailure) as exc:
        switch_phase(EventKind.STANCE_TO_DOUBLE, s, math.radians(89.9), P)
    assert exc.value.kind is FailureKind.FORBIDDEN_TRANSITION


def test_fall_is_detected():
    ev, _ = integrate_until_event(FlightState(0.0, 0.5, 1.0, 0.0), 0.0, P, ())
    assert ev.kind is EventKind.FAILURE and ev.failure is FailureKind.FALL


def test_backwards_is_detected():
    s = StanceState(0.99, 1.3, 0.0, -0.5)
    ev, _ = integrate_until_event(s, math.radians(70), P)
    assert ev.kind is EventKind.FAILURE and ev.failure is FailureKind.BACKWARDS


def test_watched_event_must_belong_to_phase():
    with pytest.raises(ContractError):
        integrate_until_event(FlightState(0.0, 1.0, 1.0, 0.0), 1.0, P, (EventKind.TAKEOFF,))


def test_phase_enum_matches_kernel_codes():
    assert int(Phase.FLIGHT) == K.FLIGHT
    assert int(Phase.STANCE) == K.STANCE
    assert int(Phase.DOUBLE) == K.DOUBLE
