"""Compiled core of the simulator.

Everything in here works on flat float arrays so numba can compile it in
nopython mode. The public, dataclass-based API lives in ``dynamics`` and
``section``; those modules call into these kernels.

Charts
------
flight  : (x, y, vx, vy) in the world frame
stance  : (r, theta, rdot, thetadot), origin at the support foot,
          x = -r cos(theta), y = r sin(theta), theta measured clockwise
          from the horizontal so forward motion has thetadot > 0
double  : stance chart centred on the front foot, plus the foot separation
"""

import math

import numpy as np
from numba import njit

FLIGHT = 0
STANCE = 1
DOUBLE = 2

EV_NONE = -1
EV_TOUCHDOWN = 0
EV_TAKEOFF = 1
EV_STANCE_TO_DOUBLE = 2
EV_DOUBLE_TO_STANCE = 3
EV_SECTION = 4
EV_FALL = 5
EV_BACKWARDS = 6
EV_FRONT_LIFTOFF = 7
EV_TIMEOUT = 8
N_WATCHABLE = 8

ST_OK = 0
ST_FALL = 1
ST_FORBIDDEN = 2
ST_BACKWARDS = 3
ST_INVALID = 4

GAIT_NONE = -1
GAIT_RUNNING = 0
GAIT_WALKING = 1
GAIT_GROUNDED = 2

MODE_RUN = 0
MODE_WALK = 1

# parameter vector layout
P_M = 0
P_K = 1
P_R0 = 2
P_G = 3
P_ALPHA = 4
P_XSEP = 5

# recorded row layout
ROW_T = 0
ROW_PHASE = 1
ROW_X = 2
ROW_Y = 3
ROW_VX = 4
ROW_VY = 5
ROW_FOOT_A = 6
ROW_FOOT_B = 7
ROW_CONTACT_A = 8
ROW_CONTACT_B = 9
N_ROW = 10

HALF_PI = 0.5 * math.pi

# Dormand-Prince 5(4) tableau
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)


@njit(cache=True)
def deriv(phase, s, p, out):
    if phase == FLIGHT:
        out[0] = s[2]
        out[1] = s[3]
        out[2] = 0.0
        out[3] = -p[P_G]
        return
    r = s[0]
    th = s[1]
    rd = s[2]
    thd = s[3]
    km = p[P_K] / p[P_M]
    r0 = p[P_R0]
    g = p[P_G]
    st = math.sin(th)
    ct = math.cos(th)
    rdd = km * (r0 - r) + r * thd * thd - g * st
    inner = 2.0 * rd * thd + g * ct
    if phase == DOUBLE:
        xs = p[P_XSEP]
        rb = math.sqrt(r * r + xs * xs - 2.0 * r * xs * ct)
        fb = km * (1.0 - r0 / rb)
        rdd += fb * (xs * ct - r)
        inner += fb * xs * st
    out[0] = rd
    out[1] = thd
    out[2] = rdd
    out[3] = -inner / r


@njit(cache=True)
def back_leg(s, xsep):
    r = s[0]
    return math.sqrt(r * r + xsep * xsep - 2.0 * r * xsep * math.cos(s[1]))


@njit(cache=True)
def world_vx(phase, s):
    if phase == FLIGHT:
        return s[2]
    return -s[2] * math.cos(s[1]) + s[0] * s[3] * math.sin(s[1])


@njit(cache=True)
def world_vy(phase, s):
    if phase == FLIGHT:
        return s[3]
    return s[2] * math.sin(s[1]) + s[0] * s[3] * math.cos(s[1])


@njit(cache=True)
def height(phase, s):
    if phase == FLIGHT:
        return s[1]
    return s[0] * math.sin(s[1])


@njit(cache=True)
def residual(ev, phase, s, p):
    r0 = p[P_R0]
    if ev == EV_TOUCHDOWN:
        return s[1] - r0 * math.sin(p[P_ALPHA])
    if ev == EV_TAKEOFF or ev == EV_FRONT_LIFTOFF:
        return s[0] - r0
    if ev == EV_STANCE_TO_DOUBLE:
        return s[0] * math.sin(s[1]) - r0 * math.sin(p[P_ALPHA])
    if ev == EV_DOUBLE_TO_STANCE:
        return back_leg(s, p[P_XSEP]) - r0
    if ev == EV_SECTION:
        return s[1] - HALF_PI
    if ev == EV_FALL:
        return height(phase, s)
    if ev == EV_BACKWARDS:
        return world_vx(phase, s)
    return np.nan


@njit(cache=True)
def direction(ev):
    """+1 fires on a rise through zero, -1 on a fall, 0 on either."""
    if ev == EV_TOUCHDOWN or ev == EV_FALL or ev == EV_BACKWARDS:
        return -1
    if ev == EV_STANCE_TO_DOUBLE:
        return 0
    return 1


@njit(cache=True)
def guard(ev, phase, s, p):
    if ev == EV_TOUCHDOWN:
        return s[3] < 0.0
    if ev == EV_STANCE_TO_DOUBLE:
        return s[1] > HALF_PI
    return True


@njit(cache=True)
def crossed(d, prev, new):
    if d > 0:
        return prev <= 0.0 and new > 0.0
    if d < 0:
        return prev >= 0.0 and new < 0.0
    return (prev <= 0.0 and new > 0.0) or (prev >= 0.0 and new < 0.0)


@njit(cache=True)
def rk_step(phase, y, f0, h, p, yout, k2, k3, k4, k5, k6, k7, tmp):
    """One Dormand-Prince step; returns the 4(5) error vector norm inputs in k7.

    ``yout`` receives the 5th order solution, ``k7`` the derivative there
    (FSAL). The local error estimate is left in ``tmp``.
    """
    n = 4
    for i in range(n):
        tmp[i] = y[i] + h * A21 * f0[i]
    deriv(phase, tmp, p, k2)
    for i in range(n):
        tmp[i] = y[i] + h * (A31 * f0[i] + A32 * k2[i])
    deriv(phase, tmp, p, k3)
    for i in range(n):
        tmp[i] = y[i] + h * (A41 * f0[i] + A42 * k2[i] + A43 * k3[i])
    deriv(phase, tmp, p, k4)
    for i in range(n):
        tmp[i] = y[i] + h * (A51 * f0[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
    deriv(phase, tmp, p, k5)
    for i in range(n):
        tmp[i] = y[i] + h * (A61 * f0[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i]
                             + A65 * k5[i])
    deriv(phase, tmp, p, k6)
    for i in range(n):
        yout[i] = y[i] + h * (B1 * f0[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
    deriv(phase, yout, p, k7)
    for i in range(n):
        tmp[i] = h * (E1 * f0[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                      + E7 * k7[i])


@njit(cache=True)
def _sub_state(phase, y, f0, tau, p, out, w):
    """State at ``tau`` into the current step, by a fresh step from ``y``."""
    if tau == 0.0:
        for i in range(4):
            out[i] = y[i]
        return
    rk_step(phase, y, f0, tau, p, out, w[0], w[1], w[2], w[3], w[4], w[5], w[6])


@njit(cache=True)
def _locate(ev, phase, y, f0, h, p, w, s_out):
    """Brent root of the event residual along the step, returns tau."""
    a = 0.0
    b = h
    _sub_state(phase, y, f0, a, p, s_out, w)
    fa = residual(ev, phase, s_out, p)
    _sub_state(phase, y, f0, b, p, s_out, w)
    fb = residual(ev, phase, s_out, p)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    xtol = 1e-15
    # port of the classic brentq iteration
    xpre = a
    xcur = b
    fpre = fa
    fcur = fb
    xblk = 0.0
    fblk = 0.0
    spre = 0.0
    scur = 0.0
    for _ in range(200):
        if fpre * fcur < 0.0:
            xblk = xpre
            fblk = fpre
            spre = xcur - xpre
            scur = spre
        if abs(fblk) < abs(fcur):
            xpre = xcur
            xcur = xblk
            xblk = xpre
            fpre = fcur
            fcur = fblk
            fblk = fpre
        delta = 0.5 * (xtol + 4e-16 * abs(xcur))
        sbis = 0.5 * (xblk - xcur)
        if fcur == 0.0 or abs(sbis) < delta:
            break
        if abs(spre) > delta and abs(fcur) < abs(fpre):
            if xpre == xblk:
                stry = -fcur * (xcur - xpre) / (fcur - fpre)
            else:
                dpre = (fpre - fcur) / (xpre - xcur)
                dblk = (fblk - fcur) / (xblk - xcur)
                stry = -fcur * (fblk * dblk - fpre * dpre) / (dblk * dpre * (fblk - fpre))
            if 2.0 * abs(stry) < min(abs(spre), 3.0 * abs(sbis) - delta):
                spre = scur
                scur = stry
            else:
                spre = sbis
                scur = sbis
        else:
            spre = sbis
            scur = sbis
        xpre = xcur
        fpre = fcur
        if abs(scur) > delta:
            xcur += scur
        elif sbis > 0.0:
            xcur += delta
        else:
            xcur -= delta
        _sub_state(phase, y, f0, xcur, p, s_out, w)
        fcur = residual(ev, phase, s_out, p)
    return xcur


@njit(cache=True)
def _write_row(buf, row, t, phase, s, origin, xsep, front_leg):
    if row >= buf.shape[0]:
        return
    buf[row, ROW_T] = t
    buf[row, ROW_PHASE] = phase
    if phase == FLIGHT:
        buf[row, ROW_X] = s[0]
        buf[row, ROW_Y] = s[1]
        buf[row, ROW_VX] = s[2]
        buf[row, ROW_VY] = s[3]
        buf[row, ROW_FOOT_A] = np.nan
        buf[row, ROW_FOOT_B] = np.nan
        buf[row, ROW_CONTACT_A] = 0.0
        buf[row, ROW_CONTACT_B] = 0.0
        return
    buf[row, ROW_X] = origin - s[0] * math.cos(s[1])
    buf[row, ROW_Y] = s[0] * math.sin(s[1])
    buf[row, ROW_VX] = world_vx(phase, s)
    buf[row, ROW_VY] = world_vy(phase, s)
    front_col = ROW_FOOT_A if front_leg == 0 else ROW_FOOT_B
    back_col = ROW_FOOT_B if front_leg == 0 else ROW_FOOT_A
    buf[row, front_col] = origin
    buf[row, front_col + 2] = 1.0
    if phase == DOUBLE:
        buf[row, back_col] = origin - xsep
        buf[row, back_col + 2] = 1.0
    else:
        buf[row, back_col] = np.nan
        buf[row, back_col + 2] = 0.0


@njit(cache=True)
def _error_norm(y, ynew, err, rtol, atol):
    acc = 0.0
    for i in range(4):
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        q = err[i] / sc
        acc += q * q
    return math.sqrt(acc / 4.0)


@njit(cache=True)
def _shrink(enorm):
    if enorm != enorm:
        return 0.2
    return max(0.2, 0.9 * enorm ** -0.2)


@njit(cache=True)
def _grow(h, enorm, h_max):
    if enorm < 1e-10:
        return min(h * 5.0, h_max)
    return min(h * min(5.0, 0.9 * enorm ** -0.2), h_max)


@njit(cache=True)
def _entry_failure(phase, y, watch):
    if watch[EV_FALL] and height(phase, y) <= 0.0:
        return EV_FALL
    if watch[EV_BACKWARDS] and world_vx(phase, y) < 0.0:
        return EV_BACKWARDS
    if phase != FLIGHT and y[0] <= 0.0:
        return EV_FALL
    return EV_NONE


@njit(cache=True)
def integrate_phase(phase, s0, t0, p, watch, t_max, rtol, atol, h_max,
                    record, stride, origin, front_leg, buf, row0, s_event):
    """Integrate one phase until the first watched event with a true guard.

    ``watch`` is a boolean mask over event kinds. Returns
    ``(event, t_event, rows_written)`` with the state at the event in
    ``s_event``. Samples at global multiples of ``stride`` inside
    ``[t0, t_event)`` are written to ``buf`` starting at ``row0``.
    """
    y = np.empty(4)
    f0 = np.empty(4)
    ynew = np.empty(4)
    fnew = np.empty(4)
    err = np.empty(4)
    w = np.empty((7, 4))
    s_try = np.empty(4)
    xsep = p[P_XSEP]
    for i in range(4):
        y[i] = s0[i]
        s_event[i] = s0[i]

    bad = _entry_failure(phase, y, watch)
    if bad != EV_NONE:
        return bad, t0, 0

    prev = np.empty(N_WATCHABLE)
    for ev in range(N_WATCHABLE):
        if watch[ev]:
            prev[ev] = residual(ev, phase, y, p)
    deriv(phase, y, p, f0)

    t = t0
    h = min(1e-3, h_max)
    rows = 0
    j_next = 0
    if record:
        j_next = int(math.ceil(t0 / stride - 1e-9))
        if j_next * stride < t0:
            j_next += 1

    while True:
        if t - t0 >= t_max:
            for i in range(4):
                s_event[i] = y[i]
            return EV_TIMEOUT, t, rows
        rk_step(phase, y, f0, h, p, ynew, w[0], w[1], w[2], w[3], w[4], fnew, err)
        enorm = _error_norm(y, ynew, err, rtol, atol)
        if not (enorm <= 1.0):
            h *= _shrink(enorm)
            if h < 1e-14:
                for i in range(4):
                    s_event[i] = y[i]
                return EV_TIMEOUT, t, rows
            continue

        # earliest watched event inside the accepted step
        best_ev = EV_NONE
        best_tau = h
        for ev in range(N_WATCHABLE):
            if not watch[ev]:
                continue
            new = residual(ev, phase, ynew, p)
            if crossed(direction(ev), prev[ev], new):
                tau = _locate(ev, phase, y, f0, h, p, w, s_try)
                if best_ev == EV_NONE or tau < best_tau:
                    _sub_state(phase, y, f0, tau, p, s_try, w)
                    if guard(ev, phase, s_try, p):
                        best_ev = ev
                        best_tau = tau
            prev[ev] = new

        t_end = t + best_tau if best_ev != EV_NONE else t + h
        if record:
            while True:
                ts = j_next * stride
                if ts >= t_end:
                    break
                _sub_state(phase, y, f0, ts - t, p, s_try, w)
                _write_row(buf, row0 + rows, ts, phase, s_try, origin, xsep, front_leg)
                rows += 1
                j_next += 1

        if best_ev != EV_NONE:
            _sub_state(phase, y, f0, best_tau, p, s_event, w)
            return best_ev, t + best_tau, rows

        t += h
        for i in range(4):
            y[i] = ynew[i]
            f0[i] = fnew[i]
        h = _grow(h, enorm, h_max)


@njit(cache=True)
def integrate_logged(phase, s0, t0, p, watch, t_max, rtol, atol, h_max,
                     log_y, log_f, log_h, log_t):
    """Same loop as ``integrate_phase`` without sampling, logging every accepted step.

    Row ``i`` of the logs holds the start state, its derivative, the step
    size and start time of accepted step ``i``; ``log_y[n]`` is the end state
    of the last full step. Returns ``(event, t_event, tau_event, n)``, with
    ``n = -1`` when the log overflows.
    """
    y = np.empty(4)
    f0 = np.empty(4)
    ynew = np.empty(4)
    fnew = np.empty(4)
    err = np.empty(4)
    w = np.empty((7, 4))
    s_try = np.empty(4)
    cap = log_h.shape[0]
    for i in range(4):
        y[i] = s0[i]

    bad = _entry_failure(phase, y, watch)
    if bad != EV_NONE:
        return bad, t0, 0.0, 0

    prev = np.empty(N_WATCHABLE)
    for ev in range(N_WATCHABLE):
        if watch[ev]:
            prev[ev] = residual(ev, phase, y, p)
    deriv(phase, y, p, f0)

    t = t0
    h = min(1e-3, h_max)
    n = 0
    while True:
        if t - t0 >= t_max:
            return EV_TIMEOUT, t, np.inf, n
        rk_step(phase, y, f0, h, p, ynew, w[0], w[1], w[2], w[3], w[4], fnew, err)
        enorm = _error_norm(y, ynew, err, rtol, atol)
        if not (enorm <= 1.0):
            h *= _shrink(enorm)
            if h < 1e-14:
                return EV_TIMEOUT, t, np.inf, n
            continue
        if n >= cap:
            return EV_NONE, t, 0.0, -1
        for i in range(4):
            log_y[n, i] = y[i]
            log_f[n, i] = f0[i]
            log_y[n + 1, i] = ynew[i]
        log_h[n] = h
        log_t[n] = t
        n += 1

        best_ev = EV_NONE
        best_tau = h
        for ev in range(N_WATCHABLE):
            if not watch[ev]:
                continue
            new = residual(ev, phase, ynew, p)
            if crossed(direction(ev), prev[ev], new):
                tau = _locate(ev, phase, y, f0, h, p, w, s_try)
                if best_ev == EV_NONE or tau < best_tau:
                    _sub_state(phase, y, f0, tau, p, s_try, w)
                    if guard(ev, phase, s_try, p):
                        best_ev = ev
                        best_tau = tau
            prev[ev] = new
        if best_ev != EV_NONE:
            return best_ev, t + best_tau, best_tau, n

        t += h
        for i in range(4):
            y[i] = ynew[i]
            f0[i] = fnew[i]
        h = _grow(h, enorm, h_max)


@njit(cache=True)
def scan_logged(ev, phase, s0, p, log_y, log_f, log_h, n, term_ev, term_tau, s_out):
    """First guarded crossing of ``ev`` along a logged integration.

    Reproduces the event competition of ``integrate_phase`` as if ``ev`` had
    been watched alongside the events of the logged run. Returns the step
    index and offset, or ``(-1, 0.0)`` when the logged terminal event wins.
    """
    w = np.empty((7, 4))
    y = np.empty(4)
    f0 = np.empty(4)
    ye = np.empty(4)
    prev = residual(ev, phase, s0, p)
    d = direction(ev)
    for k in range(n):
        for i in range(4):
            ye[i] = log_y[k + 1, i]
        new = residual(ev, phase, ye, p)
        if crossed(d, prev, new):
            for i in range(4):
                y[i] = log_y[k, i]
                f0[i] = log_f[k, i]
            tau = _locate(ev, phase, y, f0, log_h[k], p, w, s_out)
            last = k == n - 1
            # lower event codes win exact ties, as in integrate_phase
            if (not last) or tau < term_tau or (tau == term_tau and term_ev > ev):
                _sub_state(phase, y, f0, tau, p, s_out, w)
                if guard(ev, phase, s_out, p):
                    return k, tau
        prev = new
    return -1, 0.0


@njit(cache=True)
def stance_to_flight(s, origin, out):
    st = math.sin(s[1])
    ct = math.cos(s[1])
    out[0] = origin - s[0] * ct
    out[1] = s[0] * st
    out[2] = -s[2] * ct + s[0] * s[3] * st
    out[3] = s[2] * st + s[0] * s[3] * ct


@njit(cache=True)
def velocity_to_leg(vx, vy, r, th, out):
    """Stance chart for a leg of length ``r`` at angle ``th`` given the CoM velocity."""
    st = math.sin(th)
    ct = math.cos(th)
    out[0] = r
    out[1] = th
    out[2] = -vx * ct + vy * st
    out[3] = (vx * st + vy * ct) / r


@njit(cache=True)
def section_vx(r, vy, E, m, k, r0, g):
    """Forward speed implied by a section state; negative means outside."""
    q = 2.0 * (E - 0.5 * k * (r0 - r) ** 2 - m * g * r) / m - vy * vy
    if q < 0.0:
        return -1.0
    return math.sqrt(q)


@njit(cache=True)
def _params(m, k, r0, g, alpha):
    p = np.empty(6)
    p[P_M] = m
    p[P_K] = k
    p[P_R0] = r0
    p[P_G] = g
    p[P_ALPHA] = alpha
    p[P_XSEP] = 0.0
    return p


@njit(cache=True)
def _first_watch(mode):
    watch = np.zeros(N_WATCHABLE, dtype=np.bool_)
    watch[EV_TAKEOFF] = True
    watch[EV_STANCE_TO_DOUBLE] = mode == MODE_WALK
    watch[EV_FALL] = True
    watch[EV_BACKWARDS] = True
    return watch


@njit(cache=True)
def _fail(ev):
    if ev == EV_FALL:
        return ST_FALL
    if ev == EV_BACKWARDS:
        return ST_BACKWARDS
    return ST_FORBIDDEN


@njit(cache=True)
def _second_stance(s, t, origin, gait, p, rtol, atol, h_max, t_max, record, stride,
                   buf, rows, events, n_ev, vy_switch, s_final):
    """Single stance on the new leg until it is vertical."""
    if s[1] >= HALF_PI:
        # leg already past vertical: the section is never reached in single stance
        return ST_FORBIDDEN, gait, t, rows, origin, n_ev, vy_switch
    watch = np.zeros(N_WATCHABLE, dtype=np.bool_)
    watch[EV_SECTION] = True
    watch[EV_TAKEOFF] = True
    watch[EV_FALL] = True
    watch[EV_BACKWARDS] = True
    se = np.empty(4)
    ev, t, nr = integrate_phase(STANCE, s, t, p, watch, t_max, rtol, atol, h_max,
                                record, stride, origin, 1, buf, rows, se)
    rows += nr
    events[n_ev, 0] = ev
    events[n_ev, 1] = t
    n_ev += 1
    if ev != EV_SECTION:
        return _fail(ev), gait, t, rows, origin, n_ev, vy_switch
    for i in range(4):
        s_final[i] = se[i]
    return ST_OK, gait, t, rows, origin, n_ev, vy_switch


@njit(cache=True)
def after_takeoff(se, t, origin, alpha, m, k, r0, g, rtol, atol, h_max, t_max,
                  record, stride, buf, rows, events, n_ev, s_final):
    """Flight from the takeoff state ``se`` then the landing leg's stance."""
    p = _params(m, k, r0, g, alpha)
    vy_switch = np.nan
    gait = GAIT_RUNNING
    s = np.empty(4)
    sf = np.empty(4)
    stance_to_flight(se, origin, s)
    watch = np.zeros(N_WATCHABLE, dtype=np.bool_)
    watch[EV_TOUCHDOWN] = True
    watch[EV_FALL] = True
    watch[EV_BACKWARDS] = True
    ev, t, nr = integrate_phase(FLIGHT, s, t, p, watch, t_max, rtol, atol, h_max,
                                record, stride, 0.0, 0, buf, rows, sf)
    rows += nr
    events[n_ev, 0] = ev
    events[n_ev, 1] = t
    n_ev += 1
    if ev != EV_TOUCHDOWN:
        return _fail(ev), gait, t, rows, origin, n_ev, vy_switch
    origin = sf[0] + r0 * math.cos(alpha)
    velocity_to_leg(sf[2], sf[3], r0, alpha, s)
    return _second_stance(s, t, origin, gait, p, rtol, atol, h_max, t_max, record,
                          stride, buf, rows, events, n_ev, vy_switch, s_final)


@njit(cache=True)
def after_switch(se, t, origin, alpha, m, k, r0, g, rtol, atol, h_max, t_max,
                 record, stride, buf, rows, events, n_ev, s_final):
    """Double stance from the stance-to-double state ``se`` then the front leg's stance."""
    p = _params(m, k, r0, g, alpha)
    vy_switch = world_vy(STANCE, se)
    gait = GAIT_WALKING if vy_switch <= 0.0 else GAIT_GROUNDED
    xsep = r0 * math.cos(alpha) - se[0] * math.cos(se[1])
    if not (xsep > 0.0):
        return ST_FORBIDDEN, gait, t, rows, origin, n_ev, vy_switch
    s = np.empty(4)
    sd = np.empty(4)
    origin = origin + xsep
    p[P_XSEP] = xsep
    velocity_to_leg(world_vx(STANCE, se), vy_switch, r0, alpha, s)
    watch = np.zeros(N_WATCHABLE, dtype=np.bool_)
    watch[EV_DOUBLE_TO_STANCE] = True
    watch[EV_FRONT_LIFTOFF] = True
    watch[EV_FALL] = True
    watch[EV_BACKWARDS] = True
    ev, t, nr = integrate_phase(DOUBLE, s, t, p, watch, t_max, rtol, atol, h_max,
                                record, stride, origin, 1, buf, rows, sd)
    rows += nr
    events[n_ev, 0] = ev
    events[n_ev, 1] = t
    n_ev += 1
    if ev != EV_DOUBLE_TO_STANCE:
        return _fail(ev), gait, t, rows, origin, n_ev, vy_switch
    p[P_XSEP] = 0.0
    return _second_stance(sd, t, origin, gait, p, rtol, atol, h_max, t_max, record,
                          stride, buf, rows, events, n_ev, vy_switch, s_final)


@njit(cache=True)
def simulate_step(r, vy, E, alpha, mode, m, k, r0, g, rtol, atol, h_max, t_max,
                  record, stride, t0, foot0, buf, events, s_final):
    """One return to the section from ``(r, vy)`` with angle of attack ``alpha``.

    ``mode`` selects the phase sequence: MODE_RUN keeps the swing leg off
    the ground until flight, MODE_WALK places it during stance and treats an
    earlier takeoff as a forbidden transition. Returns ``(status, gait,
    t_end, rows, new_foot_x, n_events, vy_at_switch)``; ``s_final`` holds
    the stance chart state at the section on success. ``events`` rows are
    (kind, time).
    """
    vx = section_vx(r, vy, E, m, k, r0, g)
    if vx < 0.0 or r <= 0.0:
        return ST_INVALID, GAIT_NONE, t0, 0, foot0, 0, np.nan
    p = _params(m, k, r0, g, alpha)
    s = np.empty(4)
    se = np.empty(4)
    s[0] = r
    s[1] = HALF_PI
    s[2] = vy
    s[3] = vx / r

    ev, t, rows = integrate_phase(STANCE, s, t0, p, _first_watch(mode), t_max, rtol, atol,
                                  h_max, record, stride, foot0, 0, buf, 0, se)
    events[0, 0] = ev
    events[0, 1] = t
    if ev == EV_TAKEOFF:
        if mode == MODE_WALK:
            return ST_FORBIDDEN, GAIT_NONE, t, rows, foot0, 1, np.nan
        return after_takeoff(se, t, foot0, alpha, m, k, r0, g, rtol, atol, h_max, t_max,
                             record, stride, buf, rows, events, 1, s_final)
    if ev == EV_STANCE_TO_DOUBLE:
        return after_switch(se, t, foot0, alpha, m, k, r0, g, rtol, atol, h_max, t_max,
                            record, stride, buf, rows, events, 1, s_final)
    return _fail(ev), GAIT_NONE, t, rows, foot0, 1, np.nan


@njit(cache=True, nogil=True)
def step_table(rs, vys, E, alphas, mode, m, k, r0, g, rtol, atol, h_max, t_max,
               status, gait, r_next, vy_next):
    """Outcome of every (state, angle) pair; fills the four output arrays.

    Equivalent to calling ``simulate_step`` for every pair, but the first
    stance, which does not depend on the angle, is integrated once per state.
    """
    buf = np.empty((1, N_ROW))
    events = np.empty((8, 2))
    s_final = np.empty(4)
    s = np.empty(4)
    se = np.empty(4)
    cap = 20000
    log_y = np.empty((cap + 1, 4))
    log_f = np.empty((cap, 4))
    log_h = np.empty(cap)
    log_t = np.empty(cap)
    na = alphas.shape[0]
    for i in range(rs.shape[0]):
        for j in range(na):
            status[i, j] = ST_INVALID
            gait[i, j] = GAIT_NONE
            r_next[i, j] = np.nan
            vy_next[i, j] = np.nan
        vx = section_vx(rs[i], vys[i], E, m, k, r0, g)
        if vx < 0.0 or rs[i] <= 0.0:
            continue
        s[0] = rs[i]
        s[1] = HALF_PI
        s[2] = vys[i]
        s[3] = vx / rs[i]
        p = _params(m, k, r0, g, alphas[0])
        ev, t, tau_end, n = integrate_logged(STANCE, s, 0.0, p, _first_watch(MODE_RUN),
                                             t_max, rtol, atol, h_max,
                                             log_y, log_f, log_h, log_t)
        if n < 0:
            # pathological step count: fall back to the plain path
            for j in range(na):
                st, gt, _, _, _, _, _ = simulate_step(
                    rs[i], vys[i], E, alphas[j], mode, m, k, r0, g, rtol, atol, h_max,
                    t_max, False, 1.0, 0.0, 0.0, buf, events, s_final)
                status[i, j] = st
                gait[i, j] = gt
                if st == ST_OK:
                    r_next[i, j] = s_final[0]
                    vy_next[i, j] = s_final[2]
            continue
        if mode == MODE_RUN and ev == EV_TAKEOFF:
            # takeoff state, shared by every angle
            _sub_state_public(log_y[n - 1], log_f[n - 1], tau_end, p, se)
        for j in range(na):
            alpha = alphas[j]
            if mode == MODE_RUN:
                if ev != EV_TAKEOFF:
                    st = _fail(ev)
                    gt = GAIT_NONE
                else:
                    st, gt, _, _, _, _, _ = after_takeoff(
                        se, t, 0.0, alpha, m, k, r0, g, rtol, atol, h_max, t_max,
                        False, 1.0, buf, 0, events, 1, s_final)
            else:
                p[P_ALPHA] = alpha
                kk, tau = scan_logged(EV_STANCE_TO_DOUBLE, STANCE, s, p, log_y, log_f, log_h,
                                      n, ev, tau_end, se)
                if kk >= 0:
                    st, gt, _, _, _, _, _ = after_switch(
                        se, log_t[kk] + tau, 0.0, alpha, m, k, r0, g, rtol, atol, h_max,
                        t_max, False, 1.0, buf, 0, events, 1, s_final)
                elif ev == EV_TAKEOFF:
                    st = ST_FORBIDDEN
                    gt = GAIT_NONE
                else:
                    st = _fail(ev)
                    gt = GAIT_NONE
            status[i, j] = st
            gait[i, j] = gt
            if st == ST_OK:
                r_next[i, j] = s_final[0]
                vy_next[i, j] = s_final[2]


@njit(cache=True)
def _sub_state_public(y, f0, tau, p, out):
    w = np.empty((7, 4))
    _sub_state(STANCE, y, f0, tau, p, out, w)
