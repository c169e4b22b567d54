"""Phase vector fields, event functions and phase switches of the bipedal SLIP.

Three coordinate charts are used:

* flight: ``(x, y, vx, vy)`` in the world frame;
* single stance: ``(r, theta, rdot, thetadot)`` around the support foot, with
  ``x = foot_x - r cos(theta)`` and ``y = r sin(theta)``. ``theta`` is measured
  clockwise from the horizontal, so forward (rightward) motion has
  ``thetadot > 0`` and the leg is vertical at ``theta = pi/2``;
* double stance: the stance chart around the front foot plus the horizontal
  foot separation ``x_sep``; the back foot sits at ``foot_x - x_sep``.

The numerical work is done by the compiled kernels in :mod:`slipgait._kernels`.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import astuple, dataclass, field
from typing import Union

import numpy as np

from . import _kernels as K


class SingularityError(ValueError):
    """A vector field was evaluated where a leg length vanishes."""


class ContractError(ValueError):
    """An operation was called with an incompatible phase or event kind."""


class Phase(enum.IntEnum):
    FLIGHT = K.FLIGHT
    STANCE = K.STANCE
    DOUBLE = K.DOUBLE


class EventKind(enum.Enum):
    TOUCHDOWN = "touchdown"
    TAKEOFF = "takeoff"
    STANCE_TO_DOUBLE = "stance_to_double"
    DOUBLE_TO_STANCE = "double_to_stance"
    SECTION = "section"
    FAILURE = "failure"


class FailureKind(enum.Enum):
    FALL = "fall"
    FORBIDDEN_TRANSITION = "forbidden_transition"
    BACKWARDS = "backwards"


class TransitionFailure(RuntimeError):
    """A phase switch produced a state outside its chart's domain."""

    def __init__(self, kind: FailureKind, message: str = ""):
        super().__init__(message or kind.value)
        self.kind = kind


_EVENT_CODES = {
    EventKind.TOUCHDOWN: K.EV_TOUCHDOWN,
    EventKind.TAKEOFF: K.EV_TAKEOFF,
    EventKind.STANCE_TO_DOUBLE: K.EV_STANCE_TO_DOUBLE,
    EventKind.DOUBLE_TO_STANCE: K.EV_DOUBLE_TO_STANCE,
    EventKind.SECTION: K.EV_SECTION,
}

# kernel event code -> (kind, failure)
_FROM_CODE = {
    K.EV_TOUCHDOWN: (EventKind.TOUCHDOWN, None),
    K.EV_TAKEOFF: (EventKind.TAKEOFF, None),
    K.EV_STANCE_TO_DOUBLE: (EventKind.STANCE_TO_DOUBLE, None),
    K.EV_DOUBLE_TO_STANCE: (EventKind.DOUBLE_TO_STANCE, None),
    K.EV_SECTION: (EventKind.SECTION, None),
    K.EV_FALL: (EventKind.FAILURE, FailureKind.FALL),
    K.EV_BACKWARDS: (EventKind.FAILURE, FailureKind.BACKWARDS),
    K.EV_FRONT_LIFTOFF: (EventKind.FAILURE, FailureKind.FORBIDDEN_TRANSITION),
    K.EV_TIMEOUT: (EventKind.FAILURE, FailureKind.FORBIDDEN_TRANSITION),
}

# events that make sense in each phase
_PHASE_EVENTS = {
    Phase.FLIGHT: {EventKind.TOUCHDOWN},
    Phase.STANCE: {EventKind.TAKEOFF, EventKind.STANCE_TO_DOUBLE, EventKind.SECTION},
    Phase.DOUBLE: {EventKind.DOUBLE_TO_STANCE, EventKind.TAKEOFF},
}


@dataclass(frozen=True)
class ModelParams:
    """Mechanical parameters: mass (kg), stiffness (N/m), rest length (m), gravity (m/s^2)."""

    m: float = 80.0
    k: float = 20000.0
    r0: float = 1.0
    g: float = 9.81

    def __post_init__(self):
        for name in ("m", "k", "r0", "g"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"ModelParams.{name} must be finite and positive, got {v!r}")

    @property
    def weight(self) -> float:
        return self.m * self.g

    def vector(self, alpha: float = 0.0, x_sep: float = 0.0) -> np.ndarray:
        p = np.zeros(6)
        p[K.P_M], p[K.P_K], p[K.P_R0], p[K.P_G] = self.m, self.k, self.r0, self.g
        p[K.P_ALPHA] = alpha
        p[K.P_XSEP] = x_sep
        return p

    def digest(self) -> str:
        text = ",".join(repr(float(v)) for v in astuple(self))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class FlightState:
    x: float
    y: float
    vx: float
    vy: float

    phase = Phase.FLIGHT

    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.vx, self.vy], dtype=float)

    def position(self) -> tuple[float, float]:
        return self.x, self.y

    def velocity(self) -> tuple[float, float]:
        return self.vx, self.vy


@dataclass(frozen=True)
class StanceState:
    r: float
    theta: float
    rdot: float
    thetadot: float
    foot_x: float = 0.0

    phase = Phase.STANCE

    def array(self) -> np.ndarray:
        return np.array([self.r, self.theta, self.rdot, self.thetadot], dtype=float)

    def position(self) -> tuple[float, float]:
        return self.foot_x - self.r * math.cos(self.theta), self.r * math.sin(self.theta)

    def velocity(self) -> tuple[float, float]:
        s = self.array()
        return K.world_vx(K.STANCE, s), K.world_vy(K.STANCE, s)


@dataclass(frozen=True)
class DoubleStanceState:
    """Stance chart around the front foot (at ``foot_x``) plus the foot separation."""

    r: float
    theta: float
    rdot: float
    thetadot: float
    x_sep: float
    foot_x: float = 0.0

    phase = Phase.DOUBLE

    def array(self) -> np.ndarray:
        return np.array([self.r, self.theta, self.rdot, self.thetadot], dtype=float)

    def position(self) -> tuple[float, float]:
        return self.foot_x - self.r * math.cos(self.theta), self.r * math.sin(self.theta)

    def velocity(self) -> tuple[float, float]:
        s = self.array()
        return K.world_vx(K.DOUBLE, s), K.world_vy(K.DOUBLE, s)

    @property
    def back_foot_x(self) -> float:
        return self.foot_x - self.x_sep


HybridState = Union[FlightState, StanceState, DoubleStanceState]


@dataclass(frozen=True)
class PhaseEvent:
    kind: EventKind
    time: float
    state: HybridState
    failure: FailureKind | None = None


@dataclass(frozen=True)
class IntegratorOptions:
    """Adaptive Dormand-Prince settings shared by every simulation call."""

    rtol: float = 1e-9
    atol: float = 1e-11
    h_max: float = 0.01
    stride: float = 1e-3
    horizon: float = 10.0  # per-phase limit in units of sqrt(r0/g)

    def t_max(self, p: ModelParams) -> float:
        return self.horizon * math.sqrt(p.r0 / p.g)


DEFAULT_OPTIONS = IntegratorOptions()


def flight_derivatives(s: FlightState, p: ModelParams | None = None) -> np.ndarray:
    g = (p or ModelParams()).g
    return np.array([s.vx, s.vy, 0.0, -g])


def single_stance_derivatives(s: StanceState, p: ModelParams) -> np.ndarray:
    if not s.r > 0:
        raise SingularityError(f"stance leg length must be positive, got r={s.r}")
    out = np.empty(4)
    K.deriv(K.STANCE, s.array(), p.vector(), out)
    return out


def back_leg_length(s: DoubleStanceState) -> float:
    return K.back_leg(s.array(), float(s.x_sep))


def double_stance_derivatives(s: DoubleStanceState, p: ModelParams) -> np.ndarray:
    if not s.r > 0:
        raise SingularityError(f"front leg length must be positive, got r={s.r}")
    if not back_leg_length(s) > 0:
        raise SingularityError("back leg length vanishes")
    out = np.empty(4)
    K.deriv(K.DOUBLE, s.array(), p.vector(x_sep=s.x_sep), out)
    return out


def derivatives(s: HybridState, p: ModelParams) -> np.ndarray:
    if isinstance(s, FlightState):
        return flight_derivatives(s, p)
    if isinstance(s, DoubleStanceState):
        return double_stance_derivatives(s, p)
    return single_stance_derivatives(s, p)


def energy(s: HybridState, p: ModelParams) -> float:
    """Total mechanical energy, counting every loaded spring."""
    vx, vy = s.velocity()
    _, y = s.position()
    e = 0.5 * p.m * (vx * vx + vy * vy) + p.m * p.g * y
    if isinstance(s, (StanceState, DoubleStanceState)):
        e += 0.5 * p.k * (p.r0 - s.r) ** 2
    if isinstance(s, DoubleStanceState):
        e += 0.5 * p.k * (p.r0 - back_leg_length(s)) ** 2
    return e


@dataclass(frozen=True)
class EventResidual:
    residual: float
    guard: bool


def evaluate_event(kind: EventKind, s: HybridState, alpha: float, p: ModelParams) -> EventResidual:
    """Residual whose zero crossing locates ``kind``, with its directional guard."""
    if kind not in _EVENT_CODES or kind not in _PHASE_EVENTS[s.phase]:
        raise ContractError(f"event {kind.value} is not defined in phase {s.phase.name}")
    x_sep = getattr(s, "x_sep", 0.0)
    code = _EVENT_CODES[kind]
    if kind is EventKind.TAKEOFF and s.phase is Phase.DOUBLE:
        code = K.EV_FRONT_LIFTOFF
    arr = s.array()
    pv = p.vector(alpha, x_sep)
    res = float(K.residual(code, int(s.phase), arr, pv))
    return EventResidual(res, bool(K.guard(code, int(s.phase), arr, pv)))


def switch_phase(kind: EventKind, s: HybridState, alpha: float, p: ModelParams) -> HybridState:
    """Map a state at an event into the chart of the following phase.

    Touchdown and stance-to-double place the new leg at rest length with
    ``theta = alpha``. Raises :class:`TransitionFailure` when the new state
    is outside its chart.
    """
    if kind is EventKind.TAKEOFF and isinstance(s, StanceState):
        out = np.empty(4)
        K.stance_to_flight(s.array(), s.foot_x, out)
        return FlightState(*map(float, out))
    if kind is EventKind.TOUCHDOWN and isinstance(s, FlightState):
        out = np.empty(4)
        K.velocity_to_leg(s.vx, s.vy, p.r0, alpha, out)
        return StanceState(*map(float, out), foot_x=s.x + p.r0 * math.cos(alpha))
    if kind is EventKind.STANCE_TO_DOUBLE and isinstance(s, StanceState):
        x_sep = p.r0 * math.cos(alpha) - s.r * math.cos(s.theta)
        if not x_sep > 0:
            raise TransitionFailure(FailureKind.FORBIDDEN_TRANSITION,
                                    f"new foot not ahead of the support foot (x_sep={x_sep:.3g})")
        vx, vy = s.velocity()
        out = np.empty(4)
        K.velocity_to_leg(vx, vy, p.r0, alpha, out)
        return DoubleStanceState(*map(float, out), x_sep=x_sep, foot_x=s.foot_x + x_sep)
    if kind is EventKind.DOUBLE_TO_STANCE and isinstance(s, DoubleStanceState):
        return StanceState(s.r, s.theta, s.rdot, s.thetadot, foot_x=s.foot_x)
    raise ContractError(f"no switch for event {kind.value} from phase {s.phase.name}")


# events watched by default in each phase
_DEFAULT_WATCH = {
    Phase.FLIGHT: (EventKind.TOUCHDOWN,),
    Phase.STANCE: (EventKind.TAKEOFF, EventKind.SECTION),
    Phase.DOUBLE: (EventKind.DOUBLE_TO_STANCE,),
}


@dataclass
class Segment:
    """Dense samples of one phase: rows in the kernel's recorded layout."""

    rows: np.ndarray
    phase: Phase
    t0: float
    t1: float
    extras: dict = field(default_factory=dict)


def integrate_until_event(s0: HybridState, alpha: float, p: ModelParams,
                          watched: tuple[EventKind, ...] | None = None,
                          t0: float = 0.0,
                          opts: IntegratorOptions = DEFAULT_OPTIONS) -> tuple[PhaseEvent, Segment]:
    """Integrate the phase of ``s0`` until the first watched event fires.

    Falls (height <= 0) and backward motion (vx < 0) are always watched and
    reported as failure events, as is running past the phase horizon.
    Samples are taken on the global grid ``t = j * opts.stride``.
    """
    phase = s0.phase
    watched = _DEFAULT_WATCH[phase] if watched is None else tuple(watched)
    mask = np.zeros(K.N_WATCHABLE, dtype=np.bool_)
    for kind in watched:
        if kind not in _PHASE_EVENTS[phase]:
            raise ContractError(f"event {kind.value} cannot fire in phase {phase.name}")
        code = _EVENT_CODES[kind]
        if kind is EventKind.TAKEOFF and phase is Phase.DOUBLE:
            code = K.EV_FRONT_LIFTOFF
        mask[code] = True
    mask[K.EV_FALL] = True
    mask[K.EV_BACKWARDS] = True
    x_sep = getattr(s0, "x_sep", 0.0)
    foot = getattr(s0, "foot_x", 0.0)
    t_max = opts.t_max(p)
    buf = np.empty((int(t_max / opts.stride) + 4, K.N_ROW))
    s_event = np.empty(4)
    code, t_ev, n = K.integrate_phase(int(phase), s0.array(), float(t0), p.vector(alpha, x_sep), mask,
                                      t_max, opts.rtol, opts.atol, opts.h_max, True, opts.stride,
                                      float(foot), 0, buf, 0, s_event)
    kind, failure = _FROM_CODE[int(code)]
    vals = [float(v) for v in s_event]
    if phase is Phase.FLIGHT:
        state = FlightState(*vals)
    elif phase is Phase.DOUBLE:
        state = DoubleStanceState(*vals, x_sep=x_sep, foot_x=foot)
    else:
        state = StanceState(*vals, foot_x=foot)
    event = PhaseEvent(kind, float(t_ev), state, failure)
    return event, Segment(buf[:n].copy(), phase, float(t0), float(t_ev))
