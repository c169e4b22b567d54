"""Bipedal spring-loaded inverted pendulum: simulation, regions, transitions, analysis."""

from .dynamics import (
    DoubleStanceState,
    EventKind,
    FailureKind,
    FlightState,
    IntegratorOptions,
    ModelParams,
    PhaseEvent,
    StanceState,
)
from .section import GaitKind, SectionState, StepOutcome, embed, observe, step, step_hopping

__all__ = [
    "DoubleStanceState",
    "EventKind",
    "FailureKind",
    "FlightState",
    "GaitKind",
    "IntegratorOptions",
    "ModelParams",
    "PhaseEvent",
    "SectionState",
    "StanceState",
    "StepOutcome",
    "embed",
    "observe",
    "step",
    "step_hopping",
]
