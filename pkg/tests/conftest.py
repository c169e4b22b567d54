import math
import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from slipgait.dynamics import ModelParams
from slipgait.regions import GridSpec
from slipgait.section import GaitKind
from slipgait.store import ResultStore
from slipgait.transitions import Strategy, planning_context, plan_transition

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

W, R = GaitKind.WALKING, GaitKind.RUNNING
PLAN_ENERGY = 840.0
PLAN_DELTA = math.radians(1.0)
PLAN_GRID = GridSpec(41, 41)
STRATEGIES = {
    "froude": Strategy.constant_froude(),
    "hip": Strategy.constant_hip_excursion(),
    "fit": Strategy.fit_hip_excursion(),
}

ACCEPTANCE: list[str] = []


def cache_dir() -> Path:
    return Path(os.environ.get("SLIPGAIT_CACHE", Path(__file__).resolve().parents[1] / ".cache"))


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def store():
    return ResultStore(cache_dir())


@pytest.fixture(scope="session")
def context(store, params):
    table = store.table(PLAN_ENERGY, PLAN_GRID, params)
    return planning_context(table, PLAN_DELTA)


class _Plans:
    def __init__(self, ctx):
        self.ctx = ctx
        self._plans = {}

    def get(self, source, target, strategy="froude"):
        key = (source, target, strategy)
        if key not in self._plans:
            self._plans[key] = plan_transition(source, target, self.ctx.E, self.ctx.delta_alpha,
                                               STRATEGIES[strategy], context=self.ctx)
        return self._plans[key]


@pytest.fixture(scope="session")
def plans(context):
    return _Plans(context)


@pytest.fixture
def report():
    def add(criterion: int, ok: bool, detail: str):
        ACCEPTANCE.append(f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
