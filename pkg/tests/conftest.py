"""Shared fixtures.

The fifteen scripted runs (five designs, three temperature buckets) are
executed once per session and reused everywhere; each run is pure and
in-memory, so sharing the results is safe.
"""

from __future__ import annotations

import time
from pathlib import Path

import pytest

from tapeloop.bus import BusEvent
from tapeloop.tooling import Scenario, load_scenario
from tapeloop.workflow import RunState, execute_scenario_run

ROOT = Path(__file__).resolve().parent.parent
SCENARIO_DIR = ROOT / "scenarios"
SPEC_DIR = ROOT / "specs"
ZERO_SHOT_PATH = ROOT / "data" / "zero_shot.json"

DESIGNS = ("crc", "ecc", "fifo", "lemming", "timer")
BUCKET_TEMPS = {"low": 0.2, "mid": 0.5, "high": 0.8}


@pytest.fixture(scope="session")
def scenarios() -> dict[str, Scenario]:
    return {d: load_scenario(SCENARIO_DIR / f"{d}.json") for d in DESIGNS}


@pytest.fixture(scope="session")
def runs(
    scenarios: dict[str, Scenario],
) -> dict[tuple[str, str], tuple[RunState, list[BusEvent], float]]:
    """(design, bucket) -> (final state, events, wall seconds)."""
    out: dict[tuple[str, str], tuple[RunState, list[BusEvent], float]] = {}
    for design, scenario in scenarios.items():
        for bucket, temp in BUCKET_TEMPS.items():
            t0 = time.perf_counter()
            state, log = execute_scenario_run(scenario, temp)
            out[(design, bucket)] = (state, log.events(), time.perf_counter() - t0)
    return out


def pytest_runtest_logreport(report):
    """One explicit verdict line per acceptance check."""
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        verdict = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"\n[acceptance] {verdict}: {name}", flush=True)
