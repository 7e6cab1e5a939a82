"""Deterministic packet-level simulator (dumbbell and parking-lot topologies)."""
from .engine import compiled_available, select_engine
from .run import (RunResult, audit_counters, audit_trace, build_engine, measure_statistic,
                  red_mark, red_probability, run)
from .spec import Dumbbell, FlowSummary, LinkSpec, NoiseSpec, ParkingLot, ScenarioSpec

__all__ = [
    "Dumbbell", "ParkingLot", "LinkSpec", "NoiseSpec", "ScenarioSpec", "FlowSummary",
    "RunResult", "run", "build_engine", "measure_statistic", "red_mark", "red_probability",
    "audit_counters", "audit_trace", "compiled_available", "select_engine",
]
