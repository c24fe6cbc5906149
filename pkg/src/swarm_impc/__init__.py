"""Distributed MPC for multi-robot trajectory generation with online deadlock resolution."""

from .engine import BVC, IMPC_DR, EngineConfig, RunResult, comm_range, run
from .model import ModelParams, RobotState
from .scenarios import Scenario, gen_scenario, preset
from .verification import check_run_collision_free, run_metrics

__all__ = [
    "BVC", "IMPC_DR", "EngineConfig", "RunResult", "comm_range", "run", "ModelParams",
    "RobotState", "Scenario", "gen_scenario", "preset", "check_run_collision_free",
    "run_metrics",
]
__version__ = "0.1.0"
