"""
Drone-cell trajectory design for uplink IoT users.

Re-exports the entry points most callers need: scenario generation, the
block-coordinate trajectory solver, the static PSO baseline and the
pathloss metrics.

File: dctraj/__init__.py
"""

from .core.baseline import PsoOptions, StaticDeployment, solve_static, static_as_trajectory
from .core.bcd import BcdOptions, RepairStrategy, solve
from .core.metrics import UserPathlossSummary, compare, hovering_fraction, summarize
from .core.model import (
    Scenario,
    Solution,
    Violation,
    apply_scenario_overrides,
    generate_scenario,
    validate_solution,
)
from .core.serialization import read_scenario, read_solution, write_scenario, write_solution

__version__ = "0.3.0.dev0"

__all__ = [
    "BcdOptions",
    "PsoOptions",
    "RepairStrategy",
    "Scenario",
    "Solution",
    "StaticDeployment",
    "UserPathlossSummary",
    "Violation",
    "apply_scenario_overrides",
    "compare",
    "generate_scenario",
    "hovering_fraction",
    "read_scenario",
    "read_solution",
    "solve",
    "solve_static",
    "static_as_trajectory",
    "summarize",
    "validate_solution",
    "write_scenario",
    "write_solution",
]
