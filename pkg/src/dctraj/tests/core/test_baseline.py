"""Tests for the static PSO baseline.

File: dctraj/tests/core/test_baseline.py
"""

import math

import numpy as np
import pytest

from dctraj.core.assign import ScheduleFill, solve_association
from dctraj.core.baseline import (
    BaselineError,
    PsoOptions,
    pso_minimize,
    solve_static,
    static_as_trajectory,
    static_costs,
)
from dctraj.core.bcd import BcdOptions, RepairStrategy, repair_initial, solve
from dctraj.core.channel import d2b_pathloss
from dctraj.core.metrics import summarize
from dctraj.core.model import Scenario, initial_trajectories, validate_solution

def _sphere(center: np.ndarray):
    def fitness(x: np.ndarray) -> np.ndarray:
        return np.sum((x - center) ** 2, axis=1)
    return fitness

# Swarm
def test_pso_minimizes_sphere():
    """Test convergence on a smooth bowl."""
    center = np.array([1.0, -2.0])
    result = pso_minimize(
        _sphere(center),
        lower=np.array([-5.0, -5.0]),
        upper=np.array([5.0, 5.0]),
        start=np.array([4.0, 4.0]),
        opts=PsoOptions(swarm_size=30, iterations_per_drone=200),
        rng=np.random.default_rng(0),
    )
    assert result.cost < 1e-4
    assert result.position == pytest.approx(center, abs=1e-2)

def test_pso_history_non_increasing():
    """Test that the global best never gets worse and starts at or below the seed."""
    center = np.array([0.5, 0.5])
    start = np.array([-3.0, 2.0])
    result = pso_minimize(
        _sphere(center), np.array([-4.0, -4.0]), np.array([4.0, 4.0]), start,
        PsoOptions(swarm_size=10, iterations_per_drone=50), np.random.default_rng(1),
    )
    assert len(result.history) == 51
    assert result.history[0] <= float(np.sum((start - center) ** 2))
    assert all(b <= a for a, b in zip(result.history, result.history[1:]))

def test_pso_never_returns_infeasible():
    """Test that +inf fitness keeps particles out of the global best."""
    center = np.array([-1.0, 0.0])

    def fitness(x: np.ndarray) -> np.ndarray:
        cost = np.sum((x - center) ** 2, axis=1)
        return np.where(x[:, 0] >= 0.0, cost, math.inf)

    result = pso_minimize(
        fitness, np.array([-2.0, -2.0]), np.array([2.0, 2.0]), np.array([1.0, 1.0]),
        PsoOptions(swarm_size=20, iterations_per_drone=100), np.random.default_rng(2),
    )
    assert result.position[0] >= 0.0
    assert math.isfinite(result.cost)

def test_pso_options_validation():
    """Test the option checks."""
    assert not PsoOptions().validate()
    assert len(PsoOptions(swarm_size=0, inertia=-1.0).validate()) == 2

# Static deployment
def test_static_deployment_feasible(small_scenario: Scenario, fast_pso: PsoOptions):
    """Test that every hover point meets the backhaul bound."""
    dep = solve_static(small_scenario, fast_pso)
    rho = np.maximum(np.hypot(dep.positions[:, 0], dep.positions[:, 1]), 1.0)
    assert np.all(np.asarray(d2b_pathloss(rho, dep.positions[:, 2], small_scenario.d2b)) <= small_scenario.l_db)
    sol = static_as_trajectory(dep, small_scenario)
    assert validate_solution(small_scenario, sol) == []

def test_static_deployment_improves_on_ring(small_scenario: Scenario, fast_pso: PsoOptions):
    """Test that the swarm never ends worse than its repaired ring start."""
    ring = repair_initial(small_scenario, initial_trajectories(small_scenario), RepairStrategy.ALTITUDE)
    positions = np.array(ring.points[:, 0, :])
    start_costs = static_costs(small_scenario, positions)
    start_assoc = solve_association(start_costs, small_scenario.n_u)
    start_total = float(np.sum(start_costs[start_assoc.a > 0]))

    dep = solve_static(small_scenario, fast_pso)
    final_costs = static_costs(small_scenario, dep.positions)
    assert float(np.sum(final_costs[dep.assoc.a > 0])) <= start_total + 1e-9

def test_static_seed_defaults_to_scenario(small_scenario: Scenario):
    """Test that seed=None uses the scenario seed."""
    opts = dict(swarm_size=8, iterations_per_drone=10, outer_rounds=1)
    a = solve_static(small_scenario, PsoOptions(seed=None, **opts))
    b = solve_static(small_scenario, PsoOptions(seed=small_scenario.seed, **opts))
    assert np.array_equal(a.positions, b.positions)

def test_invalid_options_raise(small_scenario: Scenario):
    """Test that solve_static refuses invalid options."""
    with pytest.raises(BaselineError):
        solve_static(small_scenario, PsoOptions(outer_rounds=0))

def test_static_minimal_fill(open_scenario: Scenario, fast_pso: PsoOptions):
    """Test that minimal fill keeps s_min slots per user."""
    sol = static_as_trajectory(solve_static(open_scenario, fast_pso), open_scenario, ScheduleFill.MINIMAL)
    counts = sol.sched.k.sum(axis=2)[sol.assoc.a > 0]
    assert np.all(counts == open_scenario.s_min)

def test_single_user_methods_agree(single_user_scenario: Scenario):
    """Test that with one user both methods hover over it."""
    s = single_user_scenario
    dep = solve_static(s, PsoOptions(swarm_size=30, iterations_per_drone=200, outer_rounds=1, seed=1))
    assert np.hypot(*(dep.positions[0, :2] - s.users[0])) < 1.0

    static = summarize(static_as_trajectory(dep, s), s)
    design = summarize(solve(s, BcdOptions(max_iterations=100)), s)
    assert abs(static.mean_per_user - design.mean_per_user) < 0.5
