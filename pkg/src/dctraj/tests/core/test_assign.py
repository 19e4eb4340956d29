"""Tests for the association and scheduling solvers.

File: dctraj/tests/core/test_assign.py

The flow solvers are checked against the exhaustive solvers and against an
independent enumeration written here.
"""

import itertools
import math

import numpy as np
import pytest

from dctraj.core.assign import (
    AssignError,
    InfeasibleAssignmentError,
    ScheduleFill,
    SizeGuardError,
    association_cost_matrix,
    association_objective,
    brute_force_association,
    brute_force_schedule,
    schedule_objective,
    slot_cost_tensor,
    solve_association,
    solve_scheduling,
)
from dctraj.core.model import Association

TOL = 1e-4

def _enumerate_association(cost: np.ndarray, n_u: int) -> float:
    U, D = cost.shape
    best = math.inf
    for labels in itertools.product(range(D), repeat=U):
        if max(labels.count(d) for d in range(D)) <= n_u:
            best = min(best, sum(cost[u, d] for u, d in enumerate(labels)))
    return best

def _random_schedule_instance(rng: np.random.Generator):
    U = int(rng.integers(1, 7))
    D = int(rng.integers(1, 4))
    N = int(rng.integers(6, 13))
    s_min = int(rng.integers(1, 3))
    labels = rng.permutation(np.arange(U) % D)
    if max(np.bincount(labels, minlength=D)) * s_min > N:
        s_min = 1
    assoc = Association.from_labels(labels, D)
    w = slot_cost_tensor(rng.uniform(60.0, 120.0, size=(U, D, N)), assoc)
    return w, assoc, s_min, N

# Association
def test_association_matches_enumeration():
    """Test optimality on seeded random instances."""
    rng = np.random.default_rng(0)
    for _ in range(100):
        U, D = int(rng.integers(1, 7)), int(rng.integers(1, 4))
        n_u = int(rng.integers(math.ceil(U / D), U + 1))
        cost = rng.uniform(50.0, 150.0, size=(U, D))
        assoc = solve_association(cost, n_u)
        assert assoc.a.sum(axis=1).tolist() == [1] * U
        assert assoc.a.sum(axis=0).max() <= n_u
        assert association_objective(cost, assoc) == pytest.approx(_enumerate_association(cost, n_u), abs=TOL)

def test_association_matches_brute_force():
    """Test that the flow and exhaustive solvers agree."""
    rng = np.random.default_rng(1)
    for _ in range(200):
        U, D = int(rng.integers(1, 7)), int(rng.integers(1, 4))
        n_u = int(rng.integers(math.ceil(U / D), U + 1))
        cost = rng.uniform(50.0, 150.0, size=(U, D))
        flow = association_objective(cost, solve_association(cost, n_u))
        exhaustive = association_objective(cost, brute_force_association(cost, n_u))
        assert flow == pytest.approx(exhaustive, abs=TOL)

def test_association_respects_capacity():
    """Test that the cap pushes users to their second choice."""
    cost = np.array([[1.0, 5.0], [1.0, 6.0], [1.0, 7.0]])
    assoc = solve_association(cost, n_u=2)
    assert assoc.labels().tolist() == [1, 0, 0]

def test_association_tie_break():
    """Test that ties go to the lower DC index."""
    assoc = solve_association(np.ones((2, 3)), n_u=2)
    assert assoc.labels().tolist() == [0, 0]

def test_association_worked_example():
    """Test the three-user example with a tie on the last user."""
    cost = np.array([[1.0, 9.0], [9.0, 1.0], [5.0, 5.0]])
    assoc = solve_association(cost, n_u=2)
    assert assoc.labels().tolist() == [0, 1, 0]
    assert association_objective(cost, assoc) == pytest.approx(7.0)
    assert _enumerate_association(cost, 2) == pytest.approx(7.0)

def test_association_forbidden_pairs():
    """Test that +inf costs are never chosen."""
    cost = np.array([[math.inf, 3.0], [1.0, math.inf]])
    assert solve_association(cost, n_u=1).labels().tolist() == [1, 0]

def test_association_infeasible():
    """Test capacity and stranded-user errors."""
    with pytest.raises(InfeasibleAssignmentError):
        solve_association(np.ones((5, 2)), n_u=2)
    with pytest.raises(InfeasibleAssignmentError):
        solve_association(np.array([[math.inf, math.inf]]), n_u=1)

def test_association_cost_matrix():
    """Test the cost over a user's transmit slots."""
    pathloss = np.arange(2 * 2 * 3, dtype=float).reshape(2, 2, 3)
    pattern = np.array([[1, 0, 1], [0, 1, 0]])
    cost = association_cost_matrix(pathloss, pattern)
    assert cost[0, 1] == pathloss[0, 1, 0] + pathloss[0, 1, 2]
    assert cost[1, 0] == pathloss[1, 0, 1]

# Scheduling
@pytest.mark.parametrize("fill", [ScheduleFill.MINIMAL, ScheduleFill.FULL])
def test_scheduling_matches_brute_force(fill: ScheduleFill):
    """Test that the flow and exhaustive schedules have equal cost on 100 instances per fill."""
    rng = np.random.default_rng(2)
    for _ in range(100):
        w, assoc, s_min, N = _random_schedule_instance(rng)
        flow = schedule_objective(w, solve_scheduling(w, assoc, s_min, N, fill))
        exhaustive = schedule_objective(w, brute_force_schedule(w, assoc, s_min, N, fill))
        assert flow == pytest.approx(exhaustive, abs=TOL)

def test_scheduling_worked_example():
    """Test two users on one DC over five slots with the last slot expensive."""
    assoc = Association.from_labels([0, 0], 1)
    pathloss = np.full((2, 1, 5), 90.0)
    pathloss[0, 0, :2] = 70.0
    pathloss[1, 0, 2:4] = 70.0
    pathloss[:, 0, 4] = 120.0
    w = slot_cost_tensor(pathloss, assoc)
    for solver in (solve_scheduling, brute_force_schedule):
        sched = solver(w, assoc, 2, 5, ScheduleFill.MINIMAL)
        assert sched.served_users()[0].tolist() == [0, 0, 1, 1, -1]
        assert schedule_objective(w, sched) == pytest.approx(280.0)

def test_minimal_fill_gives_exactly_s_min():
    """Test the slot count per user under minimal fill."""
    rng = np.random.default_rng(3)
    w, assoc, s_min, N = _random_schedule_instance(rng)
    sched = solve_scheduling(w, assoc, s_min, N, ScheduleFill.MINIMAL)
    counts = sched.k.sum(axis=2)[assoc.a > 0]
    assert np.all(counts == s_min)

def test_full_fill_uses_every_slot():
    """Test that a DC with users schedules every slot exactly once."""
    rng = np.random.default_rng(4)
    w, assoc, s_min, N = _random_schedule_instance(rng)
    sched = solve_scheduling(w, assoc, s_min, N, ScheduleFill.FULL)
    per_slot = sched.k.sum(axis=0)
    for d in range(assoc.num_dcs):
        expected = 1 if assoc.users_of(d).size else 0
        assert np.all(per_slot[d] == expected)
    counts = sched.k.sum(axis=2)[assoc.a > 0]
    assert np.all(counts >= s_min)

def test_scheduling_follows_association():
    """Test that users only transmit to their own DC."""
    rng = np.random.default_rng(5)
    w, assoc, s_min, N = _random_schedule_instance(rng)
    sched = solve_scheduling(w, assoc, s_min, N)
    assert np.all(sched.k <= assoc.a[:, :, None])

def test_scheduling_infeasible():
    """Test that too many users for the period raise."""
    assoc = Association.from_labels([0, 0, 0], 1)
    w = slot_cost_tensor(np.ones((3, 1, 4)), assoc)
    with pytest.raises(InfeasibleAssignmentError):
        solve_scheduling(w, assoc, s_min=2, num_slots=4)

def test_scheduling_shape_checked():
    """Test the slot cost shape check."""
    assoc = Association.from_labels([0], 1)
    with pytest.raises(AssignError):
        solve_scheduling(np.ones((1, 1, 3)), assoc, s_min=1, num_slots=4)

# Guards and parsing
def test_brute_force_size_guard():
    """Test that exhaustive solvers refuse large instances."""
    with pytest.raises(SizeGuardError):
        brute_force_association(np.ones((9, 2)), n_u=9)
    assoc = Association.from_labels([0, 0], 1)
    with pytest.raises(SizeGuardError):
        brute_force_schedule(np.ones((2, 1, 13)), assoc, s_min=1, num_slots=13)

def test_schedule_fill_from_string():
    """Test case-insensitive parsing."""
    assert ScheduleFill.from_string("Full") is ScheduleFill.FULL
    assert ScheduleFill.from_string("minimal") is ScheduleFill.MINIMAL
    with pytest.raises(AssignError):
        ScheduleFill.from_string("half")
