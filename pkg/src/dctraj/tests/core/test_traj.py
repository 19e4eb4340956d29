"""Tests for the per-slot trajectory updates.

File: dctraj/tests/core/test_traj.py

Covers:
- Disk projection against a grid search
- Keep-out handling and the no-progress fallback
- Altitude optimization against golden-section search
- Altitude windows
- Sweeps keeping the solution feasible and the objective non-increasing
"""

import math

import numpy as np
import pytest

from dctraj.core.bcd import BcdOptions, initial_solution
from dctraj.core.channel import U2dParams, u2d_pathloss
from dctraj.core.model import Scenario, validate_solution
from dctraj.core.traj import (
    AltitudeWindow,
    DiskConstraint,
    EmptyWindowError,
    TrajectoryError,
    altitude_sweep,
    altitude_window,
    check_unimodal,
    horizontal_sweep,
    optimize_altitude,
    project_horizontal,
    slot_targets,
)

GRID = 400

def _golden_section(f, lo: float, hi: float, tol: float = 1e-7) -> float:
    ratio = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - ratio * (b - a), a + ratio * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - ratio * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + ratio * (b - a)
            fd = f(d)
    return 0.5 * (a + b)

# Horizontal projection
def test_disk_constraint():
    """Test containment and projection onto a disk."""
    disk = DiskConstraint((1.0, 1.0), 2.0)
    assert disk.contains(2.0, 2.0)
    assert not disk.contains(4.0, 1.0)
    assert disk.project(5.0, 1.0) == pytest.approx((3.0, 1.0))
    with pytest.raises(TrajectoryError):
        DiskConstraint((0.0, 0.0), -1.0)

def test_project_target_inside():
    """Test that a feasible target is returned unchanged."""
    result = project_horizontal((0.2, 0.1), [DiskConstraint((0.0, 0.0), 1.0)], (0.0, 0.0))
    assert result == pytest.approx([0.2, 0.1])

def test_project_single_disk():
    """Test projection of an outside target onto one disk."""
    result = project_horizontal((2.0, 0.0), [DiskConstraint((0.0, 0.0), 1.0)], (0.0, 0.0))
    assert result == pytest.approx([1.0, 0.0], abs=1e-6)

def test_project_matches_grid_search():
    """Test two-disk projections against a 400x400 grid search."""
    disks = [DiskConstraint((0.0, 0.0), 1.0), DiskConstraint((1.0, 0.0), 1.0)]
    xs = np.linspace(0.0, 1.0, GRID)
    ys = np.linspace(-1.0, 1.0, GRID)
    gx, gy = np.meshgrid(xs, ys)
    inside = (np.hypot(gx, gy) <= 1.0) & (np.hypot(gx - 1.0, gy) <= 1.0)
    px, py = gx[inside], gy[inside]

    rng = np.random.default_rng(0)
    for _ in range(100):
        target = rng.uniform(-3.0, 3.0, size=2)
        result = project_horizontal(target, disks, (0.5, 0.0))
        assert all(disk.contains(*result) for disk in disks)
        got = math.hypot(*(result - target))
        best = float(np.min(np.hypot(px - target[0], py - target[1])))
        assert got <= best + 1e-2

def test_project_is_idempotent():
    """Test that projecting a projection returns the same point."""
    disks = [DiskConstraint((0.0, 0.0), 1.0), DiskConstraint((1.0, 0.0), 1.0)]
    rng = np.random.default_rng(1)
    for _ in range(100):
        target = rng.uniform(-3.0, 3.0, size=2)
        first = project_horizontal(target, disks, (0.5, 0.0))
        second = project_horizontal(first, disks, first)
        assert math.hypot(*(second - first)) <= 1e-6

def test_project_keep_out():
    """Test that a keep-out disk stops the move at its boundary."""
    result = project_horizontal(
        (-2.0, 0.0),
        [DiskConstraint((0.0, 0.0), 3.0)],
        (2.0, 0.0),
        keep_out=DiskConstraint((0.0, 0.0), 1.0),
    )
    assert result == pytest.approx([1.0, 0.0], abs=1e-9)

def test_project_no_progress_returns_start():
    """Test that a move that gets no closer keeps the start."""
    result = project_horizontal(
        (-2.0, 0.0),
        [DiskConstraint((0.0, 0.0), 3.0)],
        (1.0, 0.0),
        keep_out=DiskConstraint((0.0, 0.0), 1.0),
    )
    assert result.tolist() == [1.0, 0.0]

def test_slot_targets():
    """Test that idle slots steer toward the next scheduled user."""
    served = np.array([-1, 2, -1, -1, 0, -1])
    assert slot_targets(served).tolist() == [2, 2, 0, 0, 0, 2]
    assert slot_targets(np.full(4, -1)).tolist() == [-1, -1, -1, -1]

# Altitude
def test_optimize_altitude_matches_golden_section():
    """Test the safeguarded Newton search on random distances."""
    p = U2dParams()
    window = AltitudeWindow(10.0, 1000.0)
    rng = np.random.default_rng(1)
    for r in rng.uniform(20.0, 600.0, size=100):
        h = optimize_altitude(float(r), window, p)
        reference = _golden_section(lambda x: float(u2d_pathloss(r, x, p)), window.lo, window.hi)
        assert h == pytest.approx(reference, abs=1e-2)

def test_optimize_altitude_at_bounds():
    """Test clamping to the window when the optimum lies outside it."""
    p = U2dParams()
    free = optimize_altitude(200.0, AltitudeWindow(10.0, 1000.0), p)
    assert optimize_altitude(200.0, AltitudeWindow(10.0, free - 50.0), p) == pytest.approx(free - 50.0)
    assert optimize_altitude(200.0, AltitudeWindow(free + 50.0, 1000.0), p) == pytest.approx(free + 50.0)

def test_optimize_altitude_overhead():
    """Test that a DC above its user descends to the window floor."""
    assert optimize_altitude(0.0, AltitudeWindow(10.0, 200.0), U2dParams()) == 10.0

def test_altitude_window_checks():
    """Test window construction and intersection."""
    with pytest.raises(EmptyWindowError):
        AltitudeWindow(5.0, 1.0)
    window = AltitudeWindow(10.0, 100.0)
    assert window.intersect(50.0, 200.0) == AltitudeWindow(50.0, 100.0)
    assert window.intersect(150.0, 200.0) is None

def test_check_unimodal():
    """Test the unimodality audit on the default model."""
    assert check_unimodal(300.0, AltitudeWindow(10.0, 1000.0), U2dParams())

def test_altitude_window_climb_rate(open_scenario: Scenario):
    """Test the climb-rate window around a slot."""
    points = np.zeros((3, 3))
    points[:, 0] = 100.0
    points[:, 2] = [90.0, 95.0, 100.0]
    window = altitude_window(points, 1, open_scenario)
    assert window == AltitudeWindow(90.0, 100.0)

def test_altitude_window_empty(open_scenario: Scenario):
    """Test that neighbours too far apart leave no window."""
    points = np.zeros((3, 3))
    points[:, 0] = 100.0
    points[:, 2] = [20.0, 50.0, 80.0]
    assert altitude_window(points, 1, open_scenario) is None

# Sweeps
@pytest.mark.parametrize("fixture", ["small_scenario", "open_scenario"])
def test_sweeps_keep_feasibility(fixture: str, request: pytest.FixtureRequest):
    """Test that both sweeps keep the solution feasible and never raise the objective."""
    s = request.getfixturevalue(fixture)
    sol = initial_solution(s, BcdOptions())
    assert validate_solution(s, sol) == []

    moved = horizontal_sweep(sol, s)
    assert moved.objective <= sol.objective + 1e-9
    assert validate_solution(s, moved) == []

    lifted = altitude_sweep(moved, s)
    assert lifted.objective <= moved.objective + 1e-9
    assert validate_solution(s, lifted) == []

def test_horizontal_sweep_moves_toward_users(open_scenario: Scenario):
    """Test that an unconstrained sweep strictly lowers the objective."""
    sol = initial_solution(open_scenario, BcdOptions())
    assert horizontal_sweep(sol, open_scenario).objective < sol.objective
