"""Block-coordinate descent driver.

Each iteration re-solves the four blocks in turn, others fixed:
association, scheduling, horizontal waypoints, altitudes. The run stops
when the largest per-slot 3D waypoint displacement between iterations falls
below epsilon, or at max_iterations with the incumbent reported as not
converged.

The objective never increases: the integer blocks are solved exactly (an
association change is kept only if it does not lose against rescheduling
under the previous association) and every per-slot move is monotone.

File: dctraj/core/bcd.py
"""

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np

from .assign import (
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
from .channel import (
    R_MIN,
    InfeasibleAltitudeError,
    d2b_feasible_altitude_interval,
    d2b_feasible_radius,
    d2b_pathloss,
)
from .model import (
    PATHLOSS_TOL,
    Association,
    InfeasibleScheduleError,
    IterationRecord,
    Scenario,
    Schedule,
    Solution,
    Trajectory,
    initial_schedule,
    initial_trajectories,
    slot_pathloss,
)
from .traj import altitude_sweep, horizontal_sweep

logger = logging.getLogger(__name__)

ORACLE_TOL = 1e-6   # dB

class BcdError(Exception):
    """Base exception for the BCD driver."""
    pass

class InfeasibleScenarioError(BcdError):
    """Raised when no feasible initial state can be built."""
    pass

class OracleMismatchError(BcdError):
    """Raised when an exact solver disagrees with exhaustive enumeration."""
    pass

class MonotonicityError(BcdError):
    """Raised in oracle mode when an iteration increases the objective."""
    pass

class RepairStrategy(str, Enum):
    """How an infeasible initial waypoint is moved into the backhaul region.

    ALTITUDE keeps the ring position and picks the closest feasible
    altitude; RADIAL keeps the altitude and pulls the DC toward the BS.
    ALTITUDE falls back to RADIAL where no altitude works.
    """
    ALTITUDE = "altitude"
    RADIAL = "radial"

@dataclass
class BcdOptions:
    """Driver options.

    epsilon=None uses the scenario's own convergence threshold.
    """
    epsilon: Optional[float] = None
    max_iterations: int = 100
    schedule_fill: ScheduleFill = ScheduleFill.FULL
    record_history: bool = True
    check_unimodality: bool = True
    oracle: bool = False
    repair: RepairStrategy = RepairStrategy.ALTITUDE
    on_iteration: Optional[Callable[[IterationRecord], None]] = field(default=None, repr=False, compare=False)

    def validate(self) -> List[str]:
        """Validate driver options.

        Returns:
            List of validation error messages (empty if valid)
        """
        errors = []
        if self.epsilon is not None and not self.epsilon > 0:
            errors.append(f"bcd.epsilon must be positive, got {self.epsilon}")
        if isinstance(self.max_iterations, bool) or not isinstance(self.max_iterations, int) or self.max_iterations < 1:
            errors.append(f"bcd.max_iterations must be an integer >= 1, got {self.max_iterations}")
        if not isinstance(self.schedule_fill, ScheduleFill):
            errors.append(f"bcd.schedule_fill must be minimal or full, got {self.schedule_fill}")
        if not isinstance(self.repair, RepairStrategy):
            errors.append(f"bcd.repair must be altitude or radial, got {self.repair}")
        return errors

def _backhaul_ok(rho: float, h: float, s: Scenario) -> bool:
    return s.l_db == math.inf or float(d2b_pathloss(max(rho, R_MIN), h, s.d2b)) <= s.l_db

def _closest_feasible_altitude(rho: float, h: float, s: Scenario) -> Optional[float]:
    best = None
    for lo, hi in d2b_feasible_altitude_interval(max(rho, R_MIN), s.l_db, s.d2b, h_cap=s.h_cap):
        lo, hi = max(lo, s.h_min), min(hi, s.h_cap)
        if lo > hi:
            continue
        candidate = min(max(h, lo), hi)
        if best is None or abs(candidate - h) < abs(best - h):
            best = candidate
    return best

def _radial_pull(x: float, y: float, h: float, s: Scenario) -> Tuple[float, float]:
    try:
        radius = d2b_feasible_radius(h, s.l_db, s.d2b)
    except InfeasibleAltitudeError as e:
        raise InfeasibleScenarioError(f"No feasible position at altitude {h} m: {e}") from e
    rho = math.hypot(x, y)
    if rho <= radius:
        return x, y
    scale = radius / rho
    return x * scale, y * scale

def repair_initial(s: Scenario, trajectory: Trajectory, strategy: RepairStrategy = RepairStrategy.ALTITUDE) -> Trajectory:
    """Move each waypoint of a static deployment into the backhaul region.

    Raises:
        InfeasibleScenarioError: If some waypoint cannot be repaired
    """
    points = np.array(trajectory.points)
    repaired = 0
    for d in range(points.shape[0]):
        for n in range(points.shape[1]):
            x, y, h = (float(v) for v in points[d, n])
            if _backhaul_ok(math.hypot(x, y), h, s) and s.h_min <= h <= s.h_cap:
                continue
            h = min(max(h, s.h_min), s.h_cap)
            new_h = _closest_feasible_altitude(math.hypot(x, y), h, s) if strategy is RepairStrategy.ALTITUDE else None
            if new_h is not None:
                points[d, n, 2] = new_h
            else:
                points[d, n, 0], points[d, n, 1] = _radial_pull(x, y, h, s)
                points[d, n, 2] = h
            repaired += 1
    if repaired:
        logger.info(f"Repaired {repaired} initial waypoints into the backhaul region ({strategy.value})")
    return Trajectory(points)

def initial_association(s: Scenario, trajectory: Trajectory) -> Association:
    """Associate users by mean slot pathloss to each DC's initial trajectory."""
    cost = slot_pathloss(s, trajectory).mean(axis=2)
    return solve_association(cost, s.n_u)

def initial_solution(s: Scenario, opts: BcdOptions) -> Solution:
    """Feasible starting point: repaired ring, pathloss association, round-robin schedule.

    Raises:
        InfeasibleScenarioError: If no feasible start exists
    """
    trajectory = repair_initial(s, initial_trajectories(s), opts.repair)
    assoc = initial_association(s, trajectory)
    try:
        sched = initial_schedule(s, assoc)
    except InfeasibleScheduleError as e:
        raise InfeasibleScenarioError(str(e)) from e
    return Solution.build(s, trajectory, assoc, sched)

def _schedule_for(s: Scenario, pathloss: np.ndarray, assoc: Association, fill: ScheduleFill) -> Tuple[Schedule, np.ndarray]:
    w = slot_cost_tensor(pathloss, assoc)
    return solve_scheduling(w, assoc, s.s_min, s.num_slots, fill), w

class _Oracle:
    """Re-solves the integer blocks exhaustively while the instance is small enough."""

    def __init__(self, enabled: bool):
        self.enabled = enabled

    def check_association(self, cost: np.ndarray, n_u: int, assoc: Association) -> None:
        if not self.enabled:
            return
        try:
            reference = brute_force_association(cost, n_u)
        except SizeGuardError as e:
            logger.warning(f"Oracle disabled: {e}")
            self.enabled = False
            return
        got, want = association_objective(cost, assoc), association_objective(cost, reference)
        if abs(got - want) > ORACLE_TOL:
            raise OracleMismatchError(f"Association objective {got} != exhaustive {want}")

    def check_schedule(self, s: Scenario, w: np.ndarray, assoc: Association, sched: Schedule, fill: ScheduleFill) -> None:
        if not self.enabled:
            return
        try:
            reference = brute_force_schedule(w, assoc, s.s_min, s.num_slots, fill)
        except SizeGuardError as e:
            logger.warning(f"Oracle disabled: {e}")
            self.enabled = False
            return
        got, want = schedule_objective(w, sched), schedule_objective(w, reference)
        if abs(got - want) > ORACLE_TOL:
            raise OracleMismatchError(f"Schedule objective {got} != exhaustive {want}")

def _assign_step(s: Scenario, sol: Solution, opts: BcdOptions, oracle: _Oracle) -> Tuple[Association, Schedule, bool]:
    """Association then scheduling with the trajectory fixed."""
    pathloss = slot_pathloss(s, sol.trajectory)
    cost = association_cost_matrix(pathloss, sol.sched.slot_pattern())
    assoc = solve_association(cost, s.n_u)
    oracle.check_association(cost, s.n_u, assoc)

    sched, w = _schedule_for(s, pathloss, assoc, opts.schedule_fill)
    changed = not assoc.same_as(sol.assoc)
    if changed:
        kept, kept_w = _schedule_for(s, pathloss, sol.assoc, opts.schedule_fill)
        if schedule_objective(kept_w, kept) <= schedule_objective(w, sched):
            logger.debug("Association change rejected: no gain over rescheduling")
            assoc, sched, w, changed = sol.assoc, kept, kept_w, False
    oracle.check_schedule(s, w, assoc, sched, opts.schedule_fill)
    return assoc, sched, changed

def solve(s: Scenario, opts: Optional[BcdOptions] = None) -> Solution:
    """Run block-coordinate descent from the initial ring deployment.

    Args:
        s: Validated scenario
        opts: Driver options (defaults when None)

    Returns:
        The final Solution; converged=False when max_iterations was reached

    Raises:
        BcdError: If the options are invalid
        InfeasibleScenarioError: If no feasible initial state exists
        OracleMismatchError: In oracle mode, when a solver is not exact
        MonotonicityError: In oracle mode, when an iteration raises the objective
    """
    opts = opts or BcdOptions()
    if errors := opts.validate():
        raise BcdError("\n".join(errors))
    epsilon = opts.epsilon if opts.epsilon is not None else s.epsilon

    sol = initial_solution(s, opts)
    oracle = _Oracle(opts.oracle)
    history: List[IterationRecord] = []
    converged = False
    logger.info(
        f"BCD start: {s.num_users} users, {s.num_dcs} DCs, {s.num_slots} slots, "
        f"objective {sol.objective:.6f} dB"
    )

    for t in range(1, opts.max_iterations + 1):
        started = time.perf_counter()
        previous = sol

        assoc, sched, changed = _assign_step(s, sol, opts, oracle)
        sol = Solution.build(s, sol.trajectory, assoc, sched)
        sol = horizontal_sweep(sol, s)
        sol = altitude_sweep(sol, s, check_unimodality=opts.check_unimodality)

        delta_g = sol.trajectory.displacement(previous.trajectory)
        if sol.objective > previous.objective + PATHLOSS_TOL * max(1.0, abs(previous.objective)):
            message = f"Objective rose from {previous.objective:.9f} to {sol.objective:.9f} at iteration {t}"
            if opts.oracle:
                raise MonotonicityError(message)
            logger.warning(message)

        record = IterationRecord(
            iteration=t,
            objective=sol.objective,
            delta_g=delta_g,
            elapsed_s=time.perf_counter() - started,
            assoc_changed=changed,
        )
        if opts.record_history:
            history.append(record)
        logger.info(
            f"Iteration {t}: objective {record.objective:.6f} dB, delta_g {record.delta_g:.6f} m",
            extra={"bcd": asdict(record)}
        )
        if opts.on_iteration is not None:
            opts.on_iteration(record)

        if delta_g < epsilon:
            converged = True
            break

    if not converged:
        logger.warning(f"BCD stopped at max_iterations={opts.max_iterations} without reaching epsilon={epsilon}")
    return Solution.build(s, sol.trajectory, sol.assoc, sol.sched, history, converged)
