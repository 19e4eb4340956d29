"""Scenario and solution data model.

This module holds the problem data and everything that can be said about a
candidate solution without optimizing it:
- Scenario parameters and seeded scenario generation
- Trajectory, association and schedule containers
- The initial static ring deployment and round-robin schedule
- Evaluation of the total scheduled U2D pathloss (the objective)
- Full feasibility checking, reported as data

Containers are immutable: arrays are copied on construction and flagged
read-only, and solvers build new objects instead of mutating.

File: dctraj/core/model.py
"""

import logging
import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Any, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..utils.validation import check_positive, collect_errors
from .channel import R_MIN, D2bParams, U2dParams, d2b_pathloss, u2d_pathloss

logger = logging.getLogger(__name__)

# Defaults for a suburban single-BS deployment
DEFAULT_R_BS = 900.0
DEFAULT_NUM_USERS = 20
DEFAULT_NUM_DCS = 5
DEFAULT_NUM_SLOTS = 50
DEFAULT_S_MIN = 4
DEFAULT_V_MAX = 90.0          # m/slot
DEFAULT_H_MAX_RATE = 10.0     # m/slot
DEFAULT_L_DB = 80.0           # dB
DEFAULT_EPSILON = 0.1         # m
DEFAULT_H_INIT = 90.0         # m
DEFAULT_H_MIN = 10.0          # m
DEFAULT_H_CAP = 1000.0        # m

GEOMETRY_TOL = 1e-6     # m
PATHLOSS_TOL = 1e-6     # dB

class ModelError(Exception):
    """Base exception for data model errors."""
    pass

class ScenarioError(ModelError):
    """Raised when a scenario parameter set is invalid."""
    pass

class InfeasibleScheduleError(ModelError):
    """Raised when a DC has too many users to give each s_min slots."""
    pass

def _frozen_array(values: Any, dtype: Any) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array

def default_n_u(num_users: int, num_dcs: int, num_slots: int, s_min: int) -> int:
    """Default per-DC user cap: schedulability cap, or balanced load plus two."""
    return min(num_slots // s_min, math.ceil(num_users / num_dcs) + 2)

@dataclass(frozen=True, eq=False)
class Scenario:
    """BS-centred world: users, DCs and flight/backhaul limits.

    The BS sits at the origin. Speed limits are per slot.
    """
    users: np.ndarray
    num_dcs: int = DEFAULT_NUM_DCS
    seed: Optional[int] = None
    r_bs: float = DEFAULT_R_BS
    num_slots: int = DEFAULT_NUM_SLOTS
    s_min: int = DEFAULT_S_MIN
    n_u: Optional[int] = None
    v_max: float = DEFAULT_V_MAX
    h_max_rate: float = DEFAULT_H_MAX_RATE
    l_db: float = DEFAULT_L_DB
    epsilon: float = DEFAULT_EPSILON
    h_min: float = DEFAULT_H_MIN
    h_cap: float = DEFAULT_H_CAP
    h_init: float = DEFAULT_H_INIT
    u2d: U2dParams = field(default_factory=U2dParams)
    d2b: D2bParams = field(default_factory=D2bParams)
    bs_position: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        users = np.asarray(self.users, dtype=float)
        if users.ndim == 1 and users.size == 0:
            users = users.reshape(0, 2)
        object.__setattr__(self, "users", _frozen_array(users, float))
        if self.n_u is None and self.num_users > 0 and self.num_dcs > 0 and self.s_min > 0:
            object.__setattr__(
                self, "n_u",
                default_n_u(self.num_users, self.num_dcs, self.num_slots, self.s_min)
            )

    @property
    def num_users(self) -> int:
        return int(self.users.shape[0]) if self.users.ndim == 2 else 0

    def validate(self) -> List[str]:
        """Validate the parameter set.

        Returns:
            List of validation error messages (empty if valid)
        """
        errors = []
        if self.users.ndim != 2 or self.users.shape[1] != 2:
            errors.append(f"users must be an array of 2D points, got shape {self.users.shape}")
            return errors
        if self.num_users < 1:
            errors.append("At least one user is required")
        if self.num_dcs < 1:
            errors.append(f"At least one DC is required, got {self.num_dcs}")
        if self.num_slots < 1:
            errors.append(f"num_slots must be at least 1, got {self.num_slots}")
        if self.s_min < 1:
            errors.append(f"s_min must be at least 1, got {self.s_min}")
        if errors:
            return errors

        if not np.all(np.isfinite(self.users)):
            errors.append("User coordinates must be finite")
        elif self.num_users:
            outside = np.flatnonzero(np.hypot(self.users[:, 0], self.users[:, 1]) > self.r_bs + GEOMETRY_TOL)
            if outside.size:
                errors.append(f"Users {outside.tolist()} lie outside the BS coverage radius {self.r_bs} m")

        n_u = self.n_u or 0
        if n_u < 1:
            errors.append(f"n_u must be at least 1, got {self.n_u}")
        if n_u * self.num_dcs < self.num_users:
            errors.append(
                f"DC capacity too small: n_u * |D| = {n_u} * {self.num_dcs} < {self.num_users} users"
            )
        if self.s_min * n_u > self.num_slots:
            errors.append(
                f"s_min * n_u = {self.s_min} * {n_u} exceeds the period of {self.num_slots} slots"
            )
        if self.num_slots * self.num_dcs < self.num_users * self.s_min:
            errors.append(
                f"Period too short: N = {self.num_slots} < |U| * s_min / |D| = "
                f"{self.num_users * self.s_min / self.num_dcs:.2f}"
            )

        errors.extend(collect_errors(
            check_positive(name, getattr(self, name))
            for name in ("r_bs", "v_max", "h_max_rate", "epsilon", "h_min", "h_cap")
        ))
        if not math.isfinite(self.l_db) and self.l_db != math.inf:
            errors.append(f"l_db must be finite or +inf, got {self.l_db}")
        if not self.h_min < self.h_cap:
            errors.append(f"h_min ({self.h_min}) must be below h_cap ({self.h_cap})")
        if not self.h_min <= self.h_init <= self.h_cap:
            errors.append(f"h_init ({self.h_init}) must lie in [h_min, h_cap]")
        if tuple(self.bs_position) != (0.0, 0.0):
            errors.append("The BS must sit at the origin")

        errors.extend(self.u2d.validate())
        errors.extend(self.d2b.validate())
        return errors

SCENARIO_FIELDS = {f.name for f in fields(Scenario)} - {"users", "seed", "bs_position"}

def apply_scenario_overrides(scenario: Scenario, overrides: Optional[Mapping[str, Any]]) -> Scenario:
    """Return a copy of scenario with field overrides applied.

    Nested ``u2d`` / ``d2b`` values may be mappings of model-constant overrides.
    n_u is recomputed from the new sizes unless it is overridden itself.

    Raises:
        ScenarioError: On unknown fields or an invalid result
    """
    if not overrides:
        return scenario
    updated = replace(scenario, **_expand_params(scenario, overrides), n_u=overrides.get("n_u"))
    if errors := updated.validate():
        raise ScenarioError("\n".join(errors))
    return updated

def generate_scenario(
    seed: int,
    num_users: int = DEFAULT_NUM_USERS,
    num_dcs: int = DEFAULT_NUM_DCS,
    overrides: Optional[Mapping[str, Any]] = None
) -> Scenario:
    """Draw users uniformly in the BS coverage disk.

    Args:
        seed: RNG seed; the scenario is a pure function of (seed, parameters)
        num_users: Number of IoT users
        num_dcs: Number of DCs
        overrides: Scenario field overrides (see apply_scenario_overrides)

    Returns:
        A validated Scenario

    Raises:
        ScenarioError: If the parameter set violates a scenario invariant
    """
    if num_users < 1 or num_dcs < 1:
        raise ScenarioError(f"num_users and num_dcs must be at least 1, got {num_users}, {num_dcs}")

    template = Scenario(users=np.zeros((num_users, 2)), num_dcs=num_dcs, seed=seed)
    if overrides:
        template = replace(template, **_expand_params(template, overrides), n_u=overrides.get("n_u"))

    rng = np.random.default_rng(seed)
    radius = template.r_bs * np.sqrt(rng.random(num_users))
    angle = 2.0 * np.pi * rng.random(num_users)
    users = np.column_stack((radius * np.cos(angle), radius * np.sin(angle)))

    scenario = replace(template, users=users)
    if errors := scenario.validate():
        raise ScenarioError("\n".join(errors))
    logger.debug(f"Generated scenario seed={seed} users={num_users} dcs={num_dcs} n_u={scenario.n_u}")
    return scenario

def _expand_params(scenario: Scenario, changes: Mapping[str, Any]) -> dict:
    expanded = {}
    for key, value in changes.items():
        if key not in SCENARIO_FIELDS:
            raise ScenarioError(f"Unknown scenario field '{key}'")
        if key == "n_u":
            continue
        if key in ("u2d", "d2b") and isinstance(value, Mapping):
            try:
                value = replace(getattr(scenario, key), **value)
            except TypeError as e:
                raise ScenarioError(f"Invalid {key} override: {e}") from e
        expanded[key] = value
    return expanded

@dataclass(frozen=True, eq=False)
class Trajectory:
    """Per-DC closed loop of N waypoints (x, y, h); slot N+1 is slot 1."""
    points: np.ndarray

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=float)
        if points.ndim != 3 or points.shape[2] != 3:
            raise ModelError(f"Trajectory points must have shape (D, N, 3), got {points.shape}")
        object.__setattr__(self, "points", _frozen_array(points, float))

    @classmethod
    def static(cls, positions: np.ndarray, num_slots: int) -> 'Trajectory':
        """Hover trajectories: every slot at the DC's position."""
        positions = np.asarray(positions, dtype=float).reshape(-1, 3)
        return cls(np.repeat(positions[:, None, :], num_slots, axis=1))

    @property
    def num_dcs(self) -> int:
        return int(self.points.shape[0])

    @property
    def num_slots(self) -> int:
        return int(self.points.shape[1])

    @property
    def horizontal(self) -> np.ndarray:
        return self.points[:, :, :2]

    @property
    def altitude(self) -> np.ndarray:
        return self.points[:, :, 2]

    def displacement(self, other: 'Trajectory') -> float:
        """Largest per-slot 3D displacement between two trajectories."""
        if self.points.shape != other.points.shape:
            raise ModelError("Trajectories have different shapes")
        if self.points.size == 0:
            return 0.0
        return float(np.max(np.linalg.norm(self.points - other.points, axis=2)))

@dataclass(frozen=True, eq=False)
class Association:
    """Binary user-to-DC matrix a[u][d]."""
    a: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.a)
        if a.ndim != 2:
            raise ModelError(f"Association must be a (U, D) matrix, got shape {a.shape}")
        object.__setattr__(self, "a", _frozen_array(a, np.int8))

    @classmethod
    def from_labels(cls, labels: Sequence[int], num_dcs: int) -> 'Association':
        """Build from one DC index per user."""
        a = np.zeros((len(labels), num_dcs), dtype=np.int8)
        for u, d in enumerate(labels):
            a[u, int(d)] = 1
        return cls(a)

    @property
    def num_users(self) -> int:
        return int(self.a.shape[0])

    @property
    def num_dcs(self) -> int:
        return int(self.a.shape[1])

    def labels(self) -> np.ndarray:
        """DC index per user (-1 when unassociated)."""
        labels = np.argmax(self.a, axis=1).astype(int)
        labels[self.a.sum(axis=1) == 0] = -1
        return labels

    def users_of(self, d: int) -> np.ndarray:
        return np.flatnonzero(self.a[:, d])

    def same_as(self, other: 'Association') -> bool:
        return self.a.shape == other.a.shape and bool(np.array_equal(self.a, other.a))

@dataclass(frozen=True, eq=False)
class Schedule:
    """Binary TDMA schedule k[u][d][n]."""
    k: np.ndarray

    def __post_init__(self) -> None:
        k = np.asarray(self.k)
        if k.ndim != 3:
            raise ModelError(f"Schedule must have shape (U, D, N), got {k.shape}")
        object.__setattr__(self, "k", _frozen_array(k, np.int8))

    @classmethod
    def empty(cls, num_users: int, num_dcs: int, num_slots: int) -> 'Schedule':
        return cls(np.zeros((num_users, num_dcs, num_slots), dtype=np.int8))

    @property
    def num_slots(self) -> int:
        return int(self.k.shape[2])

    def served_users(self) -> np.ndarray:
        """(D, N) matrix of the user served in each DC slot, -1 when idle."""
        served = np.argmax(self.k, axis=0).astype(int)
        served[self.k.sum(axis=0) == 0] = -1
        return served

    def slot_pattern(self) -> np.ndarray:
        """(U, N) matrix: 1 where the user transmits in that slot, to any DC."""
        return np.minimum(self.k.sum(axis=1), 1).astype(np.int8)

@dataclass(frozen=True)
class IterationRecord:
    """One block-coordinate iteration, as logged and stored in a solution."""
    iteration: int
    objective: float
    delta_g: float
    elapsed_s: float = 0.0
    assoc_changed: bool = False

@dataclass(frozen=True, eq=False)
class Solution:
    """Trajectory, association and schedule plus the objective they achieve."""
    trajectory: Trajectory
    assoc: Association
    sched: Schedule
    objective: float
    history: Tuple[IterationRecord, ...] = ()
    converged: bool = True

    @classmethod
    def build(
        cls,
        scenario: Scenario,
        trajectory: Trajectory,
        assoc: Association,
        sched: Schedule,
        history: Sequence[IterationRecord] = (),
        converged: bool = True
    ) -> 'Solution':
        """Assemble a solution, evaluating its objective from its own parts."""
        objective = evaluate_objective(scenario, trajectory, assoc, sched)
        return cls(trajectory, assoc, sched, objective, tuple(history), converged)

    @property
    def iterations(self) -> int:
        return len(self.history)

def _check_dimensions(
    scenario: Scenario,
    trajectory: Trajectory,
    assoc: Association,
    sched: Schedule
) -> List[str]:
    U, D, N = scenario.num_users, scenario.num_dcs, scenario.num_slots
    problems = []
    if trajectory.points.shape != (D, N, 3):
        problems.append(f"trajectory shape {trajectory.points.shape} != {(D, N, 3)}")
    if assoc.a.shape != (U, D):
        problems.append(f"association shape {assoc.a.shape} != {(U, D)}")
    if sched.k.shape != (U, D, N):
        problems.append(f"schedule shape {sched.k.shape} != {(U, D, N)}")
    return problems

def horizontal_distances(scenario: Scenario, trajectory: Trajectory) -> np.ndarray:
    """(U, D, N) horizontal user-to-DC distances."""
    offsets = trajectory.horizontal[None, :, :, :] - scenario.users[:, None, None, :]
    return np.linalg.norm(offsets, axis=3)

def slot_pathloss(scenario: Scenario, trajectory: Trajectory) -> np.ndarray:
    """(U, D, N) U2D pathloss of every user to every DC in every slot."""
    r = horizontal_distances(scenario, trajectory)
    h = np.broadcast_to(trajectory.altitude[None, :, :], r.shape)
    return np.asarray(u2d_pathloss(r, h, scenario.u2d))

def evaluate_objective(
    scenario: Scenario,
    trajectory: Trajectory,
    assoc: Association,
    sched: Schedule
) -> float:
    """Total U2D pathloss in dB over associated, scheduled (user, DC, slot) triples.

    Raises:
        ModelError: If the parts are dimensionally inconsistent
    """
    if problems := _check_dimensions(scenario, trajectory, assoc, sched):
        raise ModelError("; ".join(problems))

    mask = (assoc.a[:, :, None] * sched.k) > 0
    if not mask.any():
        return 0.0
    users, dcs, slots = np.nonzero(mask)
    offsets = trajectory.horizontal[dcs, slots] - scenario.users[users]
    r = np.hypot(offsets[:, 0], offsets[:, 1])
    h = trajectory.altitude[dcs, slots]
    return float(np.sum(u2d_pathloss(r, h, scenario.u2d)))

def initial_trajectories(scenario: Scenario) -> Trajectory:
    """Static DCs equally spaced on a ring of radius r_bs/2 at h_init."""
    D = scenario.num_dcs
    angles = 2.0 * np.pi * np.arange(D) / D
    radius = scenario.r_bs / 2.0
    positions = np.column_stack((
        radius * np.cos(angles),
        radius * np.sin(angles),
        np.full(D, scenario.h_init),
    ))
    return Trajectory.static(positions, scenario.num_slots)

def initial_schedule(scenario: Scenario, assoc: Association) -> Schedule:
    """Round-robin: each DC gives its users contiguous blocks of floor(N/|U_d|) slots.

    Remainder slots go to the lowest-index users, one each.

    Raises:
        InfeasibleScheduleError: If a DC cannot give every user s_min slots
    """
    U, D, N = assoc.num_users, assoc.num_dcs, scenario.num_slots
    k = np.zeros((U, D, N), dtype=np.int8)
    for d in range(D):
        users = assoc.users_of(d)
        if users.size == 0:
            continue
        block, remainder = divmod(N, users.size)
        if block < scenario.s_min:
            raise InfeasibleScheduleError(
                f"DC {d} serves {users.size} users: {block} slots each is below s_min={scenario.s_min}"
            )
        start = 0
        for i, u in enumerate(users):
            length = block + (1 if i < remainder else 0)
            k[u, d, start:start + length] = 1
            start += length
    return Schedule(k)

class Constraint(str, Enum):
    """Constraint families checked by validate_solution."""
    DIMENSIONS = "dimensions"
    BINARY = "binary"
    DC_CAPACITY = "dc_capacity"
    SINGLE_ASSOCIATION = "single_association"
    DC_SLOT_EXCLUSIVE = "dc_slot_exclusive"
    USER_SLOT_EXCLUSIVE = "user_slot_exclusive"
    SCHEDULE_ASSOCIATION = "schedule_association"
    MIN_SLOTS = "min_slots"
    NON_FINITE = "non_finite"
    HORIZONTAL_SPEED = "horizontal_speed"
    VERTICAL_SPEED = "vertical_speed"
    ALTITUDE_RANGE = "altitude_range"
    BACKHAUL_PATHLOSS = "backhaul_pathloss"
    OBJECTIVE = "objective"

@dataclass(frozen=True)
class Violation:
    """One violated constraint instance."""
    constraint: Constraint
    indices: Tuple[int, ...]
    magnitude: float
    message: str = ""

    def __str__(self) -> str:
        text = f"{self.constraint.value} at {self.indices}: {self.magnitude:.6g}"
        return f"{text} ({self.message})" if self.message else text

def _pairs(mask: np.ndarray) -> List[Tuple[int, ...]]:
    return [tuple(int(i) for i in index) for index in np.argwhere(mask)]

def validate_solution(scenario: Scenario, solution: Solution) -> List[Violation]:
    """Check every constraint of the design problem.

    Geometry uses a 1e-6 m tolerance and the backhaul bound 1e-6 dB. The
    speed checks include the wraparound step from slot N back to slot 1.

    Returns:
        Violations (empty when the solution is feasible)
    """
    traj, assoc, sched = solution.trajectory, solution.assoc, solution.sched
    if problems := _check_dimensions(scenario, traj, assoc, sched):
        return [Violation(Constraint.DIMENSIONS, (), float(len(problems)), "; ".join(problems))]

    violations: List[Violation] = []
    a, k = assoc.a.astype(int), sched.k.astype(int)

    for u, d in _pairs((a != 0) & (a != 1)):
        violations.append(Violation(Constraint.BINARY, (u, d), float(a[u, d]), "association"))
    for u, d, n in _pairs((k != 0) & (k != 1)):
        violations.append(Violation(Constraint.BINARY, (u, d, n), float(k[u, d, n]), "schedule"))

    load = a.sum(axis=0)
    for (d,) in _pairs(load > scenario.n_u):
        violations.append(Violation(Constraint.DC_CAPACITY, (d,), float(load[d] - scenario.n_u)))

    per_user = a.sum(axis=1)
    for (u,) in _pairs(per_user != 1):
        violations.append(Violation(Constraint.SINGLE_ASSOCIATION, (u,), float(abs(per_user[u] - 1))))

    per_dc_slot = k.sum(axis=0)
    for d, n in _pairs(per_dc_slot > 1):
        violations.append(Violation(Constraint.DC_SLOT_EXCLUSIVE, (d, n), float(per_dc_slot[d, n] - 1)))

    per_user_slot = k.sum(axis=1)
    for u, n in _pairs(per_user_slot > 1):
        violations.append(Violation(Constraint.USER_SLOT_EXCLUSIVE, (u, n), float(per_user_slot[u, n] - 1)))

    unassociated = (k > a[:, :, None]).sum(axis=2)
    for u, d in _pairs(unassociated > 0):
        violations.append(Violation(
            Constraint.SCHEDULE_ASSOCIATION, (u, d), float(unassociated[u, d]),
            "slots scheduled to a DC the user is not associated with"
        ))

    counts = k.sum(axis=2)
    short = (a == 1) & (counts < scenario.s_min)
    for u, d in _pairs(short):
        violations.append(Violation(Constraint.MIN_SLOTS, (u, d), float(scenario.s_min - counts[u, d])))

    points = traj.points
    if not np.all(np.isfinite(points)):
        for d, n in _pairs(~np.all(np.isfinite(points), axis=2)):
            violations.append(Violation(Constraint.NON_FINITE, (d, n), math.nan))
        return violations

    R, h = traj.horizontal, traj.altitude
    step = np.linalg.norm(np.roll(R, -1, axis=1) - R, axis=2)
    for d, n in _pairs(step > scenario.v_max + GEOMETRY_TOL):
        violations.append(Violation(Constraint.HORIZONTAL_SPEED, (d, n), float(step[d, n] - scenario.v_max)))

    climb = np.abs(np.roll(h, -1, axis=1) - h)
    for d, n in _pairs(climb > scenario.h_max_rate + GEOMETRY_TOL):
        violations.append(Violation(Constraint.VERTICAL_SPEED, (d, n), float(climb[d, n] - scenario.h_max_rate)))

    low = scenario.h_min - h
    high = h - scenario.h_cap
    for d, n in _pairs((low > GEOMETRY_TOL) | (high > GEOMETRY_TOL)):
        violations.append(Violation(Constraint.ALTITUDE_RANGE, (d, n), float(max(low[d, n], high[d, n]))))

    if scenario.l_db != math.inf:
        rho = np.maximum(np.hypot(R[:, :, 0], R[:, :, 1]), R_MIN)
        excess = np.asarray(d2b_pathloss(rho, h, scenario.d2b)) - scenario.l_db
        for d, n in _pairs(excess > PATHLOSS_TOL):
            violations.append(Violation(Constraint.BACKHAUL_PATHLOSS, (d, n), float(excess[d, n])))

    expected = evaluate_objective(scenario, traj, assoc, sched)
    if abs(expected - solution.objective) > PATHLOSS_TOL * max(1.0, abs(expected)):
        violations.append(Violation(
            Constraint.OBJECTIVE, (), abs(expected - solution.objective),
            f"stored {solution.objective}, evaluated {expected}"
        ))

    return violations
