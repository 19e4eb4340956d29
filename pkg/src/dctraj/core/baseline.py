"""Static-deployment baseline.

Per-drone iterated particle swarm optimization: one fixed 3D hover point
per DC. Drones are optimized one at a time against the users currently
associated with them; the association is re-solved after every drone.

Particles live in the coverage disk times [h_min, h_cap]. A particle that
breaks the backhaul bound is repaired to the closest feasible altitude of a
precomputed feasibility table (or pulled toward the BS when its distance
has no feasible altitude); anything still infeasible after the exact check
scores +inf, so the global best is always feasible.

File: dctraj/core/baseline.py
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .assign import ScheduleFill, solve_association
from .bcd import RepairStrategy, repair_initial
from .channel import R_MIN, d2b_pathloss, u2d_pathloss
from .model import (
    Association,
    Scenario,
    Schedule,
    Solution,
    Trajectory,
    initial_schedule,
    initial_trajectories,
)

logger = logging.getLogger(__name__)

TABLE_RADII = 400
TABLE_ALTITUDES = 1000
INITIAL_VELOCITY_FRACTION = 0.1

class BaselineError(Exception):
    """Base exception for the static baseline."""
    pass

@dataclass
class PsoOptions:
    """Constriction-coefficient PSO settings."""
    swarm_size: int = 40
    inertia: float = 0.729
    cognitive: float = 1.494
    social: float = 1.494
    iterations_per_drone: int = 200
    outer_rounds: int = 10
    seed: Optional[int] = None

    def validate(self) -> List[str]:
        """Validate PSO settings.

        Returns:
            List of validation error messages (empty if valid)
        """
        errors = []
        for name in ("swarm_size", "iterations_per_drone", "outer_rounds"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                errors.append(f"pso.{name} must be an integer >= 1, got {value}")
        for name in ("inertia", "cognitive", "social"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and value > 0):
                errors.append(f"pso.{name} must be positive, got {value}")
        return errors

@dataclass(frozen=True, eq=False)
class StaticDeployment:
    """One hover point per DC and the association they serve."""
    positions: np.ndarray
    assoc: Association
    costs: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        positions = np.array(self.positions, dtype=float).reshape(-1, 3)
        positions.setflags(write=False)
        object.__setattr__(self, "positions", positions)

@dataclass
class PsoResult:
    """Best point found by one swarm and its global-best cost per iteration."""
    position: np.ndarray
    cost: float
    history: List[float] = field(default_factory=list)

Fitness = Callable[[np.ndarray], np.ndarray]
Repair = Callable[[np.ndarray], np.ndarray]

def pso_minimize(
    fitness: Fitness,
    lower: np.ndarray,
    upper: np.ndarray,
    start: np.ndarray,
    opts: PsoOptions,
    rng: np.random.Generator,
    repair: Optional[Repair] = None
) -> PsoResult:
    """Minimize a vectorized fitness over a box with a particle swarm.

    Args:
        fitness: Maps (S, dim) positions to (S,) costs; +inf marks infeasible
        lower: Lower box bounds
        upper: Upper box bounds
        start: Feasible seed particle; the global best starts here
        opts: Swarm settings
        rng: Random generator (the only source of randomness)
        repair: Optional map applied to positions after each move

    Returns:
        PsoResult with a non-increasing global-best history
    """
    lower, upper = np.asarray(lower, dtype=float), np.asarray(upper, dtype=float)
    S, dim = opts.swarm_size, lower.size
    span = upper - lower

    x = lower + rng.random((S, dim)) * span
    x[0] = start
    if repair is not None:
        x = repair(np.clip(x, lower, upper))
    v = (rng.random((S, dim)) * 2.0 - 1.0) * span * INITIAL_VELOCITY_FRACTION

    fx = fitness(x)
    best_x, best_f = x.copy(), fx.copy()
    g = np.asarray(start, dtype=float).copy()
    fg = float(fitness(g[None, :])[0])
    i = int(np.argmin(best_f))
    if best_f[i] < fg:
        g, fg = best_x[i].copy(), float(best_f[i])
    history = [fg]

    for _ in range(opts.iterations_per_drone):
        r1 = rng.random((S, dim))
        r2 = rng.random((S, dim))
        v = opts.inertia * v + opts.cognitive * r1 * (best_x - x) + opts.social * r2 * (g - x)
        x = np.clip(x + v, lower, upper)
        if repair is not None:
            x = repair(x)
        fx = fitness(x)

        improved = fx < best_f
        best_x[improved] = x[improved]
        best_f[improved] = fx[improved]
        i = int(np.argmin(best_f))
        if best_f[i] < fg:
            g, fg = best_x[i].copy(), float(best_f[i])
        history.append(fg)

    return PsoResult(position=g, cost=fg, history=history)

class _BackhaulTable:
    """Backhaul feasibility sampled on a (distance, altitude) grid."""

    def __init__(self, s: Scenario):
        self.scenario = s
        self.unbounded = s.l_db == math.inf
        self.radii = np.geomspace(R_MIN, max(s.r_bs, 2.0 * R_MIN), TABLE_RADII)
        self.altitudes = np.linspace(s.h_min, s.h_cap, TABLE_ALTITUDES)
        if self.unbounded:
            return
        rr, hh = np.meshgrid(self.radii, self.altitudes, indexing="ij")
        feasible = np.asarray(d2b_pathloss(rr, hh, s.d2b)) <= s.l_db

        # nearest feasible altitude for every (distance, altitude) cell
        cols = np.arange(TABLE_ALTITUDES)
        self.nearest = np.full(feasible.shape, np.nan)
        for i in range(TABLE_RADII):
            ok = np.flatnonzero(feasible[i])
            if ok.size == 0:
                continue
            pos = np.clip(np.searchsorted(ok, cols), 1, max(ok.size - 1, 1))
            left, right = ok[pos - 1], ok[np.minimum(pos, ok.size - 1)]
            pick = np.where(np.abs(cols - left) <= np.abs(right - cols), left, right)
            self.nearest[i] = self.altitudes[pick]

        # radius of the BS-connected feasible disk for every altitude
        connected = np.cumprod(feasible, axis=0).astype(bool)
        last = connected.sum(axis=0) - 1
        self.connected_radius = np.where(last >= 0, self.radii[np.maximum(last, 0)], np.nan)

    def repair(self, x: np.ndarray) -> np.ndarray:
        if self.unbounded:
            return x
        x = x.copy()
        s = self.scenario
        rho = np.maximum(np.hypot(x[:, 0], x[:, 1]), R_MIN)
        bad = np.asarray(d2b_pathloss(rho, x[:, 2], s.d2b)) > s.l_db
        if not bad.any():
            return x
        row = np.clip(np.searchsorted(self.radii, rho), 0, TABLE_RADII - 1)
        col = np.clip(np.searchsorted(self.altitudes, x[:, 2]), 0, TABLE_ALTITUDES - 1)
        nearest = self.nearest[row, col]
        lift = bad & np.isfinite(nearest)
        x[lift, 2] = nearest[lift]

        pull = bad & ~np.isfinite(nearest)
        if pull.any():
            radius = self.connected_radius[col[pull]]
            scale = np.where(np.isfinite(radius), np.minimum(1.0, np.nan_to_num(radius) / rho[pull]), 0.0)
            x[pull, 0] *= scale
            x[pull, 1] *= scale
        return x

def static_costs(s: Scenario, positions: np.ndarray) -> np.ndarray:
    """(U, D) U2D pathloss from every user to every static DC."""
    offsets = s.users[:, None, :] - positions[None, :, :2]
    r = np.linalg.norm(offsets, axis=2)
    h = np.broadcast_to(positions[None, :, 2], r.shape)
    return np.asarray(u2d_pathloss(r, h, s.u2d))

def _drone_fitness(s: Scenario, targets: np.ndarray) -> Fitness:
    def fitness(x: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(x[:, None, :2] - targets[None, :, :], axis=2)
        h = np.broadcast_to(x[:, 2:3], r.shape)
        cost = np.asarray(u2d_pathloss(r, h, s.u2d)).sum(axis=1)
        if s.l_db != math.inf:
            rho = np.maximum(np.hypot(x[:, 0], x[:, 1]), R_MIN)
            cost = np.where(np.asarray(d2b_pathloss(rho, x[:, 2], s.d2b)) <= s.l_db, cost, math.inf)
        return cost
    return fitness

def _clip_to_disk(x: np.ndarray, radius: float) -> np.ndarray:
    rho = np.hypot(x[:, 0], x[:, 1])
    scale = np.where(rho > radius, radius / np.maximum(rho, 1e-300), 1.0)
    x = x.copy()
    x[:, 0] *= scale
    x[:, 1] *= scale
    return x

def solve_static(s: Scenario, opts: Optional[PsoOptions] = None) -> StaticDeployment:
    """Per-drone iterated PSO deployment.

    Args:
        s: Validated scenario
        opts: Swarm settings; seed=None falls back to the scenario seed

    Returns:
        StaticDeployment whose positions all meet the backhaul bound

    Raises:
        BaselineError: If the options are invalid
    """
    opts = opts or PsoOptions()
    if errors := opts.validate():
        raise BaselineError("\n".join(errors))
    seed = opts.seed if opts.seed is not None else (s.seed or 0)
    rng = np.random.default_rng(seed)

    ring = repair_initial(s, initial_trajectories(s), RepairStrategy.ALTITUDE)
    positions = np.array(ring.points[:, 0, :])
    assoc = solve_association(static_costs(s, positions), s.n_u)

    table = _BackhaulTable(s)
    lower = np.array([-s.r_bs, -s.r_bs, s.h_min])
    upper = np.array([s.r_bs, s.r_bs, s.h_cap])

    def repair(x: np.ndarray) -> np.ndarray:
        return table.repair(_clip_to_disk(x, s.r_bs))

    costs = []
    for round_index in range(opts.outer_rounds):
        for d in range(s.num_dcs):
            users = assoc.users_of(d)
            if users.size == 0:
                continue
            result = pso_minimize(
                _drone_fitness(s, s.users[users]), lower, upper, positions[d], opts, rng, repair
            )
            positions[d] = result.position
            costs.append(result.cost)
            assoc = solve_association(static_costs(s, positions), s.n_u)
        logger.debug(f"PSO round {round_index + 1}: total static pathloss {float(np.sum(static_costs(s, positions)[assoc.a > 0])):.6f} dB")

    logger.info(f"Static deployment found after {opts.outer_rounds} rounds for {s.num_dcs} DCs")
    return StaticDeployment(positions=positions, assoc=assoc, costs=tuple(costs))

def static_as_trajectory(
    dep: StaticDeployment,
    s: Scenario,
    fill: ScheduleFill = ScheduleFill.FULL
) -> Solution:
    """Hover trajectories at the static positions with a round-robin schedule.

    FULL uses every slot of each user's round-robin block; MINIMAL keeps the
    first s_min slots of each block.
    """
    trajectory = Trajectory.static(dep.positions, s.num_slots)
    sched = initial_schedule(s, dep.assoc)
    if fill is ScheduleFill.MINIMAL:
        k = np.array(sched.k)
        for u in range(k.shape[0]):
            for d in range(k.shape[1]):
                slots = np.flatnonzero(k[u, d])
                k[u, d, slots[s.s_min:]] = 0
        sched = Schedule(k)
    return Solution.build(s, trajectory, dep.assoc, sched)
