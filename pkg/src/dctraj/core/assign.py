"""Exact association and scheduling solvers.

Both integer programs have a transportation structure once the other
blocks are fixed, so they are solved exactly as min-cost flows:

- Association: users -> DCs -> sink, DC arcs capped at n_u.
- Scheduling: per DC, users -> slots -> sink with s_min supply per user
  (plus a pool feeding the leftover slots when every slot must be used).

Costs in dB are scaled to integers at 1e-6 dB resolution and stacked over a
small tie-break term, so the optimum is deterministic: ties go to the lower
DC index for association and to (lower user, lower slot) for scheduling.

The brute-force solvers are exhaustive oracles for small instances.

File: dctraj/core/assign.py
"""

import itertools
import logging
import math
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np
from ortools.graph.python import min_cost_flow

from .model import Association, Schedule

logger = logging.getLogger(__name__)

COST_SCALE = 1e6            # flow cost units per dB
MAX_BRUTE_USERS = 8
MAX_BRUTE_DCS = 3
MAX_BRUTE_SLOTS = 12

class AssignError(Exception):
    """Base exception for assignment solver errors."""
    pass

class InfeasibleAssignmentError(AssignError):
    """Raised when capacities, slots or costs admit no feasible assignment."""
    pass

class SizeGuardError(AssignError):
    """Raised when an exhaustive solver is asked to enumerate too much."""
    pass

class ScheduleFill(str, Enum):
    """How many slots each DC schedules.

    MINIMAL leaves slots idle once every user has s_min of them; FULL
    assigns every slot of a DC that serves anyone.
    """
    MINIMAL = "minimal"
    FULL = "full"

    @classmethod
    def from_string(cls, value: str) -> 'ScheduleFill':
        try:
            return cls(value.lower())
        except ValueError:
            raise AssignError(f"Unknown schedule fill '{value}' (expected minimal or full)")

def association_cost_matrix(pathloss: np.ndarray, pattern: np.ndarray) -> np.ndarray:
    """Cost of serving each user from each DC over the user's transmit slots.

    Args:
        pathloss: (U, D, N) slot pathloss from model.slot_pathloss
        pattern: (U, N) 0/1 slots in which each user transmits

    Returns:
        (U, D) matrix c[u][d] = sum_n pattern[u][n] * L[u][d][n]
    """
    return np.einsum("udn,un->ud", pathloss, pattern.astype(float))

def slot_cost_tensor(pathloss: np.ndarray, assoc: Association) -> np.ndarray:
    """Slot costs with +inf on pairs the association forbids."""
    return np.where(assoc.a[:, :, None] > 0, pathloss, math.inf)

def association_objective(cost: np.ndarray, assoc: Association) -> float:
    return float(np.sum(cost[assoc.a > 0]))

def schedule_objective(w: np.ndarray, sched: Schedule) -> float:
    mask = sched.k > 0
    return float(np.sum(w[mask])) if mask.any() else 0.0

def _scaled(costs: np.ndarray) -> np.ndarray:
    return np.rint(np.asarray(costs, dtype=float) * COST_SCALE).astype(np.int64)

def _solve_flow(
    tails: List[int],
    heads: List[int],
    capacities: List[int],
    costs: List[int],
    supplies: Dict[int, int]
) -> Tuple[np.ndarray, int]:
    """Run OR-Tools min-cost flow; returns (arc flows, optimal cost)."""
    smcf = min_cost_flow.SimpleMinCostFlow()
    arcs = smcf.add_arcs_with_capacity_and_unit_cost(
        np.asarray(tails, dtype=np.int32),
        np.asarray(heads, dtype=np.int32),
        np.asarray(capacities, dtype=np.int64),
        np.asarray(costs, dtype=np.int64),
    )
    for node, supply in supplies.items():
        smcf.set_node_supply(node, supply)

    status = smcf.solve()
    if status != smcf.OPTIMAL:
        raise InfeasibleAssignmentError(f"Min-cost flow ended with status {status}")
    return np.asarray(smcf.flows(arcs)), int(smcf.optimal_cost())

def solve_association(cost: np.ndarray, n_u: int) -> Association:
    """Minimum-cost user-to-DC association with at most n_u users per DC.

    Args:
        cost: (U, D) non-negative costs; +inf forbids a pair
        n_u: Per-DC user cap

    Returns:
        Optimal Association (every user on exactly one DC)

    Raises:
        InfeasibleAssignmentError: If capacity or finite costs cannot cover every user
    """
    cost = np.asarray(cost, dtype=float)
    U, D = cost.shape
    if n_u * D < U:
        raise InfeasibleAssignmentError(f"Capacity n_u * |D| = {n_u * D} cannot serve {U} users")
    if U == 0:
        return Association(np.zeros((0, D), dtype=np.int8))

    allowed = np.isfinite(cost)
    if not allowed.any(axis=1).all():
        stranded = np.flatnonzero(~allowed.any(axis=1)).tolist()
        raise InfeasibleAssignmentError(f"Users {stranded} have no DC with finite cost")

    # nodes: users [0, U), DCs [U, U + D), sink U + D
    sink = U + D
    multiplier = U * D + 1
    scaled = _scaled(np.where(allowed, cost, 0.0))
    tails, heads, caps, costs, pairs = [], [], [], [], []
    for u in range(U):
        for d in range(D):
            if allowed[u, d]:
                tails.append(u)
                heads.append(U + d)
                caps.append(1)
                costs.append(int(scaled[u, d]) * multiplier + d)
                pairs.append((u, d))
    for d in range(D):
        tails.append(U + d)
        heads.append(sink)
        caps.append(n_u)
        costs.append(0)

    supplies = {u: 1 for u in range(U)}
    supplies[sink] = -U
    flows, _ = _solve_flow(tails, heads, caps, costs, supplies)

    a = np.zeros((U, D), dtype=np.int8)
    for arc, (u, d) in enumerate(pairs):
        if flows[arc] > 0:
            a[u, d] = 1
    return Association(a)

def _schedule_dc(
    w_d: np.ndarray,
    users: np.ndarray,
    s_min: int,
    num_slots: int,
    fill: ScheduleFill
) -> np.ndarray:
    """Solve one DC's slot assignment; returns an (|U_d|, N) 0/1 block."""
    m = users.size
    if m * s_min > num_slots:
        raise InfeasibleAssignmentError(
            f"{m} users need {m * s_min} slots but the period has {num_slots}"
        )
    allowed = np.isfinite(w_d)
    if (allowed.sum(axis=1) < s_min).any():
        raise InfeasibleAssignmentError("A user has fewer than s_min slots with finite cost")

    # nodes: users [0, m), slots [m, m + N), sink, pool
    N = num_slots
    sink, pool = m + N, m + N + 1
    multiplier = m * N * N + 1
    scaled = _scaled(np.where(allowed, w_d, 0.0))
    tails, heads, caps, costs, pairs = [], [], [], [], []
    for i in range(m):
        for n in range(N):
            if allowed[i, n]:
                tails.append(i)
                heads.append(m + n)
                caps.append(1)
                costs.append(int(scaled[i, n]) * multiplier + i * N + n)
                pairs.append((i, n))
    for n in range(N):
        tails.append(m + n)
        heads.append(sink)
        caps.append(1)
        costs.append(0)

    supplies = {i: s_min for i in range(m)}
    total = m * s_min
    if fill is ScheduleFill.FULL and N > total:
        for i in range(m):
            tails.append(pool)
            heads.append(i)
            caps.append(N - total)
            costs.append(0)
        supplies[pool] = N - total
        total = N
    supplies[sink] = -total

    flows, _ = _solve_flow(tails, heads, caps, costs, supplies)
    block = np.zeros((m, N), dtype=np.int8)
    for arc, (i, n) in enumerate(pairs):
        if flows[arc] > 0:
            block[i, n] = 1
    return block

def solve_scheduling(
    w: np.ndarray,
    assoc: Association,
    s_min: int,
    num_slots: int,
    fill: ScheduleFill = ScheduleFill.FULL
) -> Schedule:
    """Minimum-cost TDMA schedule under a fixed association.

    DCs are independent once the association is fixed, so each DC is solved
    on its own.

    Args:
        w: (U, D, N) slot costs; +inf where the association forbids a pair
        assoc: Fixed association
        s_min: Minimum slots per associated user
        num_slots: Period length N
        fill: MINIMAL schedules exactly s_min slots per user; FULL uses every slot

    Returns:
        Optimal Schedule

    Raises:
        InfeasibleAssignmentError: If some DC cannot give its users s_min slots
    """
    w = np.asarray(w, dtype=float)
    U, D = assoc.a.shape
    if w.shape != (U, D, num_slots):
        raise AssignError(f"Slot cost shape {w.shape} != {(U, D, num_slots)}")

    k = np.zeros((U, D, num_slots), dtype=np.int8)
    for d in range(D):
        users = assoc.users_of(d)
        if users.size == 0:
            continue
        try:
            block = _schedule_dc(w[users, d, :], users, s_min, num_slots, fill)
        except InfeasibleAssignmentError as e:
            raise InfeasibleAssignmentError(f"DC {d}: {e}") from e
        k[users, d, :] = block
    return Schedule(k)

def _check_guard(num_users: int, num_dcs: int, num_slots: Optional[int] = None) -> None:
    if num_users > MAX_BRUTE_USERS or num_dcs > MAX_BRUTE_DCS or (
        num_slots is not None and num_slots > MAX_BRUTE_SLOTS
    ):
        raise SizeGuardError(
            f"Instance {num_users} users x {num_dcs} DCs x {num_slots} slots exceeds the "
            f"exhaustive limits ({MAX_BRUTE_USERS}, {MAX_BRUTE_DCS}, {MAX_BRUTE_SLOTS})"
        )

def brute_force_association(cost: np.ndarray, n_u: int) -> Association:
    """Exhaustive association optimum; ties keep the lexicographically first labels.

    Raises:
        SizeGuardError: Above 8 users or 3 DCs
        InfeasibleAssignmentError: If no assignment is feasible
    """
    cost = np.asarray(cost, dtype=float)
    U, D = cost.shape
    _check_guard(U, D)

    best_labels, best_value = None, math.inf
    for labels in itertools.product(range(D), repeat=U):
        if any(labels.count(d) > n_u for d in range(D)):
            continue
        value = sum(cost[u, d] for u, d in enumerate(labels))
        if value < best_value:
            best_labels, best_value = labels, value

    if best_labels is None:
        raise InfeasibleAssignmentError("No feasible association")
    return Association.from_labels(best_labels, D)

def _brute_force_dc(
    w_d: np.ndarray,
    s_min: int,
    fill: ScheduleFill
) -> Tuple[float, np.ndarray]:
    """Exhaustive slot-by-slot search for one DC, memoized on capped per-user counts."""
    m, N = w_d.shape
    choices = list(range(m)) if fill is ScheduleFill.FULL else list(range(m)) + [-1]

    @lru_cache(maxsize=None)
    def best(n: int, counts: Tuple[int, ...]) -> float:
        if n == N:
            return 0.0 if all(c >= s_min for c in counts) else math.inf
        if sum(max(0, s_min - c) for c in counts) > N - n:
            return math.inf
        value = math.inf
        for i in choices:
            if i < 0:
                value = min(value, best(n + 1, counts))
                continue
            if not math.isfinite(w_d[i, n]):
                continue
            nxt = counts[:i] + (min(counts[i] + 1, s_min),) + counts[i + 1:]
            value = min(value, w_d[i, n] + best(n + 1, nxt))
        return value

    start = tuple([0] * m)
    total = best(0, start)
    block = np.zeros((m, N), dtype=np.int8)
    if not math.isfinite(total):
        return total, block

    counts = start
    for n in range(N):
        target = best(n, counts)
        for i in choices:
            if i < 0:
                if best(n + 1, counts) == target:
                    break
                continue
            if not math.isfinite(w_d[i, n]):
                continue
            nxt = counts[:i] + (min(counts[i] + 1, s_min),) + counts[i + 1:]
            if w_d[i, n] + best(n + 1, nxt) == target:
                block[i, n] = 1
                counts = nxt
                break
    return total, block

def brute_force_schedule(
    w: np.ndarray,
    assoc: Association,
    s_min: int,
    num_slots: int,
    fill: ScheduleFill = ScheduleFill.FULL
) -> Schedule:
    """Exhaustive schedule optimum over every slot-to-user choice.

    Raises:
        SizeGuardError: Above 8 users, 3 DCs or 12 slots
        InfeasibleAssignmentError: If some DC has no feasible schedule
    """
    w = np.asarray(w, dtype=float)
    U, D = assoc.a.shape
    _check_guard(U, D, num_slots)

    k = np.zeros((U, D, num_slots), dtype=np.int8)
    for d in range(D):
        users = assoc.users_of(d)
        if users.size == 0:
            continue
        total, block = _brute_force_dc(w[users, d, :], s_min, fill)
        if not math.isfinite(total):
            raise InfeasibleAssignmentError(f"DC {d}: no feasible schedule")
        k[users, d, :] = block
    return Schedule(k)
