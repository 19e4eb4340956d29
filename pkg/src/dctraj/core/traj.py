"""Per-slot trajectory updates.

The continuous blocks of the design problem, each solved slot by slot with
every other waypoint fixed:

- Horizontal: move R_d[n] toward its target user, projected onto the
  intersection of the two speed disks around the neighbouring waypoints
  and the backhaul-feasible region at the current altitude.
- Altitude: minimize the U2D pathloss over the altitude window left by the
  climb-rate limits and the backhaul bound at the current position.

Every update keeps the trajectory feasible and never increases the
objective; an update that would is dropped and the incumbent kept.

File: dctraj/core/traj.py
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .channel import (
    R_MIN,
    U2dParams,
    d2b_feasible_altitude_interval,
    d2b_feasible_radial_interval,
    select_interval,
    u2d_altitude_derivatives,
    u2d_pathloss,
)
from .model import Scenario, Solution, Trajectory

logger = logging.getLogger(__name__)

PROJECTION_TOL = 1e-6          # m
PROJECTION_MAX_ITER = 10_000
ALTITUDE_TOL = 1e-3            # m
ALTITUDE_MAX_ITER = 200
GOLDEN_SPLIT = 0.381966011250105
UNIMODAL_SAMPLES = 512
UNIMODAL_TOL = 1e-9            # dB

Point = Tuple[float, float]

class TrajectoryError(Exception):
    """Base exception for trajectory update errors."""
    pass

class EmptyWindowError(TrajectoryError):
    """Raised when an altitude window has lo > hi."""
    pass

@dataclass(frozen=True)
class DiskConstraint:
    """Closed disk in the horizontal plane."""
    center: Point
    radius: float

    def __post_init__(self) -> None:
        if not self.radius >= 0:
            raise TrajectoryError(f"Disk radius must be non-negative, got {self.radius}")

    def contains(self, x: float, y: float, tol: float = PROJECTION_TOL) -> bool:
        return math.hypot(x - self.center[0], y - self.center[1]) <= self.radius + tol

    def project(self, x: float, y: float) -> Point:
        cx, cy = self.center
        dist = math.hypot(x - cx, y - cy)
        if dist <= self.radius:
            return x, y
        scale = self.radius / dist
        return cx + (x - cx) * scale, cy + (y - cy) * scale

@dataclass(frozen=True)
class AltitudeWindow:
    """Closed altitude interval [lo, hi] in m."""
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.lo < 0:
            raise TrajectoryError(f"Altitude window starts below ground: {self.lo}")
        if self.lo > self.hi:
            raise EmptyWindowError(f"Empty altitude window [{self.lo}, {self.hi}]")

    def intersect(self, lo: float, hi: float) -> Optional['AltitudeWindow']:
        new_lo, new_hi = max(self.lo, lo), min(self.hi, hi)
        if new_lo > new_hi:
            return None
        return AltitudeWindow(new_lo, new_hi)

def _segment_limit(
    sx: float, sy: float, vx: float, vy: float, disk: DiskConstraint, inside: bool
) -> float:
    """Largest t in [0, 1] keeping s + t*v inside (or outside) the disk."""
    a = vx * vx + vy * vy
    if a == 0.0:
        return 1.0
    ox, oy = sx - disk.center[0], sy - disk.center[1]
    b = 2.0 * (vx * ox + vy * oy)
    c = ox * ox + oy * oy - disk.radius * disk.radius
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return 0.0 if inside else 1.0
    root = math.sqrt(disc)
    if inside:
        return min(1.0, max(0.0, (-b + root) / (2.0 * a)))
    enter = (-b - root) / (2.0 * a)
    return min(1.0, max(0.0, enter)) if enter >= 0.0 else 1.0

def project_horizontal(
    target: Sequence[float],
    disks: Iterable[DiskConstraint],
    start: Sequence[float],
    keep_out: Optional[DiskConstraint] = None
) -> np.ndarray:
    """Closest point to target in the intersection of disks, found by Dykstra.

    The iterates are seeded at the target. If the converged point still
    misses a disk by more than the tolerance, or enters the optional
    keep-out disk, the move from start is cut back along the segment
    start -> point. A result no closer to target than start returns start.

    Args:
        target: Point to approach
        disks: Convex constraints; start must lie in all of them
        start: Feasible incumbent
        keep_out: Optional disk the result must stay outside of

    Returns:
        The new 2D point
    """
    disks = list(disks)
    tx, ty = float(target[0]), float(target[1])
    sx, sy = float(start[0]), float(start[1])

    if all(disk.contains(tx, ty) for disk in disks):
        x, y = tx, ty
    else:
        x, y = tx, ty
        increments = [(0.0, 0.0)] * len(disks)
        for _ in range(PROJECTION_MAX_ITER):
            prev_x, prev_y = x, y
            for i, disk in enumerate(disks):
                px, py = increments[i]
                yx, yy = x + px, y + py
                x, y = disk.project(yx, yy)
                increments[i] = (yx - x, yy - y)
            if math.hypot(x - prev_x, y - prev_y) < PROJECTION_TOL:
                break

    limit = 1.0
    vx, vy = x - sx, y - sy
    for disk in disks:
        if not disk.contains(x, y, tol=0.0):
            limit = min(limit, _segment_limit(sx, sy, vx, vy, disk, inside=True))
    if keep_out is not None:
        limit = min(limit, _segment_limit(sx, sy, vx, vy, keep_out, inside=False))
    if limit < 1.0:
        x, y = sx + limit * vx, sy + limit * vy

    if math.hypot(x - tx, y - ty) >= math.hypot(sx - tx, sy - ty):
        return np.array([sx, sy])
    return np.array([x, y])

def slot_targets(served: np.ndarray) -> np.ndarray:
    """User each slot steers toward: the served user, else the next one in cyclic order.

    Returns:
        (N,) user indices, -1 everywhere when the DC serves nobody
    """
    N = served.size
    targets = np.full(N, -1, dtype=int)
    scheduled = np.flatnonzero(served >= 0)
    if scheduled.size == 0:
        return targets
    for n in range(N):
        pos = int(np.searchsorted(scheduled, n))
        targets[n] = served[scheduled[pos % scheduled.size]]
    return targets

def _scheduled_loss(r: float, h: float, p: U2dParams) -> float:
    return float(u2d_pathloss(r, h, p))

def _sweep_dc_horizontal(points: np.ndarray, served: np.ndarray, s: Scenario) -> int:
    """Update one DC's waypoints in place; returns the number of slots moved."""
    N = points.shape[0]
    targets = slot_targets(served)
    moved = 0
    for n in range(N):
        u = targets[n]
        if u < 0:
            continue
        start = points[n, :2].copy()
        h = float(points[n, 2])
        rho = max(math.hypot(start[0], start[1]), R_MIN)
        interval = d2b_feasible_radial_interval(rho, h, s.l_db, s.d2b)
        if interval is None:
            logger.debug(f"Slot {n} skipped: incumbent outside the backhaul region at h={h:.3f}")
            continue
        r_lo, r_hi = interval

        disks = [DiskConstraint((0.0, 0.0), r_hi)]
        if N > 1:
            prev_pt, next_pt = points[(n - 1) % N, :2], points[(n + 1) % N, :2]
            disks.insert(0, DiskConstraint((float(prev_pt[0]), float(prev_pt[1])), s.v_max))
            disks.insert(1, DiskConstraint((float(next_pt[0]), float(next_pt[1])), s.v_max))
        keep_out = DiskConstraint((0.0, 0.0), r_lo) if r_lo > R_MIN + PROJECTION_TOL else None

        target = s.users[u]
        new = project_horizontal(target, disks, start, keep_out)
        if served[n] >= 0:
            old_loss = _scheduled_loss(float(np.hypot(*(start - target))), h, s.u2d)
            new_loss = _scheduled_loss(float(np.hypot(*(new - target))), h, s.u2d)
            if new_loss > old_loss:
                continue
        if not np.array_equal(new, start):
            points[n, :2] = new
            moved += 1
    return moved

def horizontal_sweep(sol: Solution, s: Scenario) -> Solution:
    """One pass of horizontal updates, DCs in index order and slots in increasing order.

    The backhaul constraint binds at each waypoint's current altitude.
    """
    points = np.array(sol.trajectory.points)
    served = sol.sched.served_users()
    for d in range(points.shape[0]):
        moved = _sweep_dc_horizontal(points[d], served[d], s)
        logger.debug(f"Horizontal sweep: DC {d} moved {moved} slots")
    return Solution.build(s, Trajectory(points), sol.assoc, sol.sched, sol.history, sol.converged)

def optimize_altitude(r: float, window: AltitudeWindow, p: U2dParams) -> float:
    """Altitude in window minimizing the U2D pathloss at horizontal distance r.

    Safeguarded Newton on dL/dh = 0 using the analytic second derivative.
    The bracket [a, b] keeps dL/dh(a) < 0 < dL/dh(b); a Newton step that
    leaves it, or a non-convex point, falls back to a golden split of the
    bracket. Stops when successive iterates differ by at most 1e-3 m.

    Raises:
        EmptyWindowError: If window.lo > window.hi
    """
    lo, hi = window.lo, window.hi
    if lo > hi:
        raise EmptyWindowError(f"Empty altitude window [{lo}, {hi}]")
    if hi - lo <= 0.0 or r <= 0.0:
        return lo

    _, d_lo, _ = u2d_altitude_derivatives(r, lo, p)
    if d_lo >= 0.0:
        return lo
    _, d_hi, _ = u2d_altitude_derivatives(r, hi, p)
    if d_hi <= 0.0:
        return hi

    a, b = lo, hi
    x = a + GOLDEN_SPLIT * (b - a)
    for _ in range(ALTITUDE_MAX_ITER):
        _, d1, d2 = u2d_altitude_derivatives(r, x, p)
        if d1 == 0.0:
            break
        if d1 < 0.0:
            a = x
        else:
            b = x
        step = x - d1 / d2 if d2 > 0.0 else math.nan
        if not a < step < b:
            step = a + GOLDEN_SPLIT * (b - a) if d1 > 0.0 else b - GOLDEN_SPLIT * (b - a)
        if abs(step - x) <= ALTITUDE_TOL or b - a <= ALTITUDE_TOL:
            x = step
            break
        x = step

    return min((x, lo, hi), key=lambda h: _scheduled_loss(r, h, p))

def check_unimodal(r: float, window: AltitudeWindow, p: U2dParams, samples: int = UNIMODAL_SAMPLES) -> bool:
    """Sample the pathloss over the window and count descent-to-ascent turns."""
    lo = max(window.lo, 1e-9) if r <= 0.0 else window.lo
    if window.hi <= lo:
        return True
    values = np.asarray(u2d_pathloss(r, np.linspace(lo, window.hi, samples), p))
    slopes = np.diff(values)
    signs = np.sign(np.where(np.abs(slopes) <= UNIMODAL_TOL, 0.0, slopes))
    signs = signs[signs != 0]
    turns = int(np.count_nonzero((signs[:-1] < 0) & (signs[1:] > 0)))
    return turns <= 1

def altitude_window(points: np.ndarray, n: int, s: Scenario) -> Optional[AltitudeWindow]:
    """Climb-rate window for slot n intersected with the backhaul altitudes at R_d[n].

    Returns:
        The window, or None when no altitude satisfies both
    """
    N = points.shape[0]
    if N > 1:
        h_prev, h_next = points[(n - 1) % N, 2], points[(n + 1) % N, 2]
        lo = max(s.h_min, h_prev - s.h_max_rate, h_next - s.h_max_rate)
        hi = min(s.h_cap, h_prev + s.h_max_rate, h_next + s.h_max_rate)
    else:
        lo, hi = s.h_min, s.h_cap
    if lo > hi:
        return None

    rho = max(math.hypot(points[n, 0], points[n, 1]), R_MIN)
    interval = select_interval(
        d2b_feasible_altitude_interval(rho, s.l_db, s.d2b, h_cap=s.h_cap),
        float(points[n, 2])
    )
    if interval is None:
        return None
    lo, hi = max(lo, interval[0]), min(hi, interval[1])
    if lo > hi:
        return None
    return AltitudeWindow(float(lo), float(hi))

def _sweep_dc_altitude(points: np.ndarray, served: np.ndarray, s: Scenario, check_unimodality: bool) -> List[int]:
    """Update one DC's altitudes in place; returns the slots whose window was empty."""
    N = points.shape[0]
    targets = slot_targets(served)
    skipped = []
    for n in range(N):
        u = targets[n]
        if u < 0:
            continue
        window = altitude_window(points, n, s)
        if window is None:
            skipped.append(n)
            continue

        r = float(np.hypot(*(points[n, :2] - s.users[u])))
        if check_unimodality and not check_unimodal(r, window, s.u2d):
            logger.warning(f"Pathloss is not unimodal in altitude at r={r:.3f} over [{window.lo:.3f}, {window.hi:.3f}]")
        h_old = float(points[n, 2])
        h_new = optimize_altitude(r, window, s.u2d)
        if served[n] >= 0 and _scheduled_loss(r, h_new, s.u2d) > _scheduled_loss(r, h_old, s.u2d):
            continue
        points[n, 2] = h_new
    return skipped

def altitude_sweep(sol: Solution, s: Scenario, check_unimodality: bool = True) -> Solution:
    """One pass of altitude updates, DCs in index order and slots in increasing order.

    The backhaul constraint binds at each waypoint's current horizontal position.
    """
    points = np.array(sol.trajectory.points)
    served = sol.sched.served_users()
    for d in range(points.shape[0]):
        skipped = _sweep_dc_altitude(points[d], served[d], s, check_unimodality)
        if skipped:
            logger.debug(f"Altitude sweep: DC {d} kept {len(skipped)} slots with no feasible window")
    return Solution.build(s, Trajectory(points), sol.assoc, sol.sched, sol.history, sol.converged)
