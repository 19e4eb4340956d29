"""Air-to-ground pathloss models.

Pure evaluators for the two radio links a drone cell (DC) maintains:

- U2D (user to drone): free-space loss plus a LoS/NLoS excess weighted by an
  elevation-dependent LoS probability.
- D2B (drone to base station): log-distance loss plus an elevation-dependent
  excess term, used as the backhaul quality bound.

Angles are in degrees everywhere; the conversion happens in this module only.
The evaluators accept scalars or numpy arrays and return the same shape
(floats for scalar input). The feasibility helpers turn the D2B bound into
horizontal and vertical regions by dense sampling followed by bisection of
every boundary, because the D2B excess term is not monotone in elevation.

File: dctraj/core/channel.py
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]
PathlossDb = float
Interval = Tuple[float, float]

R_MIN = 1.0             # m, D2B horizontal distance clamp
R_CAP = 10_000.0        # m, upper end of horizontal searches
H_CAP = 1_000.0         # m, upper end of altitude searches
BOUNDARY_TOL = 1e-6     # m, bisection width for region boundaries
RADIUS_SAMPLES = 2000
ALTITUDE_SAMPLES = 2001
INTERVAL_TOL = 1e-9

_DB_PER_NEPER = 10.0 / math.log(10.0)

class ChannelError(Exception):
    """Base exception for channel model errors."""
    pass

class DomainError(ChannelError):
    """Raised when a model is evaluated outside its domain."""
    pass

class InfeasibleAltitudeError(ChannelError):
    """Raised when no horizontal distance satisfies the D2B bound."""
    pass

@dataclass(frozen=True)
class U2dParams:
    """U2D model constants (suburban defaults, 2.4 GHz)."""
    a: float = 4.88
    b: float = 0.43
    eta_los: float = 0.1      # dB
    eta_nlos: float = 21.0    # dB
    fc: float = 2.4e9         # Hz
    c: float = 3.0e8          # m/s

    def validate(self) -> List[str]:
        """Validate model constants.

        Returns:
            List of validation error messages (empty if valid)
        """
        errors = []
        if not self.a > 0:
            errors.append(f"u2d.a must be positive, got {self.a}")
        if not self.b > 0:
            errors.append(f"u2d.b must be positive, got {self.b}")
        if not self.eta_nlos >= self.eta_los >= 0:
            errors.append(
                f"u2d offsets must satisfy eta_nlos >= eta_los >= 0, "
                f"got eta_los={self.eta_los}, eta_nlos={self.eta_nlos}"
            )
        if not self.fc > 0:
            errors.append(f"u2d.fc must be positive, got {self.fc}")
        if not self.c > 0:
            errors.append(f"u2d.c must be positive, got {self.c}")
        return errors

@dataclass(frozen=True)
class D2bParams:
    """D2B model constants (suburban defaults, 850 MHz LTE band)."""
    alpha: float = 3.04
    A: float = -23.29         # dB per degree
    theta0: float = -3.61     # degrees
    B: float = 4.14           # degrees
    eta0: float = 20.7        # dB
    fc: float = 850e6         # Hz, informational: the model has no frequency term

    def validate(self) -> List[str]:
        """Validate model constants.

        Returns:
            List of validation error messages (empty if valid)
        """
        errors = []
        if not self.alpha > 0:
            errors.append(f"d2b.alpha must be positive, got {self.alpha}")
        if not self.B > 0:
            errors.append(f"d2b.B must be positive, got {self.B}")
        for name in ("A", "theta0", "eta0"):
            if not math.isfinite(getattr(self, name)):
                errors.append(f"d2b.{name} must be finite")
        return errors

def _out(values: np.ndarray) -> ArrayLike:
    return float(values) if np.ndim(values) == 0 else values

def elevation_deg(r: ArrayLike, h: ArrayLike) -> ArrayLike:
    """Elevation angle in degrees; 90 when r = 0."""
    return _out(np.degrees(np.arctan2(np.asarray(h, dtype=float), np.asarray(r, dtype=float))))

def los_probability(r: ArrayLike, h: ArrayLike, p: U2dParams) -> ArrayLike:
    """LoS probability of a U2D link.

    Args:
        r: Horizontal user-drone distance in m (>= 0)
        h: Drone altitude in m (>= 0)
        p: U2D model constants

    Returns:
        Probability in (0, 1)

    Raises:
        DomainError: If r = h = 0 or either is negative
    """
    r_arr = np.asarray(r, dtype=float)
    h_arr = np.asarray(h, dtype=float)
    if np.any(r_arr < 0) or np.any(h_arr < 0):
        raise DomainError("U2D distances must be non-negative")
    if np.any((r_arr == 0) & (h_arr == 0)):
        raise DomainError("LoS probability undefined at zero distance")

    theta = np.degrees(np.arctan2(h_arr, r_arr))
    return _out(1.0 / (1.0 + p.a * np.exp(-p.b * (theta - p.a))))

def free_space_pathloss(distance: ArrayLike, fc: float, c: float) -> ArrayLike:
    """Free-space pathloss in dB at a 3D distance in m."""
    d = np.asarray(distance, dtype=float)
    return _out(20.0 * np.log10(4.0 * np.pi * fc * d / c))

def u2d_pathloss(r: ArrayLike, h: ArrayLike, p: U2dParams) -> ArrayLike:
    """Average U2D pathloss in dB.

    Free-space loss at the 3D distance plus the LoS-probability-weighted mix
    of the two environment offsets.

    Raises:
        DomainError: On zero distance
    """
    plos = np.asarray(los_probability(r, h, p))
    distance = np.hypot(np.asarray(r, dtype=float), np.asarray(h, dtype=float))
    fspl = np.asarray(free_space_pathloss(distance, p.fc, p.c))
    return _out(fspl + plos * p.eta_los + (1.0 - plos) * p.eta_nlos)

def u2d_altitude_derivatives(r: float, h: float, p: U2dParams) -> Tuple[float, float, float]:
    """U2D pathloss and its first two derivatives with respect to altitude.

    Args:
        r: Horizontal distance in m (>= 0)
        h: Altitude in m (> 0 when r = 0)
        p: U2D model constants

    Returns:
        (L, dL/dh, d2L/dh2) in dB, dB/m, dB/m^2

    Raises:
        DomainError: On zero distance
    """
    if r < 0 or h < 0 or (r == 0 and h == 0):
        raise DomainError(f"U2D derivatives undefined at r={r}, h={h}")

    d2 = r * r + h * h
    fspl = 20.0 * math.log10(4.0 * math.pi * p.fc / p.c) + 10.0 * math.log10(d2)
    dfspl = 2.0 * _DB_PER_NEPER * h / d2
    d2fspl = 2.0 * _DB_PER_NEPER * (r * r - h * h) / (d2 * d2)

    theta = math.degrees(math.atan2(h, r))
    plos = 1.0 / (1.0 + p.a * math.exp(-p.b * (theta - p.a)))
    dp_dtheta = p.b * plos * (1.0 - plos)
    d2p_dtheta2 = p.b * (1.0 - 2.0 * plos) * dp_dtheta

    deg = 180.0 / math.pi
    dtheta = deg * r / d2
    d2theta = -2.0 * deg * h * r / (d2 * d2)

    dplos = dp_dtheta * dtheta
    d2plos = d2p_dtheta2 * dtheta * dtheta + dp_dtheta * d2theta

    delta = p.eta_los - p.eta_nlos
    value = fspl + p.eta_nlos + plos * delta
    return value, dfspl + delta * dplos, d2fspl + delta * d2plos

def d2b_pathloss_at_angle(r: ArrayLike, theta: ArrayLike, p: D2bParams) -> ArrayLike:
    """D2B pathloss in dB from horizontal distance and elevation in degrees.

    Raises:
        DomainError: If r < R_MIN
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < R_MIN):
        raise DomainError(f"D2B horizontal distance below {R_MIN} m")
    theta_arr = np.asarray(theta, dtype=float)
    excess = p.A * (theta_arr - p.theta0) * np.exp((p.theta0 - theta_arr) / p.B)
    return _out(10.0 * p.alpha * np.log10(r_arr) + excess + p.eta0)

def d2b_pathloss(r: ArrayLike, h: ArrayLike, p: D2bParams) -> ArrayLike:
    """D2B pathloss in dB for a drone at horizontal distance r and altitude h.

    Raises:
        DomainError: If r < R_MIN
    """
    return d2b_pathloss_at_angle(r, elevation_deg(r, h), p)

def _check_bound(l_db: float) -> None:
    if math.isnan(l_db):
        raise DomainError("D2B pathloss bound must not be NaN")

def _feasible_runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    """Maximal runs of True as (start, stop) index pairs, stop exclusive."""
    padded = np.concatenate(([0], mask.astype(np.int8), [0]))
    edges = np.flatnonzero(np.diff(padded))
    return [(int(start), int(stop)) for start, stop in zip(edges[0::2], edges[1::2])]

def _bisect_boundary(
    excess: Callable[[float], float],
    inside: float,
    outside: float,
    tol: float = BOUNDARY_TOL
) -> float:
    """Shrink [inside, outside] around the bound crossing; returns the feasible end."""
    while abs(outside - inside) > tol:
        mid = 0.5 * (inside + outside)
        if excess(mid) <= 0.0:
            inside = mid
        else:
            outside = mid
    return inside

def d2b_feasible_radial_interval(
    r: float,
    h: float,
    l_db: PathlossDb,
    p: D2bParams,
    r_cap: float = R_CAP
) -> Optional[Interval]:
    """Maximal horizontal-distance interval containing r where the D2B bound holds.

    Args:
        r: Horizontal distance the interval must contain (clamped to R_MIN)
        h: Drone altitude in m
        l_db: D2B pathloss bound in dB
        p: D2B model constants
        r_cap: Upper end of the search

    Returns:
        (r_lo, r_hi) with r_lo >= R_MIN, or None when r itself is infeasible
    """
    _check_bound(l_db)
    r = max(float(r), R_MIN)
    if l_db == math.inf:
        return (R_MIN, max(r_cap, r))
    if l_db == -math.inf:
        return None

    def excess(x: float) -> float:
        return float(d2b_pathloss(x, h, p)) - l_db

    if excess(r) > 0.0:
        return None

    grid = np.union1d(np.geomspace(R_MIN, max(r_cap, r), RADIUS_SAMPLES), [r])
    feasible = np.asarray(d2b_pathloss(grid, h, p)) - l_db <= 0.0
    i = int(np.searchsorted(grid, r))

    below = np.flatnonzero(~feasible[:i])
    if below.size:
        j = int(below[-1])
        r_lo = _bisect_boundary(excess, float(grid[j + 1]), float(grid[j]))
    else:
        r_lo = float(grid[0])

    above = np.flatnonzero(~feasible[i + 1:])
    if above.size:
        j = i + 1 + int(above[0])
        r_hi = _bisect_boundary(excess, float(grid[j - 1]), float(grid[j]))
    else:
        r_hi = float(grid[-1])

    return (r_lo, r_hi)

def d2b_feasible_radius(
    h: float,
    l_db: PathlossDb,
    p: D2bParams,
    r_cap: float = R_CAP
) -> float:
    """Radius of the backhaul-feasible disk around the BS at altitude h.

    The disk is the feasible region connected to the BS: every horizontal
    distance up to the returned radius meets the bound.

    Raises:
        InfeasibleAltitudeError: If the bound fails already at R_MIN
        DomainError: If l_db is NaN
    """
    interval = d2b_feasible_radial_interval(R_MIN, h, l_db, p, r_cap)
    if interval is None:
        raise InfeasibleAltitudeError(
            f"No horizontal position meets the D2B bound {l_db} dB at altitude {h} m"
        )
    return interval[1]

def d2b_feasible_altitude_interval(
    r: float,
    l_db: PathlossDb,
    p: D2bParams,
    h_cap: float = H_CAP
) -> List[Interval]:
    """Altitudes in [0, h_cap] meeting the D2B bound at horizontal distance r.

    Args:
        r: Horizontal distance from the BS in m (>= R_MIN)
        l_db: D2B pathloss bound in dB
        p: D2B model constants
        h_cap: Altitude ceiling

    Returns:
        Sorted list of maximal (lo, hi) intervals; empty when the bound cannot be met

    Raises:
        DomainError: If r < R_MIN or l_db is NaN
    """
    _check_bound(l_db)
    if r < R_MIN:
        raise DomainError(f"D2B horizontal distance below {R_MIN} m")
    if l_db == math.inf:
        return [(0.0, float(h_cap))]
    if l_db == -math.inf:
        return []

    def excess(x: float) -> float:
        return float(d2b_pathloss(r, x, p)) - l_db

    grid = np.linspace(0.0, h_cap, ALTITUDE_SAMPLES)
    feasible = np.asarray(d2b_pathloss(r, grid, p)) - l_db <= 0.0

    intervals = []
    for start, stop in _feasible_runs(feasible):
        lo = float(grid[start]) if start == 0 else _bisect_boundary(
            excess, float(grid[start]), float(grid[start - 1])
        )
        hi = float(grid[stop - 1]) if stop == grid.size else _bisect_boundary(
            excess, float(grid[stop - 1]), float(grid[stop])
        )
        intervals.append((lo, hi))
    return intervals

def select_interval(intervals: List[Interval], value: float) -> Optional[Interval]:
    """Pick the interval containing value, or the nearest one."""
    if not intervals:
        return None
    for lo, hi in intervals:
        if lo - INTERVAL_TOL <= value <= hi + INTERVAL_TOL:
            return (lo, hi)
    return min(intervals, key=lambda iv: min(abs(value - iv[0]), abs(value - iv[1])))
