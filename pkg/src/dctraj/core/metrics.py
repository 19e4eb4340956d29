"""Evaluation metrics.

Per-user U2D pathloss statistics, the hovering effect, and the
static-versus-trajectory comparison.

File: dctraj/core/metrics.py
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from .model import Scenario, Solution, slot_pathloss

logger = logging.getLogger(__name__)

HOVER_TOL = 1.0         # m
CDF_RESOLUTION = 1.0    # dB

# Std-dev reductions of the trajectory design over the static baseline
# reported for 3..7 DCs.
REFERENCE_STD_REDUCTION: Dict[int, float] = {
    3: 0.4671,
    4: 0.4942,
    5: 0.6771,
    6: 0.5981,
    7: 0.5968,
}
REFERENCE_MEAN_STD_REDUCTION = 0.5666

class MetricsError(Exception):
    """Raised when metrics cannot be computed for a solution."""
    pass

@dataclass(frozen=True, eq=False)
class UserPathlossSummary:
    """Per-user mean pathloss over scheduled slots plus aggregates."""
    per_user: np.ndarray
    slots_per_user: np.ndarray
    mean_per_user: float
    mean_per_slot: float
    std: float
    cdf_x: np.ndarray
    cdf_p: np.ndarray
    ddof: int = 0

    @property
    def num_users(self) -> int:
        return int(self.per_user.size)

def empirical_cdf(values: np.ndarray, resolution: float = CDF_RESOLUTION) -> Tuple[np.ndarray, np.ndarray]:
    """CDF of values sampled on a grid of the given resolution.

    Returns:
        (x, p) with p[i] the fraction of values <= x[i]; p ends at 1
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return np.zeros(0), np.zeros(0)
    lo = math.floor(values.min() / resolution) * resolution
    hi = math.ceil(values.max() / resolution) * resolution
    x = lo + resolution * np.arange(int(round((hi - lo) / resolution)) + 1)
    p = np.searchsorted(np.sort(values), x, side="right") / values.size
    return x, p

def summarize(sol: Solution, s: Scenario, ddof: int = 0, resolution: float = CDF_RESOLUTION) -> UserPathlossSummary:
    """Per-user mean U2D pathloss over scheduled slots.

    Args:
        sol: Feasible solution
        s: Scenario it solves
        ddof: Delta degrees of freedom for the std (0: population)
        resolution: CDF grid step in dB

    Raises:
        MetricsError: If a user has no scheduled slot
    """
    mask = (sol.assoc.a[:, :, None] * sol.sched.k) > 0
    counts = mask.sum(axis=(1, 2))
    if (counts == 0).any():
        raise MetricsError(f"Users {np.flatnonzero(counts == 0).tolist()} have no scheduled slot")

    loss = np.where(mask, slot_pathloss(s, sol.trajectory), 0.0)
    totals = loss.sum(axis=(1, 2))
    per_user = totals / counts
    cdf_x, cdf_p = empirical_cdf(per_user, resolution)
    return UserPathlossSummary(
        per_user=per_user,
        slots_per_user=counts,
        mean_per_user=float(per_user.mean()),
        mean_per_slot=float(totals.sum() / counts.sum()),
        std=float(np.std(per_user, ddof=ddof)),
        cdf_x=cdf_x,
        cdf_p=cdf_p,
        ddof=ddof,
    )

def hovering_fraction(sol: Solution, s: Scenario, tol: float = HOVER_TOL) -> np.ndarray:
    """Per DC, the fraction of slots whose move to the next slot is shorter than tol."""
    R = sol.trajectory.horizontal
    if R.shape[1] == 0:
        return np.zeros(R.shape[0])
    step = np.linalg.norm(np.roll(R, -1, axis=1) - R, axis=2)
    return (step < tol).mean(axis=1)

@dataclass(frozen=True)
class ComparisonReport:
    """Static baseline versus trajectory design on one scenario."""
    mean_static: float
    mean_design: float
    mean_gap_db: float
    mean_per_slot_gap_db: float
    std_static: float
    std_design: float
    std_reduction: float

def std_reduction(std_static: float, std_design: float) -> float:
    """Relative std-dev reduction (σ_s - σ_g) / σ_s; 0 when σ_s is 0."""
    if std_static == 0.0:
        return 0.0
    return (std_static - std_design) / std_static

def compare(static: UserPathlossSummary, design: UserPathlossSummary) -> ComparisonReport:
    """Mean gap (static minus design, dB) and relative std reduction.

    Raises:
        MetricsError: If the summaries cover different user sets
    """
    if static.num_users != design.num_users:
        raise MetricsError(f"Summaries cover {static.num_users} and {design.num_users} users")
    return ComparisonReport(
        mean_static=static.mean_per_user,
        mean_design=design.mean_per_user,
        mean_gap_db=static.mean_per_user - design.mean_per_user,
        mean_per_slot_gap_db=static.mean_per_slot - design.mean_per_slot,
        std_static=static.std,
        std_design=design.std,
        std_reduction=std_reduction(static.std, design.std),
    )
