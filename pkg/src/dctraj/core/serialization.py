"""Scenario documents and result tables.

Scenarios are JSON documents (sorted keys, 2-space indent) carrying a
``schema_version``; readers accept any 1.x. Results are CSV tables written
with pandas. Every writer goes through ``utils.files.atomic_write`` and
every table reads back into the model objects it came from.

Nothing time-dependent is written, so identical runs give identical bytes.

File: dctraj/core/serialization.py
"""

import io
import json
import logging
import math
from dataclasses import asdict, fields
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..utils.files import atomic_write
from ..utils.validation import SCHEMA_VERSION, check_schema_version
from .channel import D2bParams, U2dParams
from .metrics import UserPathlossSummary
from .model import (
    Association,
    IterationRecord,
    ModelError,
    Scenario,
    Schedule,
    Solution,
    Trajectory,
)

logger = logging.getLogger(__name__)

TRAJECTORY_FILE = "trajectory.csv"
ASSOCIATION_FILE = "association.csv"
SCHEDULE_FILE = "schedule.csv"
ITERATIONS_FILE = "iterations.csv"
METRICS_FILE = "metrics.csv"
SUMMARY_FILE = "summary.csv"
CDF_FILE = "cdf.csv"
COMPARISON_FILE = "comparison.csv"

_SCALAR_FIELDS = (
    "num_dcs", "r_bs", "num_slots", "s_min", "n_u", "v_max", "h_max_rate",
    "l_db", "epsilon", "h_min", "h_cap", "h_init",
)

class SerializationError(Exception):
    """Raised when a document or table cannot be written or parsed."""
    pass

class SchemaVersionError(SerializationError):
    """Raised when a document's schema major version is not supported."""
    pass

def _encode_float(value: float) -> Any:
    return value if math.isfinite(value) else str(value)

def scenario_to_dict(s: Scenario) -> Dict[str, Any]:
    doc: Dict[str, Any] = {"schema_version": SCHEMA_VERSION, "seed": s.seed}
    for name in _SCALAR_FIELDS:
        value = getattr(s, name)
        doc[name] = _encode_float(value) if isinstance(value, float) else value
    doc["u2d"] = asdict(s.u2d)
    doc["d2b"] = asdict(s.d2b)
    doc["bs_position"] = list(s.bs_position)
    doc["users"] = s.users.tolist()
    return doc

def scenario_from_dict(doc: Dict[str, Any]) -> Scenario:
    """Build a Scenario from a parsed document.

    Raises:
        SchemaVersionError: On an unsupported schema_version
        SerializationError: On missing or malformed fields
    """
    result = check_schema_version(doc.get("schema_version", ""))
    if not result.is_valid:
        raise SchemaVersionError(result.message)
    try:
        kwargs: Dict[str, Any] = {}
        for name in _SCALAR_FIELDS:
            if name in doc:
                kwargs[name] = doc[name]
        for name in ("r_bs", "l_db", "v_max", "h_max_rate", "epsilon", "h_min", "h_cap", "h_init"):
            if name in kwargs:
                kwargs[name] = float(kwargs[name])
        known_u2d = {f.name for f in fields(U2dParams)}
        known_d2b = {f.name for f in fields(D2bParams)}
        u2d = U2dParams(**{k: float(v) for k, v in doc.get("u2d", {}).items() if k in known_u2d})
        d2b = D2bParams(**{k: float(v) for k, v in doc.get("d2b", {}).items() if k in known_d2b})
        scenario = Scenario(
            users=np.asarray(doc["users"], dtype=float).reshape(-1, 2),
            seed=doc.get("seed"),
            u2d=u2d,
            d2b=d2b,
            bs_position=tuple(float(v) for v in doc.get("bs_position", (0.0, 0.0))),
            **kwargs,
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SerializationError(f"Malformed scenario document: {e}") from e
    if errors := scenario.validate():
        raise SerializationError("Invalid scenario document:\n" + "\n".join(errors))
    return scenario

def dump_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), sort_keys=True, indent=2) + "\n"

def write_scenario(path: Path, s: Scenario) -> Path:
    atomic_write(path, dump_scenario(s))
    logger.info(f"Wrote scenario to {path}")
    return path

def read_scenario(path: Path) -> Scenario:
    """Read a scenario document.

    Raises:
        SerializationError: If the file is unreadable or invalid
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise SerializationError(f"Cannot read scenario {path}: {e}") from e
    if not isinstance(doc, dict):
        raise SerializationError(f"Scenario {path} is not a JSON object")
    return scenario_from_dict(doc)

def frame_to_csv(frame: pd.DataFrame) -> str:
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()

def write_frame(path: Path, frame: pd.DataFrame) -> Path:
    atomic_write(path, frame_to_csv(frame))
    return path

def read_frame(path: Path, columns: Sequence[str]) -> pd.DataFrame:
    """Read a CSV table and check its header.

    Raises:
        SerializationError: If the file is unreadable or lacks columns
    """
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise SerializationError(f"Cannot read table {path}: {e}") from e
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise SerializationError(f"Table {path} lacks columns {missing}")
    return frame

def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    D, N = traj.num_dcs, traj.num_slots
    dc, slot = np.meshgrid(np.arange(D), np.arange(N), indexing="ij")
    return pd.DataFrame({
        "dc": dc.ravel(),
        "slot": slot.ravel(),
        "x": traj.points[:, :, 0].ravel(),
        "y": traj.points[:, :, 1].ravel(),
        "h": traj.points[:, :, 2].ravel(),
    })

def trajectory_from_frame(frame: pd.DataFrame) -> Trajectory:
    if frame.empty:
        raise SerializationError("Trajectory table is empty")
    D, N = int(frame["dc"].max()) + 1, int(frame["slot"].max()) + 1
    if len(frame) != D * N:
        raise SerializationError(f"Trajectory table has {len(frame)} rows, expected {D * N}")
    points = np.full((D, N, 3), np.nan)
    points[frame["dc"].to_numpy(), frame["slot"].to_numpy()] = frame[["x", "y", "h"]].to_numpy(dtype=float)
    if np.isnan(points).any():
        raise SerializationError("Trajectory table has missing (dc, slot) rows")
    return Trajectory(points)

def association_frame(assoc: Association) -> pd.DataFrame:
    users, dcs = np.nonzero(assoc.a)
    return pd.DataFrame({"user": users, "dc": dcs})

def association_from_frame(frame: pd.DataFrame, num_users: int, num_dcs: int) -> Association:
    a = np.zeros((num_users, num_dcs), dtype=np.int8)
    try:
        a[frame["user"].to_numpy(), frame["dc"].to_numpy()] = 1
    except IndexError as e:
        raise SerializationError(f"Association table out of range: {e}") from e
    return Association(a)

def schedule_frame(sched: Schedule) -> pd.DataFrame:
    users, dcs, slots = np.nonzero(sched.k)
    frame = pd.DataFrame({"user": users, "dc": dcs, "slot": slots})
    return frame.sort_values(["user", "dc", "slot"], kind="stable").reset_index(drop=True)

def schedule_from_frame(frame: pd.DataFrame, num_users: int, num_dcs: int, num_slots: int) -> Schedule:
    k = np.zeros((num_users, num_dcs, num_slots), dtype=np.int8)
    try:
        k[frame["user"].to_numpy(), frame["dc"].to_numpy(), frame["slot"].to_numpy()] = 1
    except IndexError as e:
        raise SerializationError(f"Schedule table out of range: {e}") from e
    return Schedule(k)

def iterations_frame(history: Iterable[IterationRecord]) -> pd.DataFrame:
    """Iteration log without wall-clock times."""
    rows = [
        {
            "iteration": r.iteration,
            "objective": r.objective,
            "delta_g": r.delta_g,
            "assoc_changed": int(r.assoc_changed),
        }
        for r in history
    ]
    return pd.DataFrame(rows, columns=["iteration", "objective", "delta_g", "assoc_changed"])

def history_from_frame(frame: pd.DataFrame) -> List[IterationRecord]:
    return [
        IterationRecord(
            iteration=int(row.iteration),
            objective=float(row.objective),
            delta_g=float(row.delta_g),
            assoc_changed=bool(row.assoc_changed),
        )
        for row in frame.itertuples(index=False)
    ]

def metrics_frame(summary: UserPathlossSummary, method: str) -> pd.DataFrame:
    """One row per user."""
    return pd.DataFrame({
        "method": method,
        "user": np.arange(summary.num_users),
        "mean_db": summary.per_user,
        "slots": summary.slots_per_user,
    })

def summary_row(summary: UserPathlossSummary, method: str, **extra: Any) -> Dict[str, Any]:
    row: Dict[str, Any] = dict(extra)
    row.update({
        "method": method,
        "mean_per_user": summary.mean_per_user,
        "mean_per_slot": summary.mean_per_slot,
        "std": summary.std,
    })
    return row

def cdf_frame(summary: UserPathlossSummary, method: str) -> pd.DataFrame:
    return pd.DataFrame({"method": method, "pathloss_db": summary.cdf_x, "cdf": summary.cdf_p})

def write_solution(directory: Path, sol: Solution) -> List[Path]:
    """Write trajectory, association, schedule and iteration tables."""
    directory = Path(directory)
    return [
        write_frame(directory / TRAJECTORY_FILE, trajectory_frame(sol.trajectory)),
        write_frame(directory / ASSOCIATION_FILE, association_frame(sol.assoc)),
        write_frame(directory / SCHEDULE_FILE, schedule_frame(sol.sched)),
        write_frame(directory / ITERATIONS_FILE, iterations_frame(sol.history)),
    ]

def read_solution(directory: Path, s: Scenario, converged: Optional[bool] = None) -> Solution:
    """Rebuild a Solution from the tables written by write_solution.

    The objective is re-evaluated from the parts. Without an explicit flag
    the run counts as converged when its last iteration met epsilon.

    Raises:
        SerializationError: On unreadable or inconsistent tables
    """
    directory = Path(directory)
    traj = trajectory_from_frame(read_frame(directory / TRAJECTORY_FILE, ["dc", "slot", "x", "y", "h"]))
    assoc = association_from_frame(read_frame(directory / ASSOCIATION_FILE, ["user", "dc"]), s.num_users, s.num_dcs)
    sched = schedule_from_frame(
        read_frame(directory / SCHEDULE_FILE, ["user", "dc", "slot"]), s.num_users, s.num_dcs, s.num_slots
    )
    history: List[IterationRecord] = []
    if (directory / ITERATIONS_FILE).exists():
        history = history_from_frame(
            read_frame(directory / ITERATIONS_FILE, ["iteration", "objective", "delta_g", "assoc_changed"])
        )
    if converged is None:
        converged = not history or history[-1].delta_g < s.epsilon
    try:
        return Solution.build(s, traj, assoc, sched, history, converged)
    except ModelError as e:
        raise SerializationError(f"Tables in {directory} do not match the scenario: {e}") from e
