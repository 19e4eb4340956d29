"""Shared fixtures for the dctraj test suite.

File: dctraj/tests/conftest.py
"""

import math
from pathlib import Path

import numpy as np
import pytest

from dctraj.core.bcd import BcdOptions
from dctraj.core.baseline import PsoOptions
from dctraj.core.model import Scenario, generate_scenario

SMALL = {"num_slots": 8, "s_min": 2}

@pytest.fixture
def small_scenario() -> Scenario:
    """Four users, two DCs, eight slots, default backhaul bound."""
    return generate_scenario(seed=3, num_users=4, num_dcs=2, overrides=SMALL)

@pytest.fixture
def open_scenario() -> Scenario:
    """Same sizes as small_scenario with the backhaul bound switched off."""
    return generate_scenario(seed=3, num_users=4, num_dcs=2, overrides={**SMALL, "l_db": math.inf})

@pytest.fixture
def single_user_scenario() -> Scenario:
    """One user, one DC; the optimum hovers straight above the user."""
    return Scenario(
        users=np.array([[120.0, -80.0]]),
        num_dcs=1,
        seed=11,
        num_slots=6,
        s_min=2,
        l_db=math.inf,
    )

@pytest.fixture
def fast_bcd() -> BcdOptions:
    return BcdOptions(max_iterations=30, check_unimodality=False)

@pytest.fixture
def fast_pso() -> PsoOptions:
    return PsoOptions(swarm_size=12, iterations_per_drone=25, outer_rounds=2, seed=5)

@pytest.fixture
def output_dir(tmp_path: Path) -> Path:
    """Provide an empty output directory."""
    out = tmp_path / "out"
    out.mkdir()
    return out

@pytest.fixture(autouse=True)
def clean_env(monkeypatch: pytest.MonkeyPatch) -> None:
    """Keep DCTRAJ_* variables from the calling shell out of the tests."""
    for name in ("DCTRAJ_LOG", "DCTRAJ_LOG_FILE", "DCTRAJ_OUTPUT_DIR", "DCTRAJ_SEED", "DCTRAJ_JOBS"):
        monkeypatch.delenv(name, raising=False)
