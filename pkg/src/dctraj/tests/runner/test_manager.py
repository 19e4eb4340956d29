"""Tests for experiment orchestration.

File: dctraj/tests/runner/test_manager.py
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pandas as pd
import pytest

from dctraj.core.serialization import read_scenario, read_solution
from dctraj.runner.config import RunConfig
from dctraj.runner.manager import (
    DESIGN,
    STATIC,
    ExperimentError,
    ExperimentManager,
    build_scenario,
)

SMALL = {"num_slots": 8, "s_min": 2}

@pytest.fixture
def config(output_dir: Path) -> RunConfig:
    """Small run: four users, a short period and cheap solvers."""
    return RunConfig(
        num_users=4,
        num_dcs=2,
        seed=3,
        output_dir=output_dir,
        scenario_overrides=dict(SMALL),
        bcd_overrides={"max_iterations": 5, "check_unimodality": False},
        pso_overrides={"swarm_size": 8, "iterations_per_drone": 10, "outer_rounds": 1},
        dc_counts=(2, 3),
        num_seeds=2,
    )

# Scenarios
def test_build_scenario(config: RunConfig):
    """Test generation with overrides and a DC-count override."""
    s = build_scenario(config)
    assert (s.num_users, s.num_dcs, s.num_slots, s.seed) == (4, 2, 8, 3)
    assert build_scenario(config, num_dcs=3, seed=4).num_dcs == 3

def test_generate(config: RunConfig, tmp_path: Path):
    """Test writing a generated scenario document."""
    path = ExperimentManager(config).generate(tmp_path / "nested" / "scenario.json")
    assert read_scenario(path).num_users == 4
    with pytest.raises(ExperimentError):
        ExperimentManager(config).generate(tmp_path)

def test_scenario_file_used(config: RunConfig, tmp_path: Path):
    """Test that a scenario file replaces generation and still takes overrides."""
    path = ExperimentManager(config).generate(tmp_path / "scenario.json")
    config.scenario_path = path
    config.num_users = 50
    config.scenario_overrides = {"v_max": 20.0}
    s = ExperimentManager(config).scenario()
    assert s.num_users == 4
    assert s.v_max == 20.0

# Single runs
def test_solve_writes_tables(config: RunConfig, output_dir: Path):
    """Test the trajectory run and its output files."""
    outcome = ExperimentManager(config).solve()
    assert outcome.method == DESIGN
    assert outcome.violations == []
    assert {p.name for p in outcome.files} == {
        "scenario.json", "trajectory.csv", "association.csv", "schedule.csv",
        "iterations.csv", "metrics.csv", "cdf.csv", "summary.csv", "config.toml",
    }
    summary = pd.read_csv(output_dir / "summary.csv")
    assert summary["method"].tolist() == [DESIGN]
    assert summary["violations"].tolist() == [0]

    loaded = read_solution(output_dir, read_scenario(output_dir / "scenario.json"))
    assert loaded.objective == pytest.approx(outcome.solution.objective)

def test_solve_is_reproducible(config: RunConfig, tmp_path: Path):
    """Test that two identical runs write identical bytes."""
    for name in ("a", "b"):
        config.output_dir = tmp_path / name
        ExperimentManager(config).solve()
    for name in ("trajectory.csv", "schedule.csv", "summary.csv", "config.toml"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

def test_solve_not_converged(config: RunConfig):
    """Test that hitting the iteration cap is reported."""
    config.bcd_overrides = {"max_iterations": 1, "epsilon": 1e-12}
    assert not ExperimentManager(config).solve().converged

def test_baseline_writes_tables(config: RunConfig, output_dir: Path):
    """Test the static run."""
    outcome = ExperimentManager(config).baseline()
    assert outcome.method == STATIC
    assert outcome.violations == []
    assert outcome.converged
    assert pd.read_csv(output_dir / "metrics.csv")["method"].unique().tolist() == [STATIC]

def test_resource_usage_logged(config: RunConfig, caplog: pytest.LogCaptureFixture):
    """Test that leaving the context logs resource usage."""
    with caplog.at_level(logging.INFO, logger="dctraj.runner.manager"):
        with ExperimentManager(config) as manager:
            manager.scenario()
    assert "Resource usage for solve" in caplog.text
    usage = manager.resource_usage()
    assert usage.wall_s >= 0.0
    assert set(usage.to_dict()) == {"wall_s", "cpu_s", "rss_mb"}

# Comparison sweep
def test_compare(config: RunConfig, output_dir: Path):
    """Test the sweep tables and the report."""
    outcome = ExperimentManager(config).compare()
    assert [(c.num_dcs, c.seed) for c in outcome.cases] == [(2, 3), (2, 4), (3, 3), (3, 4)]
    assert [row["num_dcs"] for row in outcome.rows] == [2, 3]
    assert outcome.rows[0]["reference"] is None
    assert outcome.rows[1]["reference"] == pytest.approx(0.4671)
    assert outcome.mean_reduction == pytest.approx(np.mean([r["std_reduction"] for r in outcome.rows]))

    comparison = pd.read_csv(output_dir / "comparison.csv")
    assert len(comparison) == 4
    summary = pd.read_csv(output_dir / "summary.csv")
    assert sorted(summary["method"].unique()) == [STATIC, DESIGN]
    metrics = pd.read_csv(output_dir / "metrics.csv")
    assert len(metrics) == 4 * 2 * 4
    cdf = pd.read_csv(output_dir / "cdf.csv")
    assert set(cdf["num_dcs"]) == {2, 3}

    report = (output_dir / "report.md").read_text()
    assert "| 3 |" in report
    assert "seeds 3, 4" in report

def test_compare_rows_average_seeds(config: RunConfig):
    """Test that a row's stds are seed averages and its reduction uses them."""
    outcome = ExperimentManager(config).compare()
    group = [c for c in outcome.cases if c.num_dcs == 2]
    row = outcome.rows[0]
    assert row["std_static"] == pytest.approx(np.mean([c.static.std for c in group]))
    assert row["std_reduction"] == pytest.approx(1.0 - row["std_design"] / row["std_static"])

def test_compare_scenario_file_single_seed(config: RunConfig, tmp_path: Path):
    """Test that a scenario file sweeps DC counts on that one scenario."""
    config.scenario_path = ExperimentManager(config).generate(tmp_path / "scenario.json")
    outcome = ExperimentManager(config).compare()
    assert [(c.num_dcs, c.seed) for c in outcome.cases] == [(2, 3), (3, 3)]

def test_compare_unconverged_listed(config: RunConfig, output_dir: Path):
    """Test that capped runs are flagged and named in the report."""
    config.bcd_overrides = {"max_iterations": 1, "epsilon": 1e-12, "check_unimodality": False}
    config.dc_counts = (2,)
    config.num_seeds = 1
    outcome = ExperimentManager(config).compare()
    assert not outcome.converged
    assert "2 DCs / seed 3" in (output_dir / "report.md").read_text()

def test_parallel_cases_match_sequential(config: RunConfig):
    """Test that pooled cases come back in task order with the same results."""
    config.dc_counts = (2,)
    sequential = ExperimentManager(config).compare()
    config.jobs = 2
    with patch("dctraj.runner.manager.ProcessPoolExecutor", ThreadPoolExecutor):
        pooled = ExperimentManager(config).compare()
    assert [(c.num_dcs, c.seed) for c in pooled.cases] == [(c.num_dcs, c.seed) for c in sequential.cases]
    for a, b in zip(pooled.cases, sequential.cases):
        assert np.array_equal(a.design.per_user, b.design.per_user)
        assert np.array_equal(a.static.per_user, b.static.per_user)

@pytest.mark.slow
def test_process_pool(config: RunConfig):
    """Test the sweep in real worker processes."""
    config.jobs = 2
    outcome = ExperimentManager(config).compare()
    assert len(outcome.cases) == 4
