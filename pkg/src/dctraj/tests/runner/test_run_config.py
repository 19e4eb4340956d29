"""Tests for run configuration.

File: dctraj/tests/runner/test_run_config.py

Covers:
- Defaults and validation
- Environment variables and their precedence
- TOML config files and override tables
- Saving and reloading
- Logging setup
"""

import logging
import math
from pathlib import Path

import pytest

from dctraj.core.assign import ScheduleFill
from dctraj.runner.config import (
    ConfigError,
    LogLevel,
    RunConfig,
    ValidationError,
)

# Defaults and validation
def test_defaults(tmp_path: Path):
    """Test the default run."""
    config = RunConfig.from_env(output_dir=tmp_path)
    assert config.num_users == 20
    assert config.num_dcs == 5
    assert config.dc_counts == (3, 4, 5, 6, 7)
    assert config.log_level is LogLevel.INFO
    assert not config.validate()

def test_validation_collects_all(tmp_path: Path):
    """Test that every bad field is reported."""
    config = RunConfig(num_users=0, jobs=0, dc_counts=(), output_dir=tmp_path)
    errors = config.validate()
    assert any("num_users" in e for e in errors)
    assert any("jobs" in e for e in errors)
    assert any("dc_counts" in e for e in errors)

def test_validation_rejects_bad_overrides(tmp_path: Path):
    """Test that option overrides are validated too."""
    config = RunConfig(bcd_overrides={"max_iterations": 0}, pso_overrides={"speed": 1}, output_dir=tmp_path)
    errors = config.validate()
    assert any("bcd.max_iterations" in e for e in errors)
    assert any("Invalid pso overrides" in e for e in errors)

def test_missing_scenario_file(tmp_path: Path):
    """Test that a scenario path must exist."""
    with pytest.raises(ValidationError, match="does not exist"):
        RunConfig.from_env(scenario_path=tmp_path / "none.json", output_dir=tmp_path)

def test_output_dir_is_file(tmp_path: Path):
    """Test that a regular file cannot be the output directory."""
    target = tmp_path / "file"
    target.write_text("x")
    with pytest.raises(ValidationError, match="not a directory"):
        RunConfig.from_env(output_dir=target)

def test_log_level_from_string():
    """Test case-insensitive parsing with an INFO fallback."""
    assert LogLevel.from_string("DEBUG") is LogLevel.DEBUG
    assert LogLevel.from_string("loud") is LogLevel.INFO
    assert LogLevel.WARNING.to_python_level() == logging.WARNING

# Environment
def test_from_env(monkeypatch: pytest.MonkeyPatch, tmp_path: Path):
    """Test values read from DCTRAJ_* variables."""
    monkeypatch.setenv("DCTRAJ_SEED", "11")
    monkeypatch.setenv("DCTRAJ_JOBS", "3")
    monkeypatch.setenv("DCTRAJ_OUTPUT_DIR", str(tmp_path / "env-out"))
    monkeypatch.setenv("DCTRAJ_LOG", "debug")
    config = RunConfig.from_env()
    assert config.seed == 11
    assert config.jobs == 3
    assert config.output_dir == tmp_path / "env-out"
    assert config.log_level is LogLevel.DEBUG

def test_kwargs_beat_env(monkeypatch: pytest.MonkeyPatch, tmp_path: Path):
    """Test that explicit values win over the environment."""
    monkeypatch.setenv("DCTRAJ_SEED", "11")
    assert RunConfig.from_env(seed=4, output_dir=tmp_path).seed == 4
    assert RunConfig.from_env(seed=None, output_dir=tmp_path).seed == 11

def test_bad_env_value_ignored(monkeypatch: pytest.MonkeyPatch, tmp_path: Path):
    """Test that an unparsable variable falls back to the default."""
    monkeypatch.setenv("DCTRAJ_JOBS", "many")
    assert RunConfig.from_env(output_dir=tmp_path).jobs == 1

# Config files
def test_from_file(tmp_path: Path):
    """Test top-level keys and override tables."""
    path = tmp_path / "run.toml"
    path.write_text(
        'num_users = 12\n'
        'dc_counts = [2, 3]\n'
        f'output_dir = "{tmp_path / "out"}"\n'
        '\n[scenario]\nv_max = 25\nl_db = "inf"\n'
        '\n[scenario.u2d]\na = 9.61\n'
        '\n[bcd]\nschedule_fill = "minimal"\nmax_iterations = 40\n'
        '\n[pso]\nswarm_size = 16\n'
    )
    config = RunConfig.from_file(path)
    assert config.num_users == 12
    assert config.dc_counts == (2, 3)
    assert config.scenario_overrides == {"v_max": 25.0, "l_db": math.inf, "u2d": {"a": 9.61}}
    assert config.bcd_options().schedule_fill is ScheduleFill.MINIMAL
    assert config.bcd_options().max_iterations == 40
    assert config.pso_options().swarm_size == 16

def test_command_line_beats_file(tmp_path: Path):
    """Test that flags and overrides win over the file."""
    path = tmp_path / "run.toml"
    path.write_text(f'seed = 3\noutput_dir = "{tmp_path}"\n[scenario]\nv_max = 25\n[scenario.u2d]\na = 9.61\nb = 0.16\n')
    config = RunConfig.from_file(path, seed=8, scenario_overrides={"v_max": 40.0, "u2d": {"b": 0.2}})
    assert config.seed == 8
    assert config.scenario_overrides == {"v_max": 40.0, "u2d": {"a": 9.61, "b": 0.2}}

def test_file_errors(tmp_path: Path):
    """Test unreadable files, unknown keys and bad tables."""
    with pytest.raises(ConfigError):
        RunConfig.from_file(tmp_path / "missing.toml")

    path = tmp_path / "run.toml"
    path.write_text("colour = 'red'\n")
    with pytest.raises(ValidationError, match="Unknown config keys"):
        RunConfig.from_file(path)

    path.write_text("[bcd]\nmax_iterations = 'lots'\n")
    with pytest.raises(ValidationError):
        RunConfig.from_file(path)

    path.write_text("[bcd\n")
    with pytest.raises(ConfigError):
        RunConfig.from_file(path)

def test_to_file_round_trip(tmp_path: Path):
    """Test that a saved config loads back to the same run."""
    config = RunConfig(
        num_users=9,
        seed=2,
        dc_counts=(3, 4),
        output_dir=tmp_path,
        scenario_overrides={"l_db": math.inf, "u2d": {"a": 9.61}},
        bcd_overrides={"schedule_fill": ScheduleFill.MINIMAL},
    )
    path = tmp_path / "config.toml"
    config.to_file(path)
    loaded = RunConfig.from_file(path, output_dir=tmp_path)
    assert loaded.num_users == 9
    assert loaded.dc_counts == (3, 4)
    assert loaded.scenario_overrides == config.scenario_overrides
    assert loaded.bcd_options().schedule_fill is ScheduleFill.MINIMAL

def test_oracle_flag(tmp_path: Path):
    """Test that the oracle flag turns on oracle mode."""
    assert RunConfig(oracle=True, output_dir=tmp_path).bcd_options().oracle
    assert RunConfig(output_dir=tmp_path).bcd_options(max_iterations=5).max_iterations == 5

def test_update(tmp_path: Path):
    """Test validated updates."""
    config = RunConfig(output_dir=tmp_path)
    config.update({"num_seeds": 2})
    assert config.num_seeds == 2
    with pytest.raises(ValidationError):
        config.update({"num_seeds": 0})
    assert config.num_seeds == 2

# Logging
def test_setup_logging_with_file(tmp_path: Path):
    """Test console and file handlers."""
    log_file = tmp_path / "logs" / "run.log"
    config = RunConfig(log_level=LogLevel.DEBUG, log_file=str(log_file), output_dir=tmp_path)
    config.setup_logging()
    root = logging.getLogger()
    assert root.level == logging.DEBUG
    assert any(isinstance(h, logging.FileHandler) for h in root.handlers)
    logging.getLogger("dctraj.test").debug("hello")
    for handler in root.handlers:
        handler.flush()
    assert "hello" in log_file.read_text()
    RunConfig(output_dir=tmp_path).setup_logging()
