"""Run configuration and experiment orchestration."""

from .config import ConfigError, LogLevel, RunConfig, ValidationError
from .manager import ExperimentError, ExperimentManager

__all__ = [
    "ConfigError",
    "ExperimentError",
    "ExperimentManager",
    "LogLevel",
    "RunConfig",
    "ValidationError",
]
