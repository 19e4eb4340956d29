"""Run configuration management.

A run is configured in layers, later layers winning:
1. Default values
2. Environment variables (``DCTRAJ_*``)
3. A TOML config file with optional [scenario], [bcd] and [pso] tables
4. Command line flags and ``section.field=value`` overrides

File: dctraj/runner/config.py
"""

import logging
import logging.config
import os
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import toml

from ..core.baseline import PsoOptions
from ..core.bcd import BcdOptions
from ..utils.files import atomic_write
from ..utils.validation import check_count, check_output_dir, collect_errors
from .overrides import OverrideError, Overrides, coerce_section, merge_overrides, render_value

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT_DIR = "dctraj-out"
DEFAULT_DC_COUNTS = (3, 4, 5, 6, 7)
CONFIG_FILE = "config.toml"

class ConfigError(Exception):
    """Base exception for configuration errors."""
    pass

class ValidationError(ConfigError):
    """Raised when configuration validation fails."""
    pass

class LogLevel(str, Enum):
    """Valid logging levels."""
    DEBUG = "debug"
    INFO = "info"
    WARNING = "warning"
    ERROR = "error"
    CRITICAL = "critical"

    @classmethod
    def from_string(cls, level: str) -> 'LogLevel':
        """Convert string to LogLevel, defaulting to INFO for invalid values.

        Args:
            level: Log level string

        Returns:
            LogLevel enum value
        """
        try:
            return cls(level.lower())
        except ValueError:
            logger.warning(f"Invalid log level '{level}', defaulting to INFO")
            return cls.INFO

    def to_python_level(self) -> int:
        return getattr(logging, self.value.upper())

ENV_MAPPINGS = {
    "DCTRAJ_LOG": "log_level",
    "DCTRAJ_LOG_FILE": "log_file",
    "DCTRAJ_OUTPUT_DIR": "output_dir",
    "DCTRAJ_SEED": "seed",
    "DCTRAJ_JOBS": "jobs",
}

@dataclass
class RunConfig:
    """Settings for one command invocation."""

    command: str = "solve"
    scenario_path: Optional[Path] = None
    num_users: int = 20
    num_dcs: int = 5
    seed: int = 7
    output_dir: Path = Path(DEFAULT_OUTPUT_DIR)

    scenario_overrides: Dict[str, Any] = field(default_factory=dict)
    bcd_overrides: Dict[str, Any] = field(default_factory=dict)
    pso_overrides: Dict[str, Any] = field(default_factory=dict)

    # compare sweep
    dc_counts: Tuple[int, ...] = DEFAULT_DC_COUNTS
    num_seeds: int = 5
    jobs: int = 1

    oracle: bool = False

    log_level: LogLevel = field(
        default_factory=lambda: LogLevel.from_string(os.getenv("DCTRAJ_LOG", "info"))
    )
    log_file: Optional[str] = field(default_factory=lambda: os.getenv("DCTRAJ_LOG_FILE"))

    @classmethod
    def from_env(cls, **kwargs) -> 'RunConfig':
        """Create config from environment variables and kwargs.

        kwargs are the lower layer; environment values fill in only the
        keys the caller left unset (None).

        Raises:
            ValidationError: If the result is invalid
        """
        config_dict = {k: v for k, v in kwargs.items() if v is not None}

        env_updates: Dict[str, Any] = {}
        for env_var, config_key in ENV_MAPPINGS.items():
            if config_key in config_dict:
                continue
            if value := os.getenv(env_var):
                try:
                    if config_key in ("seed", "jobs"):
                        env_updates[config_key] = int(value)
                    elif config_key == "output_dir":
                        env_updates[config_key] = Path(value)
                    elif config_key == "log_level":
                        env_updates[config_key] = LogLevel.from_string(value)
                    else:
                        env_updates[config_key] = value
                except (ValueError, TypeError) as e:
                    logger.warning(f"Invalid value for {env_var}: {e}")

        config_dict.update(env_updates)
        instance = cls(**config_dict)
        if errors := instance.validate():
            raise ValidationError("\n".join(errors))
        return instance

    @classmethod
    def from_file(cls, path: Path, **kwargs) -> 'RunConfig':
        """Load configuration from a TOML file.

        Top-level keys set RunConfig fields; the [scenario], [bcd] and [pso]
        tables hold overrides. kwargs (command line) take precedence.

        Raises:
            ConfigError: If the file cannot be read or parsed
            ValidationError: If the config is invalid
        """
        try:
            document = toml.loads(Path(path).read_text())
        except (OSError, toml.TomlDecodeError) as e:
            raise ConfigError(f"Failed to load config file {path}: {e}") from e

        try:
            tables = {
                "scenario": coerce_section("scenario", document.pop("scenario", {})),
                "bcd": coerce_section("bcd", document.pop("bcd", {})),
                "pso": coerce_section("pso", document.pop("pso", {})),
            }
        except OverrideError as e:
            raise ValidationError(str(e)) from e

        known = {f.name for f in fields(cls)}
        unknown = sorted(set(document) - known)
        if unknown:
            raise ValidationError(f"Unknown config keys: {', '.join(unknown)}")

        config_dict: Dict[str, Any] = dict(document)
        if "scenario_path" in config_dict:
            config_dict["scenario_path"] = Path(config_dict["scenario_path"])
        if "output_dir" in config_dict:
            config_dict["output_dir"] = Path(config_dict["output_dir"])
        if "dc_counts" in config_dict:
            config_dict["dc_counts"] = tuple(config_dict["dc_counts"])
        if "log_level" in config_dict:
            config_dict["log_level"] = LogLevel.from_string(config_dict["log_level"])

        cli_overrides: Overrides = {
            "scenario": kwargs.pop("scenario_overrides", None) or {},
            "bcd": kwargs.pop("bcd_overrides", None) or {},
            "pso": kwargs.pop("pso_overrides", None) or {},
        }
        merged = merge_overrides(tables, cli_overrides)
        config_dict.update({k: v for k, v in kwargs.items() if v is not None})
        config_dict.update(
            scenario_overrides=merged["scenario"],
            bcd_overrides=merged["bcd"],
            pso_overrides=merged["pso"],
        )
        return cls.from_env(**config_dict)

    def to_file(self, path: Path) -> None:
        """Save the resolved configuration as TOML.

        Raises:
            ConfigError: If the file cannot be written
        """
        document: Dict[str, Any] = {
            "command": self.command,
            "num_users": self.num_users,
            "num_dcs": self.num_dcs,
            "seed": self.seed,
            "dc_counts": list(self.dc_counts),
            "num_seeds": self.num_seeds,
            "oracle": self.oracle,
        }
        if self.scenario_path is not None:
            document["scenario_path"] = str(self.scenario_path)
        for section, values in (
            ("scenario", self.scenario_overrides),
            ("bcd", self.bcd_overrides),
            ("pso", self.pso_overrides),
        ):
            if values:
                document[section] = {k: render_value(v) for k, v in sorted(values.items())}
        try:
            atomic_write(path, toml.dumps(document))
        except Exception as e:
            raise ConfigError(f"Failed to save config to {path}: {e}") from e

    def bcd_options(self, **extra) -> BcdOptions:
        options = BcdOptions(**self.bcd_overrides)
        if self.oracle:
            options.oracle = True
        return replace(options, **extra) if extra else options

    def pso_options(self) -> PsoOptions:
        return PsoOptions(**self.pso_overrides)

    def validate(self) -> List[str]:
        """Validate configuration settings.

        Returns:
            List of validation error messages (empty if valid)
        """
        errors = collect_errors([
            check_count("num_users", self.num_users),
            check_count("num_dcs", self.num_dcs),
            check_count("seed", self.seed, minimum=0),
            check_count("num_seeds", self.num_seeds),
            check_count("jobs", self.jobs),
            check_output_dir(Path(self.output_dir)),
        ])
        if not self.dc_counts:
            errors.append("dc_counts must not be empty")
        errors.extend(collect_errors(check_count("dc_counts entry", d) for d in self.dc_counts))
        if self.scenario_path is not None and not Path(self.scenario_path).is_file():
            errors.append(f"Scenario file does not exist: {self.scenario_path}")

        try:
            errors.extend(self.bcd_options().validate())
        except TypeError as e:
            errors.append(f"Invalid bcd overrides: {e}")
        try:
            errors.extend(self.pso_options().validate())
        except TypeError as e:
            errors.append(f"Invalid pso overrides: {e}")
        return errors

    def setup_logging(self) -> None:
        """Configure logging based on settings."""
        log_config: Dict[str, Any] = {
            'version': 1,
            'disable_existing_loggers': False,
            'formatters': {
                'default': {
                    'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
                }
            },
            'handlers': {
                'console': {
                    'class': 'logging.StreamHandler',
                    'formatter': 'default',
                    'level': self.log_level.to_python_level()
                }
            },
            'root': {
                'level': self.log_level.to_python_level(),
                'handlers': ['console']
            }
        }

        if self.log_file:
            log_file_path = Path(self.log_file)
            try:
                log_file_path.parent.mkdir(parents=True, exist_ok=True)
                log_config['handlers']['file'] = {
                    'class': 'logging.FileHandler',
                    'filename': self.log_file,
                    'formatter': 'default',
                    'level': self.log_level.to_python_level()
                }
                log_config['root']['handlers'].append('file')
            except OSError as e:
                logger.error(f"Failed to setup file logging: {e}")

        logging.config.dictConfig(log_config)

    def update(self, updates: Dict[str, Any]) -> None:
        """Update config with new values.

        Raises:
            ValidationError: If updates would make config invalid
        """
        updated = asdict(self)
        updated.update(updates)
        temp_instance = self.__class__(**updated)
        if errors := temp_instance.validate():
            raise ValidationError("\n".join(errors))
        for key, value in updates.items():
            setattr(self, key, value)
