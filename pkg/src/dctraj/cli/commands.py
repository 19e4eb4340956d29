"""CLI command implementations for dctraj.

Commands:
    generate  write a scenario document
    solve     run the trajectory design on one scenario
    baseline  run the static PSO deployment on one scenario
    compare   sweep DC counts and seeds, comparing both methods

File: dctraj/cli/commands.py
"""

import logging
import sys
from pathlib import Path
from typing import Any, Callable, Optional, Tuple

import click

from ..core.assign import InfeasibleAssignmentError
from ..core.baseline import BaselineError
from ..core.bcd import BcdError, InfeasibleScenarioError, MonotonicityError, OracleMismatchError
from ..core.model import InfeasibleScheduleError, ScenarioError
from ..core.serialization import SerializationError
from ..runner.config import ConfigError, LogLevel, RunConfig
from ..runner.manager import ExperimentError, ExperimentManager
from ..runner.overrides import OverrideError, parse_overrides

logger = logging.getLogger(__name__)

# Exit codes
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3
EXIT_INFEASIBLE = 4

INFEASIBLE_ERRORS = (InfeasibleScenarioError, InfeasibleAssignmentError, InfeasibleScheduleError)
INVALID_ERRORS = (
    ConfigError, OverrideError, ScenarioError, SerializationError, BaselineError, BcdError, ExperimentError
)

def _parse_dc_counts(ctx: click.Context, param: click.Parameter, value: Optional[str]) -> Optional[Tuple[int, ...]]:
    if value is None:
        return None
    try:
        counts = tuple(int(part) for part in value.split(",") if part.strip())
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got '{value}'")
    if not counts:
        raise click.BadParameter("at least one DC count is required")
    return counts

def scenario_options(func: Callable) -> Callable:
    """Options shared by every command that builds a scenario."""
    options = [
        click.option('--scenario', 'scenario_path', type=click.Path(path_type=Path),
                     help='Scenario document to load instead of generating one'),
        click.option('--users', 'num_users', type=int, help='Number of users (default: 20)'),
        click.option('--dcs', 'num_dcs', type=int, help='Number of DCs (default: 5)'),
        click.option('--seed', type=int, help='Scenario seed (default: 7, env: DCTRAJ_SEED)'),
        click.option('--set', 'overrides', multiple=True, metavar='SECTION.FIELD=VALUE',
                     help='Override a scenario, bcd or pso field; repeatable'),
    ]
    for option in reversed(options):
        func = option(func)
    return func

def _build_config(ctx: click.Context, command: str, overrides: Tuple[str, ...], **kwargs: Any) -> RunConfig:
    """Resolve defaults, environment, config file and flags into a RunConfig."""
    parsed = parse_overrides(overrides)
    kwargs.update(
        command=command,
        scenario_overrides=parsed["scenario"],
        bcd_overrides=parsed["bcd"],
        pso_overrides=parsed["pso"],
        log_level=ctx.obj.get("log_level"),
        log_file=ctx.obj.get("log_file"),
    )
    config_path = ctx.obj.get("config_path")
    if config_path is not None:
        config = RunConfig.from_file(config_path, **kwargs)
    else:
        config = RunConfig.from_env(**kwargs)
    config.setup_logging()
    logger.debug(f"Resolved configuration: {config}")
    return config

def _run(ctx: click.Context, action: Callable[[], int]) -> None:
    """Run a command body, mapping failures to exit codes."""
    try:
        code = action()
    except INFEASIBLE_ERRORS as e:
        click.echo(f"Error: infeasible scenario: {e}", err=True)
        sys.exit(EXIT_INFEASIBLE)
    except (OracleMismatchError, MonotonicityError) as e:
        click.echo(f"Error: {e}", err=True)
        if ctx.obj.get("debug"):
            raise
        sys.exit(EXIT_ERROR)
    except INVALID_ERRORS as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(EXIT_INVALID)
    except Exception as e:
        click.echo(f"Error: {e}", err=True)
        if ctx.obj.get("debug"):
            raise
        sys.exit(EXIT_ERROR)
    sys.exit(code)

@click.group()
@click.option('--debug/--no-debug', default=False, help='Enable debug logging and tracebacks')
@click.option('--log-level', type=str, envvar='DCTRAJ_LOG',
              help='debug, info, warning, error or critical (env: DCTRAJ_LOG)')
@click.option('--log-file', type=click.Path(path_type=Path), help='Also log to this file')
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help='TOML config file with optional [scenario], [bcd] and [pso] tables')
@click.pass_context
def cli(
    ctx: click.Context,
    debug: bool,
    log_level: Optional[str],
    log_file: Optional[Path],
    config_path: Optional[Path]
) -> None:
    """Design drone-cell trajectories and compare them with static deployments."""
    ctx.ensure_object(dict)
    level = LogLevel.DEBUG if debug else (LogLevel.from_string(log_level) if log_level else None)
    ctx.obj.update(
        debug=debug,
        log_level=level,
        log_file=str(log_file) if log_file else None,
        config_path=config_path,
    )

@cli.command()
@scenario_options
@click.option('-o', '--output', 'output', type=click.Path(dir_okay=False, path_type=Path),
              default=Path('scenario.json'), show_default=True, help='Scenario file to write')
@click.pass_context
def generate(ctx: click.Context, overrides: Tuple[str, ...], output: Path, **kwargs: Any) -> None:
    """Write a scenario document and print its path."""
    def action() -> int:
        config = _build_config(ctx, "generate", overrides, output_dir=output.parent, **kwargs)
        path = ExperimentManager(config).generate(output)
        click.echo(str(path))
        return EXIT_OK

    _run(ctx, action)

@cli.command()
@scenario_options
@click.option('-o', '--output', 'output_dir', type=click.Path(file_okay=False, path_type=Path),
              help='Output directory (default: ./dctraj-out, env: DCTRAJ_OUTPUT_DIR)')
@click.option('--oracle/--no-oracle', default=None,
              help='Cross-check association and scheduling by exhaustive search on small instances')
@click.pass_context
def solve(ctx: click.Context, overrides: Tuple[str, ...], **kwargs: Any) -> None:
    """Run the trajectory design and write its solution tables."""
    def action() -> int:
        config = _build_config(ctx, "solve", overrides, **kwargs)
        with ExperimentManager(config) as manager:
            outcome = manager.solve()
        click.echo(
            f"Mean pathloss {outcome.summary.mean_per_user:.3f} dB per user "
            f"(std {outcome.summary.std:.3f} dB) after {outcome.solution.iterations} iterations"
        )
        click.echo(f"Wrote {len(outcome.files)} files to {config.output_dir}")
        if not outcome.converged:
            click.echo("Stopped at max_iterations before reaching epsilon", err=True)
            return EXIT_NOT_CONVERGED
        return EXIT_OK

    _run(ctx, action)

@cli.command()
@scenario_options
@click.option('-o', '--output', 'output_dir', type=click.Path(file_okay=False, path_type=Path),
              help='Output directory (default: ./dctraj-out, env: DCTRAJ_OUTPUT_DIR)')
@click.pass_context
def baseline(ctx: click.Context, overrides: Tuple[str, ...], **kwargs: Any) -> None:
    """Run the static PSO deployment and write its solution tables."""
    def action() -> int:
        config = _build_config(ctx, "baseline", overrides, **kwargs)
        with ExperimentManager(config) as manager:
            outcome = manager.baseline()
        click.echo(
            f"Mean pathloss {outcome.summary.mean_per_user:.3f} dB per user "
            f"(std {outcome.summary.std:.3f} dB)"
        )
        click.echo(f"Wrote {len(outcome.files)} files to {config.output_dir}")
        return EXIT_OK

    _run(ctx, action)

@cli.command()
@scenario_options
@click.option('-o', '--output', 'output_dir', type=click.Path(file_okay=False, path_type=Path),
              help='Output directory (default: ./dctraj-out, env: DCTRAJ_OUTPUT_DIR)')
@click.option('--dcs-list', 'dc_counts', callback=_parse_dc_counts,
              help='Comma-separated DC counts to sweep (default: 3,4,5,6,7)')
@click.option('--seeds', 'num_seeds', type=int, help='Seeds per DC count, starting at --seed (default: 5)')
@click.option('--jobs', type=int, help='Worker processes (default: 1, env: DCTRAJ_JOBS)')
@click.option('--oracle/--no-oracle', default=None,
              help='Cross-check association and scheduling by exhaustive search on small instances')
@click.pass_context
def compare(ctx: click.Context, overrides: Tuple[str, ...], **kwargs: Any) -> None:
    """Compare trajectory design and static deployment over a DC-count sweep."""
    def action() -> int:
        config = _build_config(ctx, "compare", overrides, **kwargs)
        with ExperimentManager(config) as manager:
            outcome = manager.compare()
        for row in outcome.rows:
            click.echo(
                f"{row['num_dcs']} DCs: static {row['mean_static']:.2f} dB, "
                f"design {row['mean_design']:.2f} dB, "
                f"std reduction {100 * row['std_reduction']:.2f}%"
            )
        click.echo(f"Average std reduction {100 * outcome.mean_reduction:.2f}%")
        click.echo(f"Wrote {len(outcome.files)} files to {config.output_dir}")
        if not outcome.converged:
            click.echo("Some trajectory runs stopped at max_iterations", err=True)
            return EXIT_NOT_CONVERGED
        return EXIT_OK

    _run(ctx, action)

if __name__ == '__main__':
    cli()
