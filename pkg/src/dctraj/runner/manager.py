"""Experiment orchestration.

This module runs the commands end to end:
- Scenario loading or generation with overrides
- Trajectory design and static baseline runs
- The DC-count sweep comparing both methods, optionally in a process pool
- Writing every table, the resolved config and the comparison report
- Resource tracking (wall time, CPU time, resident memory)

Resource figures go to the log only; output files stay byte-identical
between identical runs.

File: dctraj/runner/manager.py
"""

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import psutil

from ..core.assign import ScheduleFill
from ..core.baseline import solve_static, static_as_trajectory
from ..core.bcd import solve
from ..core.metrics import (
    REFERENCE_MEAN_STD_REDUCTION,
    REFERENCE_STD_REDUCTION,
    ComparisonReport,
    UserPathlossSummary,
    compare,
    empirical_cdf,
    hovering_fraction,
    std_reduction,
    summarize,
)
from ..core.model import (
    Scenario,
    Solution,
    Violation,
    apply_scenario_overrides,
    generate_scenario,
    validate_solution,
)
from ..core.report import ReportTemplate
from ..core.serialization import (
    CDF_FILE,
    COMPARISON_FILE,
    METRICS_FILE,
    SUMMARY_FILE,
    cdf_frame,
    metrics_frame,
    read_scenario,
    summary_row,
    write_frame,
    write_scenario,
    write_solution,
)
from ..utils.files import ensure_directory
from .config import CONFIG_FILE, RunConfig

logger = logging.getLogger(__name__)

SCENARIO_FILE = "scenario.json"
DESIGN = "trajectory"
STATIC = "static"

class ExperimentError(Exception):
    """Raised when an experiment cannot be carried out."""
    pass

@dataclass
class ResourceUsage:
    """Process resource usage over one command."""
    wall_s: float
    cpu_s: float
    rss_mb: float

    def to_dict(self) -> Dict[str, float]:
        return {
            "wall_s": round(self.wall_s, 3),
            "cpu_s": round(self.cpu_s, 3),
            "rss_mb": round(self.rss_mb, 1),
        }

@dataclass
class RunOutcome:
    """Result of a single solve or baseline run."""
    method: str
    scenario: Scenario
    solution: Solution
    summary: UserPathlossSummary
    violations: List[Violation] = field(default_factory=list)
    files: List[Path] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.solution.converged

@dataclass
class CaseResult:
    """Both methods on one (DC count, seed) scenario."""
    num_dcs: int
    seed: int
    static: UserPathlossSummary
    design: UserPathlossSummary
    report: ComparisonReport
    converged: bool
    iterations: int

@dataclass
class CompareOutcome:
    """Result of a DC-count sweep."""
    cases: List[CaseResult]
    rows: List[Dict[str, Any]]
    mean_reduction: float
    files: List[Path] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return all(case.converged for case in self.cases)

def _schedule_fill(config: RunConfig) -> ScheduleFill:
    return config.bcd_options().schedule_fill

def build_scenario(config: RunConfig, num_dcs: Optional[int] = None, seed: Optional[int] = None) -> Scenario:
    """Load the configured scenario file or generate one, then apply overrides."""
    overrides = dict(config.scenario_overrides)
    if num_dcs is not None:
        overrides["num_dcs"] = num_dcs
    if config.scenario_path is not None:
        scenario = read_scenario(config.scenario_path)
        return apply_scenario_overrides(scenario, overrides)
    dcs = overrides.pop("num_dcs", config.num_dcs)
    return generate_scenario(
        seed=config.seed if seed is None else seed,
        num_users=config.num_users,
        num_dcs=dcs,
        overrides=overrides,
    )

def _compare_case(config: RunConfig, num_dcs: int, seed: int) -> CaseResult:
    """Run both methods on one scenario; module level so worker processes can run it."""
    scenario = build_scenario(config, num_dcs=num_dcs, seed=seed)
    fill = _schedule_fill(config)
    design = solve(scenario, config.bcd_options())

    static = static_as_trajectory(solve_static(scenario, config.pso_options()), scenario, fill)

    design_summary = summarize(design, scenario)
    static_summary = summarize(static, scenario)
    logger.info(
        f"{num_dcs} DCs, seed {seed}: design {design_summary.mean_per_user:.3f} dB, "
        f"static {static_summary.mean_per_user:.3f} dB"
    )
    return CaseResult(
        num_dcs=num_dcs,
        seed=seed,
        static=static_summary,
        design=design_summary,
        report=compare(static_summary, design_summary),
        converged=design.converged,
        iterations=design.iterations,
    )

class ExperimentManager:
    """Runs one configured command and writes its outputs."""

    def __init__(self, config: RunConfig):
        self.config = config
        self._process = psutil.Process(os.getpid())
        self._started = time.perf_counter()
        self._cpu_start = self._cpu_seconds()

    def __enter__(self) -> 'ExperimentManager':
        self._started = time.perf_counter()
        self._cpu_start = self._cpu_seconds()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        usage = self.resource_usage()
        logger.info(f"Resource usage for {self.config.command}: {usage.to_dict()}")

    def _cpu_seconds(self) -> float:
        times = self._process.cpu_times()
        return times.user + times.system

    def resource_usage(self) -> ResourceUsage:
        try:
            rss_mb = self._process.memory_info().rss / 1024 / 1024
            cpu_s = self._cpu_seconds() - self._cpu_start
        except (psutil.NoSuchProcess, psutil.AccessDenied) as e:
            logger.warning(f"Could not read process resources: {e}")
            rss_mb, cpu_s = float("nan"), float("nan")
        return ResourceUsage(wall_s=time.perf_counter() - self._started, cpu_s=cpu_s, rss_mb=rss_mb)

    @property
    def output_dir(self) -> Path:
        return Path(self.config.output_dir)

    def scenario(self) -> Scenario:
        return build_scenario(self.config)

    def generate(self, path: Path) -> Path:
        """Write the generated scenario document to path.

        Raises:
            ExperimentError: If path is a directory
        """
        path = Path(path)
        if path.is_dir():
            raise ExperimentError(f"Scenario path is a directory: {path}")
        ensure_directory(path.parent)
        return write_scenario(path, self.scenario())

    def _write_run(self, outcome: RunOutcome) -> None:
        out = ensure_directory(self.output_dir)
        files = [write_scenario(out / SCENARIO_FILE, outcome.scenario)]
        files.extend(write_solution(out, outcome.solution))
        files.append(write_frame(out / METRICS_FILE, metrics_frame(outcome.summary, outcome.method)))
        files.append(write_frame(out / CDF_FILE, cdf_frame(outcome.summary, outcome.method)))

        hovering = hovering_fraction(outcome.solution, outcome.scenario)
        row = summary_row(
            outcome.summary,
            outcome.method,
            num_dcs=outcome.scenario.num_dcs,
            seed=outcome.scenario.seed,
        )
        row.update({
            "objective": outcome.solution.objective,
            "iterations": outcome.solution.iterations,
            "converged": int(outcome.converged),
            "hovering_min": float(hovering.min()) if hovering.size else 1.0,
            "violations": len(outcome.violations),
        })
        files.append(write_frame(out / SUMMARY_FILE, pd.DataFrame([row])))
        self.config.to_file(out / CONFIG_FILE)
        files.append(out / CONFIG_FILE)
        outcome.files = files

    def _finish(self, method: str, scenario: Scenario, solution: Solution) -> RunOutcome:
        violations = validate_solution(scenario, solution)
        for violation in violations:
            logger.error(f"Constraint violated: {violation}")
        outcome = RunOutcome(
            method=method,
            scenario=scenario,
            solution=solution,
            summary=summarize(solution, scenario),
            violations=violations,
        )
        self._write_run(outcome)
        logger.info(
            f"{method}: mean pathloss {outcome.summary.mean_per_user:.3f} dB per user, "
            f"std {outcome.summary.std:.3f} dB; wrote {len(outcome.files)} files to {self.output_dir}"
        )
        return outcome

    def solve(self) -> RunOutcome:
        """Run the trajectory design and write its tables."""
        scenario = self.scenario()
        solution = solve(scenario, self.config.bcd_options())
        return self._finish(DESIGN, scenario, solution)

    def baseline(self) -> RunOutcome:
        """Run the static PSO deployment and write its tables."""
        scenario = self.scenario()
        deployment = solve_static(scenario, self.config.pso_options())
        solution = static_as_trajectory(deployment, scenario, _schedule_fill(self.config))
        return self._finish(STATIC, scenario, solution)

    def _seeds(self) -> List[int]:
        if self.config.scenario_path is not None:
            if self.config.num_seeds > 1:
                logger.info("Scenario file given; sweeping a single seed")
            return [self.config.seed]
        return [self.config.seed + i for i in range(self.config.num_seeds)]

    def _cases(self) -> List[Tuple[int, int]]:
        seeds = self._seeds()
        return [(dcs, seed) for dcs in self.config.dc_counts for seed in seeds]

    def _run_cases(self, cases: List[Tuple[int, int]]) -> List[CaseResult]:
        if self.config.jobs <= 1 or len(cases) <= 1:
            return [_compare_case(self.config, dcs, seed) for dcs, seed in cases]
        workers = min(self.config.jobs, len(cases))
        logger.info(f"Running {len(cases)} cases on {workers} worker processes")
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(_compare_case, self.config, dcs, seed) for dcs, seed in cases]
            return [future.result() for future in futures]

    def compare(self) -> CompareOutcome:
        """Sweep DC counts and seeds, running both methods on each scenario."""
        results = self._run_cases(self._cases())
        out = ensure_directory(self.output_dir)

        summary_rows, comparison_rows, metric_frames, cdf_frames = [], [], [], []
        for case in results:
            for method, summary in ((STATIC, case.static), (DESIGN, case.design)):
                summary_rows.append(summary_row(summary, method, num_dcs=case.num_dcs, seed=case.seed))
                frame = metrics_frame(summary, method)
                frame.insert(0, "seed", case.seed)
                frame.insert(0, "num_dcs", case.num_dcs)
                metric_frames.append(frame)
            comparison_rows.append({
                "num_dcs": case.num_dcs,
                "seed": case.seed,
                "mean_static": case.report.mean_static,
                "mean_design": case.report.mean_design,
                "mean_gap_db": case.report.mean_gap_db,
                "mean_per_slot_gap_db": case.report.mean_per_slot_gap_db,
                "std_static": case.report.std_static,
                "std_design": case.report.std_design,
                "std_reduction": case.report.std_reduction,
                "converged": int(case.converged),
                "iterations": case.iterations,
            })

        rows = []
        for dcs in self.config.dc_counts:
            group = [c for c in results if c.num_dcs == dcs]
            std_s = float(np.mean([c.static.std for c in group]))
            std_g = float(np.mean([c.design.std for c in group]))
            mean_s = float(np.mean([c.static.mean_per_user for c in group]))
            mean_g = float(np.mean([c.design.mean_per_user for c in group]))
            rows.append({
                "num_dcs": dcs,
                "mean_static": mean_s,
                "mean_design": mean_g,
                "mean_gap_db": mean_s - mean_g,
                "std_static": std_s,
                "std_design": std_g,
                "std_reduction": std_reduction(std_s, std_g),
                "reference": REFERENCE_STD_REDUCTION.get(dcs),
            })
            for method, attr in ((STATIC, "static"), (DESIGN, "design")):
                pooled = np.concatenate([getattr(c, attr).per_user for c in group])
                x, p = empirical_cdf(pooled)
                cdf_frames.append(pd.DataFrame({"num_dcs": dcs, "method": method, "pathloss_db": x, "cdf": p}))

        mean_reduction = float(np.mean([row["std_reduction"] for row in rows]))
        files = [
            write_frame(out / SUMMARY_FILE, pd.DataFrame(summary_rows)),
            write_frame(out / COMPARISON_FILE, pd.DataFrame(comparison_rows)),
            write_frame(out / METRICS_FILE, pd.concat(metric_frames, ignore_index=True)),
            write_frame(out / CDF_FILE, pd.concat(cdf_frames, ignore_index=True)),
        ]
        self.config.to_file(out / CONFIG_FILE)
        files.append(out / CONFIG_FILE)

        unconverged = [f"{c.num_dcs} DCs / seed {c.seed}" for c in results if not c.converged]
        context = {
            "num_users": results[0].design.num_users if results else self.config.num_users,
            "seeds": [str(seed) for seed in self._seeds()],
            "schedule_fill": _schedule_fill(self.config).value,
            "rows": rows,
            "mean_reduction": mean_reduction,
            "reference_mean": REFERENCE_MEAN_STD_REDUCTION,
            "unconverged": unconverged,
        }
        files.append(ReportTemplate().write(out, context))
        logger.info(f"Average std reduction {100 * mean_reduction:.2f}% over {len(rows)} DC counts")
        return CompareOutcome(cases=results, rows=rows, mean_reduction=mean_reduction, files=files)
