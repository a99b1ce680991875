# File: /cqnls/main.py
"""
Command orchestration: one function per CLI command, each taking a
validated RunConfig and an output directory and writing its artifacts.
"""

from __future__ import annotations
from pathlib import Path
from typing import Any, Dict, Optional

import pandas as pd

from cqnls.analysis.virial import VirialWeight, build_weight
from cqnls.errors import InvalidConfigError, SweepError
from cqnls.experiments.artifacts import write_run_artifacts
from cqnls.experiments.dichotomy import run_dichotomy
from cqnls.experiments.families import DataFamily, TuneResult, tune_amplitude
from cqnls.experiments.identities import IDENTITY_COLUMNS, IdentityReport, verify_identities
from cqnls.experiments.sweep import sweep
from cqnls.runconfig import RunConfig
from cqnls.solver.detection import detect_outcome
from cqnls.solver.dynamics import simulate
from cqnls.solver.grid import RadialGrid, make_grid
from cqnls.solver.ground_state import reference_constants
from cqnls.utils.csvio import write_artifact_csv
from cqnls.utils.logger import get_logger
from cqnls.utils.metadata import build_summary, write_json_atomic
from cqnls.utils.paths import IDENTITIES_CSV, SUMMARY_JSON, prepare_output_dir

logger = get_logger("cqnls")


def _grid(cfg: RunConfig) -> RadialGrid:
    return make_grid(cfg.grid.r_max, cfg.grid.n)


def _weight(cfg: RunConfig) -> Optional[VirialWeight]:
    R = cfg.experiment.virial_R
    return build_weight(R) if R is not None else None


def _grid_echo(grid: RadialGrid) -> Dict[str, Any]:
    return {"r_max": grid.r_max, "n": grid.n, "dr": grid.dr}


def run_verify(cfg: RunConfig, out_dir: Optional[Path] = None) -> IdentityReport:
    grid = _grid(cfg)
    report = verify_identities(grid, reference_constants())
    out = prepare_output_dir(out_dir or cfg.output.dir)
    write_artifact_csv(out / IDENTITIES_CSV, report.to_frame(), "identities", IDENTITY_COLUMNS)
    write_json_atomic(
        out / SUMMARY_JSON,
        build_summary(
            "verify",
            passed=report.passed,
            failures=report.failures,
            requires_refinement=[c.name for c in report.checks if c.requires_refinement],
            grid=_grid_echo(grid),
        ),
    )
    return report


def run_simulate(cfg: RunConfig, out_dir: Optional[Path] = None) -> Dict[str, Any]:
    """Simulate the configured data; without a fixed amplitude the data is tuned first."""
    grid = _grid(cfg)
    ref = reference_constants()
    weight = _weight(cfg)
    exp = cfg.experiment
    out = prepare_output_dir(out_dir or cfg.output.dir)
    family = DataFamily(shape=exp.family)

    if exp.amplitude is None:
        run = run_dichotomy(
            exp.side, family, cfg.integrator, ref, grid,
            tol=exp.tol, energy_fraction=exp.energy_fraction, weight=weight,
            out_dir=out, emit_plots=cfg.output.emit_plots,
        )
        return run.summary

    log = simulate(family.sample(grid, exp.amplitude), cfg.integrator, ref, weight=weight)
    outcome = detect_outcome(log, ref)
    return write_run_artifacts(
        out,
        log,
        ref,
        command="simulate",
        outcome=outcome,
        extra={
            "family": family.model_dump(mode="json"),
            "amplitude": exp.amplitude,
            "grid": _grid_echo(grid),
            "virial_R": exp.virial_R,
        },
        emit_plots=cfg.output.emit_plots,
    )


def run_tune(cfg: RunConfig, out_dir: Optional[Path] = None) -> TuneResult:
    grid = _grid(cfg)
    ref = reference_constants()
    exp = cfg.experiment
    family = DataFamily(shape=exp.family)
    result = tune_amplitude(family, exp.side, ref, grid, tol=exp.tol, energy_fraction=exp.energy_fraction)
    out = prepare_output_dir(out_dir or cfg.output.dir)
    write_json_atomic(
        out / SUMMARY_JSON,
        build_summary(
            "tune",
            family=family.model_dump(mode="json"),
            grid=_grid_echo(grid),
            tol=exp.tol,
            crit_energy=ref.crit_energy,
            **result.model_dump(mode="json"),
        ),
    )
    return result


def run_sweep(cfg: RunConfig, out_dir: Optional[Path] = None) -> pd.DataFrame:
    if not cfg.sweep:
        raise InvalidConfigError("sweep", "no [[sweep]] entries in the config")
    frame = sweep(
        cfg.sweep,
        _grid(cfg),
        reference_constants(),
        cfg.integrator,
        out_dir or cfg.output.dir,
        tol=cfg.experiment.tol,
        weight=_weight(cfg),
        emit_plots=cfg.output.emit_plots,
    )
    failed = frame[frame["status"] != "ok"]
    if len(failed):
        raise SweepError(frame[["index", "status", "error"]].to_dict("records"))
    return frame
