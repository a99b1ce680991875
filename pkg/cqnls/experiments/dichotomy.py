# File: /cqnls/experiments/dichotomy.py
"""
Threshold dichotomy experiment: tune, simulate, classify, and for blowup
confirm the detection under dt/2 and under a grid with half the spacing.
"""

from __future__ import annotations
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from cqnls.analysis.virial import VirialWeight
from cqnls.errors import RunCancelledError
from cqnls.experiments.artifacts import write_run_artifacts
from cqnls.experiments.families import DataFamily, Side, TuneResult, tune_amplitude
from cqnls.solver.detection import Classification, RunOutcome, blowup_time, detect_outcome, trapping_violations
from cqnls.solver.dynamics import IntegratorConfig, TrajectoryLog, simulate
from cqnls.solver.grid import RadialGrid, make_grid
from cqnls.solver.ground_state import GroundStateRef
from cqnls.utils.logger import get_logger

logger = get_logger(__name__)

GRID_REFINEMENT_SLACK = 0.05


@dataclass
class DichotomyRun:
    outcome: RunOutcome
    log: TrajectoryLog
    tune: TuneResult
    trapping_violations: int
    summary: Optional[Dict[str, Any]] = None

    def window_stats(self, gate: float) -> Dict[str, float]:
        """Smallest delta and share of records inside the modulation gate."""
        deltas = np.array([r.delta for r in self.log.records])
        return {
            "delta_min": float(deltas.min()),
            "window_fraction": float(np.mean(deltas < gate)),
        }


def _refined_grid(grid: RadialGrid) -> RadialGrid:
    # (r_max, 2n + 1) halves dr and keeps every old node
    return make_grid(grid.r_max, 2 * grid.n + 1)


def run_dichotomy(
    side: Side,
    family: DataFamily,
    cfg: IntegratorConfig,
    ref: GroundStateRef,
    grid: RadialGrid,
    tol: float = 1e-10,
    energy_fraction: float = 1.0,
    weight: Optional[VirialWeight] = None,
    out_dir: Optional[Path] = None,
    emit_plots: bool = False,
    cancel: Optional[threading.Event] = None,
) -> DichotomyRun:
    """Every simulation in the run, refinements included, stops once `cancel` is set."""
    side = Side(side)
    tuned = tune_amplitude(family, side, ref, grid, tol=tol, energy_fraction=energy_fraction)
    u0 = family.sample(grid, tuned.amplitude)
    log = simulate(u0, cfg, ref, weight=weight, cancel=cancel)
    outcome = detect_outcome(log, ref, cancel=cancel)

    if outcome.classification is Classification.BLOWUP:
        fine = _refined_grid(grid)
        fine_tuned = tune_amplitude(family, side, ref, fine, tol=tol, energy_fraction=energy_fraction)
        fine_log = simulate(family.sample(fine, fine_tuned.amplitude), cfg, ref, cancel=cancel)
        t_fine = blowup_time(fine_log)
        grid_ok = t_fine is not None and abs(t_fine - outcome.t_detect) <= GRID_REFINEMENT_SLACK * outcome.t_detect
        if not grid_ok:
            logger.warning("⚠️ Blowup at t=%g not reproduced on the refined grid (t=%s)", outcome.t_detect, t_fine)
        outcome = outcome.model_copy(update={"refinement_confirmed": outcome.refinement_confirmed and grid_ok})

    violations = trapping_violations(log, ref)
    if violations:
        logger.warning("⚠️ %d records cross ||grad W||^2 against the trapping side", violations)

    run = DichotomyRun(outcome=outcome, log=log, tune=tuned, trapping_violations=violations)
    if cancel is not None and cancel.is_set():
        raise RunCancelledError(log.records[-1].t)
    if out_dir is not None:
        run.summary = write_run_artifacts(
            out_dir,
            log,
            ref,
            command="dichotomy",
            outcome=outcome,
            extra={
                "family": family.model_dump(mode="json"),
                "side": side.value,
                "energy_fraction": energy_fraction,
                "tune": tuned.model_dump(mode="json"),
                "grid": {"r_max": grid.r_max, "n": grid.n},
                "virial_R": weight.R if weight is not None else None,
            },
            emit_plots=emit_plots,
        )
    logger.info(
        "✅ Dichotomy %s/%s: %s t_detect=%s confirmed=%s",
        family.shape.kind, side.value, outcome.classification.value, outcome.t_detect, outcome.refinement_confirmed,
    )
    return run


def dichotomy_experiment(
    side: Side,
    family: DataFamily,
    cfg: IntegratorConfig,
    ref: GroundStateRef,
    grid: RadialGrid,
    tol: float = 1e-10,
    energy_fraction: float = 1.0,
    weight: Optional[VirialWeight] = None,
    out_dir: Optional[Path] = None,
) -> RunOutcome:
    return run_dichotomy(
        side, family, cfg, ref, grid, tol=tol, energy_fraction=energy_fraction, weight=weight, out_dir=out_dir
    ).outcome
