# File: /cqnls/experiments/sweep.py
"""
Parameter sweep over (family, side) entries.

Each entry is an independent dichotomy run executed in a worker thread;
asyncio bounds the concurrency and applies the per-run timeout, which
signals the worker to stop through a threading.Event. Rows come
back in entry order no matter which run finishes first, and a failed run
becomes a row with status != "ok" instead of aborting the batch.
"""

from __future__ import annotations
import asyncio
import threading
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat

from cqnls.analysis.virial import VirialWeight
from cqnls.errors import CqnlsError, InvalidParameterError
from cqnls.experiments.dichotomy import run_dichotomy
from cqnls.experiments.families import DataFamily, Shape, Side
from cqnls.solver.dynamics import IntegratorConfig
from cqnls.solver.grid import RadialGrid
from cqnls.solver.ground_state import GroundStateRef
from cqnls.utils.config import get_setting
from cqnls.utils.csvio import write_artifact_csv
from cqnls.utils.logger import get_logger
from cqnls.utils.metadata import build_summary, write_json_atomic
from cqnls.utils.paths import SUMMARY_JSON, SWEEP_CSV, prepare_output_dir, run_dir

logger = get_logger(__name__)

SWEEP_COLUMNS = [
    "index",
    "kind",
    "mu",
    "rho",
    "sigma",
    "r0",
    "side",
    "energy_fraction",
    "amplitude",
    "achieved_energy",
    "grad_ratio",
    "classification",
    "t_detect",
    "refinement_confirmed",
    "trapping_violations",
    "delta_min",
    "window_fraction",
    "status",
    "error",
]


class SweepEntry(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    family: Shape
    side: Side = Side.BELOW
    energy_fraction: PositiveFloat = 1.0
    integrator: Dict[str, Any] = Field(default_factory=dict, description="overrides of the base integrator")

    def resolve(self, base: IntegratorConfig) -> IntegratorConfig:
        return IntegratorConfig.model_validate({**base.model_dump(), **self.integrator})


def _base_row(index: int, entry: SweepEntry) -> Dict[str, Any]:
    row: Dict[str, Any] = {c: None for c in SWEEP_COLUMNS}
    row.update(entry.family.model_dump())
    row.update(index=index, side=entry.side.value, energy_fraction=entry.energy_fraction)
    return row


def _run_entry(
    index: int,
    entry: SweepEntry,
    grid: RadialGrid,
    ref: GroundStateRef,
    base: IntegratorConfig,
    out_dir: Path,
    tol: float,
    weight: Optional[VirialWeight],
    emit_plots: bool,
    gate: float,
    cancel: Optional[threading.Event] = None,
) -> Dict[str, Any]:
    row = _base_row(index, entry)
    run = run_dichotomy(
        entry.side,
        DataFamily(shape=entry.family),
        entry.resolve(base),
        ref,
        grid,
        tol=tol,
        energy_fraction=entry.energy_fraction,
        weight=weight,
        out_dir=run_dir(out_dir, index),
        emit_plots=emit_plots,
        cancel=cancel,
    )
    row.update(
        amplitude=run.tune.amplitude,
        achieved_energy=run.outcome.achieved_energy,
        grad_ratio=run.outcome.achieved_grad_ratio,
        classification=run.outcome.classification.value,
        t_detect=run.outcome.t_detect,
        refinement_confirmed=run.outcome.refinement_confirmed,
        trapping_violations=run.trapping_violations,
        status="ok",
        **run.window_stats(gate),
    )
    return row


async def _sweep_async(
    entries: Sequence[SweepEntry],
    max_workers: int,
    timeout: Optional[float],
    **kwargs: Any,
) -> List[Dict[str, Any]]:
    semaphore = asyncio.Semaphore(max_workers)

    async def one(index: int, entry: SweepEntry) -> Dict[str, Any]:
        async with semaphore:
            cancel = threading.Event()
            logger.info("▶️ Sweep run %d: %s side=%s", index, entry.family.kind, entry.side.value)
            try:
                worker = asyncio.to_thread(_run_entry, index, entry, cancel=cancel, **kwargs)
                return await asyncio.wait_for(worker, timeout)
            except asyncio.TimeoutError:
                # the worker stops at its next step and writes no artifacts
                cancel.set()
                logger.error("⏰ Sweep run %d timed out after %ss", index, timeout)
                return {**_base_row(index, entry), "status": "timeout", "error": f"timeout after {timeout}s"}
            except CqnlsError as e:
                logger.warning("Sweep run %d failed: %s", index, e)
                return {**_base_row(index, entry), "status": type(e).__name__, "error": str(e)}
            except Exception as e:
                logger.exception("💥 Sweep run %d crashed", index)
                return {**_base_row(index, entry), "status": "crashed", "error": f"{type(e).__name__}: {e}"}

    return list(await asyncio.gather(*(one(i, e) for i, e in enumerate(entries))))


def sweep(
    entries: Sequence[SweepEntry],
    grid: RadialGrid,
    ref: GroundStateRef,
    cfg: IntegratorConfig,
    out_dir: Path,
    tol: float = 1e-10,
    weight: Optional[VirialWeight] = None,
    emit_plots: bool = False,
    max_workers: Optional[int] = None,
    timeout: Optional[float] = None,
) -> pd.DataFrame:
    """Run every entry and write sweep.csv plus an aggregate summary.json."""
    if not entries:
        raise InvalidParameterError("sweep needs at least one entry")
    max_workers = int(get_setting("max_workers")) if max_workers is None else max_workers
    if max_workers < 1:
        raise InvalidParameterError(f"max_workers must be >= 1, got {max_workers}")
    if timeout is None:
        timeout = get_setting("run_timeout_seconds")

    out_dir = prepare_output_dir(out_dir)
    gate = ref.grad_norm_sq * float(get_setting("modulation_gate"))
    logger.info("🚀 Sweep of %d runs, %d workers, out=%s", len(entries), max_workers, out_dir)
    rows = asyncio.run(
        _sweep_async(
            entries,
            max_workers,
            timeout,
            grid=grid,
            ref=ref,
            base=cfg,
            out_dir=out_dir,
            tol=tol,
            weight=weight,
            emit_plots=emit_plots,
            gate=gate,
        )
    )

    frame = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    write_artifact_csv(out_dir / SWEEP_CSV, frame, "sweep", SWEEP_COLUMNS)
    statuses = [{"index": r["index"], "status": r["status"], "error": r["error"]} for r in rows]
    write_json_atomic(
        out_dir / SUMMARY_JSON,
        build_summary(
            "sweep",
            runs=len(rows),
            failed=sum(1 for s in statuses if s["status"] != "ok"),
            statuses=statuses,
            grid={"r_max": grid.r_max, "n": grid.n},
            integrator=cfg.model_dump(mode="json"),
        ),
    )
    logger.info("✅ Sweep finished: %d ok, %d failed", sum(s["status"] == "ok" for s in statuses),
                sum(s["status"] != "ok" for s in statuses))
    return frame
