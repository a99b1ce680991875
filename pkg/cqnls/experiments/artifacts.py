# File: /cqnls/experiments/artifacts.py
"""
Per-run artifact bundle: run.csv, virial.csv, modulation.csv,
summary.json and, on request, a plotting script that reads the CSVs.
"""

from __future__ import annotations
from pathlib import Path
from typing import Any, Dict, Optional

import pandas as pd

from cqnls.analysis.functionals import RUN_COLUMNS
from cqnls.analysis.modulation import MODULATION_COLUMNS, track_modulation
from cqnls.solver.detection import VIRIAL_COLUMNS, RunOutcome, bni_margins, trapping_violations
from cqnls.solver.dynamics import TrajectoryLog
from cqnls.solver.ground_state import GroundStateRef
from cqnls.utils.csvio import write_artifact_csv
from cqnls.utils.metadata import build_summary, write_json_atomic
from cqnls.utils.paths import MODULATION_CSV, PLOT_SCRIPT, RUN_CSV, SUMMARY_JSON, VIRIAL_CSV

PROXY_NOTE = "ScatteringProxy is a finite-time L4-decay proxy, not a scattering proof"

PLOT_TEMPLATE = '''"""Plots for one cqnls run. Needs pandas and matplotlib."""

from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd

HERE = Path(__file__).resolve().parent


def load(name):
    path = HERE / name
    if not path.exists():
        return None
    return pd.read_csv(path, skiprows=1)


run = load("{run_csv}")
virial = load("{virial_csv}")
modulation = load("{modulation_csv}")

fig, axes = plt.subplots(2, 2, figsize=(10, 7))
axes[0, 0].plot(run["t"], run["grad_norm_sq"])
axes[0, 0].axhline({grad_ref!r}, color="k", ls="--", lw=0.8)
axes[0, 0].set_title("||grad u||^2")
axes[0, 1].plot(run["t"], run["l4"])
axes[0, 1].set_title("||u||_4^4")
axes[1, 0].semilogy(run["t"], run["delta"])
axes[1, 0].set_title("delta")
if virial is not None and len(virial):
    axes[1, 1].plot(virial["t"], virial["bni_margin"])
    axes[1, 1].set_title("dI_R/dt + 14 delta")
elif modulation is not None and len(modulation):
    axes[1, 1].plot(modulation["t"], modulation["mu"])
    axes[1, 1].set_title("mu(t)")
for ax in axes.flat:
    ax.set_xlabel("t")
fig.tight_layout()
fig.savefig(HERE / "run.png", dpi=120)
'''


def records_frame(log: TrajectoryLog) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in log.records], columns=RUN_COLUMNS)


def write_plot_script(out_dir: Path, ref: GroundStateRef) -> Path:
    path = Path(out_dir) / PLOT_SCRIPT
    path.write_text(
        PLOT_TEMPLATE.format(
            run_csv=RUN_CSV,
            virial_csv=VIRIAL_CSV,
            modulation_csv=MODULATION_CSV,
            grad_ref=ref.grad_norm_sq,
        ),
        encoding="utf-8",
    )
    return path


def write_run_artifacts(
    out_dir: Path,
    log: TrajectoryLog,
    ref: GroundStateRef,
    command: str,
    outcome: Optional[RunOutcome] = None,
    extra: Optional[Dict[str, Any]] = None,
    emit_plots: bool = False,
) -> Dict[str, Any]:
    out_dir = Path(out_dir)
    write_artifact_csv(out_dir / RUN_CSV, records_frame(log), "run", RUN_COLUMNS)
    if log.virial:
        write_artifact_csv(out_dir / VIRIAL_CSV, bni_margins(log), "virial", VIRIAL_COLUMNS)
    modulation = track_modulation(log, ref)
    write_artifact_csv(out_dir / MODULATION_CSV, modulation, "modulation", MODULATION_COLUMNS)
    if emit_plots:
        write_plot_script(out_dir, ref)

    summary = build_summary(
        command,
        termination=log.termination.value,
        final_time=log.final_time,
        steps=log.steps,
        records=len(log.records),
        snapshots=len(log.snapshots),
        blowup_bar=log.blowup_bar,
        trapping_violations=trapping_violations(log, ref),
        modulation_rows=int(len(modulation)),
        outcome=outcome.model_dump(mode="json") if outcome is not None else None,
        note=PROXY_NOTE,
        integrator=log.config.model_dump(mode="json"),
        **(extra or {}),
    )
    write_json_atomic(out_dir / SUMMARY_JSON, summary)
    return summary
