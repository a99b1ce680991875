# File: /cqnls/solver/detection.py
"""
Outcome classification for a finished trajectory.

Blowup means the gradient bar was crossed and the crossing survives a
dt/2 rerun. ScatteringProxy means the L^4 norm decayed below 20% of its
initial value, monotonically at the end, with G > 0 along the way. It is
a finite-time proxy for scattering, not a proof of it.
"""

from __future__ import annotations
import threading
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from cqnls.analysis.functionals import DiagnosticsRecord
from cqnls.solver.dynamics import Termination, TrajectoryLog, simulate
from cqnls.solver.ground_state import GroundStateRef
from cqnls.utils.logger import get_logger

logger = get_logger(__name__)

L4_DECAY = 0.2
TAIL_FRACTION = 0.25
MONOTONE_RTOL = 1e-9
REFINEMENT_SLACK = 1.05
TRAPPING_BAND = 1e-6
BNI_RATE = 14.0

VIRIAL_COLUMNS = ["t", "I_R", "F_R", "V_R", "M_R", "Fc_inf", "dIdt", "bni_margin", "compa_ratio"]


class Classification(str, Enum):
    BLOWUP = "Blowup"
    SCATTERING_PROXY = "ScatteringProxy"
    UNDETERMINED = "Undetermined"


class RunOutcome(BaseModel):
    model_config = ConfigDict(frozen=True)

    classification: Classification
    t_detect: Optional[float] = None
    achieved_energy: float
    achieved_grad_ratio: float
    refinement_confirmed: bool = False
    termination: Termination = Termination.REACHED_T


def blowup_time(log: TrajectoryLog) -> Optional[float]:
    if log.termination is Termination.BLOWUP_DETECTED and log.records:
        return log.records[-1].t
    return None


def confirm_blowup(
    log: TrajectoryLog, ref: GroundStateRef, cancel: Optional[threading.Event] = None
) -> TrajectoryLog:
    """Rerun the same data at dt0/2 with the record times kept aligned."""
    cfg = log.config
    halved = cfg.model_copy(update={"dt0": cfg.dt0 / 2.0, "cadence": cfg.cadence * 2, "snapshot_every": 0})
    logger.info("🔁 Confirming blowup at dt0=%g", halved.dt0)
    return simulate(log.initial, halved, ref, cancel=cancel)


def _clean_records(log: TrajectoryLog) -> List[DiagnosticsRecord]:
    # the record that tripped the boundary monitor is already contaminated
    if log.termination is Termination.BOUNDARY_CONTAMINATED:
        return log.records[:-1]
    return list(log.records)


def scattering_proxy(log: TrajectoryLog) -> Tuple[bool, Optional[float]]:
    records = _clean_records(log)
    if len(records) < 2:
        return False, None
    l4 = np.array([r.l4_norm_4 for r in records])
    t = np.array([r.t for r in records])
    initial = l4[0]
    if not initial > 0.0:
        return False, None
    if not l4[-1] < L4_DECAY * initial:
        return False, None
    start = min(int(np.floor((1.0 - TAIL_FRACTION) * len(l4))), len(l4) - 2)
    tail = l4[start:]
    if np.any(np.diff(tail) > MONOTONE_RTOL * initial):
        return False, None
    if any(r.g_functional <= 0.0 for r in records):
        return False, None
    crossing = int(np.argmax(l4 < L4_DECAY * initial))
    return True, float(t[crossing])


def detect_outcome(
    log: TrajectoryLog,
    ref: GroundStateRef,
    confirmation: Optional[TrajectoryLog] = None,
    cancel: Optional[threading.Event] = None,
) -> RunOutcome:
    """A dt/2 rerun confirms blowup if it detects no later than REFINEMENT_SLACK * t_blow."""
    first = log.records[0]
    common = dict(
        achieved_energy=first.energy,
        achieved_grad_ratio=float(np.sqrt(first.grad_norm_sq / ref.grad_norm_sq)),
        termination=log.termination,
    )

    t_blow = blowup_time(log)
    if t_blow is not None:
        if confirmation is None:
            confirmation = confirm_blowup(log, ref, cancel=cancel)
        t_confirm = blowup_time(confirmation)
        if t_confirm is not None and t_confirm <= REFINEMENT_SLACK * t_blow:
            return RunOutcome(
                classification=Classification.BLOWUP, t_detect=t_blow, refinement_confirmed=True, **common
            )
        logger.warning("⚠️ Blowup at t=%g not reproduced at dt/2 (t=%s)", t_blow, t_confirm)
        return RunOutcome(classification=Classification.UNDETERMINED, t_detect=t_blow, **common)

    scattered, t_scatter = scattering_proxy(log)
    if scattered:
        return RunOutcome(classification=Classification.SCATTERING_PROXY, t_detect=t_scatter, **common)
    return RunOutcome(classification=Classification.UNDETERMINED, **common)


def trapping_violations(log: TrajectoryLog, ref: GroundStateRef, band: float = TRAPPING_BAND) -> int:
    """Records on the wrong side of ||grad W||^2 relative to the initial side."""
    records = log.records
    if not records:
        return 0
    below = records[0].grad_norm_sq < ref.grad_norm_sq
    if below:
        return sum(1 for r in records if r.grad_norm_sq >= ref.grad_norm_sq * (1.0 + band))
    return sum(1 for r in records if r.grad_norm_sq <= ref.grad_norm_sq * (1.0 - band))


def bni_margins(log: TrajectoryLog) -> pd.DataFrame:
    """Virial series with dI_R/dt + 14 delta and Fc_inf/delta; report-only."""
    if not log.virial:
        return pd.DataFrame(columns=VIRIAL_COLUMNS)
    frame = pd.DataFrame([v.model_dump() for v in log.virial])
    delta = np.array([r.delta for r in log.records[: len(frame)]])
    if len(frame) >= 2:
        didt = np.gradient(frame["I_R"].to_numpy(), frame["t"].to_numpy())
    else:
        didt = np.full(len(frame), np.nan)
    frame["dIdt"] = didt
    frame["bni_margin"] = didt + BNI_RATE * delta
    with np.errstate(divide="ignore", invalid="ignore"):
        frame["compa_ratio"] = np.where(delta > 0.0, frame["Fc_inf"].to_numpy() / delta, np.nan)
    return frame[VIRIAL_COLUMNS]
