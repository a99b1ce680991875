# File: /cqnls/solver/dynamics.py
"""
Strang split-step integration of i u_t + Delta u = |u|^2 u - |u|^4 u.

Both substeps are exact flows: the nonlinear phase is pointwise and the
linear flow is diagonal in the sine basis, so the only time error is the
splitting error. simulate() records diagnostics on a fixed cadence and
stops on blowup, loss of resolution or boundary contamination.
"""

from __future__ import annotations
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from cqnls.analysis.functionals import DiagnosticsRecord, concentration_scale, diagnostics, grad_norm_sq
from cqnls.analysis.virial import F_R, Fc_inf, I_R, VirialWeight, localized_mass, virial_moment
from cqnls.errors import InvalidParameterError, RunCancelledError
from cqnls.solver.grid import RadialField, apply_linear_propagator, boundary_mass_fraction
from cqnls.solver.ground_state import GroundStateRef
from cqnls.utils.config import get_setting
from cqnls.utils.logger import get_logger

logger = get_logger(__name__)

ADAPT_GAIN = 10.0
RESOLUTION_CELLS = 0.2
BOUNDARY_SHELL = 0.05


class Termination(str, Enum):
    REACHED_T = "ReachedT"
    BLOWUP_DETECTED = "BlowupDetected"
    UNDER_RESOLVED = "UnderResolved"
    BOUNDARY_CONTAMINATED = "BoundaryContaminated"


class IntegratorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    dt0: float = Field(1e-3, gt=0)
    t_end: float = Field(10.0, gt=0)
    cadence: int = Field(10, ge=1)
    blowup_factor: float = Field(default_factory=lambda: float(get_setting("blowup_factor")), gt=1)
    adapt: bool = False
    max_steps: int = Field(10_000_000, ge=1)
    snapshot_every: int = Field(0, ge=0, description="records between snapshots; 0 keeps none")
    boundary_tol: float = Field(default_factory=lambda: float(get_setting("boundary_tol")), gt=0)

    @model_validator(mode="after")
    def _check_cadence(self):
        if self.dt0 > self.t_end:
            raise ValueError(f"dt0={self.dt0} exceeds t_end={self.t_end}")
        return self


class VirialRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: float
    I_R: float
    F_R: float
    V_R: float
    M_R: float
    Fc_inf: float


@dataclass
class TrajectoryLog:
    config: IntegratorConfig
    blowup_bar: float
    initial: RadialField
    records: List[DiagnosticsRecord] = field(default_factory=list)
    snapshots: List[Tuple[float, RadialField]] = field(default_factory=list)
    dt_history: List[Tuple[float, float]] = field(default_factory=list)
    virial: List[VirialRecord] = field(default_factory=list)
    termination: Termination = Termination.REACHED_T
    steps: int = 0

    @property
    def final_time(self) -> float:
        return self.records[-1].t if self.records else 0.0


def nonlinear_phase(u: RadialField, dt: float) -> RadialField:
    """Exact flow of i u_t = (|u|^2 - |u|^4) u; |u| is untouched."""
    a2 = np.abs(u.values) ** 2
    return u.with_values(u.values * np.exp(-1j * dt * (a2 - a2 * a2)))


def step(u: RadialField, dt: float) -> RadialField:
    half = nonlinear_phase(u, 0.5 * dt)
    return nonlinear_phase(apply_linear_propagator(half, dt), 0.5 * dt)


def adaptive_dt(u: RadialField, dt0: float) -> float:
    peak = float(np.max(np.abs(u.values))) if u.grid.n else 0.0
    return dt0 / (1.0 + peak**4 * dt0 * ADAPT_GAIN)


def blowup_bar(cfg: IntegratorConfig, ref: GroundStateRef) -> float:
    return cfg.blowup_factor**2 * ref.grad_norm_sq


def _virial_record(u: RadialField, t: float, weight: VirialWeight) -> VirialRecord:
    return VirialRecord(
        t=t,
        I_R=I_R(u, weight),
        F_R=F_R(u, weight),
        V_R=virial_moment(u, weight),
        M_R=localized_mass(u, weight.R),
        Fc_inf=Fc_inf(u),
    )


def simulate(
    u0: RadialField,
    cfg: IntegratorConfig,
    ref: GroundStateRef,
    weight: Optional[VirialWeight] = None,
    cancel: Optional[threading.Event] = None,
) -> TrajectoryLog:
    """Integrate u0 until t_end or a stopping rule fires.

    Blowup is declared once the gradient bar is crossed from below; data that
    starts above the bar has to drop under it first. Setting `cancel` makes the
    run raise RunCancelledError at the next step.
    """
    if not u0.is_finite:
        raise InvalidParameterError("initial data contains NaN or Inf")

    grid = u0.grid
    log = TrajectoryLog(config=cfg, blowup_bar=blowup_bar(cfg, ref), initial=u0)
    u = u0
    t = 0.0
    dt = adaptive_dt(u, cfg.dt0) if cfg.adapt else cfg.dt0
    n_records = 0
    armed = grad_norm_sq(u0) < log.blowup_bar

    def record(state: RadialField, time: float) -> DiagnosticsRecord:
        nonlocal n_records
        rec = diagnostics(state, time, ref)
        log.records.append(rec)
        if weight is not None:
            log.virial.append(_virial_record(state, time, weight))
        if cfg.snapshot_every and n_records % cfg.snapshot_every == 0:
            log.snapshots.append((time, state))
        n_records += 1
        return rec

    logger.info(
        "🚀 Starting simulation: n=%d r_max=%g dt0=%g t_end=%g adapt=%s",
        grid.n, grid.r_max, cfg.dt0, cfg.t_end, cfg.adapt,
    )
    record(u, t)
    log.dt_history.append((t, dt))

    while t < cfg.t_end * (1.0 - 1e-14) and log.steps < cfg.max_steps:
        if cancel is not None and cancel.is_set():
            logger.warning("🛑 Simulation cancelled at t=%g after %d steps", t, log.steps)
            raise RunCancelledError(t)
        h = min(dt, cfg.t_end - t)
        u_next = step(u, h)
        if not u_next.is_finite:
            log.termination = Termination.UNDER_RESOLVED
            logger.warning("💥 Non-finite state after t=%g; stopping as UnderResolved", t)
            break
        u = u_next
        t += h
        log.steps += 1

        at_end = t >= cfg.t_end * (1.0 - 1e-14)
        if log.steps % cfg.cadence and not at_end:
            continue

        rec = record(u, t)
        if rec.grad_norm_sq >= log.blowup_bar:
            if armed:
                log.termination = Termination.BLOWUP_DETECTED
                break
        else:
            armed = True
        if boundary_mass_fraction(u, BOUNDARY_SHELL) > cfg.boundary_tol:
            log.termination = Termination.BOUNDARY_CONTAMINATED
            break
        if concentration_scale(u) > RESOLUTION_CELLS / grid.dr:
            log.termination = Termination.UNDER_RESOLVED
            break
        if cfg.adapt:
            dt = adaptive_dt(u, cfg.dt0)
            log.dt_history.append((t, dt))

    if cfg.snapshot_every and log.snapshots[-1][0] < log.final_time == t:
        log.snapshots.append((t, u))
    logger.info(
        "✅ Simulation finished: termination=%s t=%g steps=%d records=%d",
        log.termination.value, log.final_time, log.steps, len(log.records),
    )
    return log
