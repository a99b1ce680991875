# File: /cqnls/experiments/identities.py
"""
Identity battery: every exact relation the toolkit relies on, evaluated
with the production code paths and reported with residual and tolerance.
Deterministic: no randomness, fixed evaluation order.
"""

from __future__ import annotations
from typing import Callable, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from cqnls.analysis.functionals import grad_norm_sq, l6_norm_6, sobolev_ratio
from cqnls.analysis.modulation import apply_L1, apply_L2, eval_quadratic_form
from cqnls.analysis.virial import F_R, I_R, K_correction, VirialWeight, build_weight
from cqnls.errors import CqnlsError, WeightConstructionError
from cqnls.solver.dynamics import step
from cqnls.solver.grid import RadialField, RadialGrid, integrate_radial, make_grid, radial_laplacian
from cqnls.solver.ground_state import GroundStateRef, eval_W, eval_W1, scaled_state, tail_integrals
from cqnls.utils.logger import get_logger

logger = get_logger(__name__)

FINE_N = 4096
IDENTITY_COLUMNS = ["name", "residual", "tolerance", "passed", "min_n", "requires_refinement", "note"]

VIRIAL_THETAS = (0.0, 1.2)
VIRIAL_LAMBDAS = (1.0, 4.0)
VIRIAL_RADII = (2.0, 8.0, 32.0)
VIRIAL_MARGIN = 1.1
TRAJECTORY_R = 8.0
TRAJECTORY_DT = 1e-4
TRAJECTORY_TIMES = tuple(np.linspace(0.005, 0.1, 20))
ORDER_DT = 1e-2
TRAJECTORY_SUBSTEP = 1e-3


class IdentityCheck(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    residual: float
    tolerance: float
    passed: bool
    min_n: int = 0
    requires_refinement: bool = False
    note: str = ""


class IdentityReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    grid_r_max: float
    grid_n: int
    checks: List[IdentityCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> List[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([c.model_dump() for c in self.checks], columns=IDENTITY_COLUMNS)


def _check(name: str, residual: float, tolerance: float, grid: Optional[RadialGrid] = None,
           min_n: int = 0, note: str = "") -> IdentityCheck:
    passed = bool(np.isfinite(residual) and residual < tolerance)
    needs = bool(not passed and grid is not None and grid.n < min_n)
    return IdentityCheck(
        name=name, residual=float(residual), tolerance=tolerance, passed=passed,
        min_n=min_n, requires_refinement=needs, note=note,
    )


def _l2(values: np.ndarray, grid: RadialGrid) -> float:
    return float(np.sqrt(integrate_radial(np.abs(values) ** 2, grid)))


def _reference_checks(ref: GroundStateRef) -> List[IdentityCheck]:
    closed_form = 3.0 * np.sqrt(3.0) * np.pi**2 / 4.0
    return [
        _check("pohozaev_reference", abs(ref.grad_norm_sq - ref.l6_norm_6) / ref.grad_norm_sq, 1e-8),
        _check("crit_energy_third", abs(ref.crit_energy - ref.grad_norm_sq / 3.0) / ref.grad_norm_sq, 1e-8),
        _check("grad_closed_form", abs(ref.grad_norm_sq - closed_form) / closed_form, 1e-8),
        _check(
            "c_gn_definition",
            abs(ref.c_gn - ref.l6_norm_6 ** (1 / 6) / np.sqrt(ref.grad_norm_sq)) / ref.c_gn,
            1e-14,
        ),
    ]


def _ground_state_checks(grid: RadialGrid, ref: GroundStateRef) -> List[IdentityCheck]:
    W = scaled_state(0.0, 1.0, grid)
    grad_tail, l6_tail = tail_integrals(grid.r_max)
    grad_grid, l6_grid = grad_norm_sq(W), l6_norm_6(W)
    grad, l6 = grad_grid + grad_tail, l6_grid + l6_tail
    ratio = sobolev_ratio(W, ref) * np.sqrt(grad_grid / grad) * (l6 / l6_grid) ** (1.0 / 6.0)

    lam = 1e-5
    fd = (np.sqrt(1 + lam) * eval_W((1 + lam) * grid.r) - np.sqrt(1 - lam) * eval_W((1 - lam) * grid.r)) / (2 * lam)
    w1_err = float(np.max(np.abs(fd - eval_W1(grid.r))))

    l2W = apply_L2(W).values.real
    l1W = apply_L1(W).values.real
    lapW = radial_laplacian(W).values.real
    w5_norm = _l2(eval_W(grid.r) ** 5, grid)

    iW = scaled_state(np.pi / 2, 1.0, grid)
    form_iW = eval_quadratic_form(iW, ref) + 0.5 * (grad_tail - l6_tail)
    form_W = eval_quadratic_form(W, ref) + 0.5 * grad_tail - 2.5 * l6_tail

    return [
        _check("grid_gradient_W", abs(grad - ref.grad_norm_sq) / ref.grad_norm_sq, 1e-2, grid, FINE_N,
               note="tail-corrected"),
        _check("pohozaev_grid", abs(grad - l6) / ref.grad_norm_sq, 1e-2, grid, FINE_N, note="tail-corrected"),
        _check("sobolev_ratio_W", abs(ratio - 1.0), 1e-2, grid, FINE_N, note="tail-corrected"),
        _check("W1_generator", w1_err, 1e-8, note="central difference in the scaling parameter"),
        _check("L2_kernel", _l2(l2W, grid) / w5_norm, 1e-3, grid, FINE_N),
        _check("L1_on_W", _l2(l1W - 4.0 * lapW, grid) / w5_norm, 1e-3, grid, FINE_N),
        _check("quadratic_form_iW", abs(form_iW) / ref.grad_norm_sq, 1e-4, grid, FINE_N, note="tail-corrected"),
        _check("quadratic_form_W", abs(form_W + 2.0 * ref.grad_norm_sq) / (2.0 * ref.grad_norm_sq), 1e-2, grid,
               FINE_N, note="tail-corrected"),
    ]


def _virial_zero_check(grid: RadialGrid, ref: GroundStateRef,
                       weight_builder: Callable[[float], VirialWeight],
                       radii: Sequence[float]) -> IdentityCheck:
    worst = 0.0
    for R in radii:
        weight = weight_builder(R)
        reach = VIRIAL_MARGIN * weight.support_radius
        vgrid = grid
        if reach > grid.r_max:
            # same spacing, domain extended past the weight support
            n = int(np.ceil(reach / grid.dr)) - 1
            vgrid = make_grid(grid.dr * (n + 1), n)
        for theta in VIRIAL_THETAS:
            for lam in VIRIAL_LAMBDAS:
                worst = max(worst, abs(K_correction(theta, lam, weight, vgrid)) / ref.grad_norm_sq)
    return _check("virial_zero", worst, 1e-5, grid, FINE_N, note=f"R in {list(radii)}")


def _virial_residuals(grid: RadialGrid, weight: VirialWeight, dts: Sequence[float]) -> np.ndarray:
    """|centred dI_R/dt - F_R| / max(|F_R|, 1) per sample time (rows) and dt (columns)."""
    u = RadialField(grid, np.exp(-grid.r**2 / 2.0))
    t = 0.0
    out = np.empty((len(TRAJECTORY_TIMES), len(dts)))
    for i, target in enumerate(TRAJECTORY_TIMES):
        while t < target - 1e-12:
            h = min(TRAJECTORY_SUBSTEP, target - t)
            u = step(u, h)
            t += h
        fr = F_R(u, weight)
        for j, dt in enumerate(dts):
            slope = (I_R(step(u, dt), weight) - I_R(step(u, -dt), weight)) / (2 * dt)
            out[i, j] = abs(slope - fr) / max(abs(fr), 1.0)
    return out


def _virial_trajectory_checks(grid: RadialGrid,
                              weight_builder: Callable[[float], VirialWeight]) -> List[IdentityCheck]:
    weight = weight_builder(TRAJECTORY_R)
    res = _virial_residuals(grid, weight, (TRAJECTORY_DT, ORDER_DT, ORDER_DT / 2))
    # the centred difference of a symmetric splitting is second order in dt
    ratio = res[:, 1].sum() / res[:, 2].sum()
    return [
        _check("virial_identity", float(res[:, 0].max()), 1e-3, grid, FINE_N,
               note=f"R={TRAJECTORY_R:g}, dt={TRAJECTORY_DT:g}, {len(TRAJECTORY_TIMES)} times"),
        _check("virial_identity_order", abs(ratio - 4.0), 1.0, grid, FINE_N,
               note=f"error ratio {ratio:.3f} for dt={ORDER_DT:g} vs {ORDER_DT / 2:g}"),
    ]


def verify_identities(
    grid: RadialGrid,
    ref: GroundStateRef,
    weight_builder: Callable[[float], VirialWeight] = build_weight,
    radii: Sequence[float] = VIRIAL_RADII,
) -> IdentityReport:
    checks = _reference_checks(ref)

    try:
        checks += _ground_state_checks(grid, ref)
    except CqnlsError as e:
        checks.append(_check("ground_state_battery", np.inf, 0.0, note=str(e)))

    for names, run in (
        (("virial_zero",), lambda: [_virial_zero_check(grid, ref, weight_builder, radii)]),
        (("virial_identity", "virial_identity_order"), lambda: _virial_trajectory_checks(grid, weight_builder)),
    ):
        try:
            checks += run()
        except WeightConstructionError as e:
            logger.error("💥 Virial weight construction failed: %s", e)
            checks += [_check(name, np.inf, 0.0, note=f"weight-construction-failure: {e}") for name in names]

    report = IdentityReport(grid_r_max=grid.r_max, grid_n=grid.n, checks=checks)
    for c in report.checks:
        if not c.passed:
            logger.warning("❌ Identity %s failed: residual=%.3e tolerance=%.1e", c.name, c.residual, c.tolerance)
    logger.info("Identity battery: %d/%d passed", sum(c.passed for c in checks), len(checks))
    return report
