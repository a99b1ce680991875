# File: /cqnls/analysis/modulation.py
"""
Modulation decomposition u = e^{i theta} (g + mu^{1/2} W(mu r)).

(theta, mu) are fixed by two H^1-dot orthogonality conditions:
Im <grad(e^{-i theta} u), grad W_mu> = 0 and
<grad Re(e^{-i theta} u - W_mu), grad W1_mu> = 0.
They are solved by damped Newton in (theta, log mu) with a finite-difference
Jacobian. All inner products use the grid derivative so an exact orbit point
is recovered exactly.
"""

from __future__ import annotations
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from cqnls.analysis.functionals import concentration_scale, grad_norm_sq, l4_norm_4
from cqnls.errors import InvalidParameterError, NotNearOrbitError, ZeroFieldError
from cqnls.solver.grid import RadialField, integrate_radial, radial_derivative, radial_laplacian
from cqnls.solver.ground_state import GroundStateRef, eval_W, scaled_generator, scaled_state
from cqnls.utils.config import get_setting
from cqnls.utils.logger import get_logger

logger = get_logger(__name__)

MAX_ITER = 50
NEWTON_TOL = 1e-11
JACOBIAN_STEP = 1e-6
MAX_LOG_MU_STEP = 1.0
MAX_BACKTRACKS = 30

MODULATION_COLUMNS = ["t", "theta", "mu", "delta", "g_h1", "ratio_estimmodu", "ratio_estimlad"]


@dataclass(frozen=True)
class ModulationFit:
    theta: float
    mu: float
    g: RadialField
    orth_residual_1: float
    orth_residual_2: float
    g_h1_norm: float
    converged: bool
    inside_gate: bool = True
    iterations: int = 0

    def reconstruct(self) -> RadialField:
        return self.g.with_values(np.exp(1j * self.theta) * (self.g.values + scaled_state(0.0, self.mu, self.g.grid).values))


def _wrap(theta: float) -> float:
    return float(np.angle(np.exp(1j * theta)))


class _Conditions:
    """Normalised orthogonality conditions for a fixed field."""

    def __init__(self, u: RadialField):
        self.u = u
        self.du = radial_derivative(u).values
        self.scale = grad_norm_sq(u)

    def overlaps(self, mu: float) -> Tuple[complex, complex, float]:
        grid = self.u.grid
        dW = radial_derivative(scaled_state(0.0, mu, grid)).values.real
        dW1 = radial_derivative(scaled_generator(mu, grid)).values.real
        a = _complex_integral(self.du * dW, grid)
        b = _complex_integral(self.du * dW1, grid)
        c = integrate_radial(dW * dW1, grid)
        return a, b, c

    def residual(self, theta: float, log_mu: float) -> np.ndarray:
        a, b, c = self.overlaps(float(np.exp(log_mu)))
        rot = np.exp(-1j * theta)
        return np.array([(rot * a).imag, (rot * b).real - c]) / self.scale


def _complex_integral(f: np.ndarray, grid) -> complex:
    return integrate_radial(f.real, grid) + 1j * integrate_radial(f.imag, grid)


def _newton(cond: _Conditions, theta: float, log_mu: float) -> Tuple[float, float, np.ndarray, bool, int]:
    x = np.array([theta, log_mu])
    res = cond.residual(*x)
    for it in range(1, MAX_ITER + 1):
        if np.max(np.abs(res)) < NEWTON_TOL:
            return x[0], x[1], res, True, it - 1
        jac = np.empty((2, 2))
        for k in range(2):
            e = np.zeros(2)
            e[k] = JACOBIAN_STEP
            jac[:, k] = (cond.residual(*(x + e)) - cond.residual(*(x - e))) / (2.0 * JACOBIAN_STEP)
        try:
            dx = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError:
            logger.warning("Singular modulation Jacobian at theta=%g mu=%g", x[0], np.exp(x[1]))
            return x[0], x[1], res, False, it
        if abs(dx[1]) > MAX_LOG_MU_STEP:
            dx *= MAX_LOG_MU_STEP / abs(dx[1])

        alpha = 1.0
        norm0 = np.linalg.norm(res)
        for _ in range(MAX_BACKTRACKS):
            trial = x + alpha * dx
            trial_res = cond.residual(*trial)
            if np.linalg.norm(trial_res) < norm0:
                break
            alpha *= 0.5
        else:
            return x[0], x[1], res, bool(np.max(np.abs(res)) < NEWTON_TOL), it
        x, res = trial, trial_res
    return x[0], x[1], res, bool(np.max(np.abs(res)) < NEWTON_TOL), MAX_ITER


def initial_guess(u: RadialField) -> Tuple[float, float]:
    """(theta0, mu0) from the gradient-median radius and the H^1-dot overlap."""
    mu0 = concentration_scale(u)
    if not mu0 > 0.0:
        raise ZeroFieldError("cannot locate the concentration scale of a flat field")
    dW = radial_derivative(scaled_state(0.0, mu0, u.grid)).values.real
    overlap = _complex_integral(radial_derivative(u).values * dW, u.grid)
    return float(np.angle(overlap)), float(mu0)


def fit(
    u: RadialField,
    ref: GroundStateRef,
    gate: Optional[float] = None,
    allow_outside_gate: bool = False,
) -> ModulationFit:
    if u.is_zero:
        raise ZeroFieldError("cannot modulate the zero field")
    gate = ref.grad_norm_sq * float(get_setting("modulation_gate")) if gate is None else gate
    grad = grad_norm_sq(u)
    dist = abs(ref.grad_norm_sq - grad)
    inside = dist < gate
    if not inside:
        if not allow_outside_gate:
            raise NotNearOrbitError(dist, gate)
        logger.warning("Modulation fit outside the gate: delta=%.6g gate=%.6g", dist, gate)

    theta0, mu0 = initial_guess(u)
    cond = _Conditions(u)
    theta, log_mu, res, converged, iterations = _newton(cond, theta0, float(np.log(mu0)))
    mu = float(np.exp(log_mu))
    theta = _wrap(theta)
    if not converged:
        logger.warning("Modulation Newton did not converge: residuals=%s", res.tolist())

    g = u.with_values(np.exp(-1j * theta) * u.values - scaled_state(0.0, mu, u.grid).values)
    return ModulationFit(
        theta=theta,
        mu=mu,
        g=g,
        orth_residual_1=float(res[0]),
        orth_residual_2=float(res[1]),
        g_h1_norm=float(np.sqrt(grad_norm_sq(g))),
        converged=converged,
        inside_gate=inside,
        iterations=iterations,
    )


# ---------------------------------------------------------------------------
# Linearised operators at W
# ---------------------------------------------------------------------------

def _require_real(h: RadialField) -> np.ndarray:
    if np.any(h.values.imag):
        raise InvalidParameterError("operator expects a real-valued field")
    return h.values.real


def apply_L1(h: RadialField) -> RadialField:
    """-Delta h - 5 W^4 h."""
    values = _require_real(h)
    lap = radial_laplacian(h).values.real
    return h.with_values(-lap - 5.0 * eval_W(h.grid.r) ** 4 * values)


def apply_L2(h: RadialField) -> RadialField:
    """-Delta h - W^4 h; W spans its kernel."""
    values = _require_real(h)
    lap = radial_laplacian(h).values.real
    return h.with_values(-lap - eval_W(h.grid.r) ** 4 * values)


def eval_quadratic_form(h: RadialField, ref: GroundStateRef) -> float:
    """1/2 int |grad h|^2 - 1/2 int W^4 (5 h1^2 + h2^2) for h = h1 + i h2."""
    w4 = eval_W(h.grid.r) ** 4
    potential = integrate_radial(w4 * (5.0 * h.values.real**2 + h.values.imag**2), h.grid)
    return 0.5 * grad_norm_sq(h) - 0.5 * potential


# ---------------------------------------------------------------------------
# Along a trajectory
# ---------------------------------------------------------------------------

def track_modulation(log, ref: GroundStateRef, gate: Optional[float] = None) -> pd.DataFrame:
    """
    Fit every snapshot inside the gate. d mu/dt is differenced only within
    runs of consecutive fitted snapshots. Ratios are report-only.
    """
    gate = ref.grad_norm_sq * float(get_setting("modulation_gate")) if gate is None else gate
    rows = []
    segment = 0
    for t, u in log.snapshots:
        dist = abs(ref.grad_norm_sq - grad_norm_sq(u)) if not u.is_zero else np.inf
        try:
            if not dist < gate:
                raise NotNearOrbitError(dist, gate)
            result = fit(u, ref, gate=gate)
        except (NotNearOrbitError, ZeroFieldError) as e:
            logger.info("Skipping snapshot t=%g: %s", t, e)
            # d mu/dt is never taken across a skipped snapshot
            if rows and rows[-1]["segment"] == segment:
                segment += 1
            continue
        rows.append(
            {
                "t": float(t),
                "theta": result.theta,
                "mu": result.mu,
                "delta": dist,
                "g_h1": result.g_h1_norm,
                "l4": l4_norm_4(u),
                "segment": segment,
            }
        )

    if not rows:
        return pd.DataFrame(columns=MODULATION_COLUMNS)

    frame = pd.DataFrame(rows)
    mu = frame["mu"].to_numpy()
    delta = frame["delta"].to_numpy()
    t = frame["t"].to_numpy()
    dmu = np.full(len(frame), np.nan)
    for idx in frame.groupby("segment").indices.values():
        if len(idx) >= 2:
            dmu[idx] = np.gradient(mu[idx], t[idx])
    with np.errstate(divide="ignore", invalid="ignore"):
        frame["ratio_estimmodu"] = (np.sqrt(frame["l4"].to_numpy()) + 1.0 / (1.0 + mu)) / delta
        frame["ratio_estimlad"] = np.abs(dmu / mu) / (mu**2 * delta)
    frame["dmu_over_mu"] = dmu / mu
    logger.info("Modulation tracked on %d of %d snapshots", len(frame), len(log.snapshots))
    return frame[MODULATION_COLUMNS + ["dmu_over_mu"]]
