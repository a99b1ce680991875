# File: /cqnls/experiments/families.py
"""
One-parameter initial-data families a*psi and threshold tuning.

E(a psi) = (sg/2) x - (s6/6) x^3 + (s4/4) x^2 with x = a^2, so hitting a
target energy is a cubic root problem in x. Roots are seeded from the
companion matrix and polished by bracketed Newton.
"""

from __future__ import annotations
from enum import Enum
from typing import Annotated, List, Literal, NamedTuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat

from cqnls.analysis.functionals import energy, grad_norm_sq, l2_norm_sq, l4_norm_4, l6_norm_6
from cqnls.analysis.virial import cutoff
from cqnls.errors import InfeasibleThresholdError, InvalidParameterError, QuadratureFailureError
from cqnls.solver.grid import RadialField, RadialGrid
from cqnls.solver.ground_state import GroundStateRef, eval_W
from cqnls.utils.logger import get_logger

logger = get_logger(__name__)

NEWTON_MAXITER = 100
ROOT_IMAG_TOL = 1e-8


class Side(str, Enum):
    BELOW = "below"
    ABOVE = "above"


class TruncatedGroundState(BaseModel):
    """W(mu r) * xi(r / rho) with xi the C^2 cutoff used by localized_mass."""

    model_config = ConfigDict(extra="forbid", frozen=True)
    kind: Literal["truncated_ground_state"] = "truncated_ground_state"
    mu: PositiveFloat = 1.0
    rho: PositiveFloat = 30.0

    def profile(self, r: np.ndarray) -> np.ndarray:
        return eval_W(self.mu * r) * cutoff(r / self.rho)


class Gaussian(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)
    kind: Literal["gaussian"] = "gaussian"
    sigma: PositiveFloat = 1.0

    def profile(self, r: np.ndarray) -> np.ndarray:
        return np.exp(-(r**2) / (2.0 * self.sigma**2))


class Ring(BaseModel):
    """Gaussian shell at r0, symmetrised so the profile is even in r."""

    model_config = ConfigDict(extra="forbid", frozen=True)
    kind: Literal["ring"] = "ring"
    r0: PositiveFloat = 4.0
    sigma: PositiveFloat = 1.0

    def profile(self, r: np.ndarray) -> np.ndarray:
        s2 = 2.0 * self.sigma**2
        return np.exp(-((r - self.r0) ** 2) / s2) + np.exp(-((r + self.r0) ** 2) / s2)


Shape = Annotated[Union[TruncatedGroundState, Gaussian, Ring], Field(discriminator="kind")]


class DataFamily(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    shape: Shape = Field(default_factory=Gaussian)
    amplitude: float = Field(1.0, ge=0.0)

    def params(self) -> dict:
        return self.shape.model_dump()

    def sample(self, grid: RadialGrid, amplitude: float | None = None) -> RadialField:
        a = self.amplitude if amplitude is None else amplitude
        return RadialField(grid, a * self.shape.profile(grid.r))


class ShapeIntegrals(NamedTuple):
    s2: float
    s4: float
    s6: float
    sg: float


class TuneResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    amplitude: float
    side: Side
    target_energy: float
    achieved_energy: float
    grad_ratio: float
    roots: List[float]
    grad_ratios: List[float]


def shape_integrals(family: DataFamily, grid: RadialGrid) -> ShapeIntegrals:
    """Grid norms of the unit-amplitude shape."""
    psi = family.sample(grid, amplitude=1.0)
    return ShapeIntegrals(
        s2=l2_norm_sq(psi),
        s4=l4_norm_4(psi),
        s6=l6_norm_6(psi),
        sg=grad_norm_sq(psi),
    )


def _energy_polynomial(integrals: ShapeIntegrals, target: float) -> Polynomial:
    return Polynomial([-target, integrals.sg / 2.0, integrals.s4 / 4.0, -integrals.s6 / 6.0])


def _safeguarded_newton(p: Polynomial, lo: float, hi: float) -> float:
    """Newton on a sign-changing bracket, bisecting whenever a step leaves it."""
    dp = p.deriv()
    f_lo = p(lo)
    x = 0.5 * (lo + hi)
    for _ in range(NEWTON_MAXITER):
        fx = p(x)
        if fx == 0.0:
            return x
        if np.sign(fx) == np.sign(f_lo):
            lo, f_lo = x, fx
        else:
            hi = x
        slope = dp(x)
        candidate = x - fx / slope if slope != 0.0 else np.nan
        if not (lo < candidate < hi):
            candidate = 0.5 * (lo + hi)
        if abs(candidate - x) <= 4.0 * np.finfo(float).eps * max(abs(x), 1.0):
            return float(candidate)
        x = candidate
    return float(x)


def _bracket(p: Polynomial, x0: float, upper: float) -> tuple[float, float]:
    width = max(1e-6 * abs(x0), 1e-12)
    lo, hi = max(x0 - width, 0.0), min(x0 + width, upper)
    while np.sign(p(lo)) == np.sign(p(hi)):
        width *= 2.0
        lo, hi = max(x0 - width, 0.0), min(x0 + width, upper)
        if lo == 0.0 and hi == upper:
            break
    return lo, hi


def threshold_amplitudes(integrals: ShapeIntegrals, target: float) -> List[float]:
    """Positive x = a^2 with E(a psi) = target, sorted ascending."""
    if integrals.s6 == 0.0 and integrals.s4 == 0.0:
        # only the zero shape gets here
        return []
    p = _energy_polynomial(integrals, target)
    seeds = sorted(
        float(z.real)
        for z in np.atleast_1d(p.roots())
        if abs(z.imag) <= ROOT_IMAG_TOL * max(1.0, abs(z)) and z.real > 0.0
    )
    if not seeds:
        return []
    upper = 2.0 * max(seeds) + 1.0
    roots = []
    for x0 in seeds:
        lo, hi = _bracket(p, x0, upper)
        if np.sign(p(lo)) == np.sign(p(hi)):
            # tangential double root; the seed is as good as it gets
            roots.append(x0)
            continue
        roots.append(_safeguarded_newton(p, lo, hi))
    return sorted(set(roots))


def tune_amplitude(
    family: DataFamily,
    side: Side,
    ref: GroundStateRef,
    grid: RadialGrid,
    tol: float = 1e-10,
    energy_fraction: float = 1.0,
) -> TuneResult:
    if not tol > 0:
        raise InvalidParameterError(f"tol must be positive, got {tol}")
    if not energy_fraction > 0:
        raise InvalidParameterError(f"energy_fraction must be positive, got {energy_fraction}")
    side = Side(side)
    integrals = shape_integrals(family, grid)
    target = energy_fraction * ref.crit_energy
    roots = threshold_amplitudes(integrals, target)
    ratios = [float(np.sqrt(x * integrals.sg / ref.grad_norm_sq)) for x in roots]
    if side is Side.BELOW:
        candidates = [x for x, g in zip(roots, ratios) if g < 1.0]
    else:
        candidates = [x for x, g in zip(roots, ratios) if g > 1.0]
    if not candidates:
        raise InfeasibleThresholdError(side.value, roots, ratios)

    x = min(candidates)
    amplitude = float(np.sqrt(x))
    achieved = energy(family.sample(grid, amplitude))
    if abs(achieved - target) >= tol * ref.crit_energy:
        raise QuadratureFailureError(
            f"tuned energy {achieved:.17g} misses target {target:.17g} by more than tol={tol:g}"
        )
    result = TuneResult(
        amplitude=amplitude,
        side=side,
        target_energy=target,
        achieved_energy=achieved,
        grad_ratio=float(np.sqrt(x * integrals.sg / ref.grad_norm_sq)),
        roots=roots,
        grad_ratios=ratios,
    )
    logger.info(
        "🎯 Tuned %s side=%s a=%.12g E/Ec=%.15g grad ratio=%.6g",
        family.shape.kind, side.value, amplitude, achieved / ref.crit_energy, result.grad_ratio,
    )
    return result


def tune_to_threshold(
    family: DataFamily,
    side: Side,
    ref: GroundStateRef,
    grid: RadialGrid,
    tol: float = 1e-10,
    energy_fraction: float = 1.0,
) -> RadialField:
    result = tune_amplitude(family, side, ref, grid, tol=tol, energy_fraction=energy_fraction)
    return family.sample(grid, result.amplitude)
