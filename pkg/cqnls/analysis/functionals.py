# File: /cqnls/analysis/functionals.py
"""
Scalar functionals of a radial field, all evaluated with the grid quadrature
so conservation statements are statements about the discrete system.
"""

from __future__ import annotations
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from cqnls.errors import InvalidParameterError, ZeroFieldError
from cqnls.solver.grid import RadialField, discrete_mass, integrate_radial, radial_derivative
from cqnls.solver.ground_state import GroundStateRef, gradient_median_radius

RUN_COLUMNS = [
    "t",
    "mass",
    "energy",
    "crit_energy",
    "grad_norm_sq",
    "l4",
    "l6",
    "delta",
    "g_functional",
    "below_threshold",
]


class DiagnosticsRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    t: float
    mass: float
    energy: float
    crit_energy: float
    grad_norm_sq: float
    l4_norm_4: float
    l6_norm_6: float
    delta: float
    g_functional: float
    below_threshold: bool

    def to_row(self) -> dict:
        return {
            "t": self.t,
            "mass": self.mass,
            "energy": self.energy,
            "crit_energy": self.crit_energy,
            "grad_norm_sq": self.grad_norm_sq,
            "l4": self.l4_norm_4,
            "l6": self.l6_norm_6,
            "delta": self.delta,
            "g_functional": self.g_functional,
            "below_threshold": self.below_threshold,
        }


def mass(u: RadialField) -> float:
    """M(u) = 1/2 int |u|^2, in the v = r*u form the integrator conserves."""
    return discrete_mass(u)


def l2_norm_sq(u: RadialField) -> float:
    return integrate_radial(np.abs(u.values) ** 2, u.grid)


def grad_norm_sq(u: RadialField) -> float:
    du = radial_derivative(u)
    return integrate_radial(np.abs(du.values) ** 2, u.grid)


def l4_norm_4(u: RadialField) -> float:
    return integrate_radial(np.abs(u.values) ** 4, u.grid)


def l6_norm_6(u: RadialField) -> float:
    return integrate_radial(np.abs(u.values) ** 6, u.grid)


def energy(u: RadialField) -> float:
    return grad_norm_sq(u) / 2.0 - l6_norm_6(u) / 6.0 + l4_norm_4(u) / 4.0


def critical_energy(u: RadialField) -> float:
    return grad_norm_sq(u) / 2.0 - l6_norm_6(u) / 6.0


def g_functional(u: RadialField) -> float:
    return grad_norm_sq(u) - l6_norm_6(u)


def delta(u: RadialField, ref: GroundStateRef) -> float:
    return abs(ref.grad_norm_sq - grad_norm_sq(u))


def sobolev_ratio(u: RadialField, ref: GroundStateRef) -> float:
    """||u||_6 / (C_GN ||grad u||); equals 1 only on the ground-state orbit."""
    if u.is_zero:
        raise ZeroFieldError("sobolev_ratio is undefined for the zero field")
    grad = grad_norm_sq(u)
    if grad <= 0.0:
        raise ZeroFieldError("sobolev_ratio needs a nonzero gradient")
    return l6_norm_6(u) ** (1.0 / 6.0) / (ref.c_gn * np.sqrt(grad))


def radial_sobolev_check(u: RadialField, R: float) -> Tuple[float, float]:
    """(sup_{r >= R} |u|, R^-1 ||u||_2^{1/2} ||grad u||_2^{1/2}); report-only."""
    if R < u.grid.dr:
        raise InvalidParameterError(f"R={R} is below the grid spacing {u.grid.dr}")
    outer = np.abs(u.values[u.grid.r >= R])
    lhs = float(outer.max()) if outer.size else 0.0
    rhs = (l2_norm_sq(u) ** 0.25) * (grad_norm_sq(u) ** 0.25) / R
    return lhs, float(rhs)


def variational_margin(u: RadialField, ref: GroundStateRef) -> float:
    """E^c(u)/E^c(W) - ||grad u||^2/||grad W||^2; nonnegative below the threshold."""
    return critical_energy(u) / ref.crit_energy - grad_norm_sq(u) / ref.grad_norm_sq


def gradient_median(u: RadialField) -> float:
    """Radius enclosing half of the discrete ||grad u||^2; 0 for a flat field."""
    du = radial_derivative(u)
    density = np.abs(du.values) ** 2 * u.grid.r**2
    cum = np.cumsum(density)
    total = cum[-1]
    if not total > 0.0:
        return 0.0
    half = 0.5 * total
    j = int(np.searchsorted(cum, half))
    if j == 0:
        return float(u.grid.r[0] * half / cum[0])
    frac = (half - cum[j - 1]) / (cum[j] - cum[j - 1])
    return float(u.grid.r[j - 1] + frac * u.grid.dr)


def concentration_scale(u: RadialField) -> float:
    """r*_W / r*(u): 1 for W itself, mu for W(mu r)."""
    r_star = gradient_median(u)
    if r_star <= 0.0:
        return 0.0
    return gradient_median_radius() / r_star


def diagnostics(u: RadialField, t: float, ref: GroundStateRef) -> DiagnosticsRecord:
    grad = grad_norm_sq(u)
    l4 = l4_norm_4(u)
    l6 = l6_norm_6(u)
    return DiagnosticsRecord(
        t=t,
        mass=mass(u),
        energy=grad / 2.0 - l6 / 6.0 + l4 / 4.0,
        crit_energy=grad / 2.0 - l6 / 6.0,
        grad_norm_sq=grad,
        l4_norm_4=l4,
        l6_norm_6=l6,
        delta=abs(ref.grad_norm_sq - grad),
        g_functional=grad - l6,
        below_threshold=grad < ref.grad_norm_sq,
    )
