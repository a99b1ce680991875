# File: /cqnls/solver/ground_state.py
"""
The explicit ground state W(r) = (1 + r^2/3)^(-1/2) of -Delta W = W^5,
the generator W1 = W/2 + r W' of its scaling orbit, and grid-free
reference constants obtained by adaptive quadrature.
"""

from __future__ import annotations
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import integrate, optimize

from cqnls.errors import InvalidParameterError, QuadratureFailureError
from cqnls.solver.grid import RadialField, RadialGrid
from cqnls.utils.logger import get_logger

logger = get_logger(__name__)

QUAD_RTOL = 1e-12
REF_RTOL = 1e-10


def eval_W(r):
    r = np.asarray(r, dtype=float)
    return 1.0 / np.sqrt(1.0 + r * r / 3.0)


def eval_dW(r):
    r = np.asarray(r, dtype=float)
    return -(r / 3.0) * (1.0 + r * r / 3.0) ** -1.5


def eval_W1(r):
    """W/2 + r W' in closed form; vanishes at r = sqrt(3)."""
    r = np.asarray(r, dtype=float)
    return (1.0 + r * r / 3.0) ** -1.5 * (0.5 - r * r / 6.0)


def eval_dW1(r):
    r = np.asarray(r, dtype=float)
    q = 1.0 + r * r / 3.0
    return -(r / 3.0) * q**-2.5 * (2.5 - r * r / 6.0)


class GroundStateRef(BaseModel):
    model_config = ConfigDict(frozen=True)

    grad_norm_sq: float
    l6_norm_6: float
    crit_energy: float
    c_gn: float
    quadrature_error_bound: float


def _radial_quad(density: Callable[[float], float], r_lo: float, r_hi: float = np.inf) -> Tuple[float, float]:
    """4*pi * int density(r) r^2 dr over [r_lo, r_hi]; r = tan(s) on infinite ranges."""
    if np.isfinite(r_hi):
        value, err = integrate.quad(
            lambda r: 4.0 * np.pi * density(r) * r * r, r_lo, r_hi, epsabs=0.0, epsrel=QUAD_RTOL, limit=400
        )
        return float(value), float(err)

    s_lo = float(np.arctan(r_lo))
    s_hi = float(np.pi / 2)

    def integrand(s):
        if s >= np.pi / 2:
            return 0.0
        r = np.tan(s)
        return 4.0 * np.pi * density(r) * r * r / np.cos(s) ** 2

    value, err = integrate.quad(integrand, s_lo, s_hi, epsabs=0.0, epsrel=QUAD_RTOL, limit=400)
    return float(value), float(err)


def _grad_density(r):
    return float(eval_dW(r)) ** 2


def _l6_density(r):
    return float(eval_W(r)) ** 6


@lru_cache(maxsize=1)
def reference_constants() -> GroundStateRef:
    grad, grad_err = _radial_quad(_grad_density, 0.0)
    l6, l6_err = _radial_quad(_l6_density, 0.0)
    bound = max(grad_err, l6_err, 4.0 * np.finfo(float).eps * grad)
    if bound > REF_RTOL * grad:
        raise QuadratureFailureError(f"reference quadrature error {bound:.3g} exceeds {REF_RTOL * grad:.3g}")
    ref = GroundStateRef(
        grad_norm_sq=grad,
        l6_norm_6=l6,
        crit_energy=grad / 2.0 - l6 / 6.0,
        c_gn=l6 ** (1.0 / 6.0) / grad**0.5,
        quadrature_error_bound=bound,
    )
    logger.debug("Reference constants: %s", ref.model_dump())
    return ref


def tail_integrals(r0: float) -> Tuple[float, float]:
    """Off-grid tails of ||grad W||^2 and ||W||_6^6 over r > r0."""
    if r0 <= 0:
        raise InvalidParameterError(f"tail radius must be positive, got {r0}")
    grad, _ = _radial_quad(_grad_density, r0)
    l6, _ = _radial_quad(_l6_density, r0)
    return grad, l6


def truncated_mass(radius: float) -> float:
    """2*pi * int_0^radius W^2 r^2 dr; grows linearly since W is not in L^2."""
    value, _ = _radial_quad(lambda r: float(eval_W(r)) ** 2, 0.0, radius)
    return 0.5 * value


def truncated_l4(radius: float) -> float:
    value, _ = _radial_quad(lambda r: float(eval_W(r)) ** 4, 0.0, radius)
    return value


@lru_cache(maxsize=1)
def gradient_median_radius() -> float:
    """Radius enclosing half of ||grad W||^2."""
    half = 0.5 * reference_constants().grad_norm_sq
    return float(optimize.brentq(lambda x: _radial_quad(_grad_density, 0.0, x)[0] - half, 1e-3, 1e3, xtol=1e-13))


def scaled_state(theta: float, mu: float, grid: RadialGrid) -> RadialField:
    """e^{i theta} mu^{1/2} W(mu r) sampled on the grid."""
    if mu <= 0:
        raise InvalidParameterError(f"mu must be positive, got {mu}")
    return RadialField(grid, np.exp(1j * theta) * np.sqrt(mu) * eval_W(mu * grid.r))


def scaled_generator(mu: float, grid: RadialGrid) -> RadialField:
    """mu^{1/2} W1(mu r), the real scaling direction at W_mu."""
    if mu <= 0:
        raise InvalidParameterError(f"mu must be positive, got {mu}")
    return RadialField(grid, np.sqrt(mu) * eval_W1(mu * grid.r))
