# File: /cqnls/analysis/virial.py
"""
Localized virial weight w_R(r) = R^2 phi(r/R) and the virial functionals.

phi(s) = s^2 on [0, 1] and 0 for s >= s_out. On [1, s_out] phi'' is built
directly as two Bernstein pieces, each C^5 at its ends: a smoothstep from
2 down to 0 minus a negative dip, then a positive bump no higher than 2.
The dip depth and the split point are fixed in closed form by phi(s_out) =
phi'(s_out) = 0, so phi'' <= 2 holds by construction and phi is C^7.
Every derivative of w_R comes from the polynomial pieces, never from
differencing the weight.
"""

from __future__ import annotations
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.interpolate import BPoly, PPoly

from cqnls.analysis.functionals import grad_norm_sq, l6_norm_6
from cqnls.errors import InvalidParameterError, WeightConstructionError
from cqnls.solver.grid import RadialField, RadialGrid, integrate_radial, radial_derivative
from cqnls.solver.ground_state import scaled_state, tail_integrals
from cqnls.utils.logger import get_logger

logger = get_logger(__name__)

PHI_SECOND_CAP = 2.0
CAP_SLACK = 1e-9
SAMPLE_POINTS = 10_000
INNER_DATA = (1.0, 2.0, 2.0, 0.0, 0.0, 0.0)
DEFAULT_DIP_FRACTION = 0.25

# degree-12 Bernstein coefficients: smoothstep 0 -> 1 and the bump 4096 z^6 (1-z)^6 (peak 1)
STEP_COEFFS = np.array([0.0] * 6 + [0.5] + [1.0] * 6)
BUMP_COEFFS = np.zeros(13)
BUMP_COEFFS[6] = 4096.0 / 924.0
BUMP_INTEGRAL = 1024.0 / 3003.0  # int_0^1 bump
STEP_MOMENT = 7.0 / 52.0  # int_0^1 z (1 - step)
CURVATURE = 0.5 - 2.0 * STEP_MOMENT

MIN_TRANSITION_LENGTH = 1.0 + 1.0 / np.sqrt(BUMP_INTEGRAL)


def transition_length(dip_fraction: float = DEFAULT_DIP_FRACTION) -> float:
    """s_out for a dip occupying the given share of [1, s_out]."""
    a = float(dip_fraction)
    slack = BUMP_INTEGRAL * (1.0 - a) - CURVATURE * a * a
    if not (0.0 < a < 1.0 and slack > 0.0):
        raise InvalidParameterError(f"dip_fraction must leave room for the bump, got {dip_fraction}")
    x = 0.5 * (-a + np.sqrt(a * a + 4.0 * slack))
    return 1.0 + 1.0 / x


def _dip_shape(s_out: float) -> Tuple[float, float]:
    """(dip_fraction, dip_depth) that close phi at s_out."""
    x = 1.0 / (s_out - 1.0)
    room = BUMP_INTEGRAL - x * x
    if not room > 0.0:
        raise WeightConstructionError(
            f"no profile with phi'' <= {PHI_SECOND_CAP} reaches 0 by s_out={s_out:g}; "
            f"s_out must exceed {MIN_TRANSITION_LENGTH:.6f}"
        )
    b = BUMP_INTEGRAL + x
    a = (-b + np.sqrt(b * b + 4.0 * CURVATURE * room)) / (2.0 * CURVATURE)
    depth = (a + 2.0 * (1.0 - a) * BUMP_INTEGRAL + 2.0 * x) / (a * BUMP_INTEGRAL)
    return float(a), float(depth)


def _bridge(s_out: float) -> BPoly:
    a, depth = _dip_shape(s_out)
    split = 1.0 + a * (s_out - 1.0)
    breaks = np.array([1.0, split, s_out])
    second = BPoly(
        np.column_stack([2.0 * (1.0 - STEP_COEFFS) - depth * BUMP_COEFFS, 2.0 * BUMP_COEFFS]),
        breaks,
    )
    phi = second.antiderivative(2)
    # antiderivative vanishes with its slope at s = 1; add 1 + 2 (s - 1)
    coeffs = phi.c.copy()
    frac = np.arange(coeffs.shape[0])[:, None] / (coeffs.shape[0] - 1)
    left = 1.0 + 2.0 * (breaks[:-1] - 1.0)
    right = 1.0 + 2.0 * (breaks[1:] - 1.0)
    coeffs += left + frac * (right - left)
    return BPoly(coeffs, breaks)


def _sup_second_derivative(bridge: BPoly) -> float:
    """Exact max of phi'' on the bridge: breakpoints plus roots of phi'''."""
    pp = PPoly.from_bernstein_basis(bridge)
    crit = pp.derivative(3).roots(discontinuity=False, extrapolate=False)
    crit = np.asarray(crit, dtype=float)
    crit = crit[np.isfinite(crit)]
    pts = np.concatenate((pp.x, crit))
    return float(np.max(bridge(pts, 2)))


@lru_cache(maxsize=1)
def default_transition_length() -> float:
    s_out = transition_length(DEFAULT_DIP_FRACTION)
    logger.info("Virial profile transition length s_out=%.6f", s_out)
    return s_out


@dataclass(frozen=True, eq=False)
class VirialWeight:
    R: float
    s_out: float
    bridge: BPoly = field(repr=False)
    sup_phi_second: float
    growth_constant: float

    @property
    def support_radius(self) -> float:
        return self.R * self.s_out

    def phi(self, s, nu: int = 0) -> np.ndarray:
        """nu-th derivative of the profile at s >= 0."""
        s = np.asarray(s, dtype=float)
        inner = [s * s, 2.0 * s, np.full_like(s, 2.0), np.zeros_like(s), np.zeros_like(s)][nu]
        mid_mask = (s > 1.0) & (s < self.s_out)
        out = np.where(s <= 1.0, inner, 0.0)
        if np.any(mid_mask):
            out = np.where(mid_mask, self.bridge(np.clip(s, 1.0, self.s_out), nu), out)
        return out

    def w(self, r) -> np.ndarray:
        return self.R**2 * self.phi(np.asarray(r) / self.R)

    def dw(self, r) -> np.ndarray:
        return self.R * self.phi(np.asarray(r) / self.R, 1)

    def d2w(self, r) -> np.ndarray:
        return self.phi(np.asarray(r) / self.R, 2)

    def lap_w(self, r) -> np.ndarray:
        """w'' + 2w'/r; exactly 6 where w = r^2."""
        s = np.asarray(r, dtype=float) / self.R
        ratio = np.where(s <= 1.0, 2.0, self.phi(s, 1) / np.where(s > 0, s, 1.0))
        return self.phi(s, 2) + 2.0 * ratio

    def bilap_w(self, r) -> np.ndarray:
        """w'''' + 4w'''/r; exactly 0 where w = r^2."""
        s = np.asarray(r, dtype=float) / self.R
        safe_s = np.where(s > 1.0, s, 1.0)
        return (self.phi(s, 4) + 4.0 * self.phi(s, 3) / safe_s) / self.R**2


def _verify_profile(bridge: BPoly, s_out: float) -> Tuple[float, float]:
    s = np.linspace(1.0, s_out, SAMPLE_POINTS)
    for k, value in enumerate(INNER_DATA):
        # rounding in the k-th derivative grows with its size on the bridge
        tol = 1e-8 * (1.0 + float(np.max(np.abs(bridge(s, k)))))
        if abs(float(bridge(1.0, k)) - value) > tol or abs(float(bridge(s_out, k))) > tol:
            raise WeightConstructionError(f"bridge derivative {k} does not match the junction data")

    sup2 = _sup_second_derivative(bridge)
    sampled = float(np.max(bridge(s, 2)))
    if max(sup2, sampled) > PHI_SECOND_CAP + CAP_SLACK:
        raise WeightConstructionError(
            f"sup phi'' = {max(sup2, sampled):.6g} exceeds {PHI_SECOND_CAP} on [1, {s_out:g}]"
        )

    # |phi^(a)(s)| <= C s^(2-a) for a <= 4; the inner piece s^2 needs C >= 2
    constant = 2.0
    for a in range(5):
        constant = max(constant, float(np.max(np.abs(bridge(s, a)) / s ** (2 - a))))
    return max(sup2, sampled), constant


def build_weight(R: float, s_out: float | None = None) -> VirialWeight:
    if not R >= 1.0:
        raise InvalidParameterError(f"R must be >= 1, got {R}")
    if s_out is None:
        s_out = default_transition_length()
    if not s_out > 1.0:
        raise InvalidParameterError(f"s_out must exceed 1, got {s_out}")
    bridge = _bridge(float(s_out))
    sup2, constant = _verify_profile(bridge, float(s_out))
    return VirialWeight(R=float(R), s_out=float(s_out), bridge=bridge, sup_phi_second=sup2, growth_constant=constant)


# ---------------------------------------------------------------------------
# Functionals
# ---------------------------------------------------------------------------

def I_R(u: RadialField, w: VirialWeight) -> float:
    """2 Im int w_R' (d_r u) conj(u)."""
    du = radial_derivative(u)
    return 2.0 * integrate_radial(w.dw(u.grid.r) * np.imag(du.values * np.conj(u.values)), u.grid)


def _virial_terms(u: RadialField, w: VirialWeight) -> Tuple[float, float]:
    r = u.grid.r
    a2 = np.abs(u.values) ** 2
    lap = w.lap_w(r)
    du2 = np.abs(radial_derivative(u).values) ** 2
    critical = integrate_radial(-w.bilap_w(r) * a2 + 4.0 * w.d2w(r) * du2 - (4.0 / 3.0) * lap * a2**3, u.grid)
    quartic = integrate_radial(lap * a2**2, u.grid)
    return critical, quartic


def F_R(u: RadialField, w: VirialWeight) -> float:
    critical, quartic = _virial_terms(u, w)
    return critical + quartic


def Fc_R(u: RadialField, w: VirialWeight) -> float:
    return _virial_terms(u, w)[0]


def Fc_inf(u: RadialField) -> float:
    return 8.0 * (grad_norm_sq(u) - l6_norm_6(u))


def virial_moment(u: RadialField, w: VirialWeight) -> float:
    """V_R = int w_R |u|^2, whose time derivative is I_R."""
    return integrate_radial(w.w(u.grid.r) * np.abs(u.values) ** 2, u.grid)


def K_correction(theta: float, mu: float, w: VirialWeight, grid: RadialGrid) -> float:
    """Fc_R - Fc_inf at the scaled ground state; zero up to discretization.

    Fc_inf includes the off-grid tails beyond r_max so truncation of the
    slowly decaying W does not masquerade as a residual.
    """
    state = scaled_state(theta, mu, grid)
    grad_tail, l6_tail = tail_integrals(mu * grid.r_max)
    fc_inf = 8.0 * ((grad_norm_sq(state) + grad_tail) - (l6_norm_6(state) + l6_tail))
    return Fc_R(state, w) - fc_inf


def modulated_virial_terms(
    u: RadialField, theta: float, mu: float, w: VirialWeight, chi: float = 1.0
) -> Tuple[float, float, float]:
    """(Fc_inf[u], F_R[u] - Fc_inf[u], -chi * K) for a state near the orbit."""
    fc_inf = Fc_inf(u)
    return fc_inf, F_R(u, w) - fc_inf, -chi * K_correction(theta, mu, w, u.grid)


# ---------------------------------------------------------------------------
# Localized mass
# ---------------------------------------------------------------------------

@lru_cache(maxsize=1)
def _cutoff_bridge() -> BPoly:
    return BPoly.from_derivatives([1.0, 2.0], [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


def cutoff(s) -> np.ndarray:
    """xi(s): 1 on [0, 1], 0 on [2, inf), C^2 quintic in between."""
    s = np.asarray(s, dtype=float)
    mid = _cutoff_bridge()(np.clip(s, 1.0, 2.0))
    return np.where(s <= 1.0, 1.0, np.where(s >= 2.0, 0.0, mid))


def localized_mass(u: RadialField, R: float) -> float:
    """M_R = int |u|^2 xi(r/R); note this carries no factor 1/2."""
    if not R > 0:
        raise InvalidParameterError(f"R must be positive, got {R}")
    return integrate_radial(np.abs(u.values) ** 2 * cutoff(u.grid.r / R), u.grid)
