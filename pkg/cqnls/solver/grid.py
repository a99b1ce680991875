# File: /cqnls/solver/grid.py
"""
Radial grid on (0, r_max) with the substitution v = r*u.

Nodes r_j = j*dr (j = 1..n) with dr = r_max/(n+1). The orthonormal DST-I
diagonalises the Dirichlet Laplacian on v, so the free propagator is exact
per mode. Quadrature is the trapezoid rule with zero samples at r = 0 and
r = r_max, which reproduces the discrete mass the propagator conserves.
"""

from __future__ import annotations
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import fft

from cqnls.errors import InvalidParameterError

MIN_NODES = 16


@dataclass(frozen=True, eq=False)
class RadialGrid:
    r_max: float
    n: int
    dr: float = field(init=False)
    r: np.ndarray = field(init=False, repr=False)
    k: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < MIN_NODES:
            raise InvalidParameterError(f"n must be an integer >= {MIN_NODES}, got {self.n}")
        if not np.isfinite(self.r_max) or self.r_max <= 0:
            raise InvalidParameterError(f"r_max must be positive, got {self.r_max}")
        n = int(self.n)
        dr = float(self.r_max) / (n + 1)
        r = dr * np.arange(1, n + 1, dtype=float)
        k = np.pi * np.arange(1, n + 1, dtype=float) / float(self.r_max)
        r.setflags(write=False)
        k.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "r_max", float(self.r_max))
        object.__setattr__(self, "dr", dr)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "k", k)

    def same_as(self, other: "RadialGrid") -> bool:
        return self.n == other.n and self.r_max == other.r_max

    def __eq__(self, other):
        return isinstance(other, RadialGrid) and self.same_as(other)

    def __hash__(self):
        return hash((self.r_max, self.n))


@dataclass(frozen=True, eq=False)
class RadialField:
    """Complex samples u(r_j); the values array is read-only."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex, copy=True)
        if vals.shape != (self.grid.n,):
            raise InvalidParameterError(
                f"field has shape {vals.shape}, grid expects ({self.grid.n},)"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: RadialGrid, fn: Callable[[np.ndarray], np.ndarray]) -> "RadialField":
        return cls(grid, fn(grid.r))

    @classmethod
    def zeros(cls, grid: RadialGrid) -> "RadialField":
        return cls(grid, np.zeros(grid.n, dtype=complex))

    def with_values(self, values: np.ndarray) -> "RadialField":
        return RadialField(self.grid, values)

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    def scale(self, a: complex) -> "RadialField":
        return RadialField(self.grid, a * self.values)

    def __add__(self, other: "RadialField") -> "RadialField":
        _check_same_grid(self, other)
        return RadialField(self.grid, self.values + other.values)

    def __sub__(self, other: "RadialField") -> "RadialField":
        _check_same_grid(self, other)
        return RadialField(self.grid, self.values - other.values)


def _check_same_grid(a: RadialField, b: RadialField) -> None:
    if not a.grid.same_as(b.grid):
        raise InvalidParameterError("fields live on different grids")


def make_grid(r_max: float, n: int) -> RadialGrid:
    return RadialGrid(r_max=r_max, n=n)


# ---------------------------------------------------------------------------
# Transforms and quadrature
# ---------------------------------------------------------------------------

def dst(v: np.ndarray) -> np.ndarray:
    """Orthonormal DST-I; it is its own inverse."""
    v = np.asarray(v)
    if np.iscomplexobj(v):
        return fft.dst(v.real, type=1, norm="ortho") + 1j * fft.dst(v.imag, type=1, norm="ortho")
    return fft.dst(v, type=1, norm="ortho")


def idst(vhat: np.ndarray) -> np.ndarray:
    vhat = np.asarray(vhat)
    if np.iscomplexobj(vhat):
        return fft.idst(vhat.real, type=1, norm="ortho") + 1j * fft.idst(vhat.imag, type=1, norm="ortho")
    return fft.idst(vhat, type=1, norm="ortho")


def integrate_radial(f: np.ndarray, grid: RadialGrid) -> float:
    """4*pi * sum_j f_j r_j^2 dr, i.e. the integral over R^3 of a radial f."""
    f = np.asarray(f)
    if f.shape != (grid.n,):
        raise InvalidParameterError(f"integrand has shape {f.shape}, grid expects ({grid.n},)")
    return float(4.0 * np.pi * grid.dr * np.sum(np.real(f) * grid.r**2))


def discrete_mass(u: RadialField) -> float:
    """2*pi*dr*sum |r_j u_j|^2, the quantity both split-step flows conserve."""
    v = u.grid.r * u.values
    return float(2.0 * np.pi * u.grid.dr * np.sum(np.abs(v) ** 2))


def boundary_mass_fraction(u: RadialField, outer: float = 0.05) -> float:
    """Share of the discrete mass carried by the outermost fraction of nodes."""
    v2 = np.abs(u.grid.r * u.values) ** 2
    total = float(np.sum(v2))
    if total == 0.0:
        return 0.0
    m = max(1, int(np.ceil(outer * u.grid.n)))
    return float(np.sum(v2[-m:]) / total)


# ---------------------------------------------------------------------------
# Finite differences on v = r*u
# ---------------------------------------------------------------------------

def _odd_padded(v: np.ndarray) -> np.ndarray:
    # ghost nodes at r = -2dr, -dr, 0 from the odd extension of v
    return np.concatenate((-v[1::-1], np.zeros(1, dtype=v.dtype), v))


def _first_derivative(v: np.ndarray, dr: float) -> np.ndarray:
    n = v.shape[0]
    p = _odd_padded(v)  # node j sits at p[j + 2]
    out = np.empty_like(v)
    out[: n - 2] = (p[1 : n - 1] - 8.0 * p[2:n] + 8.0 * p[4 : n + 2] - p[5 : n + 3]) / 12.0
    out[n - 2] = 3.0 * v[n - 1] + 10.0 * v[n - 2] - 18.0 * v[n - 3] + 6.0 * v[n - 4] - v[n - 5]
    out[n - 2] /= 12.0
    out[n - 1] = 25.0 * v[n - 1] - 48.0 * v[n - 2] + 36.0 * v[n - 3] - 16.0 * v[n - 4] + 3.0 * v[n - 5]
    out[n - 1] /= 12.0
    return out / dr


def _second_derivative(v: np.ndarray, dr: float) -> np.ndarray:
    n = v.shape[0]
    p = _odd_padded(v)
    out = np.empty_like(v)
    out[: n - 2] = (
        -p[1 : n - 1] + 16.0 * p[2:n] - 30.0 * p[3 : n + 1] + 16.0 * p[4 : n + 2] - p[5 : n + 3]
    ) / 12.0
    out[n - 2] = (
        10.0 * v[n - 1] - 15.0 * v[n - 2] - 4.0 * v[n - 3] + 14.0 * v[n - 4] - 6.0 * v[n - 5] + v[n - 6]
    ) / 12.0
    out[n - 1] = (
        45.0 * v[n - 1] - 154.0 * v[n - 2] + 214.0 * v[n - 3] - 156.0 * v[n - 4] + 61.0 * v[n - 5] - 10.0 * v[n - 6]
    ) / 12.0
    return out / dr**2


def radial_derivative(u: RadialField) -> RadialField:
    """d/dr u from d/dr (r*u) = u + r*u'."""
    r = u.grid.r
    v = r * u.values
    dv = _first_derivative(v, u.grid.dr)
    return u.with_values((dv - u.values) / r)


def radial_laplacian(u: RadialField) -> RadialField:
    """Delta u = (r*u)'' / r for radial u."""
    r = u.grid.r
    v = r * u.values
    return u.with_values(_second_derivative(v, u.grid.dr) / r)


# ---------------------------------------------------------------------------
# Free propagator
# ---------------------------------------------------------------------------

def apply_linear_propagator(u: RadialField, dt: float) -> RadialField:
    """Exact e^{i dt Delta} on the Dirichlet sine basis of v = r*u."""
    grid = u.grid
    vhat = dst(grid.r * u.values)
    vhat = vhat * np.exp(-1j * grid.k**2 * dt)
    return u.with_values(idst(vhat) / grid.r)
