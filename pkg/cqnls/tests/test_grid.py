import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cqnls.errors import InvalidParameterError
from cqnls.solver.grid import (
    RadialField,
    apply_linear_propagator,
    boundary_mass_fraction,
    discrete_mass,
    dst,
    idst,
    integrate_radial,
    make_grid,
    radial_derivative,
    radial_laplacian,
)


def test_grid_spacing_and_nodes():
    grid = make_grid(64.0, 4096)
    assert grid.dr == 64.0 / 4097
    assert grid.r[0] == pytest.approx(grid.dr)
    assert grid.r[-1] == pytest.approx(64.0 - grid.dr)
    assert np.all(np.diff(grid.r) > 0)


def test_first_wavenumber_is_pi_on_unit_domain():
    grid = make_grid(1.0, 16)
    assert grid.k[0] == pytest.approx(np.pi, rel=1e-15)


@pytest.mark.parametrize("r_max, n", [(64.0, 15), (0.0, 64), (-1.0, 64), (float("inf"), 64), (1.0, 16.5)])
def test_make_grid_rejects_bad_parameters(r_max, n):
    with pytest.raises(InvalidParameterError):
        make_grid(r_max, n)


def test_grid_arrays_are_read_only():
    grid = make_grid(8.0, 64)
    with pytest.raises(ValueError):
        grid.r[0] = 1.0


def test_field_has_value_semantics():
    grid = make_grid(8.0, 64)
    raw = np.ones(64)
    u = RadialField(grid, raw)
    raw[0] = 5.0
    assert u.values[0] == 1.0
    with pytest.raises(ValueError):
        u.values[0] = 2.0
    v = u.scale(2.0)
    assert u.values[1] == 1.0 and v.values[1] == 2.0


def test_field_shape_is_checked():
    with pytest.raises(InvalidParameterError):
        RadialField(make_grid(8.0, 64), np.zeros(63))


def test_fields_on_different_grids_do_not_mix():
    a = RadialField.zeros(make_grid(8.0, 64))
    b = RadialField.zeros(make_grid(8.0, 65))
    with pytest.raises(InvalidParameterError):
        a + b


def test_sine_transform_round_trip():
    rng = np.random.default_rng(7)
    v = rng.standard_normal(1000) + 1j * rng.standard_normal(1000)
    back = idst(dst(v))
    assert np.linalg.norm(back - v) / np.linalg.norm(v) < 1e-12
    assert np.linalg.norm(dst(dst(v)) - v) / np.linalg.norm(v) < 1e-12


def test_integrate_zero():
    grid = make_grid(8.0, 64)
    assert integrate_radial(np.zeros(64), grid) == 0.0


def test_integrate_gaussian():
    grid = make_grid(32.0, 8192)
    assert integrate_radial(np.exp(-grid.r**2), grid) == pytest.approx(np.pi**1.5, abs=1e-8)


def test_integrate_unit_ball_volume():
    grid = make_grid(1.0, 16383)
    assert integrate_radial(np.ones(grid.n), grid) == pytest.approx(4 * np.pi / 3, abs=1e-3)


def test_integrand_length_is_checked():
    grid = make_grid(8.0, 64)
    with pytest.raises(InvalidParameterError):
        integrate_radial(np.zeros(10), grid)


def test_derivative_exact_for_quadratic():
    grid = make_grid(2.0, 64)
    du = radial_derivative(RadialField(grid, grid.r**2))
    assert np.max(np.abs(du.values - 2 * grid.r)) < 1e-10


def test_derivative_of_constant_vanishes():
    grid = make_grid(2.0, 64)
    du = radial_derivative(RadialField(grid, np.ones(grid.n)))
    assert np.max(np.abs(du.values)) < 1e-10


def test_derivative_of_sine_mode():
    grid = make_grid(10.0, 4096)
    k = grid.k[0]
    r = grid.r
    u = RadialField(grid, np.sin(k * r) / r)
    exact = (k * r * np.cos(k * r) - np.sin(k * r)) / r**2
    du = radial_derivative(u).values.real
    assert np.linalg.norm(du - exact) / np.linalg.norm(exact) < 1e-6


def test_laplacian_of_sine_mode():
    grid = make_grid(10.0, 4096)
    k = grid.k[2]
    u = RadialField(grid, np.sin(k * grid.r) / grid.r)
    lap = radial_laplacian(u).values.real
    exact = -(k**2) * u.values.real
    assert np.linalg.norm(lap - exact) / np.linalg.norm(exact) < 1e-6


def test_propagator_zero_step_is_identity():
    grid = make_grid(16.0, 512)
    u = RadialField(grid, np.exp(-grid.r**2) * (1 + 0.5j))
    out = apply_linear_propagator(u, 0.0)
    assert np.linalg.norm(out.values - u.values) / np.linalg.norm(u.values) < 1e-13


def test_propagator_acts_on_single_mode_by_phase():
    grid = make_grid(16.0, 512)
    k3 = grid.k[2]
    u = RadialField(grid, np.sin(k3 * grid.r) / grid.r)
    dt = 0.37
    out = apply_linear_propagator(u, dt)
    expected = u.values * np.exp(-1j * k3**2 * dt)
    assert np.max(np.abs(out.values - expected)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(dt=st.floats(min_value=-5.0, max_value=5.0), width=st.floats(min_value=0.5, max_value=3.0))
def test_propagator_is_unitary_and_reversible(dt, width):
    grid = make_grid(16.0, 256)
    u = RadialField(grid, np.exp(-((grid.r / width) ** 2)) * np.exp(0.3j * grid.r))
    forward = apply_linear_propagator(u, dt)
    assert discrete_mass(forward) == pytest.approx(discrete_mass(u), rel=1e-12)
    back = apply_linear_propagator(forward, -dt)
    assert np.max(np.abs(back.values - u.values)) < 1e-12


def test_boundary_mass_fraction():
    grid = make_grid(16.0, 512)
    assert boundary_mass_fraction(RadialField.zeros(grid)) == 0.0
    assert boundary_mass_fraction(RadialField(grid, np.exp(-grid.r**2))) < 1e-12
    edge = RadialField(grid, np.where(grid.r > 15.5, 1.0, 0.0))
    assert boundary_mass_fraction(edge) == pytest.approx(1.0)
