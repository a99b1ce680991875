import numpy as np
import pytest

from cqnls.analysis.functionals import grad_norm_sq
from cqnls.errors import InvalidParameterError
from cqnls.solver.grid import make_grid
from cqnls.solver.ground_state import (
    _grad_density,
    _radial_quad,
    eval_dW,
    eval_dW1,
    eval_W,
    eval_W1,
    gradient_median_radius,
    scaled_generator,
    scaled_state,
    tail_integrals,
    truncated_mass,
)

GRAD_CLOSED_FORM = 3 * np.sqrt(3) * np.pi**2 / 4


def test_W_values():
    assert eval_W(0.0) == 1.0
    assert eval_W(np.sqrt(3.0)) == pytest.approx(1 / np.sqrt(2), rel=1e-15)


def test_W_far_field():
    r = 1e6
    assert abs(r * eval_W(r) - np.sqrt(3)) < 2e-12 * np.sqrt(3)


def test_W1_values():
    assert eval_W1(0.0) == 0.5
    assert abs(eval_W1(np.sqrt(3.0))) < 1e-15


def test_W1_is_the_scaling_derivative():
    h = 1e-5
    fd = (np.sqrt(1 + h) * eval_W(1 + h) - np.sqrt(1 - h) * eval_W(1 - h)) / (2 * h)
    assert eval_W1(1.0) == pytest.approx(fd, abs=1e-8)


@pytest.mark.parametrize("r", [0.3, 1.0, 2.5, 10.0])
def test_closed_form_derivatives(r):
    h = 1e-6
    assert eval_dW(r) == pytest.approx((eval_W(r + h) - eval_W(r - h)) / (2 * h), abs=1e-8)
    assert eval_dW1(r) == pytest.approx((eval_W1(r + h) - eval_W1(r - h)) / (2 * h), abs=1e-8)


def test_reference_constants(ref):
    assert ref.grad_norm_sq == pytest.approx(GRAD_CLOSED_FORM, rel=1e-8)
    assert ref.crit_energy == pytest.approx(np.sqrt(3) * np.pi**2 / 4, rel=1e-8)
    assert ref.l6_norm_6 == pytest.approx(ref.grad_norm_sq, rel=1e-8)
    assert abs(ref.grad_norm_sq - ref.l6_norm_6) <= 2 * ref.quadrature_error_bound + 1e-12
    assert ref.c_gn == pytest.approx(ref.l6_norm_6 ** (1 / 6) / np.sqrt(ref.grad_norm_sq), rel=1e-15)


def test_scaled_state_phase():
    grid = make_grid(16.0, 256)
    w = scaled_state(0.0, 1.0, grid)
    flipped = scaled_state(np.pi, 1.0, grid)
    assert np.allclose(flipped.values, -w.values, atol=1e-15)


def test_scaled_state_rejects_nonpositive_scale():
    grid = make_grid(16.0, 256)
    with pytest.raises(InvalidParameterError):
        scaled_state(0.0, 0.0, grid)
    with pytest.raises(InvalidParameterError):
        scaled_generator(-1.0, grid)


def test_grid_gradient_of_W_with_tail(ref):
    grid = make_grid(200.0, 8192)
    grad = grad_norm_sq(scaled_state(0.0, 1.0, grid)) + tail_integrals(grid.r_max)[0]
    assert grad == pytest.approx(ref.grad_norm_sq, rel=1e-2)


def test_gradient_is_scale_invariant():
    grid = make_grid(100.0, 16383)
    values = [
        grad_norm_sq(scaled_state(0.0, mu, grid)) + tail_integrals(mu * grid.r_max)[0] for mu in (1.0, 2.0, 4.0)
    ]
    assert values[1] == pytest.approx(values[0], rel=1e-3)
    assert values[2] == pytest.approx(values[0], rel=1e-3)


def test_tail_leading_term():
    grad_tail, l6_tail = tail_integrals(1000.0)
    assert grad_tail == pytest.approx(12 * np.pi / 1000.0, rel=1e-4)
    assert 0 < l6_tail < grad_tail


def test_tail_rejects_nonpositive_radius():
    with pytest.raises(InvalidParameterError):
        tail_integrals(0.0)


def test_gradient_median_radius_halves_the_gradient(ref):
    r_star = gradient_median_radius()
    inner, _ = _radial_quad(_grad_density, 0.0, r_star)
    assert inner == pytest.approx(0.5 * ref.grad_norm_sq, rel=1e-9)


def test_truncated_mass_grows_linearly():
    # W^2 r^2 -> 3, so each unit of radius adds 6*pi of mass
    growth = truncated_mass(2000.0) - truncated_mass(1000.0)
    assert growth == pytest.approx(6 * np.pi * 1000.0, rel=1e-3)
