import numpy as np
import pytest

from cqnls.analysis.virial import build_weight
from cqnls.experiments.identities import (
    FINE_N,
    IDENTITY_COLUMNS,
    TRAJECTORY_TIMES,
    _virial_trajectory_checks,
    verify_identities,
)
from cqnls.solver.grid import make_grid

REFERENCE_CHECKS = ("pohozaev_reference", "crit_energy_third", "grad_closed_form", "c_gn_definition")


def test_battery_is_deterministic(ref, small_grid):
    first = verify_identities(small_grid, ref).to_frame()
    second = verify_identities(small_grid, ref).to_frame()
    assert list(first.columns) == IDENTITY_COLUMNS
    assert first.equals(second)


def test_reference_checks_do_not_depend_on_the_grid(ref):
    report = verify_identities(make_grid(32.0, 64), ref)
    by_name = {c.name: c for c in report.checks}
    for name in REFERENCE_CHECKS:
        assert by_name[name].passed
    assert by_name["W1_generator"].passed


def test_coarse_grid_reports_refinement(ref):
    report = verify_identities(make_grid(32.0, 64), ref)
    assert all(np.isfinite(c.residual) for c in report.checks)
    assert not report.passed
    assert "L2_kernel" in report.failures
    for c in report.checks:
        if c.min_n == FINE_N:
            assert c.requires_refinement == (not c.passed)
        else:
            assert not c.requires_refinement


def test_corrupted_weight_is_surfaced(ref, small_grid):
    report = verify_identities(small_grid, ref, weight_builder=lambda R: build_weight(R, s_out=2.0))
    by_name = {c.name: c for c in report.checks}
    for name in ("virial_zero", "virial_identity", "virial_identity_order"):
        assert not by_name[name].passed
        assert by_name[name].note.startswith("weight-construction-failure")
    assert {"virial_zero", "virial_identity"} <= set(report.failures)


@pytest.mark.slow
def test_default_grid_passes(ref):
    report = verify_identities(make_grid(128.0, 16383), ref)
    assert report.passed, report.failures
    assert not any(c.requires_refinement for c in report.checks)


def test_virial_identity_holds_along_the_flow_and_converges_at_second_order():
    assert len(TRAJECTORY_TIMES) == 20
    identity, order = _virial_trajectory_checks(make_grid(64.0, 8191), build_weight)
    assert identity.name == "virial_identity" and identity.passed, identity.residual
    assert order.name == "virial_identity_order" and order.passed, order.note
