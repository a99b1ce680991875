import threading

import numpy as np
import pytest

from cqnls.analysis.virial import build_weight
from cqnls.errors import RunCancelledError
from cqnls.experiments.dichotomy import _refined_grid, dichotomy_experiment, run_dichotomy
from cqnls.experiments.families import DataFamily, Gaussian, Side, TruncatedGroundState
from cqnls.solver.detection import Classification
from cqnls.solver.dynamics import IntegratorConfig
from cqnls.solver.grid import make_grid
from cqnls.utils.csvio import read_artifact_csv
from cqnls.utils.metadata import read_json

SHORT = IntegratorConfig(dt0=1e-2, t_end=0.5, cadence=5, snapshot_every=1)


def test_refined_grid_halves_the_spacing():
    grid = make_grid(32.0, 1023)
    fine = _refined_grid(grid)
    assert fine.r_max == grid.r_max
    assert fine.dr == pytest.approx(grid.dr / 2)
    assert np.allclose(fine.r[1::2], grid.r)


def test_short_below_run_writes_artifacts(ref, small_grid, tmp_path):
    family = DataFamily(shape=Gaussian(sigma=2.0))
    run = run_dichotomy(Side.BELOW, family, SHORT, ref, small_grid, weight=build_weight(4.0), out_dir=tmp_path)
    assert abs(run.outcome.achieved_energy / ref.crit_energy - 1.0) < 1e-10
    assert run.outcome.achieved_grad_ratio < 1.0
    assert run.trapping_violations == 0
    assert run.outcome.classification is not Classification.BLOWUP

    for name, schema in (("run.csv", "run"), ("virial.csv", "virial"), ("modulation.csv", "modulation")):
        assert read_artifact_csv(tmp_path / name, schema)[0] == schema
    _, _, records = read_artifact_csv(tmp_path / "run.csv")
    assert len(records) == len(run.log.records)
    summary = read_json(tmp_path / "summary.json")
    assert summary["command"] == "dichotomy"
    assert summary["side"] == "below"
    assert summary["outcome"]["classification"] == run.outcome.classification.value
    assert summary["virial_R"] == 4.0
    assert summary["created_at"] == run.summary["created_at"]


def test_window_stats(ref, small_grid):
    run = run_dichotomy(Side.BELOW, DataFamily(shape=Gaussian(sigma=2.0)), SHORT, ref, small_grid)
    stats = run.window_stats(gate=ref.grad_norm_sq)
    assert stats["window_fraction"] == 1.0
    assert stats["delta_min"] == pytest.approx(min(r.delta for r in run.log.records))
    assert run.window_stats(gate=0.0)["window_fraction"] == 0.0
    assert run.summary is None


@pytest.mark.slow
def test_below_threshold_gaussian_scatters(ref):
    grid = make_grid(128.0, 8191)
    cfg = IntegratorConfig(dt0=2e-3, t_end=12.0, cadence=25)
    outcome = dichotomy_experiment(Side.BELOW, DataFamily(shape=Gaussian(sigma=2.0)), cfg, ref, grid)
    assert outcome.classification is Classification.SCATTERING_PROXY


@pytest.mark.slow
def test_sub_threshold_control_scatters(ref):
    grid = make_grid(128.0, 8191)
    cfg = IntegratorConfig(dt0=2e-3, t_end=12.0, cadence=25)
    outcome = dichotomy_experiment(
        Side.BELOW, DataFamily(shape=Gaussian(sigma=2.0)), cfg, ref, grid, energy_fraction=0.9
    )
    assert outcome.classification is Classification.SCATTERING_PROXY


@pytest.mark.slow
@pytest.mark.parametrize(
    "shape",
    [TruncatedGroundState(mu=1.0, rho=30.0), Gaussian(sigma=0.5), Gaussian(sigma=1.0)],
    ids=["truncated-W", "gaussian-0.5", "gaussian-1"],
)
def test_above_threshold_blows_up_and_stays_trapped(ref, shape):
    grid = make_grid(64.0, 8191)
    cfg = IntegratorConfig(dt0=1e-4, t_end=3.0, cadence=10, adapt=True)
    run = run_dichotomy(Side.ABOVE, DataFamily(shape=shape), cfg, ref, grid)
    assert run.outcome.achieved_grad_ratio > 1.0
    assert run.outcome.classification is Classification.BLOWUP
    assert run.outcome.refinement_confirmed
    assert run.trapping_violations == 0
    assert all(r.grad_norm_sq > ref.grad_norm_sq for r in run.log.records)


def test_cancelled_run_writes_nothing(ref, small_grid, tmp_path):
    cancel = threading.Event()
    cancel.set()
    family = DataFamily(shape=Gaussian(sigma=2.0))
    with pytest.raises(RunCancelledError):
        run_dichotomy(Side.BELOW, family, SHORT, ref, small_grid, out_dir=tmp_path / "run", cancel=cancel)
    assert not (tmp_path / "run" / "summary.json").exists()
