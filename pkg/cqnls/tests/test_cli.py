import pytest
from click.testing import CliRunner

from cqnls import __version__
from cqnls.cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, EXIT_PARTIAL, cli
from cqnls.errors import InfeasibleThresholdError
from cqnls.experiments import sweep as sweep_module
from cqnls.experiments.sweep import _base_row
from cqnls.utils.csvio import read_artifact_csv
from cqnls.utils.metadata import read_json

SMALL = ["--override", "grid.r_max=32", "--override", "grid.n=511",
         "--override", "integrator.dt0=0.01", "--override", "integrator.t_end=0.1",
         "--override", "integrator.cadence=5"]

SWEEP_TOML = """
[grid]
r_max = 32.0
n = 511

[integrator]
dt0 = 0.01
t_end = 0.1
cadence = 5

[[sweep]]
family = { kind = "gaussian", sigma = 2.0 }

[[sweep]]
family = { kind = "gaussian", sigma = 2.5 }

[[sweep]]
family = { kind = "gaussian", sigma = 3.0 }

[[sweep]]
energy_fraction = 0.9
family = { kind = "gaussian", sigma = 2.0 }
"""


@pytest.fixture
def runner():
    return CliRunner(mix_stderr=False)


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_verify_on_a_coarse_grid_fails(runner, tmp_path):
    args = ["verify", "--out", str(tmp_path), "--override", "grid.n=64", "--override", "grid.r_max=32"]
    result = runner.invoke(cli, args)
    assert result.exit_code == EXIT_FAILURE
    assert "FAILED" in result.stderr and "L2_kernel" in result.stderr
    assert "pohozaev_reference" in result.output
    summary = read_json(tmp_path / "summary.json")
    assert summary["passed"] is False
    assert "L2_kernel" in summary["requires_refinement"]
    assert read_artifact_csv(tmp_path / "identities.csv", "identities")[2]["name"].tolist()


def test_unknown_config_key_exits_with_config_code(runner, tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[grid]\nbogus = 1\n")
    result = runner.invoke(cli, ["simulate", str(path)])
    assert result.exit_code == EXIT_CONFIG
    assert "grid.bogus" in result.stderr


def test_unparsable_config_exits_with_config_code(runner, tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[grid\n")
    result = runner.invoke(cli, ["tune", str(path)])
    assert result.exit_code == EXIT_CONFIG
    assert "TOML" in result.stderr


def test_simulate_zero_field(runner, tmp_path):
    args = ["simulate", "--out", str(tmp_path), "--override", "experiment.amplitude=0.0", *SMALL]
    result = runner.invoke(cli, args)
    assert result.exit_code == EXIT_OK, result.stderr
    assert "termination=ReachedT" in result.output
    _, _, frame = read_artifact_csv(tmp_path / "run.csv", "run")
    assert (frame[["mass", "energy", "grad_norm_sq"]] == 0.0).all().all()
    summary = read_json(tmp_path / "summary.json")
    assert summary["command"] == "simulate"
    assert summary["outcome"]["classification"] == "Undetermined"


def test_simulate_tunes_when_no_amplitude_is_given(runner, tmp_path):
    result = runner.invoke(cli, ["simulate", "--out", str(tmp_path), *SMALL])
    assert result.exit_code == EXIT_OK, result.stderr
    assert read_json(tmp_path / "summary.json")["command"] == "dichotomy"


def test_tune_writes_the_root(runner, tmp_path, ref):
    result = runner.invoke(cli, ["tune", "--out", str(tmp_path), *SMALL])
    assert result.exit_code == EXIT_OK, result.stderr
    summary = read_json(tmp_path / "summary.json")
    assert abs(summary["achieved_energy"] - ref.crit_energy) < 1e-10 * ref.crit_energy
    assert summary["grad_ratio"] < 1.0
    assert summary["side"] == "below"


def test_tune_infeasible_exits_with_failure(runner, tmp_path):
    result = runner.invoke(cli, ["tune", "--out", str(tmp_path), "--override", "experiment.energy_fraction=10.0", *SMALL])
    assert result.exit_code == EXIT_FAILURE
    assert "no threshold root" in result.stderr


def test_sweep_writes_one_row_per_entry(runner, tmp_path):
    path = tmp_path / "sweep.toml"
    path.write_text(SWEEP_TOML)
    out = tmp_path / "out"
    result = runner.invoke(cli, ["sweep", str(path), "--out", str(out)])
    assert result.exit_code == EXIT_OK, result.stderr
    _, _, frame = read_artifact_csv(out / "sweep.csv", "sweep")
    assert frame["index"].tolist() == [0, 1, 2, 3]
    assert (frame["status"] == "ok").all()
    for i in range(4):
        assert (out / f"run_{i:03d}" / "summary.json").exists()


def test_sweep_partial_failure(runner, tmp_path, monkeypatch):
    def fake(index, entry, **kwargs):
        if index == 1:
            raise InfeasibleThresholdError("below", [], [])
        return {**_base_row(index, entry), "status": "ok"}

    monkeypatch.setattr(sweep_module, "_run_entry", fake)
    path = tmp_path / "sweep.toml"
    path.write_text(SWEEP_TOML)
    result = runner.invoke(cli, ["sweep", str(path), "--out", str(tmp_path / "out")])
    assert result.exit_code == EXIT_PARTIAL
    assert "1 of 4 sweep runs failed" in result.stderr
    assert "run 001: InfeasibleThresholdError" in result.stderr


def test_sweep_without_entries(runner, tmp_path):
    result = runner.invoke(cli, ["sweep", "--out", str(tmp_path)])
    assert result.exit_code == EXIT_CONFIG
    assert "sweep" in result.stderr
