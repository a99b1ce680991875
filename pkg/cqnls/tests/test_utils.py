import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from cqnls.errors import InvalidConfigError
from cqnls.experiments.families import Gaussian, Ring, Side
from cqnls.runconfig import RunConfig, apply_overrides, load_run_config, parse_run_config
from cqnls.utils import config as settings
from cqnls.utils.csvio import SchemaMismatchError, read_artifact_csv, write_artifact_csv
from cqnls.utils.metadata import TIMESTAMP_KEY, build_summary, read_json, write_json_atomic
from cqnls.utils.paths import list_run_dirs, run_dir

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


# ---------------------------------------------------------------------------
# Artifacts
# ---------------------------------------------------------------------------

def test_csv_round_trip_keeps_every_double(tmp_path):
    frame = pd.DataFrame({"t": [0.0, 0.1, 1.0 / 3.0], "x": [np.pi, -1e-300, 2.0**60 + 1.0]})
    path = write_artifact_csv(tmp_path / "a.csv", frame, "demo", ["t", "x"])
    assert path.read_text().splitlines()[0] == "# schema=demo version=1"
    name, version, back = read_artifact_csv(path, "demo")
    assert (name, version) == ("demo", 1)
    assert back["t"].tolist() == frame["t"].tolist()
    assert back["x"].tolist() == frame["x"].tolist()


def test_csv_columns_follow_the_schema(tmp_path):
    frame = pd.DataFrame({"b": [1.0], "extra": [2.0]})
    _, _, back = read_artifact_csv(write_artifact_csv(tmp_path / "a.csv", frame, "demo", ["a", "b"]))
    assert list(back.columns) == ["a", "b"]
    assert np.isnan(back["a"][0])


def test_csv_schema_mismatch(tmp_path):
    path = write_artifact_csv(tmp_path / "a.csv", pd.DataFrame({"a": [1]}), "run", ["a"])
    with pytest.raises(SchemaMismatchError):
        read_artifact_csv(path, "sweep")
    bare = tmp_path / "bare.csv"
    bare.write_text("a\n1\n")
    with pytest.raises(SchemaMismatchError):
        read_artifact_csv(bare)


def test_json_is_written_without_nan(tmp_path):
    path = write_json_atomic(tmp_path / "s.json", {"a": float("nan"), "b": [1.0, float("inf")], "c": {"d": 2}})
    data = json.loads(path.read_text())
    assert data == {"a": None, "b": [1.0, None], "c": {"d": 2}}
    assert not list(tmp_path.glob("tmp*"))


def test_summary_differs_only_in_the_timestamp():
    first = build_summary("verify", passed=True)
    second = build_summary("verify", passed=True)
    assert first["command"] == "verify" and first["version"]
    first.pop(TIMESTAMP_KEY)
    second.pop(TIMESTAMP_KEY)
    assert first == second


def test_run_dirs(tmp_path):
    assert run_dir(tmp_path, 7).name == "run_007"
    run_dir(tmp_path, 2)
    (tmp_path / "other").mkdir()
    assert [p.name for p in list_run_dirs(tmp_path)] == ["run_002", "run_007"]
    assert list_run_dirs(tmp_path / "missing") == []


# ---------------------------------------------------------------------------
# Settings
# ---------------------------------------------------------------------------

@pytest.fixture
def fresh_settings():
    settings.load_settings.cache_clear()
    yield settings
    settings.load_settings.cache_clear()


def test_settings_override_file(tmp_path, monkeypatch, fresh_settings):
    path = tmp_path / "settings.json"
    path.write_text(json.dumps({"max_workers": 2, "bogus": 1}))
    monkeypatch.setenv("CQNLS_SETTINGS", str(path))
    assert fresh_settings.get_setting("max_workers") == 2
    assert fresh_settings.get_setting("blowup_factor") == 3.0
    assert "bogus" not in fresh_settings.load_settings()


def test_settings_fall_back_to_defaults(tmp_path, monkeypatch, fresh_settings):
    path = tmp_path / "settings.json"
    path.write_text("[1, 2]")
    monkeypatch.setenv("CQNLS_SETTINGS", str(path))
    assert fresh_settings.get_setting("modulation_gate") == 0.2
    monkeypatch.setenv("CQNLS_SETTINGS", str(tmp_path / "missing.json"))
    fresh_settings.load_settings.cache_clear()
    assert fresh_settings.get_setting("max_workers") == 4


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

def test_defaults():
    cfg = load_run_config(None)
    assert cfg.grid.n == 16383 and cfg.grid.r_max == 128.0
    assert cfg.experiment.family == Gaussian(sigma=2.0)
    assert cfg.experiment.side is Side.BELOW
    assert cfg.sweep == []


def test_shipped_configs_load():
    default = load_run_config(CONFIGS / "default.toml")
    assert default.experiment.virial_R == 8.0
    sweep = load_run_config(CONFIGS / "sweep_threshold.toml")
    assert len(sweep.sweep) == 4
    assert sweep.sweep[3].resolve(sweep.integrator).t_end == 10.0
    assert sweep.sweep[0].resolve(sweep.integrator).t_end == sweep.integrator.t_end


def test_unknown_key_is_named():
    with pytest.raises(InvalidConfigError) as info:
        parse_run_config({"grid": {"bogus": 1}})
    assert info.value.key == "grid.bogus"


def test_overrides_are_typed():
    cfg = parse_run_config({}, ["grid.n=255", "grid.r_max=16", "experiment.side=above", "output.emit_plots=true"])
    assert cfg.grid.n == 255 and cfg.grid.r_max == 16.0
    assert cfg.experiment.side is Side.ABOVE
    assert cfg.output.emit_plots is True
    ring = parse_run_config({}, ['experiment.family={kind = "ring", r0 = 3.0}'])
    assert ring.experiment.family == Ring(r0=3.0)


def test_overrides_do_not_touch_the_input():
    doc = {"grid": {"n": 31}}
    parse_run_config(doc, ["grid.n=63"])
    assert doc == {"grid": {"n": 31}}


@pytest.mark.parametrize("item", ["grid.n", "=3", "grid.n.x=1"])
def test_malformed_overrides(item):
    with pytest.raises(InvalidConfigError):
        parse_run_config({"grid": {"n": 31}}, [item])


def test_override_cannot_descend_into_a_value():
    with pytest.raises(InvalidConfigError):
        apply_overrides({"grid": 3}, ["grid.n=1"])


def test_invalid_values_are_named():
    with pytest.raises(InvalidConfigError) as info:
        parse_run_config({"integrator": {"dt0": -1.0}})
    assert info.value.key.startswith("integrator")
    with pytest.raises(InvalidConfigError) as info:
        parse_run_config({"experiment": {"family": {"kind": "square"}}})
    assert info.value.key.startswith("experiment.family")


def test_sweep_integrator_overrides_are_validated():
    entry = {"family": {"kind": "gaussian"}, "integrator": {"t_end": 1e-5}}
    with pytest.raises(InvalidConfigError) as info:
        parse_run_config({"sweep": [entry]})
    assert "sweep[0].integrator" in str(info.value)


def test_toml_errors_are_config_errors(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[grid\nn = 3\n")
    with pytest.raises(InvalidConfigError):
        load_run_config(bad)
    with pytest.raises(InvalidConfigError):
        load_run_config(tmp_path / "missing.toml")


def test_run_config_is_frozen():
    cfg = RunConfig()
    with pytest.raises(ValidationError):
        cfg.grid = None
