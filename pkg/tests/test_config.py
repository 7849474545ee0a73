"""Tests for run configuration loading and replay."""

import json

import pytest

from pssclock.config import RunConfig, load_config, read_config_file, resolve_seed
from pssclock.errors import ClockError, ConfigError, InvalidParameterError


def test_defaults():
    cfg = RunConfig()
    assert cfg.regime == "Qa"
    assert cfg.log_t == 400.0
    assert cfg.n == 4000
    assert cfg.t_grid == (0.25, 0.5, 0.75, 1.0, 1.5, 2.0)


def test_mapping_round_trip_through_json():
    cfg = RunConfig(command="fclt", families=("saw(a=1,b=2)",), n=100, t_grid=(0.5, 1.0), C=0.5)
    restored = RunConfig.from_mapping(json.loads(json.dumps(cfg.to_mapping())))
    assert restored == cfg


def test_string_values_are_converted():
    cfg = RunConfig.from_mapping({
        "family": "bessel(nu=1); saw(a=1,b=2)",
        "logT": "50",
        "replicas": "4000.0",
        "t_grid": "0.5, 1, 2",
        "dump-paths": "yes",
        "C": "none",
    })
    assert cfg.families == ("bessel(nu=1)", "saw(a=1,b=2)")
    assert cfg.log_t == 50.0
    assert cfg.n == 4000
    assert cfg.t_grid == (0.5, 1.0, 2.0)
    assert cfg.dump_paths is True
    assert cfg.C is None


@pytest.mark.parametrize("mapping", [
    {"colour": "red"},
    {"n": "12.5"},
    {"n": True},
    {"dump_paths": "maybe"},
    {"regime": "Q1"},
    {"format": "xml"},
    {"seed": "-3"},
])
def test_bad_values(mapping):
    with pytest.raises(ConfigError):
        RunConfig.from_mapping(mapping)


def test_seed_auto():
    seed = resolve_seed("auto")
    assert 0 <= seed < 2 ** 63
    assert resolve_seed("42") == 42


def test_flat_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# small run\nfamily = saw(a=1,b=2)\nn = 10  # replicas\nlogT = 5\n", encoding="utf-8")
    assert read_config_file(path) == {"family": "saw(a=1,b=2)", "n": "10", "logT": "5"}


def test_flat_file_syntax_error(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("n 10\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        read_config_file(path)


def test_missing_file(tmp_path):
    with pytest.raises(ClockError):
        read_config_file(tmp_path / "nope.cfg")


def test_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("n = 10\nlogT = 5\n", encoding="utf-8")
    cfg = load_config("clt", str(path), {"n": 20})
    assert cfg.command == "clt"
    assert cfg.n == 20
    assert cfg.log_t == 5.0


def test_json_summary_replay(tmp_path):
    original = RunConfig(command="clt", families=("saw(a=1,b=2)",), n=150, seed=9)
    path = tmp_path / "clt_summary.json"
    path.write_text(json.dumps({"command": "clt", "pass": True, "config": original.to_mapping()}), encoding="utf-8")
    # the command comes from the invocation, not the file
    assert load_config("clt", str(path), {}) == original
    assert load_config("fclt", str(path), {}).command == "fclt"


@pytest.mark.parametrize("key", ["times", "t_grid", "lln_log_t"])
def test_empty_lists_are_rejected(key, tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(f"{key} =\n", encoding="utf-8")
    with pytest.raises(InvalidParameterError):
        load_config("simulate-clock", str(path), {})


def test_bias_allowance_is_off_by_default():
    assert RunConfig().bias_allowance is False
    assert RunConfig.from_mapping({"bias_allowance": "yes"}).bias_allowance is True
