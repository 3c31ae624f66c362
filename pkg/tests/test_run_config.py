import json
import os

import pytest

import config as cfg
from src.exceptions import ConfigError, DataError
from src.run_config import RunConfig, deep_merge, default_document

DEMO_CONFIG = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs", "demo.json")


def write_config(tmp_path, document, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(document), encoding="utf-8")
    return str(path)


def test_defaults_validate():
    config = RunConfig.defaults().validate()
    assert config.seed == cfg.DEFAULT_SEED
    assert config["dp"]["gamma"] == cfg.CRRA_GAMMA
    assert config["backtest"]["schemes_weeks"] == [list(s) for s in cfg.SCHEMES_WEEKS]


def test_demo_config_validates():
    config = RunConfig.load(DEMO_CONFIG).validate()
    assert config["dp"]["horizon"] == 60
    assert config["frontier"]["points"] == 12
    assert config["dp"]["gamma"] == cfg.CRRA_GAMMA


def test_deep_merge_keeps_unset_defaults():
    merged = deep_merge(default_document(), {"dp": {"horizon": 10}})
    assert merged["dp"]["horizon"] == 10
    assert merged["dp"]["grid_nodes"] == cfg.GRID_NODES


@pytest.mark.parametrize("document", [
    {"schema_version": 1, "colour": "red"},
    {"schema_version": 1, "dp": {"horizn": 10}},
])
def test_unknown_keys_rejected(document):
    with pytest.raises(ConfigError, match="unknown"):
        RunConfig.from_document(document)


def test_schema_version_required():
    with pytest.raises(ConfigError, match="schema_version"):
        RunConfig.from_document({"seed": 1})


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="Config file not found"):
        RunConfig.load(str(tmp_path / "absent.json"))


def test_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError, match="invalid JSON"):
        RunConfig.load(str(path))


def test_relative_inputs_resolve_against_config_dir(tmp_path):
    (tmp_path / "data").mkdir()
    (tmp_path / "data" / "prices.csv").write_text("date,A\n2020-01-01,1\n", encoding="utf-8")
    path = write_config(tmp_path, {"schema_version": 1, "inputs": {"prices": "data/prices.csv"}})
    config = RunConfig.load(path)
    assert config["inputs"]["prices"] == str(tmp_path / "data" / "prices.csv")
    assert config.input_paths() == {"prices": str(tmp_path / "data" / "prices.csv")}


def test_missing_input_file_names_path(tmp_path):
    path = write_config(tmp_path, {"schema_version": 1, "inputs": {"returns": "nowhere.csv"}})
    with pytest.raises(DataError, match="nowhere.csv"):
        RunConfig.load(path).validate()


def test_prices_and_returns_exclusive(tmp_path):
    for name in ("p.csv", "r.csv"):
        (tmp_path / name).write_text("date,A\n2020-01-01,1\n", encoding="utf-8")
    path = write_config(tmp_path, {"schema_version": 1, "inputs": {"prices": "p.csv", "returns": "r.csv"}})
    with pytest.raises(ConfigError, match="either"):
        RunConfig.load(path).validate()


def test_env_overrides_and_explicit_arguments_win():
    env = {"MOMENTUM_OUT_DIR": "env_out", "MOMENTUM_SEED": "11", "MOMENTUM_WORKERS": "3"}
    config = RunConfig.defaults().apply_overrides(env=env)
    assert (config.output_dir, config.seed, config.workers) == ("env_out", 11, 3)
    config = RunConfig.defaults().apply_overrides(env=env, out="cli_out", seed=5, workers=2)
    assert (config.output_dir, config.seed, config.workers) == ("cli_out", 5, 2)


def test_env_integer_must_parse():
    with pytest.raises(ConfigError, match="MOMENTUM_SEED"):
        RunConfig.defaults().apply_overrides(env={"MOMENTUM_SEED": "many"})


@pytest.mark.parametrize("override", [
    {"seed": -1},
    {"workers": 0},
    {"backtest": {"ratios": ["Sortino"]}},
    {"backtest": {"schemes_weeks": [[2, 2, 2]]}},
    {"backtest": {"quantile": 0.7}},
    {"regimes": {"source": "oracle"}},
    {"regimes": {"figarch_truncation": 20}},
    {"dp": {"gamma": 0.0}},
    {"dp": {"grid_nodes": 8}},
    {"dp": {"legs": ["benchmark"]}},
    {"simulate": {"initial_regime": 2}},
    {"frontier": {"scenarios": 50}},
    {"frontier": {"scenarios": 100, "cvar_levels": [0.999]}},
    {"synthetic": {"factor_share": 2.0}},
    {"pca": {"universe": "sectors"}},
])
def test_invalid_blocks_rejected(override):
    document = {"schema_version": 1, **override}
    with pytest.raises(ConfigError):
        RunConfig.from_document(document).validate()


def test_inputs_hash_tracks_config_and_files(tmp_path):
    csv = tmp_path / "r.csv"
    csv.write_text("date,A\n2020-01-01,0.01\n", encoding="utf-8")
    path = write_config(tmp_path, {"schema_version": 1, "inputs": {"returns": "r.csv"}})
    first = RunConfig.load(path).inputs_hash()
    assert RunConfig.load(path).inputs_hash() == first
    csv.write_text("date,A\n2020-01-01,0.02\n", encoding="utf-8")
    assert RunConfig.load(path).inputs_hash() != first
    config = RunConfig.load(path)
    config.seed += 1
    assert config.inputs_hash() != RunConfig.load(path).inputs_hash()


def test_to_document_round_trip():
    config = RunConfig.defaults()
    again = RunConfig.from_document(config.to_document())
    assert again.to_document() == config.to_document()
