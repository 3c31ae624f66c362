import json

import pytest

from main import build_parser, main
from src.exceptions import ConfigError

from tests.conftest import write_run_config


def stderr_payload(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])


def test_missing_input_file_exits_with_data_code(tmp_path, capsys):
    config = write_run_config(tmp_path, tmp_path / "out", inputs={"returns": "absent.csv"})
    code = main(["ingest", "--config", config, "--quiet"])
    assert code == 3
    payload = stderr_payload(capsys)
    assert payload["error"] == "DataError"
    assert payload["exit_code"] == 3
    assert "absent.csv" in payload["message"]


def test_unknown_config_key_exits_with_config_code(tmp_path, capsys):
    config = write_run_config(tmp_path, tmp_path / "out", dp={"horizn": 3})
    assert main(["dp", "--config", config, "--quiet"]) == 2
    assert stderr_payload(capsys)["error"] == "ConfigError"


def test_report_without_artifacts(tmp_path, capsys):
    assert main(["report", "--out", str(tmp_path / "empty"), "--quiet"]) == 3
    assert "missing artifacts" in stderr_payload(capsys)["message"]


def test_synthetic_verb_writes_inputs(tmp_path):
    config = write_run_config(tmp_path, tmp_path / "ignored")
    out = tmp_path / "syn"
    assert main(["synthetic", "--config", config, "--out", str(out), "--seed", "9", "--quiet"]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["prices.csv", "regimes.csv", "returns.csv"]


def test_stage_failure_carries_stage_name(tmp_path, capsys):
    config = write_run_config(tmp_path, tmp_path / "out")
    assert main(["simulate", "--config", config, "--quiet"]) == 3
    payload = stderr_payload(capsys)
    assert payload["stage"] == "simulate"
    assert payload["error"] == "DataError"


@pytest.mark.parametrize("argv, fragment", [
    (["optimize"], "invalid choice"),
    (["synthetic", "--seed", "abc"], "--seed"),
    ([], "required"),
])
def test_usage_errors_follow_json_contract(argv, fragment, capsys):
    assert main(argv) == 2
    payload = stderr_payload(capsys)
    assert payload["error"] == "ConfigError"
    assert payload["exit_code"] == 2
    assert fragment in payload["message"]


def test_parser_raises_config_error():
    with pytest.raises(ConfigError):
        build_parser().parse_args(["optimize"])


@pytest.mark.slow
def test_pipeline_verb(tmp_path):
    out = tmp_path / "run"
    config = write_run_config(tmp_path, out)
    assert main(["pipeline", "--config", config, "--quiet"]) == 0
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert all(entry["status"] == "completed" for entry in manifest["stages"].values())
    assert (out / "table_frontiers.csv").exists()
