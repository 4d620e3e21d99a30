import csv
import json

import pytest

from beamlab.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main, parse_config_text, validate_config
from beamlab.errors import ConfigError


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def test_unknown_top_level_key(tmp_path, capsys):
    assert main(["validate", write(tmp_path, {"scenario": "kappa-sweep", "sigma_max_typo": 1})]) == EXIT_CONFIG
    assert "sigma_max_typo" in capsys.readouterr().err


def test_unknown_parameter():
    with pytest.raises(ConfigError, match="nope"):
        validate_config({"scenario": "kappa-sweep", "params": {"nope": 1}})


def test_out_of_range_names_the_interval(tmp_path, capsys):
    assert main(["validate", write(tmp_path, {"scenario": "recover-q2sq", "params": {"sigma": 1.5}})]) == EXIT_CONFIG
    assert "sigma=1.5 out of range: sigma ∈ (0, 1)" in capsys.readouterr().err


def test_json_error_reports_position():
    with pytest.raises(ConfigError, match="line 2, column"):
        parse_config_text('{"scenario":\n "kappa-sweep",,}')


def test_unknown_scenario():
    with pytest.raises(ConfigError):
        validate_config({"scenario": "warp-drive"})


def test_defaults_are_announced(tmp_path, capsys):
    assert main(["validate", write(tmp_path, {"scenario": "kappa-sweep", "params": {"n_s0": 3}})]) == EXIT_OK
    out = capsys.readouterr().out
    assert "notice:" in out and "sigma_min" in out


def test_run_writes_bundle_and_is_deterministic(tmp_path, capsys):
    cfg = write(tmp_path, {"scenario": "kappa-sweep", "params": {"n_s0": 3, "n_sigma": 3}})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", cfg, "--out", str(a)]) == EXIT_OK
    assert main(["run", cfg, "--out", str(b), "--jobs", "2"]) == EXIT_OK
    assert "PASS dependence_residual" in capsys.readouterr().out
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    csvs = sorted(p.name for p in a.glob("*.csv"))
    assert csvs
    assert all((a / n).read_bytes() == (b / n).read_bytes() for n in csvs)
    rows = list(csv.DictReader(open(a / csvs[0])))
    assert len(rows) >= 9
    meta = json.loads((a / "meta.json").read_text())
    assert {"version", "python", "numpy", "wall_time_s", "params"} <= meta.keys()


def test_recovery_report_fields(tmp_path):
    cfg = write(tmp_path, {"scenario": "recover-q2sq", "params": {"hs": [0.04, 0.02]}})
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) in (EXIT_OK, EXIT_FAIL)
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert "error_h_slope" in rep["results"]
    assert all("relative_error" in r for r in rep["results"]["rows"])


def test_numeric_failure_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, {"scenario": "kappa-sweep", "params": {"sigma_min": 1e-6, "sigma_max": 1e-5,
                                                                   "n_s0": 1, "n_sigma": 2}})
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == EXIT_FAIL
    assert "numeric failure" in capsys.readouterr().err


def test_bad_jobs(tmp_path):
    cfg = write(tmp_path, {"scenario": "kappa-sweep"})
    assert main(["run", cfg, "--jobs", "0"]) == EXIT_CONFIG
