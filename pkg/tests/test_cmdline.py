import json
from os.path import dirname, join

import pandas as pd
import pytest

from ntstsm.cmdline import execute, get_commands
from ntstsm.conf import get_project_settings
from ntstsm.metrics import RunLog

short_hold = join(dirname(__file__), "files", "short_hold.toml")


def _settings():
    return get_project_settings("ntstsm.settings.base")


def test_commands_discovered():
    assert sorted(get_commands(_settings())) == [
        "compare",
        "gain-region",
        "metrics",
        "simulate",
        "trajectory",
    ]


def test_no_command(capsys):
    assert execute([], _settings()) == 2
    assert "<command>" in capsys.readouterr().out


def test_gain_region_defaults(capsys):
    assert execute(["gain-region"], _settings()) == 0
    out = capsys.readouterr().out
    assert "Gamma=1: inside the ellipse, margin=0.186233" in out
    assert "reaching-time bound" in out


def test_gain_region_outside(tmp_path, capsys):
    path = tmp_path / "report.json"
    argv = ["gain-region", "--Omega1", "7.947", "--Omega2", "2.0"]
    argv += ["--Gamma", "0.25", "--out", str(path)]
    assert execute(argv, _settings()) == 0
    assert "Gamma=0.25: OUTSIDE the ellipse" in capsys.readouterr().out
    report = json.loads(path.read_text())
    assert report["inside_ellipse"] is False
    assert report["t_reach_bound"] is None


def test_gain_region_several_gammas(tmp_path):
    path = tmp_path / "reports.json"
    argv = ["gain-region", "--Omega1", "7.947", "--Omega2", "1.2"]
    argv += ["--Gamma", "0.25", "--Gamma", "0.5", "--out", str(path)]
    assert execute(argv, _settings()) == 0
    reports = json.loads(path.read_text())
    assert sorted(reports) == ["0.25", "0.5"]
    assert all(r["inside_ellipse"] for r in reports.values())


def test_gain_region_sweep(tmp_path):
    path = tmp_path / "region.csv"
    argv = ["gain-region", "--gamma", "6", "--theta", "0.9", "--Gamma", "0.5"]
    argv += ["--sweep", str(path), "--grid", "11"]
    assert execute(argv, _settings()) == 0
    region = pd.read_csv(path)
    assert len(region) == 100
    assert region["inside"].any()
    assert not region["inside"].all()


def test_simulate_and_metrics(tmp_path, capsys):
    log_path = tmp_path / "run.csv"
    argv = ["simulate", "--config", short_hold, "--out", str(log_path)]
    assert execute(argv + ["-L", "WARNING"], _settings()) == 0
    simulated = json.loads(capsys.readouterr().out)
    assert len(RunLog.read_csv(log_path)) == 50

    assert execute(["metrics", "--log", str(log_path)], _settings()) == 0
    recomputed = json.loads(capsys.readouterr().out)
    assert recomputed == simulated


def test_simulate_missing_config():
    assert execute(["simulate", "--config", "no_such_experiment"], _settings()) == 1


def test_simulate_seed_override(capsys):
    argv = ["simulate", "--config", short_hold, "--seed", "9", "--controller", "pd_low"]
    assert execute(argv, _settings()) == 0
    assert "rmse_p" in capsys.readouterr().out


def test_compare(tmp_path, capsys):
    path = tmp_path / "table.json"
    argv = ["compare", "--configs", short_hold, "--controllers", "nt_stsm,pid"]
    argv += ["--workers", "1", "--out", str(path)]
    assert execute(argv, _settings()) == 0
    out = capsys.readouterr().out
    assert "pid: ConfigError" in out
    table = json.loads(path.read_text())
    assert sorted(table) == ["nt_stsm", "pid"]
    assert table["nt_stsm"]["tau_avg_margin"] == 0.0


def test_trajectory_export(tmp_path):
    path = tmp_path / "trajectory.csv"
    argv = ["trajectory", "--config", "desk_task", "--out", str(path), "--dt", "0.1"]
    assert execute(argv, _settings()) == 0
    frame = pd.read_csv(path)
    assert len(frame) == 101
    assert frame["t"].iloc[-1] == pytest.approx(10.0)


def test_bad_setting_override():
    with pytest.raises(SystemExit):
        execute(["gain-region", "-s", "NOVALUE"], _settings())


def test_setting_override_reaches_command(capsys):
    settings = _settings()
    assert execute(["gain-region", "-s", "LOG_LEVEL=ERROR"], settings) == 0
    assert settings["LOG_LEVEL"] == "ERROR"
