import json
import logging
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motoo_lab import _backend, cli
from motoo_lab.config import ConfigError, ExperimentConfig, RunConfig, parse_config
from motoo_lab.model import reference_model

REF_INI = """
[model]
drift = rational_drift
drift.kappa = 1
diffusion = rational_bump
diffusion.sigma = 1
diffusion.amp = 1
rho = 1
mu = 0
sigma = 1
k1_sq = 1
k2_sq = 4
x0 = 1

[run]
T = 200
dt = 0.01
paths = 3
seed = 12345
checkpoints = 10, 100, 200
thresholds = 1, 10

[output]
every = 50
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# --------------------------------------------------------------------------
# config


def test_parse_reference_config():
    cfg = parse_config(REF_INI)
    assert cfg.model == reference_model()
    assert cfg.run.checkpoints == (10.0, 100.0, 200.0)
    assert cfg.output.every == 50


def test_round_trip_fixed_point():
    cfg = parse_config(REF_INI)
    again = parse_config(cfg.to_ini())
    assert again == cfg
    assert again.to_ini() == cfg.to_ini()


@settings(max_examples=50, deadline=None)
@given(
    st.floats(1e-4, 1.0),
    st.floats(64.0, 1e6),
    st.integers(1, 10_000),
    st.integers(0, 2**63 - 1),
    st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=4),
    st.floats(-10, 10),
)
def test_round_trip_property(dt, T, paths, seed, thresholds, x0):
    cfg = ExperimentConfig(reference_model(x0=x0), RunConfig(T=T, dt=dt, paths=paths, seed=seed,
                                                            thresholds=tuple(thresholds)))
    assert parse_config(cfg.to_ini()) == cfg


@pytest.mark.parametrize(
    "mutation, message",
    [
        (("rho = 1", "rho = 0"), "rho"),
        (("drift = rational_drift", "drift = cubic"), "cubic"),
        (("x0 = 1", "x0 = 1\ncolour = red"), "colour"),
        (("[output]", "[plots]"), "plots"),
        (("dt = 0.01", "dt = -1"), "dt"),
        (("T = 200", "T = many"), "(?i)run.t"),
    ],
)
def test_config_errors(mutation, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(REF_INI.replace(*mutation))


def test_thread_env(monkeypatch):
    monkeypatch.setenv("MOTOO_LAB_THREADS", "3")
    assert _backend.default_workers() == 3
    monkeypatch.setenv("MOTOO_LAB_THREADS", "0")
    with pytest.raises(ValueError):
        _backend.default_workers()


# --------------------------------------------------------------------------
# cli


def test_validate_reference(tmp_path, capsys):
    assert cli.main(["validate", "--model", write(tmp_path, "m.ini", REF_INI)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] is True


def test_validate_failure_exit_code(tmp_path, capsys):
    bad = REF_INI.replace("drift = rational_drift\ndrift.kappa = 1", "drift = linear\ndrift.a = 1")
    assert cli.main(["validate", "--model", write(tmp_path, "m.ini", bad)]) == 1


def test_density_row(capsys):
    assert cli.main(["density", "--delta", "2", "--t", "0.5", "--x0", "0", "--grid", "0:5:0.1"]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == "y,density,cdf,tail_bound"
    row = next(r for r in rows if r.startswith("0.69999999999999996,"))
    assert float(row.split(",")[1]) == math.exp(-0.7)
    assert len(rows) == 51


def test_simulate_is_reproducible(tmp_path):
    cfg = write(tmp_path, "m.ini", REF_INI)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["simulate", "--model", cfg, "--coupled", "--out", str(a)]) == 0
    assert cli.main(["--workers", "2", "simulate", "--model", cfg, "--coupled", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "path,t,X,z_l,z,z_u,theta"
    assert len(lines) == 1 + 3 * 401


def test_resolved_config_is_logged(tmp_path, caplog):
    with caplog.at_level(logging.INFO, logger="motoo_lab"):
        cli.main(["simulate", "--T", "1", "--dt", "0.1", "--seed", "77", "--out", str(tmp_path / "x.csv")])
    msg = next(r.getMessage() for r in caplog.records if "resolved config" in r.getMessage())
    payload = json.loads(msg.split(": ", 1)[1])
    assert payload["run"]["seed"] == 77 and payload["model"]["drift"] == "rational_drift"


def test_classify_report(capsys):
    assert cli.main(["classify", "--generator", "cir", "--delta", "2", "--envelope", "log", "--a", "1.25"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["motoo"]["verdict"] == "convergent"
    assert out["speed_measure_total"]["verdict"] == "convergent"
    assert cli.main(["classify", "--generator", "upper"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["feller"]["lower"]["verdict"] == out["feller"]["upper"]["verdict"] == "divergent"


def test_lil_report_outputs(tmp_path):
    cfg = write(tmp_path, "m.ini", REF_INI)
    prefix = tmp_path / "rep"
    out = tmp_path / "rep.json"
    assert cli.main(["lil-report", "--model", cfg, "--out", str(out), "--csv", str(prefix)]) == 0
    data = json.loads(out.read_text())
    assert data["config"]["paths"] == 3 and data["summary"]["theta_bounds"]["violations"] == 0
    assert (tmp_path / "rep_checkpoints.csv").read_text().startswith("t,occupation_c1,occupation_c10,")
    assert (tmp_path / "rep_blocks.csv").read_text().startswith("t,median_block_max,median_running_sup")


@pytest.mark.parametrize(
    "argv",
    [
        ["frobnicate"],
        ["validate", "--bogus"],
        ["density", "--delta", "2", "--t", "1", "--grid", "1:2"],
        ["lil-report", "--T", "10"],
        ["--workers", "0", "validate"],
    ],
)
def test_usage_errors(argv, capsys):
    assert cli.main(argv) == 64


def test_unknown_family_is_usage_error(tmp_path):
    cfg = write(tmp_path, "m.ini", REF_INI.replace("rational_bump", "wavy"))
    assert cli.main(["validate", "--model", cfg]) == 64


def test_numeric_failure_exit_code(tmp_path):
    boom = REF_INI.replace("drift = rational_drift\ndrift.kappa = 1", "drift = linear\ndrift.a = -100000")
    cfg = write(tmp_path, "m.ini", boom.replace("dt = 0.01", "dt = 0.1"))
    assert cli.main(["simulate", "--model", cfg, "--out", str(tmp_path / "x.csv")]) == 2
