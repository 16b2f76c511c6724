from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest

from pncsim.analysis import io as aio
from pncsim.analysis.fitting import synthetic_blinking, synthetic_coincidences
from pncsim.analysis.visibility import synthetic_trace
from pncsim.cli import load_summary, run
from pncsim.config import RunConfig, apply_overrides, loads_config, parse_config
from pncsim.errors import ConfigError


def write_config(tmp_path, doc) -> str:
    path = tmp_path / "run.json"
    path.write_text(json.dumps(doc, indent=2))
    return str(path)


# -- config parsing ------------------------------------------------------------------


def test_default_config_round_trip():
    cfg = RunConfig()
    assert loads_config(cfg.to_json()) == cfg


def test_presets():
    assert loads_config('{"preset": "experiment"}').system.delay == 7.0
    assert loads_config("{}").system.delay == 15.0
    cfg = apply_overrides(RunConfig(), preset="experiment", n_max=3, scheme="rex", jobs=2)
    assert (cfg.system.delay, cfg.system.n_max, cfg.scheme, cfg.jobs) == (7.0, 3, "reX", 2)
    assert loads_config(cfg.to_json()) == cfg


def test_unit_keys():
    cfg = loads_config('{"system": {"kappa_per_ps": 0.3, "e_b_mev": 4.0, "delay_ps": 9}}')
    assert cfg.system.kappa == 0.3 and cfg.system.delay == 9.0


def test_grid_range():
    cfg = loads_config('{"sweep": {"areas_pi": {"start": 0, "stop": 1, "num": 5}}}')
    assert cfg.area_grid == (0.0, 0.25, 0.5, 0.75, 1.0)


@pytest.mark.parametrize("text, field", [
    ('{\n  "system": {\n    "n_max": 0\n  }\n}', "system.n_max"),
    ('{"system": {"kappa_per_ps": -1}}', "system.kappa_per_ps"),
    ('{"system": {"kappa": 1}}', "system.kappa"),
    ('{"sweep": {"areas_pi": [0, 2, 1]}}', "sweep.areas_pi"),
    ('{"sweep": {"areas_pi": []}}', "sweep.areas_pi"),
    ('{"scheme": "cw"}', "scheme"),
    ('{"jobs": 0}', "jobs"),
    ('{"bogus": 1}', "bogus"),
    ('{"schema_version": "2.0"}', "schema_version"),
])
def test_config_errors_name_field(text, field):
    with pytest.raises(ConfigError) as err:
        loads_config(text)
    assert err.value.field == field
    assert field.split(".")[-1] in str(err.value)


def test_config_error_line_numbers():
    with pytest.raises(ConfigError) as err:
        loads_config('{\n  "system": {\n    "n_max": 0\n  }\n}')
    assert err.value.line == 3
    with pytest.raises(ConfigError) as err:
        loads_config('{\n  "jobs": 1,\n  oops\n}')
    assert err.value.line == 3


def test_parse_rejects_non_object():
    with pytest.raises(ConfigError):
        parse_config([1, 2])


# -- simulation commands ------------------------------------------------------------


def test_simulate_writes_outputs(tmp_path):
    out = tmp_path / "sim"
    code = run(["simulate", "--out", str(out), "--scheme", "rex",
                "--config", write_config(tmp_path, {"tpe": {"area_rad": 6.0}})])
    assert code == 0
    summary = load_summary(out / "summary.json")
    assert summary["scheme"] == "reX"
    assert summary["diagnostics"]["max_trace_error"] < 1e-8
    assert summary["calibration"] is None
    assert loads_config(json.dumps(summary["config"])) == parse_config(summary["config"])
    with open(out / "trajectory.csv", newline="") as fh:
        header = next(csv.reader(fh))
    assert header[:2] == ["t_ps", "pop_g"]


def test_config_echo_round_trips(tmp_path):
    out = tmp_path / "sim"
    doc = {"preset": "experiment", "tpe": {"area_rad": 4.0}, "system": {"n_max": 2}}
    assert run(["simulate", "--out", str(out), "--config", write_config(tmp_path, doc)]) == 0
    echo = load_summary(out / "summary.json")["config"]
    original = apply_overrides(loads_config(json.dumps(doc)), out_dir=str(out))
    assert parse_config(echo) == original


def test_simulate_config_error_exit(tmp_path, capsys):
    code = run(["simulate", "--out", str(tmp_path),
                "--config", write_config(tmp_path, {"system": {"n_max": 0}})])
    assert code == 2
    assert "n_max" in capsys.readouterr().err
    assert run(["simulate", "--n-max", "0", "--out", str(tmp_path)]) == 2


def test_numerical_failure_exit(tmp_path, monkeypatch):
    import pncsim.cli as cli
    from pncsim.errors import NumericalFailure

    def boom(*a, **k):
        raise NumericalFailure("negative eigenvalue -1", 2.5)

    monkeypatch.setattr(cli, "evolve", boom)
    code = run(["simulate", "--out", str(tmp_path),
                "--config", write_config(tmp_path, {"tpe": {"area_rad": 1.0}})])
    assert code == 3


def test_summary_rejects_future_schema(tmp_path):
    path = tmp_path / "s.json"
    path.write_text('{"schema_version": "3.1"}')
    with pytest.raises(ConfigError):
        load_summary(path)


def test_sweep_delay_and_map_commands(tmp_path):
    doc = {"delay_sweep": {"delays_ps": [-5, 5]},
           "map": {"areas_pi": [0.5, 1.0], "delays_ps": [0, 7, 14]}, "mode": "qd_only"}
    cfg = write_config(tmp_path, doc)
    out = tmp_path / "o"
    assert run(["sweep-delay", "--config", cfg, "--out", str(out)]) == 0
    assert run(["map", "--config", cfg, "--out", str(out), "--gnuplot"]) == 0
    rows = (out / "map_qd_only.csv").read_text().splitlines()
    assert rows[0].startswith("delay_ps,area_pi,area_rad,occ_calc")
    assert len(rows) == 7
    mat = np.loadtxt(out / "map_qd_only_xh_yield_qdonly.dat")
    assert mat.shape == (3, 2)
    assert (out / "map_qd_only.gp").exists()
    side = load_summary(out / "map_qd_only.json")
    assert side["calibration"]["pi_area"] > 0


def test_sweep_area_jobs_identical(tmp_path):
    cfg = write_config(tmp_path, {"sweep": {"areas_pi": [0.3, 1.0]}})
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["sweep-area", "--config", cfg, "--out", str(a), "--jobs", "1"]) == 0
    assert run(["sweep-area", "--config", cfg, "--out", str(b), "--jobs", "2"]) == 0
    name = "sweep_area_stiX.csv"
    assert (a / name).read_bytes() == (b / name).read_bytes()
    assert len((a / name).read_text().splitlines()) == 3


def test_calibrate_command(tmp_path):
    assert run(["calibrate", "--out", str(tmp_path)]) == 0
    cal = load_summary(tmp_path / "calibration.json")["calibration"]
    assert cal["pi_area"] == pytest.approx(8.7847, rel=2e-3)


# -- analysis commands ---------------------------------------------------------------


def test_analyze_jones(tmp_path):
    assert run(["analyze", "jones", "--theta", "0", "--out", str(tmp_path)]) == 0
    rep = load_summary(tmp_path / "analysis_jones.json")["report"]
    m = np.array([[complex(*z) for z in row] for row in rep["matrix"]])
    assert np.allclose(m, [[0, 1], [-1, 0]])


def test_analyze_lambda_bundled(tmp_path):
    assert run(["analyze", "lambda", "--dataset", "stix", "--rho11", "0.5",
                "--out", str(tmp_path)]) == 0
    rep = load_summary(tmp_path / "analysis_lambda.json")["report"]
    assert rep["lambda"] == pytest.approx(0.73, abs=0.05)
    assert rep["pnc_exp"] == pytest.approx(rep["lambda"] * 0.5)


def test_analyze_blinking(tmp_path):
    hist = synthetic_blinking(1.865, 1.0, 0.6)
    path = tmp_path / "b.csv"
    aio.write_columns(path, aio.BLINKING_COLUMNS, [hist.delays, hist.counts])
    assert run(["analyze", "blinking", "--input", str(path), "--out", str(tmp_path)]) == 0
    rep = load_summary(tmp_path / "analysis_blinking.json")["report"]
    assert rep["qe"] == pytest.approx(1 / (rep["A"] + rep["B"]))
    assert rep["qe"] == pytest.approx(1 / 2.865, abs=1e-6)


def test_analyze_g2_and_visibility(tmp_path):
    for name, ratio in (("par", 0.02), ("orth", 0.5)):
        h = synthetic_coincidences(ratio)
        aio.write_columns(tmp_path / f"{name}.csv", aio.COINCIDENCE_COLUMNS, [h.delays, h.counts])
    assert run(["analyze", "g2", "--input", str(tmp_path / "par.csv"), "--orthogonal",
                str(tmp_path / "orth.csv"), "--out", str(tmp_path)]) == 0
    rep = load_summary(tmp_path / "analysis_g2.json")["report"]
    assert rep["ratio"] == pytest.approx(0.02, rel=1e-4)
    assert rep["hom_visibility"] == pytest.approx(0.96, abs=1e-4)
    tr = synthetic_trace(0.3)
    aio.write_columns(tmp_path / "t.csv", aio.TRACE_COLUMNS, [tr.timestamps, tr.counts_1, tr.counts_2])
    assert run(["analyze", "visibility", "--input", str(tmp_path / "t.csv"),
                "--out", str(tmp_path)]) == 0
    rep = load_summary(tmp_path / "analysis_visibility.json")["report"]
    assert rep["v_mean_raw"] == pytest.approx(0.3, abs=1e-6)


def test_analyze_malformed_csv(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("delay_ms,g2\n0,2\n1,abc\n")
    assert run(["analyze", "blinking", "--input", str(path), "--out", str(tmp_path)]) == 2
    assert "line 3" in capsys.readouterr().err


def test_jones_closed_form_in_report(tmp_path):
    assert run(["analyze", "jones", "--theta", str(math.pi / 4), "--out", str(tmp_path)]) == 0
    rep = load_summary(tmp_path / "analysis_jones.json")["report"]
    assert np.allclose(np.array([[complex(*z) for z in r] for r in rep["matrix"]]),
                       [[0, -1j], [-1j, 0]])
