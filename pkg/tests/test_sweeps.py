from __future__ import annotations

import json
import math

import numpy as np
import pytest

from pncsim.dynamics import IntegrationGrid, evolve, integrated_metrics
from pncsim.errors import CalibrationError, DomainError, NumericalFailure
from pncsim.model import SystemParams, stim_pulse, tpe_pulse
from pncsim.sweeps import (METRIC_COLUMNS, CalibrationInfo, Scheme, SweepResult, calibrate_pi,
                           local_extrema, map_area_delay, sweep_delay, sweep_tpe_area)

RABI = SystemParams(g_coupling=0.0, kappa=0.0, gamma=0.0, e_b=0.0, delta_xl=0.0)
# lossless runs stay pure; a finer step keeps RK4 error below the positivity tolerance
FINE = IntegrationGrid(step=0.005)


def test_rabi_limit_calibration():
    cal = calibrate_pi(RABI, grid=FINE)
    assert cal.pi_area == pytest.approx(math.pi, rel=1e-2)
    # |rho_g,xx| = sin^2(theta)/4 peaks at pi/2 for independent two-level rotations
    assert cal.half_pi_area == pytest.approx(math.pi / 2, rel=1e-2)
    assert cal.xx_at_pi > 0.999


def test_calibration_needs_interior_maximum():
    with pytest.raises(CalibrationError):
        calibrate_pi(RABI, a_max=2.0, n_coarse=5, grid=FINE)


def test_calibration_info_invariant():
    with pytest.raises(CalibrationError):
        CalibrationInfo(pi_area=1.0, half_pi_area=2.0)
    cal = CalibrationInfo(pi_area=4.0, half_pi_area=3.0)
    assert cal.nominal(1.0) == 4.0
    assert cal.nominal(0.25) == 2.0
    with pytest.raises(DomainError):
        cal.nominal(-1.0)


def test_table1_calibration(calibration, table1):
    # golden values of the reference run
    assert calibration.pi_area == pytest.approx(8.7847, rel=2e-3)
    assert calibration.half_pi_area == pytest.approx(5.9435, rel=2e-3)
    assert 0 < calibration.half_pi_area < calibration.pi_area
    half = evolve(table1, tpe_pulse(table1, 0.5 * calibration.pi_area), None)
    full = evolve(table1, tpe_pulse(table1, calibration.pi_area), None)
    assert full.qd_populations[:, 3].max() >= half.qd_populations[:, 3].max()


def test_single_zero_area_row(table1, calibration):
    res = sweep_tpe_area(table1, [0.0], "reX", calibration=calibration)
    assert len(res.rows) == 1
    assert all(res.rows[0][c] == 0.0 for c in METRIC_COLUMNS)
    # the stim pulse alone drives g -> xH far off resonance (detuned by E_B)
    row = sweep_tpe_area(table1, [0.0], "stiX", calibration=calibration).rows[0]
    assert row["occ_calc"] < 1e-5 and row["xx_peak"] < 1e-4 and row["pnc_calc"] < 0.01


def test_one_by_one_map_equals_evolve(table1, calibration):
    res = map_area_delay(table1, [1.0], [7.0], calibration=calibration)
    traj = evolve(table1, tpe_pulse(table1, calibration.pi_area), stim_pulse(table1, delay=7.0))
    m = integrated_metrics(traj, table1)
    assert res.rows[0]["occ_calc"] == m.occ_calc
    assert res.rows[0]["pnc_calc"] == m.pnc_calc
    assert res.matrix("occ_calc").shape == (1, 1)


def test_serial_and_parallel_identical(tmp_path, table1, calibration):
    grid = [0.2, 0.7, 1.1]
    a = sweep_tpe_area(table1, grid, "stiX", calibration=calibration, jobs=1)
    b = sweep_tpe_area(table1, grid, "stiX", calibration=calibration, jobs=2)
    a.write_csv(tmp_path / "a.csv")
    b.write_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_csv_and_sidecar(tmp_path, table1, calibration):
    res = sweep_delay(table1, [-5.0, 5.0], 1.0, "qd_only", calibration=calibration)
    res.write_csv(tmp_path / "d.csv")
    res.write_json(tmp_path / "d.json")
    header = (tmp_path / "d.csv").read_text().splitlines()[0].split(",")
    assert header == ["delay_ps", *METRIC_COLUMNS]
    side = json.loads((tmp_path / "d.json").read_text())
    assert side["calibration"]["pi_area"] == calibration.pi_area
    assert side["params"]["kappa"] == table1.kappa
    assert side["mode"] == "qd_only"


def test_sweep_result_invariants(table1):
    with pytest.raises(DomainError):
        SweepResult(("x",), {"x": np.array([1.0, 0.5])}, [{}, {}], None, table1)
    with pytest.raises(DomainError):
        SweepResult(("x",), {"x": np.array([0.0, 1.0])}, [{}], None, table1)


def test_delay_direction_qd_only(table1, calibration):
    res = sweep_delay(table1, [-20.0, -7.0, 7.0, 200.0], 1.0, "qd_only", calibration=calibration)
    xh = res.column("xh_yield_qdonly")
    rex = sweep_tpe_area(table1, [1.0], "reX", calibration=calibration)
    assert xh[2] > xh[1]
    # a stim pulse that arrives first does nothing beyond weak off-resonant driving
    assert xh[0] == pytest.approx(integrated_metrics(
        evolve(table1, tpe_pulse(table1, calibration.pi_area), None, qd_only=True), table1
    ).xh_yield_qdonly, rel=1e-3)
    # very late pulses find the biexciton mostly decayed
    assert xh[1] < xh[3] < xh[2]
    assert rex.rows[0]["occ_calc"] > 0


def test_rex_rabi_oscillation(table1, calibration):
    # one Rabi period spans [0, 2] pi-units with a single maximum; [0, 4] holds two
    res = sweep_tpe_area(table1, np.linspace(0, 4, 51), "reX", calibration=calibration)
    maxima, minima = local_extrema(res.column("area_pi"), res.column("occ_calc"))
    assert len(maxima) >= 2
    assert maxima[0] == pytest.approx(1.0, abs=0.1)
    # the two-photon rotation is not exactly quadratic in the area, so the first
    # minimum drifts above 2 on this axis
    assert maxima[0] < minima[0] < maxima[1]


def test_scheme_parse():
    assert Scheme.parse("rex") is Scheme.REX
    assert Scheme.parse("stiX") is Scheme.STIX
    with pytest.raises(DomainError):
        Scheme.parse("cw")


def test_numerical_failure_names_grid_point(monkeypatch, table1, calibration):
    import pncsim.sweeps as sw

    def boom(*args, **kwargs):
        raise NumericalFailure("trace error 1", 3.0)

    monkeypatch.setattr(sw, "evolve", boom)
    with pytest.raises(NumericalFailure) as err:
        sw.sweep_tpe_area(table1, [0.5], "reX", calibration=calibration)
    assert "area=0.5pi" in str(err.value)
    assert str(err.value).count("at t =") == 1
    assert err.value.time == 3.0


def test_numerical_failure_pickles():
    import pickle

    exc = pickle.loads(pickle.dumps(NumericalFailure("trace error 1", 3.0)))
    assert exc.time == 3.0 and str(exc) == "trace error 1 at t = 3 ps"
