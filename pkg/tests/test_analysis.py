from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from pncsim.analysis import (CoincidenceHistogram, DetectorTrace, fit_blinking,
                             fit_coincidence_peaks, fit_lambda, hom_visibility, ideal_visibility,
                             phase_shifter_jones, pnc_exp, qe_from_g2, visibility_from_trace)
from pncsim.analysis import io as aio
from pncsim.analysis.fitting import (blinking_model, lambda_model, synthetic_blinking,
                                     synthetic_coincidences)
from pncsim.analysis.jones import equal_up_to_phase, hwp, phase_shifter_closed_form, qwp
from pncsim.analysis.visibility import synthetic_trace
from pncsim.errors import (ConfigError, DomainError, LambdaUndefinedError,
                           UndefinedVisibilityError)

# -- visibility -----------------------------------------------------------------


def test_sinusoid_visibility():
    t = np.linspace(0, 10, 5001)
    c = 200 + 100 * np.sin(2 * np.pi * t)
    v1, v2, v = visibility_from_trace(DetectorTrace(t, c, c))
    assert v == pytest.approx(0.5, abs=2e-3)
    res = visibility_from_trace(DetectorTrace(t, c, c))
    assert res.v_mean_raw == pytest.approx(0.5, abs=1e-9)


def test_constant_trace():
    t = np.arange(10.0)
    assert tuple(visibility_from_trace(DetectorTrace(t, np.full(10, 7), np.full(10, 7)))) == (0, 0, 0)


def test_all_zero_trace():
    t = np.arange(10.0)
    with pytest.raises(UndefinedVisibilityError):
        visibility_from_trace(DetectorTrace(t, np.zeros(10), np.zeros(10)))


def test_trace_from_ideal_state():
    v = ideal_visibility(0.5, 0.5)
    assert v == 0.5
    res = visibility_from_trace(synthetic_trace(v))
    assert res.v_mean_raw == pytest.approx(0.5, abs=1e-6)
    assert res.v_mean == pytest.approx(0.5, abs=2e-3)


def test_trace_validation():
    with pytest.raises(DomainError):
        DetectorTrace([0, 1], [1, -1], [1, 1])
    with pytest.raises(DomainError):
        DetectorTrace([0, 1], [1], [1, 1])


# -- lambda ---------------------------------------------------------------------


def test_lambda_round_trip():
    rho00 = np.linspace(0.05, 0.95, 9)
    pts = np.column_stack([rho00, lambda_model(rho00, 0.73, 0.95)])
    fit = fit_lambda(pts, 0.95)
    assert abs(fit.lam - 0.73) < 1e-9
    assert abs(fit.v0) < 1e-12


def test_lambda_flat_data():
    pts = [(0.1, 0.2), (0.5, 0.2), (0.9, 0.2)]
    assert fit_lambda(pts, 0.9).lam == 0.0


def test_lambda_negative_slope():
    with pytest.raises(LambdaUndefinedError) as err:
        fit_lambda([(0.1, 0.5), (0.5, 0.3), (0.9, 0.1)], 0.9)
    assert err.value.slope == pytest.approx(-0.5)


def test_lambda_clamped():
    rho00 = np.linspace(0.1, 0.9, 5)
    fit = fit_lambda(np.column_stack([rho00, 1.5 * rho00]), 1.0)
    assert fit.lam == 1.0 and fit.clamped


def test_lambda_preconditions():
    with pytest.raises(DomainError):
        fit_lambda([(0.1, 0.1), (0.2, 0.2)], 0.9)
    with pytest.raises(DomainError):
        fit_lambda([(0.1, 0.1), (0.2, 0.2), (0.3, 0.3)], 0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.2, 1.0), st.floats(0.3, 1.0))
def test_lambda_scale_consistency(lam, v_hom, c):
    rho00 = np.linspace(0.1, 0.9, 6)
    pts = np.column_stack([rho00, lambda_model(rho00, lam, v_hom)])
    base = fit_lambda(pts, v_hom).lam
    scaled = pts.copy()
    scaled[:, 1] *= c**2
    assert fit_lambda(scaled, v_hom).lam == pytest.approx(c * base, rel=1e-9)


def test_pnc_exp_values():
    assert pnc_exp(1.0, 0.5) == 0.5
    assert pnc_exp(0.73, 0.5) == pytest.approx(0.365)
    assert pnc_exp(0.6, 0.0) == pnc_exp(0.6, 1.0) == 0.0
    with pytest.raises(DomainError):
        pnc_exp(1.2, 0.5)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_pnc_exp_symmetry(lam, rho11):
    # only where the reflection is exact in floating point
    assume(1 - (1 - rho11) == rho11)
    assert pnc_exp(lam, rho11) == pytest.approx(pnc_exp(lam, 1 - rho11), rel=1e-8, abs=1e-15)
    assert pnc_exp(lam, rho11) <= pnc_exp(lam, 0.5) + 1e-15


# -- blinking -------------------------------------------------------------------


@pytest.mark.parametrize("g2, qe", [(2.865, 0.349), (2.247, 0.445), (2.184, 0.458)])
def test_quantum_efficiency(g2, qe):
    assert qe_from_g2(g2) == pytest.approx(qe, abs=1e-3)


def test_blinking_noiseless():
    fit = fit_blinking(synthetic_blinking(1.2, 1.0, 0.5))
    assert fit.A == pytest.approx(1.2, abs=1e-6)
    assert fit.B == pytest.approx(1.0, abs=1e-6)
    assert fit.tau_blinking == pytest.approx(0.5, abs=1e-6)
    assert fit.qe == pytest.approx(1 / 2.2)


def test_blinking_noisy():
    fit = fit_blinking(synthetic_blinking(1.865, 1.0, 0.8, noise=0.01, seed=4))
    for name, true in (("A", 1.865), ("B", 1.0), ("tau_blinking", 0.8)):
        value = getattr(fit, name)
        assert abs(value - true) < 3 * fit.errors[name]


def test_blinking_needs_bins():
    with pytest.raises(DomainError):
        fit_blinking(CoincidenceHistogram(np.arange(5.0), blinking_model(np.arange(5.0), 1, 1, 1)))


# -- coincidence peaks -----------------------------------------------------------


def test_peaks_noiseless():
    fit = fit_coincidence_peaks(synthetic_coincidences(0.3), 12.5, 8.0)
    assert fit.ratio == pytest.approx(0.3, abs=1e-6)
    side = [p for p in fit.peaks if p.order != 0]
    assert all(p.width == pytest.approx(0.4, abs=1e-6) for p in side)
    assert fit.side_area_mean == pytest.approx(1000 * 0.4 * math.sqrt(2 * math.pi), rel=1e-6)


def test_peaks_empty_center():
    assert fit_coincidence_peaks(synthetic_coincidences(0.0), 12.5, 8.0).ratio == pytest.approx(0, abs=1e-9)


def test_peaks_equal():
    assert fit_coincidence_peaks(synthetic_coincidences(1.0), 12.5, 8.0).ratio == pytest.approx(1.0, abs=1e-6)


def test_peaks_small_ratio_with_noise():
    fit = fit_coincidence_peaks(synthetic_coincidences(0.0009, noise=0.01, seed=2), 12.5, 8.0)
    assert fit.ratio == pytest.approx(0.0009, rel=0.1)


def test_hom_visibility():
    par = synthetic_coincidences(0.05)
    orth = synthetic_coincidences(0.5)
    assert hom_visibility(par, orth, 12.5, 6.0) == pytest.approx(0.9, abs=1e-6)


def test_histogram_validation():
    with pytest.raises(DomainError):
        CoincidenceHistogram([0, 1, 3], [1, 1, 1])
    with pytest.raises(DomainError):
        CoincidenceHistogram([0, 1, 2], [1, -1, 1])


# -- Jones ------------------------------------------------------------------------


def test_jones_special_angles():
    assert np.allclose(phase_shifter_jones(0.0), [[0, 1], [-1, 0]])
    assert np.allclose(phase_shifter_jones(np.pi / 4), [[0, -1j], [-1j, 0]])


def test_wave_plates():
    assert np.allclose(qwp(np.pi / 4), np.array([[1, -1j], [-1j, 1]]) / np.sqrt(2))
    assert np.allclose(hwp(0.0), -1j * np.diag([1, -1]))


@settings(max_examples=50, deadline=None)
@given(st.floats(-10, 10))
def test_jones_properties(theta):
    j = phase_shifter_jones(theta)
    assert np.allclose(j @ j.conj().T, np.eye(2))
    assert equal_up_to_phase(j, phase_shifter_closed_form(theta), atol=1e-10)
    assert np.allclose(phase_shifter_jones(theta + np.pi), j)


# -- CSV input ----------------------------------------------------------------------


def test_csv_row_numbers(tmp_path):
    path = tmp_path / "trace.csv"
    path.write_text("t_s,counts1,counts2\n0,1,2\n1,x,3\n")
    with pytest.raises(ConfigError) as err:
        aio.read_trace_csv(path)
    assert err.value.line == 3 and err.value.field == "counts1"
    path.write_text("t_s,counts1\n0,1\n")
    with pytest.raises(ConfigError):
        aio.read_trace_csv(path)


def test_csv_round_trip(tmp_path):
    trace = synthetic_trace(0.4, n=50)
    path = tmp_path / "trace.csv"
    aio.write_columns(path, aio.TRACE_COLUMNS, [trace.timestamps, trace.counts_1, trace.counts_2])
    back = aio.read_trace_csv(path)
    assert np.array_equal(back.counts_1, trace.counts_1)


def test_bundled_datasets_are_reproducible(tmp_path):
    aio.regenerate_bundled(tmp_path)
    for name in ("stix", "rex"):
        pts, _ = aio.bundled_lambda_dataset(name)
        assert np.array_equal(pts, aio.read_lambda_csv(tmp_path / f"lambda_{name}.csv"))
