"""Fits on measured data: lambda extraction, blinking bunching, coincidence peaks."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from ..errors import DomainError, FitError, LambdaUndefinedError

log = logging.getLogger(__name__)

MAX_ITERATIONS = 200


# -- lambda -------------------------------------------------------------------

@dataclass(frozen=True)
class LambdaFit:
    lam: float
    v0: float
    residual: float            # RMS
    slope: float
    lam_err: float = float("nan")
    v0_err: float = float("nan")
    clamped: bool = False

    @property
    def lambda_(self) -> float:
        return self.lam

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "lambda_err": self.lam_err, "v0": self.v0,
                "v0_err": self.v0_err, "slope": self.slope, "residual": self.residual,
                "clamped": self.clamped}


def fit_lambda(points, v_hom: float) -> LambdaFit:
    """Straight-line fit v = s*rho00 + v0, then lambda = sqrt(s / sqrt(V_HOM)).

    ``points`` is a sequence of (rho00, v) pairs.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise DomainError("fit_lambda needs at least 3 (rho00, v) points")
    if not 0 < v_hom <= 1:
        raise DomainError(f"V_HOM must lie in (0, 1], got {v_hom}")
    x, y = pts[:, 0], pts[:, 1]
    design = np.column_stack([x, np.ones_like(x)])
    (slope, v0), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ np.array([slope, v0])
    rms = float(np.sqrt(np.mean(resid**2)))
    dof = len(x) - 2
    cov = np.linalg.pinv(design.T @ design) * (resid @ resid / dof if dof > 0 else 0.0)
    slope_err, v0_err = np.sqrt(np.clip(np.diag(cov), 0, None))
    # exact zero slopes come out as tiny negatives from round-off
    if abs(slope) < 1e-14 * max(1.0, np.max(np.abs(y))):
        slope = 0.0
    if slope < 0:
        raise LambdaUndefinedError(float(slope))
    lam = math.sqrt(slope / math.sqrt(v_hom))
    lam_err = 0.5 * lam * slope_err / slope if slope > 0 else float("nan")
    clamped = lam > 1
    if clamped:
        log.warning("lambda fit %.4f exceeds 1; clamped", lam)
        lam = 1.0
    return LambdaFit(lam, float(v0), rms, float(slope), float(lam_err), float(v0_err), clamped)


def lambda_model(rho00, lam: float, v_hom: float, v0: float = 0.0):
    return lam**2 * np.asarray(rho00) * math.sqrt(v_hom) + v0


def pnc_exp(lam: float, rho11: float) -> float:
    """PNC estimate lambda * sqrt(rho11 (1 - rho11))."""
    if not 0 <= lam <= 1:
        raise DomainError(f"lambda must lie in [0, 1], got {lam}")
    if not 0 <= rho11 <= 1:
        raise DomainError(f"rho11 must lie in [0, 1], got {rho11}")
    return lam * math.sqrt(rho11 * (1 - rho11))


# -- histograms ---------------------------------------------------------------

@dataclass(frozen=True)
class CoincidenceHistogram:
    delays: np.ndarray      # bin centres (ns for coincidences, ms for blinking)
    counts: np.ndarray
    unit: str = "ns"

    def __post_init__(self):
        d = np.asarray(self.delays, dtype=float)
        c = np.asarray(self.counts, dtype=float)
        if d.ndim != 1 or d.shape != c.shape:
            raise DomainError("delays and counts must be 1D of equal length")
        if d.size < 2:
            raise DomainError("histogram needs at least two bins")
        if np.any(c < 0):
            raise DomainError("histogram counts must be non-negative")
        steps = np.diff(d)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-6, atol=0):
            raise DomainError("histogram bins must be uniform and increasing")
        object.__setattr__(self, "delays", d)
        object.__setattr__(self, "counts", c)

    @property
    def bin_width(self) -> float:
        return float(self.delays[1] - self.delays[0])


# -- blinking -----------------------------------------------------------------

@dataclass(frozen=True)
class BlinkingFit:
    A: float
    B: float
    tau_blinking: float     # ms
    errors: dict = field(default_factory=dict)
    residual: float = 0.0

    @property
    def g2_lt_zero(self) -> float:
        return self.A + self.B

    @property
    def qe(self) -> float:
        return qe_from_g2(self.g2_lt_zero)

    def to_dict(self) -> dict:
        return {"A": self.A, "B": self.B, "tau_blinking_ms": self.tau_blinking,
                "g2_lt_zero": self.g2_lt_zero, "qe": self.qe, "errors": self.errors,
                "residual": self.residual}


def qe_from_g2(g2_lt_zero: float) -> float:
    """Quantum efficiency t_on/(t_on + t_off) from the long-time-scale bunching value."""
    if not g2_lt_zero >= 1:
        raise DomainError(f"long-time g2(0) must be >= 1, got {g2_lt_zero}")
    return 1.0 / g2_lt_zero


def blinking_model(tau, A, B, tau_b):
    return A * np.exp(-np.abs(np.asarray(tau) / tau_b)) + B


def fit_blinking(histogram: CoincidenceHistogram) -> BlinkingFit:
    """Levenberg-Marquardt fit of A exp(-|tau/tau_b|) + B."""
    x, y = histogram.delays, histogram.counts
    if x.size < 10:
        raise DomainError("blinking fit needs at least 10 bins")
    order = np.argsort(np.abs(x))
    B0 = float(np.median(y[order[-max(3, x.size // 5):]]))
    peak = float(y[order[0]])
    A0 = max(peak - B0, 1e-12)
    half = B0 + A0 / 2
    above = np.abs(x[y >= half])
    tau0 = float(above.max()) / math.log(2) if above.size else float(np.ptp(x)) / 10
    tau0 = tau0 or histogram.bin_width
    try:
        popt, _ = curve_fit(blinking_model, x, y, p0=(A0, B0, tau0), method="lm",
                            maxfev=MAX_ITERATIONS * 4)
    except RuntimeError as exc:
        raise FitError(f"blinking fit did not converge: {exc}",
                       residual=_rms(y - blinking_model(x, A0, B0, tau0))) from exc
    A, B, tau_b = popt
    tau_b = abs(tau_b)
    res = _rms(y - blinking_model(x, A, B, tau_b))
    if A < 0 or B < 0:
        raise FitError(f"blinking fit gave negative amplitude (A={A:.4g}, B={B:.4g})", residual=res)
    e = np.exp(-np.abs(x) / tau_b)
    jac = np.column_stack([e, np.ones_like(x), A * e * np.abs(x) / tau_b**2])
    pcov = _sandwich_cov(jac, y - blinking_model(x, A, B, tau_b))
    errs = np.sqrt(np.clip(np.diag(pcov), 0, None))
    return BlinkingFit(float(A), float(B), float(tau_b),
                       {"A": float(errs[0]), "B": float(errs[1]), "tau_blinking": float(errs[2])},
                       res)


def _rms(r) -> float:
    return float(np.sqrt(np.mean(np.square(r))))


# -- coincidence peaks ----------------------------------------------------------

def gaussian(t, amp, center, width):
    return amp * np.exp(-0.5 * ((np.asarray(t) - center) / width) ** 2)


@dataclass(frozen=True)
class PeakFit:
    order: int              # multiple of the peak spacing
    amplitude: float
    center: float
    width: float
    area: float
    area_err: float
    center_err: float = 0.0
    width_err: float = 0.0


@dataclass(frozen=True)
class CoincidenceFit:
    center_area: float
    side_area_mean: float
    ratio: float
    ratio_err: float
    peaks: tuple

    def __iter__(self):
        return iter((self.center_area, self.side_area_mean, self.ratio))

    def to_dict(self) -> dict:
        return {"center_area": self.center_area, "side_area_mean": self.side_area_mean,
                "ratio": self.ratio, "ratio_err": self.ratio_err,
                "peaks": [p.__dict__ for p in self.peaks]}


SIDE_ORDERS = (-2, -1, 1, 2)


def _sandwich_cov(jac: np.ndarray, resid: np.ndarray) -> np.ndarray:
    """HC1 covariance, valid when the noise level varies from bin to bin.

    Count noise grows with the signal, so a single residual variance pooled
    over a mostly empty window understates the errors on the peak.
    """
    n, k = jac.shape
    bread = np.linalg.pinv(jac.T @ jac)
    meat = (jac * resid[:, None] ** 2).T @ jac
    return bread @ meat @ bread * n / max(n - k, 1)


def _gaussian_jac(x, amp, center, width) -> np.ndarray:
    g = gaussian(x, 1.0, center, width)
    d = x - center
    return np.column_stack([g, amp * g * d / width**2, amp * g * d**2 / width**3])


def _fit_side_peak(x, y, order, guess_center, width_guess) -> PeakFit:
    amp0 = float(y.max())
    if amp0 <= 0:
        raise FitError(f"side peak {order:+d} is empty")
    try:
        popt, _ = curve_fit(gaussian, x, y, p0=(amp0, guess_center, width_guess), method="lm",
                            maxfev=MAX_ITERATIONS * 4)
    except RuntimeError as exc:
        raise FitError(f"side peak {order:+d} fit failed: {exc}") from exc
    amp, c, w = popt
    w = abs(w)
    pcov = _sandwich_cov(_gaussian_jac(x, amp, c, w), y - gaussian(x, amp, c, w))
    area = amp * w * math.sqrt(2 * math.pi)
    # first-order error propagation of amp*w
    jac = np.array([w, 0.0, amp]) * math.sqrt(2 * math.pi)
    if np.all(np.isfinite(pcov)):
        area_err = float(math.sqrt(max(jac @ pcov @ jac, 0.0)))
        c_err, w_err = (float(math.sqrt(max(pcov[i, i], 0.0))) for i in (1, 2))
    else:
        area_err = c_err = w_err = math.nan
    return PeakFit(order, float(amp), float(c), float(w), float(area), area_err, c_err, w_err)


def _center_area(x, y, c0, w0):
    """Amplitude-only fit of a Gaussian with fixed centre and width; area and its error."""
    shape = gaussian(x, 1.0, c0, w0)
    norm = float(shape @ shape)
    amp = max(float(shape @ y) / norm, 0.0)
    resid = y - amp * shape
    amp_err = math.sqrt(_sandwich_cov(shape[:, None], resid)[0, 0])
    scale = w0 * math.sqrt(2 * math.pi)
    return amp, amp * scale, amp_err * scale


def fit_coincidence_peaks(histogram: CoincidenceHistogram, peak_spacing: float,
                          window: float) -> CoincidenceFit:
    """Areas of the zero-delay peak and the four side peaks, and their ratio.

    Side peaks are fitted freely.  The zero-delay peak can be orders of
    magnitude weaker, so only its amplitude is fitted, with the centre and
    width taken from the side peaks; this is a linear least-squares problem
    and stays well posed for an empty centre peak.
    """
    x, y = histogram.delays, histogram.counts
    if peak_spacing <= 0 or window <= 0:
        raise DomainError("peak spacing and window must be positive")
    width_guess = window / 6
    peaks = []
    for k in SIDE_ORDERS:
        sel = np.abs(x - k * peak_spacing) <= window / 2
        if sel.sum() < 4:
            raise FitError(f"side peak {k:+d} at {k * peak_spacing:g} {histogram.unit} not covered")
        peaks.append(_fit_side_peak(x[sel], y[sel], k, k * peak_spacing, width_guess))
    offsets = [p.center - p.order * peak_spacing for p in peaks]
    c0 = float(np.mean(offsets))
    w0 = float(np.mean([p.width for p in peaks]))
    sel = np.abs(x - c0) <= window / 2
    if sel.sum() < 2:
        raise FitError("zero-delay peak window holds no bins")
    xs, ys = x[sel], y[sel]
    amp, area, area_err = _center_area(xs, ys, c0, w0)
    # the borrowed centre and width carry the side-peak uncertainties into the area
    c0_err = math.sqrt(sum(p.center_err**2 for p in peaks)) / len(peaks)
    w0_err = math.sqrt(sum(p.width_err**2 for p in peaks)) / len(peaks)
    for dc, dw in ((c0_err, 0.0), (0.0, w0_err)):
        if dc or dw:
            hi = _center_area(xs, ys, c0 + dc, w0 + dw)[1]
            lo = _center_area(xs, ys, c0 - dc, w0 - dw)[1]
            area_err = math.hypot(area_err, 0.5 * (hi - lo))
    center = PeakFit(0, amp, c0, w0, area, area_err, c0_err, w0_err)
    side_mean = float(np.mean([p.area for p in peaks]))
    if side_mean <= 0:
        raise FitError("side peaks have no area")
    side_err = math.sqrt(sum(p.area_err**2 for p in peaks)) / len(peaks)
    ratio = center.area / side_mean
    ratio_err = math.hypot(center.area_err / side_mean, ratio * side_err / side_mean)
    return CoincidenceFit(center.area, side_mean, ratio, ratio_err, tuple([center, *peaks]))


def hom_visibility(parallel: CoincidenceHistogram, orthogonal: CoincidenceHistogram,
                   peak_spacing: float, window: float) -> float:
    """1 - A_par/A_orth of the zero-delay areas, each normalised to its side peaks."""
    par = fit_coincidence_peaks(parallel, peak_spacing, window)
    orth = fit_coincidence_peaks(orthogonal, peak_spacing, window)
    if orth.ratio <= 0:
        raise FitError("orthogonal zero-delay peak is empty; HOM visibility undefined")
    return 1.0 - par.ratio / orth.ratio


def synthetic_coincidences(center_ratio: float, spacing: float = 12.5, width: float = 0.4,
                           side_amp: float = 1000.0, bin_width: float = 0.05,
                           span_peaks: int = 2, noise: float = 0.0,
                           seed: int | None = None) -> CoincidenceHistogram:
    """Pulsed-excitation histogram with Gaussian peaks every ``spacing``."""
    half = (span_peaks + 0.5) * spacing
    n = int(round(2 * half / bin_width))
    x = -half + bin_width * (np.arange(n) + 0.5)
    y = np.zeros_like(x)
    for k in range(-span_peaks, span_peaks + 1):
        amp = side_amp * (center_ratio if k == 0 else 1.0)
        y += gaussian(x, amp, k * spacing, width)
    if noise:
        rng = np.random.default_rng(seed)
        y = np.clip(y * (1 + noise * rng.standard_normal(y.size)), 0, None)
    return CoincidenceHistogram(x, y, "ns")


def synthetic_blinking(A: float, B: float, tau_b: float, span: float | None = None,
                       n: int = 201, noise: float = 0.0, seed: int | None = None) -> CoincidenceHistogram:
    span = 8 * tau_b if span is None else span
    x = np.linspace(-span, span, n)
    y = blinking_model(x, A, B, tau_b)
    if noise:
        rng = np.random.default_rng(seed)
        y = y * (1 + noise * rng.standard_normal(y.size))
    return CoincidenceHistogram(x, y, "ms")
