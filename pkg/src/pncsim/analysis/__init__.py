"""Measurement-side analysis: visibilities, lambda extraction, correlation fits, Jones optics."""

from .fitting import (BlinkingFit, CoincidenceFit, CoincidenceHistogram, LambdaFit, PeakFit,
                      fit_blinking, fit_coincidence_peaks, fit_lambda, hom_visibility, pnc_exp,
                      qe_from_g2)
from .jones import hwp, phase_shifter_jones, qwp, retarder
from .visibility import DetectorTrace, VisibilityResult, ideal_visibility, visibility_from_trace

__all__ = [
    "BlinkingFit", "CoincidenceFit", "CoincidenceHistogram", "DetectorTrace", "LambdaFit",
    "PeakFit", "VisibilityResult", "fit_blinking", "fit_coincidence_peaks", "fit_lambda",
    "hom_visibility", "hwp", "ideal_visibility", "phase_shifter_jones", "pnc_exp",
    "qe_from_g2", "qwp", "retarder", "visibility_from_trace",
]
