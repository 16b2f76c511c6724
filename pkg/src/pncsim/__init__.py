"""Photon-number coherence of a cavity-coupled quantum-dot biexciton cascade.

Lindblad simulation of two-photon excitation with and without a stimulating
pulse, pulse-area calibration and parameter sweeps, and the measurement-side
analysis that turns interferometer and correlation data into coherence
estimates.
"""

__version__ = "0.1.0"

from .dynamics import (IntegratedMetrics, IntegrationGrid, TrajectoryRecord, evolve,
                       integrated_metrics, rhs_oracle_check)
from .errors import (CalibrationError, ConfigError, DomainError, FitError, LambdaUndefinedError,
                     NumericalFailure, PNCSimError, UndefinedVisibilityError)
from .model import PulseParams, PulseRole, SystemParams, stim_pulse, tpe_pulse
from .quantum_core import QD, HilbertSpace, partial_trace
from .sweeps import (CalibrationInfo, SweepResult, calibrate_pi, map_area_delay, sweep_delay,
                     sweep_tpe_area)

__all__ = [
    "QD", "CalibrationError", "CalibrationInfo", "ConfigError", "DomainError", "FitError",
    "HilbertSpace", "IntegratedMetrics", "IntegrationGrid", "LambdaUndefinedError",
    "NumericalFailure", "PNCSimError", "PulseParams", "PulseRole", "SweepResult", "SystemParams",
    "TrajectoryRecord", "UndefinedVisibilityError", "calibrate_pi", "evolve",
    "integrated_metrics", "map_area_delay", "partial_trace", "rhs_oracle_check", "stim_pulse",
    "sweep_delay", "sweep_tpe_area", "tpe_pulse",
]
