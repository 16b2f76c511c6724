"""Jones matrices of wave plates and the rotating-half-wave-plate phase shifter."""

from __future__ import annotations

import numpy as np


def rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def retarder(delay: float, angle: float) -> np.ndarray:
    """Linear retarder with phase delay ``delay`` and fast axis at ``angle`` to H.

    Symmetric phase convention: diag(exp(-i delay/2), exp(+i delay/2)) in the
    plate frame.
    """
    plate = np.diag([np.exp(-0.5j * delay), np.exp(0.5j * delay)])
    return rotation(angle) @ plate @ rotation(-angle)


def qwp(angle: float) -> np.ndarray:
    return retarder(np.pi / 2, angle)


def hwp(angle: float) -> np.ndarray:
    return retarder(np.pi, angle)


def phase_shifter_jones(theta: float) -> np.ndarray:
    """QWP(pi/4) . HWP(theta) . QWP(-pi/4).

    Works out to [[0, exp(-2i theta)], [-exp(2i theta), 0]]: rotating the
    half-wave plate by theta shifts the relative phase by 4 theta.
    """
    return qwp(np.pi / 4) @ hwp(theta) @ qwp(-np.pi / 4)


def phase_shifter_closed_form(theta: float) -> np.ndarray:
    return np.array([[0, np.exp(-2j * theta)], [-np.exp(2j * theta), 0]])


def equal_up_to_phase(a, b, atol: float = 1e-12) -> bool:
    a, b = np.asarray(a), np.asarray(b)
    k = np.argmax(np.abs(b))
    if abs(b.flat[k]) < atol:
        return bool(np.allclose(a, b, atol=atol))
    phase = a.flat[k] / b.flat[k]
    if not np.isclose(abs(phase), 1.0, atol=atol):
        return False
    return bool(np.allclose(a, phase * b, atol=atol))
