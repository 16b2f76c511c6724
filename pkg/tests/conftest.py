from __future__ import annotations

import time

import numpy as np
import pytest

from pncsim.model import SystemParams
from pncsim.sweeps import calibrate_pi, map_area_delay, sweep_tpe_area

MAP_AREAS = tuple(np.linspace(0.0, 2.0, 21))
MAP_DELAYS = tuple(np.linspace(-10.0, 40.0, 21))

# wall-clock seconds of the session fixtures, and acceptance outcome lines
TIMINGS: dict[str, float] = {}
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def _timed(name, fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    TIMINGS[name] = time.perf_counter() - start
    return out


@pytest.fixture(scope="session")
def table1():
    return SystemParams()


@pytest.fixture(scope="session")
def calibration(table1):
    return calibrate_pi(table1)


@pytest.fixture(scope="session")
def sweep_stix(table1, calibration):
    return _timed("sweep_stix", sweep_tpe_area, table1, scheme="stiX", calibration=calibration)


@pytest.fixture(scope="session")
def sweep_rex(table1, calibration):
    return _timed("sweep_rex", sweep_tpe_area, table1, scheme="reX", calibration=calibration)


@pytest.fixture(scope="session")
def map_qd_only(table1, calibration):
    return _timed("map_qd_only", map_area_delay, table1, MAP_AREAS, MAP_DELAYS, "qd_only",
                  calibration=calibration)


@pytest.fixture(scope="session")
def map_full(table1, calibration):
    return _timed("map_full", map_area_delay, table1, MAP_AREAS, MAP_DELAYS, "full",
                  calibration=calibration)


def random_density_matrix(rng: np.random.Generator, dim: int) -> np.ndarray:
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)
