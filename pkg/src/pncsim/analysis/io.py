"""CSV readers for measurement data and the bundled synthetic datasets."""

from __future__ import annotations

import csv
import math
from importlib import resources

import numpy as np

from ..errors import ConfigError
from .fitting import CoincidenceHistogram, lambda_model
from .visibility import DetectorTrace

TRACE_COLUMNS = ("t_s", "counts1", "counts2")
COINCIDENCE_COLUMNS = ("delay_ns", "counts")
BLINKING_COLUMNS = ("delay_ms", "g2")
LAMBDA_COLUMNS = ("rho00", "v")

# name -> (lambda, V_HOM, v0, noise sigma, seed)
LAMBDA_DATASETS = {
    "stix": (0.73, 0.95, 0.02, 0.006, 7),
    "rex": (0.28, 0.58, 0.01, 0.003, 11),
}


def read_columns(path, columns, *, non_negative=()) -> dict[str, np.ndarray]:
    """Read named float columns; malformed rows raise ConfigError with the file line number."""
    out = {c: [] for c in columns}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in columns if c not in (reader.fieldnames or [])]
        if missing:
            raise ConfigError(f"{path}: missing column(s) {', '.join(missing)}", line=1)
        for row in reader:
            line = reader.line_num
            for c in columns:
                raw = row.get(c)
                try:
                    value = float(raw)
                except (TypeError, ValueError):
                    raise ConfigError(f"{path}: cannot parse {raw!r} as a number", field=c,
                                      line=line) from None
                if not math.isfinite(value) or (c in non_negative and value < 0):
                    raise ConfigError(f"{path}: invalid value {raw!r}", field=c, line=line)
                out[c].append(value)
    if not out[columns[0]]:
        raise ConfigError(f"{path}: no data rows", line=1)
    return {c: np.array(v) for c, v in out.items()}


def read_trace_csv(path) -> DetectorTrace:
    cols = read_columns(path, TRACE_COLUMNS, non_negative=("counts1", "counts2"))
    return DetectorTrace(cols["t_s"], cols["counts1"], cols["counts2"])


def _histogram(path, columns, unit) -> CoincidenceHistogram:
    cols = read_columns(path, columns, non_negative=(columns[1],))
    try:
        return CoincidenceHistogram(cols[columns[0]], cols[columns[1]], unit)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def read_coincidence_csv(path) -> CoincidenceHistogram:
    return _histogram(path, COINCIDENCE_COLUMNS, "ns")


def read_blinking_csv(path) -> CoincidenceHistogram:
    return _histogram(path, BLINKING_COLUMNS, "ms")


def read_lambda_csv(path) -> np.ndarray:
    cols = read_columns(path, LAMBDA_COLUMNS)
    return np.column_stack([cols["rho00"], cols["v"]])


def write_columns(path, columns, data) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in zip(*data):
            writer.writerow([repr(float(v)) for v in row])


def synthetic_lambda_points(lam: float, v_hom: float, v0: float = 0.0, noise: float = 0.0,
                            seed: int | None = None, n: int = 12) -> np.ndarray:
    """(rho00, v) pairs along a Rabi power sweep from 0.1 pi to pi.

    Counts normalised at pi power give N = sin^2(pi A / 2) and rho00 = 1 - N.
    """
    area = np.linspace(0.1, 1.0, n)
    rho00 = 1 - np.sin(np.pi * area / 2) ** 2
    v = lambda_model(rho00, lam, v_hom, v0)
    if noise:
        v = v + noise * np.random.default_rng(seed).standard_normal(n)
    return np.column_stack([rho00, v])


def bundled_lambda_dataset(name: str) -> tuple[np.ndarray, float]:
    """(points, V_HOM) of a bundled dataset: 'stix' or 'rex'."""
    key = name.lower()
    if key not in LAMBDA_DATASETS:
        raise ConfigError(f"unknown dataset {name!r}; choose from {sorted(LAMBDA_DATASETS)}")
    ref = resources.files("pncsim.data").joinpath(f"lambda_{key}.csv")
    with resources.as_file(ref) as path:
        return read_lambda_csv(path), LAMBDA_DATASETS[key][1]


def regenerate_bundled(directory) -> None:
    for key, (lam, v_hom, v0, noise, seed) in LAMBDA_DATASETS.items():
        pts = synthetic_lambda_points(lam, v_hom, v0, noise, seed)
        write_columns(f"{directory}/lambda_{key}.csv", LAMBDA_COLUMNS, pts.T)
