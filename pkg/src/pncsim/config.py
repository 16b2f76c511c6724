"""Run configuration: JSON files with unit-suffixed keys, presets and schema versioning."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError, DomainError
from .model import SystemParams

SCHEMA_VERSION = "1.0"

# config key -> SystemParams attribute
SYSTEM_KEYS = {
    "delta_cx_mev": "delta_cx",
    "delta_xl_mev": "delta_xl",
    "delta_stim_mev": "delta_stim",
    "e_b_mev": "e_b",
    "g_mev": "g_coupling",
    "kappa_per_ps": "kappa",
    "gamma_per_ps": "gamma",
    "fwhm_tpe_ps": "fwhm_tpe",
    "fwhm_stim_ps": "fwhm_stim",
    "delay_ps": "delay",
    "temperature_k": "temperature",
    "n_max": "n_max",
    "dephasing_per_ps": "dephasing_rate",
    "resonant_tpe": "resonant_tpe",
}

PRESETS = {
    "table1": {},
    "experiment": {"delay_ps": 7.0},
}


def check_schema_version(value, where: str = "schema_version") -> None:
    """Reject documents whose major schema version differs from ours."""
    if value is None:
        return
    major = str(value).split(".")[0]
    if major != SCHEMA_VERSION.split(".")[0]:
        raise ConfigError(f"unsupported schema version {value!r} (this build reads {SCHEMA_VERSION})",
                          field=where)


@dataclass(frozen=True)
class RunConfig:
    system: SystemParams = field(default_factory=SystemParams)
    preset: str = "table1"
    scheme: str = "stiX"
    tpe_area_pi: float | None = 1.0       # calibrated pi units
    tpe_area_rad: float | None = None     # nominal radians; overrides tpe_area_pi
    stim_area_rad: float = math.pi
    area_grid: tuple = tuple(float(x) for x in np.linspace(0.0, 2.0, 51))
    delay_grid: tuple = tuple(float(x) for x in np.arange(-10.0, 40.5, 1.0))
    delay_tpe_area_pi: float = 1.0
    map_area_grid: tuple = tuple(float(x) for x in np.linspace(0.0, 2.0, 21))
    map_delay_grid: tuple = tuple(float(x) for x in np.linspace(-10.0, 40.0, 21))
    mode: str = "full"
    jobs: int = 1
    out_dir: str = "out"
    gnuplot: bool = False
    step_ps: float | None = None

    def to_dict(self) -> dict:
        sys = {key: getattr(self.system, attr) for key, attr in SYSTEM_KEYS.items()}
        return {
            "schema_version": SCHEMA_VERSION,
            "preset": self.preset,
            "scheme": self.scheme,
            "system": sys,
            "tpe": {"area_pi": self.tpe_area_pi, "area_rad": self.tpe_area_rad},
            "stim": {"area_rad": self.stim_area_rad},
            "sweep": {"areas_pi": list(self.area_grid)},
            "delay_sweep": {"delays_ps": list(self.delay_grid), "tpe_area_pi": self.delay_tpe_area_pi},
            "map": {"areas_pi": list(self.map_area_grid), "delays_ps": list(self.map_delay_grid)},
            "mode": self.mode,
            "jobs": self.jobs,
            "output": {"dir": self.out_dir, "gnuplot": self.gnuplot},
            "integration": {"step_ps": self.step_ps},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    m = re.search(rf'"{re.escape(key)}"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


class _Reader:
    def __init__(self, text: str | None):
        self.text = text

    def fail(self, message, path):
        raise ConfigError(message, field=path, line=_line_of(self.text, path.split(".")[-1]))

    def section(self, doc, name, allowed):
        sec = doc.get(name)
        if sec is None:
            return {}
        if not isinstance(sec, dict):
            self.fail(f"'{name}' must be an object", name)
        unknown = set(sec) - set(allowed)
        if unknown:
            key = sorted(unknown)[0]
            self.fail(f"unknown key '{key}' in '{name}'", f"{name}.{key}")
        return sec

    def number(self, value, path, *, optional=False, integer=False, positive=False):
        if value is None and optional:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(f"expected a number, got {value!r}", path)
        if not math.isfinite(value):
            self.fail(f"expected a finite number, got {value!r}", path)
        if integer and int(value) != value:
            self.fail(f"expected an integer, got {value!r}", path)
        if positive and value <= 0:
            self.fail(f"must be > 0, got {value!r}", path)
        return int(value) if integer else float(value)

    def grid(self, value, path):
        if isinstance(value, dict):
            try:
                start, stop, num = value["start"], value["stop"], value["num"]
            except KeyError as exc:
                self.fail(f"grid needs start, stop and num (missing {exc.args[0]})", path)
            num = self.number(num, f"{path}.num", integer=True, positive=True)
            values = np.linspace(self.number(start, f"{path}.start"),
                                 self.number(stop, f"{path}.stop"), num)
        elif isinstance(value, list):
            values = [self.number(v, path) for v in value]
        else:
            self.fail("grid must be a list or {start, stop, num}", path)
        values = tuple(float(v) for v in values)
        if not values:
            self.fail("grid must not be empty", path)
        if any(b <= a for a, b in zip(values, values[1:])):
            self.fail("grid must be strictly increasing", path)
        return values


TOP_KEYS = {"schema_version", "preset", "scheme", "system", "tpe", "stim", "sweep",
            "delay_sweep", "map", "mode", "jobs", "output", "integration"}


def parse_config(doc: dict, text: str | None = None, *, preset: str | None = None) -> RunConfig:
    """Build a RunConfig from a parsed JSON document (``text`` is used for line numbers)."""
    r = _Reader(text)
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object", line=1)
    unknown = set(doc) - TOP_KEYS
    if unknown:
        key = sorted(unknown)[0]
        r.fail(f"unknown top-level key '{key}'", key)
    check_schema_version(doc.get("schema_version"))

    preset = preset or doc.get("preset", "table1")
    if preset not in PRESETS:
        r.fail(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}", "preset")
    sys_doc = {**PRESETS[preset], **r.section(doc, "system", SYSTEM_KEYS)}
    values = {}
    for key, value in sys_doc.items():
        path = f"system.{key}"
        if key == "resonant_tpe":
            if not isinstance(value, bool):
                r.fail("expected true or false", path)
            values[SYSTEM_KEYS[key]] = value
        elif key == "n_max":
            n = r.number(value, path, integer=True)
            if n < 1:
                r.fail(f"n_max must be >= 1, got {n}", path)
            values["n_max"] = n
        else:
            values[SYSTEM_KEYS[key]] = r.number(value, path)
    try:
        system = SystemParams(**values)
    except DomainError as exc:
        name = next((k for k, a in SYSTEM_KEYS.items() if str(exc).startswith(a)), None)
        r.fail(str(exc), f"system.{name}" if name else "system")

    scheme = str(doc.get("scheme", "stiX"))
    if scheme.lower() not in ("rex", "stix"):
        r.fail(f"scheme must be reX or stiX, got {scheme!r}", "scheme")
    scheme = "reX" if scheme.lower() == "rex" else "stiX"

    tpe = r.section(doc, "tpe", {"area_pi", "area_rad"})
    stim = r.section(doc, "stim", {"area_rad"})
    sweep = r.section(doc, "sweep", {"areas_pi"})
    dsweep = r.section(doc, "delay_sweep", {"delays_ps", "tpe_area_pi"})
    mp = r.section(doc, "map", {"areas_pi", "delays_ps"})
    out = r.section(doc, "output", {"dir", "gnuplot"})
    integ = r.section(doc, "integration", {"step_ps"})

    base = RunConfig()
    cfg = dict(system=system, preset=preset, scheme=scheme)
    if "area_pi" in tpe:
        cfg["tpe_area_pi"] = r.number(tpe["area_pi"], "tpe.area_pi", optional=True)
    if "area_rad" in tpe:
        cfg["tpe_area_rad"] = r.number(tpe["area_rad"], "tpe.area_rad", optional=True)
    for key in ("tpe_area_pi", "tpe_area_rad"):
        if cfg.get(key) is not None and cfg[key] < 0:
            r.fail("pulse area must be >= 0", f"tpe.{key.split('_', 1)[1]}")
    if "area_rad" in stim:
        cfg["stim_area_rad"] = r.number(stim["area_rad"], "stim.area_rad")
        if cfg["stim_area_rad"] < 0:
            r.fail("pulse area must be >= 0", "stim.area_rad")
    if "areas_pi" in sweep:
        cfg["area_grid"] = r.grid(sweep["areas_pi"], "sweep.areas_pi")
    if "delays_ps" in dsweep:
        cfg["delay_grid"] = r.grid(dsweep["delays_ps"], "delay_sweep.delays_ps")
    if "tpe_area_pi" in dsweep:
        cfg["delay_tpe_area_pi"] = r.number(dsweep["tpe_area_pi"], "delay_sweep.tpe_area_pi")
    if "areas_pi" in mp:
        cfg["map_area_grid"] = r.grid(mp["areas_pi"], "map.areas_pi")
    if "delays_ps" in mp:
        cfg["map_delay_grid"] = r.grid(mp["delays_ps"], "map.delays_ps")
    for grid_key in ("area_grid", "map_area_grid"):
        if min(cfg.get(grid_key, getattr(base, grid_key))) < 0:
            r.fail("areas must be >= 0", "areas_pi")
    if "mode" in doc:
        if doc["mode"] not in ("full", "qd_only"):
            r.fail(f"mode must be full or qd_only, got {doc['mode']!r}", "mode")
        cfg["mode"] = doc["mode"]
    if "jobs" in doc:
        cfg["jobs"] = r.number(doc["jobs"], "jobs", integer=True, positive=True)
    if "dir" in out:
        if not isinstance(out["dir"], str) or not out["dir"]:
            r.fail("output directory must be a non-empty string", "output.dir")
        cfg["out_dir"] = out["dir"]
    if "gnuplot" in out:
        if not isinstance(out["gnuplot"], bool):
            r.fail("expected true or false", "output.gnuplot")
        cfg["gnuplot"] = out["gnuplot"]
    if "step_ps" in integ:
        cfg["step_ps"] = r.number(integ["step_ps"], "integration.step_ps", optional=True,
                                  positive=True)
    return RunConfig(**cfg)


def loads_config(text: str, *, preset: str | None = None) -> RunConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    return parse_config(doc, text, preset=preset)


def load_config(path, *, preset: str | None = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return loads_config(text, preset=preset)


def apply_overrides(cfg: RunConfig, *, preset=None, scheme=None, jobs=None, n_max=None,
                    out_dir=None) -> RunConfig:
    """Command-line flags on top of a config."""
    changes = {}
    system = cfg.system
    if preset is not None and preset != cfg.preset:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}", field="preset")
        system = system.replace(**{SYSTEM_KEYS[k]: v for k, v in PRESETS[preset].items()})
        changes["preset"] = preset
    if n_max is not None:
        if n_max < 1:
            raise ConfigError(f"n_max must be >= 1, got {n_max}", field="system.n_max")
        system = system.replace(n_max=n_max)
    if system is not cfg.system:
        changes["system"] = system
    if scheme is not None:
        changes["scheme"] = "reX" if scheme.lower() == "rex" else "stiX"
    if jobs is not None:
        if jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {jobs}", field="jobs")
        changes["jobs"] = jobs
    if out_dir is not None:
        changes["out_dir"] = out_dir
    return replace(cfg, **changes) if changes else cfg


def config_fields() -> list[str]:
    return [f.name for f in fields(RunConfig)]
