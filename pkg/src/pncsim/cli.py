"""Command-line front end: simulations, calibrations, sweeps, maps and data analysis.

Exit codes: 0 success, 1 analysis or calibration failure, 2 configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import fitting, io as aio
from .analysis.jones import phase_shifter_jones
from .analysis.visibility import visibility_from_trace
from .config import SCHEMA_VERSION, RunConfig, apply_overrides, check_schema_version, load_config
from .dynamics import IntegrationGrid, evolve, integrated_metrics, write_trajectory_csv
from .errors import ConfigError, DomainError, NumericalFailure, PNCSimError
from .model import stim_pulse, tpe_pulse
from .sweeps import calibrate_pi, map_area_delay, sweep_delay, sweep_tpe_area

log = logging.getLogger("pncsim")

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
MAP_METRICS = ("occ_calc", "pnc_calc", "v_calc", "xh_yield_qdonly", "pnc_qdonly")


def _complex_json(m) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def write_json(path: Path, payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_summary(path) -> dict:
    """Read a JSON report, rejecting unknown major schema versions."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    check_schema_version(doc.get("schema_version"))
    return doc


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc.strerror}",
                          field="output.dir") from None
    return out


def _grid(cfg: RunConfig) -> IntegrationGrid:
    return IntegrationGrid(step=cfg.step_ps)


def _gnuplot(path: Path, data: str, xcol: int, ycols: dict, xlabel: str) -> None:
    plots = ", ".join(f"'{data}' using {xcol}:{c} with linespoints title '{t}'"
                      for t, c in ycols.items())
    path.write_text(
        "set datafile separator ','\n"
        "set key autotitle columnhead\n"
        f"set xlabel '{xlabel}'\n"
        f"plot {plots}\n", encoding="utf-8")


# -- simulation commands --------------------------------------------------------

def cmd_simulate(cfg: RunConfig) -> int:
    out = _out(cfg)
    params = cfg.system
    cal = None
    if cfg.tpe_area_rad is not None:
        area = cfg.tpe_area_rad
    else:
        cal = calibrate_pi(params, grid=_grid(cfg))
        area = cal.nominal(cfg.tpe_area_pi)
    tpe = tpe_pulse(params, area)
    stim = stim_pulse(params, cfg.stim_area_rad) if cfg.scheme == "stiX" else None
    traj = evolve(params, tpe, stim, _grid(cfg))
    metrics = integrated_metrics(traj, params)
    write_trajectory_csv(traj, out / "trajectory.csv")
    write_json(out / "summary.json", {
        "scheme": cfg.scheme,
        "tpe_area_rad": area,
        "metrics": metrics.to_dict(),
        "calibration": cal.to_dict() if cal else None,
        "diagnostics": {
            "max_trace_error": float(traj.trace_error.max()),
            "max_hermiticity_error": float(traj.hermiticity_error.max()),
            "min_eigenvalue": float(traj.min_eigenvalue.min()),
            "min_cauchy_schwarz_gap": traj.min_cs_gap,
            "t_end_ps": float(traj.times[-1]),
            "samples": int(traj.times.size),
        },
        "config": cfg.to_dict(),
    })
    if cfg.gnuplot:
        _gnuplot(out / "trajectory.gp", "trajectory.csv", 1,
                 {"XX": 5, "xH": 3, "|rho01|": 9}, "t (ps)")
    print(f"occ_calc={metrics.occ_calc:.6g} pnc_calc={metrics.pnc_calc:.6g} "
          f"v_calc={metrics.v_calc:.6g} -> {out}")
    return EXIT_OK


def cmd_calibrate(cfg: RunConfig) -> int:
    out = _out(cfg)
    cal = calibrate_pi(cfg.system, grid=_grid(cfg))
    write_json(out / "calibration.json", {"calibration": cal.to_dict(), "config": cfg.to_dict()})
    print(f"pi_area={cal.pi_area:.6g} rad ({cal.pi_area / math.pi:.4f} pi), "
          f"half_pi_area={cal.half_pi_area:.6g} rad")
    return EXIT_OK


def _emit(result, out: Path, stem: str, cfg: RunConfig, xlabel: str) -> None:
    result.write_csv(out / f"{stem}.csv")
    sidecar = result.sidecar()
    sidecar["config"] = cfg.to_dict()
    (out / f"{stem}.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    if cfg.gnuplot:
        cols = {name: i + 1 for i, name in enumerate(result.header)}
        _gnuplot(out / f"{stem}.gp", f"{stem}.csv", 1,
                 {k: cols[k] for k in ("occ_calc", "pnc_calc")}, xlabel)


def cmd_sweep_area(cfg: RunConfig) -> int:
    out = _out(cfg)
    res = sweep_tpe_area(cfg.system, cfg.area_grid, cfg.scheme, jobs=cfg.jobs,
                         integration=_grid(cfg),
                         calibration=calibrate_pi(cfg.system, grid=_grid(cfg)))
    _emit(res, out, f"sweep_area_{cfg.scheme}", cfg, "TPE area (pi)")
    print(f"{len(res.rows)} points -> {out}")
    return EXIT_OK


def cmd_sweep_delay(cfg: RunConfig) -> int:
    out = _out(cfg)
    res = sweep_delay(cfg.system, cfg.delay_grid, cfg.delay_tpe_area_pi, cfg.mode, jobs=cfg.jobs,
                      integration=_grid(cfg),
                      calibration=calibrate_pi(cfg.system, grid=_grid(cfg)))
    _emit(res, out, f"sweep_delay_{cfg.mode}", cfg, "delay (ps)")
    print(f"{len(res.rows)} points -> {out}")
    return EXIT_OK


def cmd_map(cfg: RunConfig) -> int:
    out = _out(cfg)
    res = map_area_delay(cfg.system, cfg.map_area_grid, cfg.map_delay_grid, cfg.mode,
                         jobs=cfg.jobs, integration=_grid(cfg),
                         calibration=calibrate_pi(cfg.system, grid=_grid(cfg)))
    stem = f"map_{cfg.mode}"
    _emit(res, out, stem, cfg, "TPE area (pi)")
    for metric in MAP_METRICS:
        res.write_matrix(out / f"{stem}_{metric}.dat", metric)
    if cfg.gnuplot:
        (out / f"{stem}.gp").write_text(
            "set xlabel 'TPE area (pi)'\nset ylabel 'delay (ps)'\nset view map\n"
            f"splot '{stem}.csv' using 2:1:4 every ::1 with image\n", encoding="utf-8")
    print(f"{len(res.rows)} cells -> {out}")
    return EXIT_OK


# -- analysis -------------------------------------------------------------------

def cmd_analyze(args, out: Path) -> int:
    kind = args.analysis
    inputs = {k: v for k, v in vars(args).items()
              if k not in ("func", "command", "analysis") and v is not None}
    if kind == "visibility":
        report = visibility_from_trace(aio.read_trace_csv(args.input)).to_dict()
    elif kind == "lambda":
        if args.dataset:
            pts, v_hom = aio.bundled_lambda_dataset(args.dataset)
            if args.v_hom is not None:
                v_hom = args.v_hom
        else:
            if not args.input or args.v_hom is None:
                raise ConfigError("lambda needs --input and --v-hom, or --dataset", field="input")
            pts, v_hom = aio.read_lambda_csv(args.input), args.v_hom
        fit = fitting.fit_lambda(pts, v_hom)
        report = {**fit.to_dict(), "v_hom": v_hom}
        if args.rho11 is not None:
            report["pnc_exp"] = fitting.pnc_exp(fit.lam, args.rho11)
    elif kind == "blinking":
        report = fitting.fit_blinking(aio.read_blinking_csv(args.input)).to_dict()
    elif kind == "g2":
        hist = aio.read_coincidence_csv(args.input)
        report = fitting.fit_coincidence_peaks(hist, args.spacing, args.window).to_dict()
        if args.orthogonal:
            orth = aio.read_coincidence_csv(args.orthogonal)
            report["hom_visibility"] = fitting.hom_visibility(hist, orth, args.spacing, args.window)
    elif kind == "jones":
        m = phase_shifter_jones(args.theta)
        report = {"theta": args.theta, "matrix": _complex_json(m),
                  "matrix_str": [[f"{z.real:+.12g}{z.imag:+.12g}j" for z in row] for row in m]}
    else:  # argparse restricts the choices
        raise ConfigError(f"unknown analysis {kind!r}")
    path = out / f"analysis_{kind}.json"
    write_json(path, {"analysis": kind, "inputs": inputs, "report": report,
                      "provenance": {"package": "pncsim", "version": __version__}})
    print(json.dumps(report, default=str))
    return EXIT_OK


# -- argument parsing -----------------------------------------------------------

SIM_COMMANDS = {
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "sweep-area": cmd_sweep_area,
    "sweep-delay": cmd_sweep_delay,
    "map": cmd_map,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--scheme", choices=("rex", "stix", "reX", "stiX"))
    common.add_argument("--preset", choices=("table1", "experiment"))
    common.add_argument("--jobs", type=int, metavar="N", help="worker processes for sweeps")
    common.add_argument("--n-max", type=int, metavar="K", dest="n_max",
                        help="Fock truncation per polarization mode")
    common.add_argument("--mode", choices=("full", "qd_only"),
                        help="full dot-cavity model or the fast dot-only model")
    common.add_argument("--gnuplot", action="store_true", help="also write gnuplot scripts")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="pncsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"simulate": "single time evolution: trajectory.csv and summary.json",
             "calibrate": "find the pi and pi/2 TPE areas",
             "sweep-area": "scan the TPE area in units of calibrated pi",
             "sweep-delay": "scan the stim delay at a fixed TPE area",
             "map": "2D scan over TPE area and stim delay"}
    for name in SIM_COMMANDS:
        sub.add_parser(name, parents=[common], help=helps.get(name))

    analyze = sub.add_parser("analyze", help="measurement data analysis")
    asub = analyze.add_subparsers(dest="analysis", required=True)
    acommon = argparse.ArgumentParser(add_help=False)
    acommon.add_argument("--out", metavar="DIR", default=".")
    p = asub.add_parser("visibility", parents=[acommon],
                       help="fringe visibility from a two-detector trace")
    p.add_argument("--input", required=True, help="CSV with t_s, counts1, counts2")
    p = asub.add_parser("lambda", parents=[acommon],
                       help="purity fraction from (rho00, v) points")
    p.add_argument("--input", help="CSV with rho00, v")
    p.add_argument("--v-hom", type=float, dest="v_hom")
    p.add_argument("--dataset", choices=sorted(aio.LAMBDA_DATASETS))
    p.add_argument("--rho11", type=float, help="also report the PNC estimate at this rho11")
    p = asub.add_parser("blinking", parents=[acommon],
                       help="blinking fit and quantum efficiency")
    p.add_argument("--input", required=True, help="CSV with delay_ms, g2")
    p = asub.add_parser("g2", parents=[acommon],
                       help="zero-delay peak ratio and HOM visibility")
    p.add_argument("--input", required=True, help="CSV with delay_ns, counts")
    p.add_argument("--orthogonal", help="cross-polarised histogram for the HOM visibility")
    p.add_argument("--spacing", type=float, default=12.5, help="peak spacing, ns")
    p.add_argument("--window", type=float, default=8.0, help="fit window per peak, ns")
    p = asub.add_parser("jones", parents=[acommon],
                       help="Jones matrix of the wave-plate phase shifter")
    p.add_argument("--theta", type=float, required=True, help="half-wave plate angle, rad")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "analyze":
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            return cmd_analyze(args, out)
        cfg = load_config(args.config, preset=args.preset) if args.config else RunConfig()
        cfg = apply_overrides(cfg, preset=args.preset, scheme=args.scheme, jobs=args.jobs,
                              n_max=args.n_max, out_dir=args.out)
        if args.mode:
            cfg = replace(cfg, mode=args.mode)
        if args.gnuplot:
            cfg = replace(cfg, gnuplot=True)
        return SIM_COMMANDS[args.command](cfg)
    except (ConfigError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PNCSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
