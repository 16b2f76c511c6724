"""Time evolution of the dot-cavity density matrix and time-integrated figures of merit.

Inside pulse windows the master equation is stepped with classic fixed-step
RK4.  Between and after pulses the generator is static and the state is
propagated exactly (see :mod:`pncsim.propagation`), which is what makes the
nanosecond-long biexciton tail affordable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError, NumericalFailure
from .model import PulseParams, SystemParams, build_model
from .propagation import Functional
from .quantum_core import (HERMITICITY_TOL, POSITIVITY_TOL, QD, TRACE_TOL, HilbertSpace,
                           state_diagnostics)

TRAJECTORY_COLUMNS = ("t_ps", "pop_g", "pop_xH", "pop_xV", "pop_xx", "ph_p00", "ph_p11",
                      "ph_pnn", "pnc_abs", "flux_H", "coh_gxH")

# (duration after the start of a free segment, sample spacing), ps
DEFAULT_TAIL_SCHEDULE = ((40.0, 0.02), (400.0, 0.2), (4000.0, 1.0), (math.inf, 5.0))


@dataclass(frozen=True)
class IntegrationGrid:
    step: float | None = None          # RK4 step inside pulse windows; None -> min(sigma) / 64
    checkpoint_every: int = 50
    excited_threshold: float = 1e-6
    tail_max: float = 50_000.0         # longest free evolution after the last pulse, ps
    tail_schedule: tuple = DEFAULT_TAIL_SCHEDULE
    stop_after_pulses: bool = False
    validate: bool = True

    def rk4_step(self, sigma_min: float) -> float:
        h = sigma_min / 64 if self.step is None else self.step
        if not h > 0:
            raise ConfigError(f"integration step must be positive, got {h}", field="step")
        if h > sigma_min / 10:
            raise ConfigError(
                f"integration step {h:g} ps is coarser than sigma_min/10 = {sigma_min / 10:g} ps",
                field="step")
        return h


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    qd_populations: np.ndarray         # (n, 4): g, xH, xV, xx
    photon_p00: np.ndarray
    photon_p11: np.ndarray
    photon_pnn: np.ndarray
    photon_p01: np.ndarray             # complex
    qd_coherence_gxh: np.ndarray       # complex rho^QD_{g,xH}
    qd_coherence_gxx: np.ndarray       # complex rho^QD_{g,xx}
    trace_error: np.ndarray
    checkpoint_times: np.ndarray
    hermiticity_error: np.ndarray      # at checkpoints
    min_eigenvalue: np.ndarray         # at checkpoints
    min_cs_gap: float                  # min over samples of rho00*rho11 - |rho01|^2
    kappa: float
    final_state: np.ndarray = field(repr=False)
    qd_only: bool = False
    rk4_steps: int = 0

    @property
    def pnc_instant(self) -> np.ndarray:
        return np.abs(self.photon_p01)

    @property
    def flux_h(self) -> np.ndarray:
        return self.kappa * self.photon_p11

    @property
    def qd_coherence_gx(self) -> np.ndarray:
        return np.abs(self.qd_coherence_gxh)

    @property
    def excited_population(self) -> np.ndarray:
        return 1.0 - self.qd_populations[:, 0] if self.qd_only else 1.0 - self._ground00

    _ground00: np.ndarray = field(default=None, repr=False)

    def rows(self):
        pops = self.qd_populations
        for i, t in enumerate(self.times):
            yield (t, *pops[i], self.photon_p00[i], self.photon_p11[i], self.photon_pnn[i],
                   abs(self.photon_p01[i]), self.kappa * self.photon_p11[i],
                   abs(self.qd_coherence_gxh[i]))


@dataclass(frozen=True)
class IntegratedMetrics:
    occ_calc: float
    pnc_calc: float
    v_calc: float
    xh_yield_qdonly: float
    pnc_qdonly: float
    v_defined: bool = True

    def to_dict(self) -> dict:
        return {"occ_calc": self.occ_calc, "pnc_calc": self.pnc_calc, "v_calc": self.v_calc,
                "xh_yield_qdonly": self.xh_yield_qdonly, "pnc_qdonly": self.pnc_qdonly,
                "v_defined": self.v_defined}


# -- observables ------------------------------------------------------------

def _observables(space: HilbertSpace) -> list[Functional]:
    d, m = space.dim_total, space.dim_photon
    flat = lambda r, c: r * d + c  # noqa: E731
    idx = space.basis_index

    def qd_element(a, b):
        return [flat(idx(a, i, j), idx(b, i, j)) for i in range(m) for j in range(m)]

    def ph_element(n1, n2):
        if not space.with_photons:
            return []
        return [flat(idx(q, n1, j), idx(q, n2, j)) for q in QD for j in range(m)]

    nmax = space.n_max
    return [
        Functional("pop_g", qd_element(QD.G, QD.G)),
        Functional("pop_xH", qd_element(QD.XH, QD.XH)),
        Functional("pop_xV", qd_element(QD.XV, QD.XV)),
        Functional("pop_xx", qd_element(QD.XX, QD.XX)),
        Functional("ph_p00", ph_element(0, 0)),
        Functional("ph_p11", ph_element(1, 1)),
        Functional("ph_pnn", ph_element(nmax, nmax)),
        Functional("ph_p01", ph_element(0, 1)),
        Functional("coh_gxH", qd_element(QD.G, QD.XH)),
        Functional("coh_gxx", qd_element(QD.G, QD.XX)),
        Functional("trace", [flat(i, i) for i in range(d)]),
        Functional("ground00", [0]),
    ]


class _Sampler:
    """Vectorised evaluation of all observables on vec(rho)."""

    def __init__(self, functionals):
        self.functionals = functionals
        nonempty = [f for f in functionals if f.index.size]
        self._slots = [i for i, f in enumerate(functionals) if f.index.size]
        self._index = np.concatenate([f.index for f in nonempty])
        self._starts = np.cumsum([0] + [f.index.size for f in nonempty[:-1]])

    def __call__(self, y: np.ndarray) -> np.ndarray:
        out = np.zeros(len(self.functionals), dtype=complex)
        out[self._slots] = np.add.reduceat(y[self._index], self._starts)
        return out


def _free_grid(duration: float, schedule) -> np.ndarray:
    """Sample times in (0, duration] following the piecewise-uniform schedule."""
    pieces, start = [], 0.0
    for until, step in schedule:
        stop = min(until, duration)
        if stop > start:
            n = max(1, int(math.ceil((stop - start) / step - 1e-9)))
            pieces.append(start + (stop - start) * np.arange(1, n + 1) / n)
            start = stop
        if start >= duration:
            break
    return np.concatenate(pieces) if pieces else np.zeros(0)


def _pulse_windows(pulses) -> list[list[float]]:
    spans = sorted(p.window for p in pulses if p is not None and p.active)
    merged: list[list[float]] = []
    for a, b in spans:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return merged


def rk4_step(f, t: float, y, h: float):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + (h / 2) * k1)
    k3 = f(t + h / 2, y + (h / 2) * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


class _Recorder:
    def __init__(self, sampler: _Sampler, grid: IntegrationGrid):
        self.sampler = sampler
        self.grid = grid
        self.times: list = []
        self.values: list = []
        self.cp_times: list = []
        self.cp_herm: list = []
        self.cp_mineig: list = []

    def sample(self, t: float, y: np.ndarray):
        self.times.append(t)
        self.values.append(self.sampler(y))

    def extend(self, times, values):
        self.times.extend(times)
        self.values.extend(values.T)

    def checkpoint(self, t: float, rho: np.ndarray):
        diag = state_diagnostics(rho)
        self.cp_times.append(t)
        self.cp_herm.append(diag.hermiticity_error)
        self.cp_mineig.append(diag.min_eigenvalue)
        if self.grid.validate:
            if not diag.trace_error < TRACE_TOL:
                raise NumericalFailure(f"trace error {diag.trace_error:.3g} exceeds {TRACE_TOL}", t)
            if not diag.hermiticity_error < HERMITICITY_TOL:
                raise NumericalFailure(
                    f"hermiticity error {diag.hermiticity_error:.3g} exceeds {HERMITICITY_TOL}", t)
            if not diag.min_eigenvalue > -POSITIVITY_TOL:
                raise NumericalFailure(f"negative eigenvalue {diag.min_eigenvalue:.3g}", t)


def evolve(params: SystemParams, tpe: PulseParams | None, stim: PulseParams | None = None,
           grid: IntegrationGrid | None = None, *, qd_only: bool = False,
           rho0: np.ndarray | None = None) -> TrajectoryRecord:
    """Evolve from the ground state through the pulses and the emission tail.

    ``stim=None`` is the relaxation (reX) scheme.  ``qd_only=True`` drops the
    photon modes and evolves the bare four-level dot.
    """
    grid = grid or IntegrationGrid()
    model = build_model(params, qd_only=qd_only)
    space = model.space
    d = space.dim_total
    pulses = [p for p in (tpe, stim) if p is not None]
    active = [p for p in pulses if p.active]
    h_max = grid.rk4_step(min(p.sigma for p in pulses)) if pulses else 0.0
    windows = _pulse_windows(active)
    if pulses:
        t0 = min(p.window[0] for p in pulses)
    else:
        t0 = 0.0

    sampler = _Sampler(_observables(space))
    rec = _Recorder(sampler, grid)
    rho = space.ground_state() if rho0 is None else np.array(rho0, dtype=complex)
    t = t0
    rec.sample(t, rho.ravel())
    rec.checkpoint(t, rho)
    rk4_steps = 0

    def f(tt, r):
        return model.rhs(tt, r, tpe, stim)

    def free(rho, t, duration, until_decayed=False):
        prop = model.static_propagator()
        y = rho.ravel()
        taus = _free_grid(duration, grid.tail_schedule)
        if until_decayed:
            taus = _trim_decayed(prop, y, taus, sampler.functionals[-1], grid.excited_threshold)
        if taus.size == 0:
            return rho, t
        vals = prop.series(y, taus, sampler.functionals)
        rec.extend(t + taus, vals)
        for j in range(grid.checkpoint_every - 1, taus.size, grid.checkpoint_every):
            rec.checkpoint(t + taus[j], prop.propagate(y, taus[j]).reshape(d, d))
        rho = prop.propagate(y, taus[-1]).reshape(d, d)
        if taus.size % grid.checkpoint_every:
            rec.checkpoint(t + taus[-1], rho)
        return rho, t + taus[-1]

    for a, b in windows:
        if a > t:
            rho, t = free(rho, t, a - t)
            t = a
        n = max(1, int(math.ceil((b - t) / h_max - 1e-9)))
        h = (b - t) / n
        start = t
        for i in range(1, n + 1):
            rho = rk4_step(f, t, rho, h)
            t = start + i * h
            rec.sample(t, rho.ravel())
            if i % grid.checkpoint_every == 0 or i == n:
                rec.checkpoint(t, rho)
        rk4_steps += n

    if not grid.stop_after_pulses:
        rho, t = free(rho, t, grid.tail_max, until_decayed=True)

    vals = np.array(rec.values).T
    by_name = {fn.name: vals[i] for i, fn in enumerate(sampler.functionals)}
    p00, p11, p01 = by_name["ph_p00"].real, by_name["ph_p11"].real, by_name["ph_p01"]
    if not space.with_photons:
        p00 = by_name["trace"].real
    trace = by_name["trace"].real
    if grid.validate and np.max(np.abs(trace - 1.0)) >= TRACE_TOL:
        bad = int(np.argmax(np.abs(trace - 1.0)))
        raise NumericalFailure(f"trace error {abs(trace[bad] - 1):.3g}", rec.times[bad])
    record = TrajectoryRecord(
        times=np.array(rec.times),
        qd_populations=np.stack([by_name[k].real for k in ("pop_g", "pop_xH", "pop_xV", "pop_xx")],
                                axis=1),
        photon_p00=p00, photon_p11=p11, photon_pnn=by_name["ph_pnn"].real, photon_p01=p01,
        qd_coherence_gxh=by_name["coh_gxH"], qd_coherence_gxx=by_name["coh_gxx"],
        trace_error=np.abs(trace - 1.0),
        checkpoint_times=np.array(rec.cp_times), hermiticity_error=np.array(rec.cp_herm),
        min_eigenvalue=np.array(rec.cp_mineig),
        min_cs_gap=float(np.min(p00 * p11 - np.abs(p01) ** 2)),
        kappa=0.0 if qd_only else params.kappa, final_state=rho, qd_only=qd_only,
        rk4_steps=rk4_steps, _ground00=by_name["ground00"].real,
    )
    return record


def _trim_decayed(prop, y, taus, ground_fn, threshold) -> np.ndarray:
    """Cut the tail grid once the excited population stays below ``threshold``."""
    if taus.size == 0:
        return taus
    probe_idx = np.unique(np.concatenate([np.arange(0, taus.size, 25), [taus.size - 1]]))
    excited = 1.0 - prop.series(y, taus[probe_idx], [ground_fn])[0].real
    above = np.nonzero(excited >= threshold)[0]
    if above.size == 0:
        return taus[: probe_idx[0] + 1]
    last = above[-1]
    if last + 1 >= probe_idx.size:
        return taus
    return taus[: probe_idx[last + 1] + 1]


def integrated_metrics(traj: TrajectoryRecord, params: SystemParams) -> IntegratedMetrics:
    """Time-integrated occupation, PNC and visibility, plus the dot-only estimates.

    Integrals are trapezoidal over the recorded grid and scaled by the
    cavity loss rate, so ``occ_calc`` is the mean number of H photons leaving
    the cavity per excitation cycle.
    """
    t = traj.times
    kappa = params.kappa
    occ = kappa * float(np.trapezoid(traj.photon_p11, t)) if not traj.qd_only else 0.0
    pnc = kappa * float(np.trapezoid(np.abs(traj.photon_p01), t)) if not traj.qd_only else 0.0
    xh = params.gamma * float(np.trapezoid(np.abs(traj.qd_populations[:, 1]), t))
    pnc_qd = 0.5 * params.gamma * float(np.trapezoid(np.abs(traj.qd_coherence_gxh), t))
    if occ < 1e-12:
        return IntegratedMetrics(max(occ, 0.0), pnc, 0.0, xh, pnc_qd, v_defined=False)
    return IntegratedMetrics(occ, pnc, pnc * pnc / occ, xh, pnc_qd)


def write_trajectory_csv(traj: TrajectoryRecord, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAJECTORY_COLUMNS)
        for row in traj.rows():
            writer.writerow([repr(float(v)) for v in row])


def rhs_oracle_check(params: SystemParams, rho0, t_span, step: float = 0.002) -> float:
    """Max deviation between RK4 stepping and expm of the dense Liouvillian.

    Pulses are off, so the generator is time independent.  The deviation is
    relative to the largest entry of the exact final state.
    """
    model = build_model(params)
    rho0 = np.asarray(rho0, dtype=complex)
    t_a, t_b = t_span
    n = max(1, int(math.ceil((t_b - t_a) / step - 1e-9)))
    h = (t_b - t_a) / n
    rho = rho0.copy()
    for i in range(n):
        rho = rk4_step(lambda tt, r: model.rhs(tt, r), t_a + i * h, rho, h)
    exact = (sla.expm(model.liouvillian() * (t_b - t_a)) @ rho0.ravel()).reshape(rho.shape)
    scale = np.max(np.abs(exact))
    if scale == 0:
        return float(np.max(np.abs(rho)))
    return float(np.max(np.abs(rho - exact)) / scale)
