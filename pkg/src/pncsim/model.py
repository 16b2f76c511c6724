"""Rotating-frame Hamiltonian, Gaussian pulses and Lindblad losses.

Energies are in meV, times in ps and rates in 1/ps.  Frequencies are kept
as energies (hbar*omega) throughout and divided by ``HBAR`` only where a
phase or a commutator is formed.

Phonons are not modelled.  An optional phenomenological pure-dephasing rate
on the excited dot states stands in for them; it defaults to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from enum import Enum
from functools import lru_cache

import numpy as np
import scipy.sparse as sps

from .errors import DomainError
from .quantum_core import QD, HilbertSpace

HBAR = 0.6582119569  # meV ps
FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
PULSE_WINDOW_SIGMAS = 8.0


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters (defaults: the reference parameter table) plus numerical controls."""

    delta_cx: float = 0.0        # cavity - exciton detuning, meV
    delta_xl: float = 2.0        # exciton - TPE laser detuning, meV
    delta_stim: float = -2.0     # stim laser - TPE laser detuning (signed), meV
    e_b: float = 4.0             # biexciton binding energy, meV
    g_coupling: float = 0.05     # dot-cavity coupling hbar*g, meV
    kappa: float = 0.577         # cavity loss rate, 1/ps
    gamma: float = 0.001         # dot loss rate, 1/ps
    fwhm_tpe: float = 4.5        # ps
    fwhm_stim: float = 3.0       # ps
    delay: float = 15.0          # stim delay after the TPE pulse, ps
    temperature: float = 1.5     # K; inert without phonons
    n_max: int = 2
    dephasing_rate: float = 0.0  # 1/ps, phenomenological
    resonant_tpe: bool = True

    def __post_init__(self):
        for name in ("kappa", "gamma", "dephasing_rate"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise DomainError(f"{name} must be a finite rate >= 0, got {value!r}")
        for name in ("fwhm_tpe", "fwhm_stim"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be > 0, got {value!r}")
        if isinstance(self.n_max, bool) or not isinstance(self.n_max, (int, np.integer)) or self.n_max < 1:
            raise DomainError(f"n_max must be an integer >= 1, got {self.n_max!r}")
        if self.resonant_tpe and abs(self.delta_xl - self.e_b / 2) > 1e-12:
            raise DomainError(
                f"resonant TPE requires delta_xl = e_b/2 (got delta_xl={self.delta_xl}, e_b={self.e_b})")

    @property
    def delta_cl(self) -> float:
        return self.delta_cx + self.delta_xl

    @property
    def sigma_tpe(self) -> float:
        return self.fwhm_tpe * FWHM_TO_SIGMA

    @property
    def sigma_stim(self) -> float:
        return self.fwhm_stim * FWHM_TO_SIGMA

    def replace(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class PulseRole(str, Enum):
    TPE = "TPE"
    STIM = "STIM"


@dataclass(frozen=True)
class PulseParams:
    area: float
    sigma: float
    center: float = 0.0
    role: PulseRole = PulseRole.TPE

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"pulse sigma must be > 0, got {self.sigma!r}")
        if not self.area >= 0:
            raise DomainError(f"pulse area must be >= 0, got {self.area!r}")
        object.__setattr__(self, "role", PulseRole(self.role))

    @property
    def window(self) -> tuple[float, float]:
        half = PULSE_WINDOW_SIGMAS * self.sigma
        return (self.center - half, self.center + half)

    @property
    def active(self) -> bool:
        return self.area > 0


def tpe_pulse(params: SystemParams, area: float) -> PulseParams:
    return PulseParams(area=area, sigma=params.sigma_tpe, center=0.0, role=PulseRole.TPE)


def stim_pulse(params: SystemParams, area: float = math.pi, delay: float | None = None) -> PulseParams:
    center = params.delay if delay is None else delay
    return PulseParams(area=area, sigma=params.sigma_stim, center=center, role=PulseRole.STIM)


def envelope(pulse: PulseParams, t):
    """Gaussian Rabi frequency (1/ps) of ``pulse``; exactly zero outside +-8 sigma."""
    t = np.asarray(t, dtype=float)
    x = (t - pulse.center) / pulse.sigma
    value = pulse.area / (math.sqrt(2 * math.pi) * pulse.sigma) * np.exp(-0.5 * x * x)
    value = np.where(np.abs(x) > PULSE_WINDOW_SIGMAS, 0.0, value)
    return value if value.ndim else float(value)


def _envelope_scalar(pulse: PulseParams | None, t: float) -> float:
    if pulse is None or pulse.area == 0.0:
        return 0.0
    x = (t - pulse.center) / pulse.sigma
    if abs(x) > PULSE_WINDOW_SIGMAS:
        return 0.0
    return pulse.area / (math.sqrt(2 * math.pi) * pulse.sigma) * math.exp(-0.5 * x * x)


def lindblad_dissipator(rho, op, rate: float) -> np.ndarray:
    """rate * (O rho O^+ - 1/2 {O^+ O, rho})."""
    if rate < 0:
        raise DomainError(f"dissipation rate must be >= 0, got {rate!r}")
    rho = np.asarray(rho)
    op = np.asarray(op)
    if rho.shape != op.shape:
        raise DomainError(f"operator shape {op.shape} does not match state shape {rho.shape}")
    if rate == 0:
        return np.zeros_like(rho, dtype=complex)
    od = op.conj().T
    n = od @ op
    return rate * (op @ rho @ od - 0.5 * (n @ rho + rho @ n))


class DotCavityModel:
    """Precomputed operators for one parameter set.

    The equation of motion is written as ``A rho + (A rho)^+ + J(rho)`` with
    ``A = -i H / hbar - Gamma / 2`` and ``J`` the jump part of the
    dissipators, which costs a single dense matrix product per evaluation.
    """

    def __init__(self, params: SystemParams, qd_only: bool = False):
        self.params = params
        self.qd_only = qd_only
        self.space = HilbertSpace.qd_only() if qd_only else HilbertSpace(params.n_max)
        sp = self.space
        P = sp.qd_operator

        self.h_static = _static_hamiltonian(params, sp)
        tpe = P(QD.G, QD.XH) + P(QD.G, QD.XV) + P(QD.XH, QD.XX) + P(QD.XV, QD.XX)
        self.tpe_operator = -(HBAR / 2) * (tpe + tpe.T)
        self.stim_operator = -(HBAR / 2) * (P(QD.G, QD.XH) + P(QD.XH, QD.XX))
        self.stim_omega = params.delta_stim / HBAR

        jumps = []
        if not qd_only:
            jumps += [(params.kappa, sp.annihilation("H")), (params.kappa, sp.annihilation("V"))]
        jumps += [(params.gamma, P(QD.G, QD.XH)), (params.gamma, P(QD.G, QD.XV)),
                  (params.gamma, P(QD.XH, QD.XX)), (params.gamma, P(QD.XV, QD.XX))]
        if params.dephasing_rate > 0:
            jumps += [(params.dephasing_rate, P(s, s)) for s in (QD.XH, QD.XV, QD.XX)]
        self.jumps = [(rate, op) for rate, op in jumps if rate > 0]

        d = sp.dim_total
        self.decay = np.zeros((d, d))
        jump_super = sps.csr_matrix((d * d, d * d), dtype=complex)
        for rate, op in self.jumps:
            self.decay += rate * (op.T @ op)
            c = sps.csr_matrix(op)
            jump_super = jump_super + rate * sps.kron(c, c.conj(), format="csr")
        self.jump_superop = jump_super.tocsr()
        self.a_static = -1j / HBAR * self.h_static - 0.5 * self.decay
        self._tpe_gen = -1j / HBAR * self.tpe_operator
        self._stim_gen = -1j / HBAR * self.stim_operator
        self._stim_gen_dag = -1j / HBAR * self.stim_operator.T
        self._propagator = None

    # -- Hamiltonian pieces -------------------------------------------------
    def tpe_hamiltonian(self, pulse: PulseParams, t: float) -> np.ndarray:
        return envelope(pulse, t) * self.tpe_operator

    def stim_hamiltonian(self, pulse: PulseParams, t: float) -> np.ndarray:
        term = envelope(pulse, t) * np.exp(1j * self.stim_omega * t) * self.stim_operator
        return term + term.conj().T

    def hamiltonian(self, t: float, tpe: PulseParams | None = None,
                    stim: PulseParams | None = None) -> np.ndarray:
        h = self.h_static.astype(complex)
        if tpe is not None:
            h = h + self.tpe_hamiltonian(tpe, t)
        if stim is not None:
            h = h + self.stim_hamiltonian(stim, t)
        return h

    # -- equation of motion -------------------------------------------------
    def generator(self, t: float, tpe: PulseParams | None, stim: PulseParams | None) -> np.ndarray:
        a = self.a_static
        f = _envelope_scalar(tpe, t)
        if f:
            a = a + f * self._tpe_gen
        f = _envelope_scalar(stim, t)
        if f:
            phase = complex(math.cos(self.stim_omega * t), math.sin(self.stim_omega * t))
            a = a + (f * phase) * self._stim_gen + (f * phase.conjugate()) * self._stim_gen_dag
        return a

    def rhs(self, t: float, rho: np.ndarray, tpe: PulseParams | None = None,
            stim: PulseParams | None = None) -> np.ndarray:
        m = self.generator(t, tpe, stim) @ rho
        out = m + m.conj().T
        if self.jumps:
            out += (self.jump_superop @ rho.ravel()).reshape(rho.shape)
        return out

    def liouvillian(self) -> np.ndarray:
        """Dense superoperator of the pulse-free dynamics acting on row-major vec(rho)."""
        d = self.space.dim_total
        eye = np.eye(d)
        return (np.kron(self.a_static, eye) + np.kron(eye, self.a_static.conj())
                + self.jump_superop.toarray())

    def static_propagator(self):
        if self._propagator is None:
            from .propagation import BlockSpectralPropagator
            self._propagator = BlockSpectralPropagator.from_model(self)
        return self._propagator


def _static_hamiltonian(params: SystemParams, space: HilbertSpace) -> np.ndarray:
    P = space.qd_operator
    h = params.delta_xl * (P(QD.XH, QD.XH) + P(QD.XV, QD.XV))
    h = h + (2 * params.delta_xl - params.e_b) * P(QD.XX, QD.XX)
    if space.with_photons:
        a_h, a_v = space.annihilation("H"), space.annihilation("V")
        h = h + params.delta_cl * (a_h.T @ a_h + a_v.T @ a_v)
        coupling = params.g_coupling * (a_h @ (P(QD.XH, QD.G) + P(QD.XX, QD.XH))
                                        + a_v @ (P(QD.XV, QD.G) + P(QD.XX, QD.XV)))
        h = h + coupling + coupling.T
    return h


@lru_cache(maxsize=32)
def build_model(params: SystemParams, qd_only: bool = False) -> DotCavityModel:
    return DotCavityModel(params, qd_only=qd_only)


def build_static_hamiltonian(params: SystemParams) -> np.ndarray:
    """Time-independent dot-photon Hamiltonian in the TPE rotating frame (meV)."""
    return build_model(params).h_static.copy()


def build_tpe_hamiltonian(params: SystemParams, pulse: PulseParams, t: float) -> np.ndarray:
    if PulseRole(pulse.role) is not PulseRole.TPE:
        raise DomainError("build_tpe_hamiltonian needs a TPE pulse")
    return build_model(params).tpe_hamiltonian(pulse, t)


def build_stim_hamiltonian(params: SystemParams, pulse: PulseParams, t: float) -> np.ndarray:
    if PulseRole(pulse.role) is not PulseRole.STIM:
        raise DomainError("build_stim_hamiltonian needs a STIM pulse")
    return build_model(params).stim_hamiltonian(pulse, t)


def split_pulses(pulses) -> tuple[PulseParams | None, PulseParams | None]:
    tpe = stim = None
    for p in pulses or ():
        if PulseRole(p.role) is PulseRole.TPE:
            tpe = p
        else:
            stim = p
    return tpe, stim


def total_rhs(params: SystemParams, pulses, t: float, rho) -> np.ndarray:
    """d rho / dt of the full master equation at time ``t``."""
    tpe, stim = split_pulses(pulses)
    return build_model(params).rhs(t, np.asarray(rho, dtype=complex), tpe, stim)
