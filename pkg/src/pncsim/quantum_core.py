"""Composite Hilbert space of a four-level quantum dot and two truncated photon modes.

Basis ordering is QD-major, then the H-photon number, then the V-photon
number::

    index = qd * (n_max + 1)**2 + n_H * (n_max + 1) + n_V

with the dot states ordered (g, xH, xV, xx).  Everything is dense; for the
default truncation the composite dimension is 36.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import DomainError

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-8
POSITIVITY_TOL = 1e-8


class QD(IntEnum):
    G = 0
    XH = 1
    XV = 2
    XX = 3

    @classmethod
    def parse(cls, value) -> "QD":
        if isinstance(value, QD):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            for state, name in zip(cls, ("g", "xh", "xv", "xx")):
                if key == name:
                    return state
            raise DomainError(f"unknown quantum-dot state {value!r}")
        return cls(int(value))


# number of electron-hole pairs carried by each dot state
QD_EXCITATIONS = np.array([0, 1, 1, 2])

SUBSYSTEMS = ("QD", "photonH", "photonV")


@dataclass(frozen=True)
class HilbertSpace:
    """QD (x) photon-H (x) photon-V with Fock states 0..n_max per mode.

    ``with_photons=False`` collapses both photon factors to dimension one,
    which is the dot-only reduction used for the fast approximations.
    """

    n_max: int = 2
    with_photons: bool = True

    def __post_init__(self):
        if self.with_photons and (not isinstance(self.n_max, (int, np.integer)) or self.n_max < 1):
            raise DomainError(f"n_max must be an integer >= 1, got {self.n_max!r}")

    @classmethod
    def qd_only(cls) -> "HilbertSpace":
        return cls(n_max=0, with_photons=False)

    @property
    def dim_qd(self) -> int:
        return 4

    @property
    def dim_photon(self) -> int:
        return self.n_max + 1 if self.with_photons else 1

    @property
    def dim_total(self) -> int:
        return self.dim_qd * self.dim_photon**2

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.dim_qd, self.dim_photon, self.dim_photon)

    def basis_index(self, qd_state, n_h: int, n_v: int) -> int:
        m = self.dim_photon
        if not (0 <= n_h < m and 0 <= n_v < m):
            raise DomainError(f"Fock numbers ({n_h}, {n_v}) outside 0..{m - 1}")
        return int(QD.parse(qd_state)) * m * m + n_h * m + n_v

    def basis_labels(self) -> list[tuple[QD, int, int]]:
        m = self.dim_photon
        return [(QD(q), i, j) for q in range(4) for i in range(m) for j in range(m)]

    def excitation_numbers(self) -> np.ndarray:
        """Total excitation number (dot pairs + photons) of every basis state."""
        q, i, j = np.meshgrid(np.arange(4), np.arange(self.dim_photon),
                              np.arange(self.dim_photon), indexing="ij")
        return (QD_EXCITATIONS[q] + i + j).ravel()

    def _factor_dim(self, subsystem: str) -> int:
        if subsystem not in SUBSYSTEMS:
            raise DomainError(f"unknown subsystem {subsystem!r}; expected one of {SUBSYSTEMS}")
        return self.dim_qd if subsystem == "QD" else self.dim_photon

    def embed(self, op, subsystem: str) -> np.ndarray:
        """Lift a single-factor operator to the composite space."""
        op = np.asarray(op)
        d = self._factor_dim(subsystem)
        if op.shape != (d, d):
            raise DomainError(f"operator of shape {op.shape} does not act on {subsystem} (dim {d})")
        eye_qd = np.eye(self.dim_qd)
        eye_ph = np.eye(self.dim_photon)
        factors = {"QD": eye_qd, "photonH": eye_ph, "photonV": eye_ph}
        factors[subsystem] = op
        return np.kron(np.kron(factors["QD"], factors["photonH"]), factors["photonV"])

    def qd_operator(self, bra_state, ket_state) -> np.ndarray:
        """|bra_state><ket_state| on the dot, identity on the photons."""
        unit = np.zeros((4, 4))
        unit[QD.parse(bra_state), QD.parse(ket_state)] = 1.0
        return self.embed(unit, "QD")

    def annihilation(self, mode: str) -> np.ndarray:
        subsystem = {"H": "photonH", "V": "photonV"}[mode]
        a = np.diag(np.sqrt(np.arange(1, self.dim_photon, dtype=float)), 1)
        return self.embed(a, subsystem)

    def number(self, mode: str) -> np.ndarray:
        a = self.annihilation(mode)
        return a.T @ a

    def basis_state(self, qd_state, n_h: int = 0, n_v: int = 0) -> np.ndarray:
        ket = np.zeros(self.dim_total, dtype=complex)
        ket[self.basis_index(qd_state, n_h, n_v)] = 1.0
        return ket

    def ground_state(self) -> np.ndarray:
        """Density matrix of |g, 0_H, 0_V>."""
        rho = np.zeros((self.dim_total, self.dim_total), dtype=complex)
        rho[0, 0] = 1.0
        return rho


def partial_trace(rho, space: HilbertSpace, keep: str) -> np.ndarray:
    """Reduced density matrix of one factor, tracing out the other two."""
    if keep not in SUBSYSTEMS:
        raise DomainError(f"unknown subsystem {keep!r}")
    rho = np.asarray(rho)
    d = space.dim_total
    if rho.shape != (d, d):
        raise DomainError(f"density matrix shape {rho.shape} does not match dimension {d}")
    t = rho.reshape(space.shape + space.shape)
    if keep == "QD":
        return np.einsum("aijbij->ab", t)
    if keep == "photonH":
        return np.einsum("aijakj->ik", t)
    return np.einsum("aijaik->jk", t)


@dataclass(frozen=True)
class StateDiagnostics:
    trace_error: float
    hermiticity_error: float
    min_eigenvalue: float

    def ok(self, trace_tol=TRACE_TOL, herm_tol=HERMITICITY_TOL, pos_tol=POSITIVITY_TOL) -> bool:
        return (self.trace_error < trace_tol and self.hermiticity_error < herm_tol
                and self.min_eigenvalue > -pos_tol)


def state_diagnostics(rho) -> StateDiagnostics:
    rho = np.asarray(rho)
    if not np.all(np.isfinite(rho)):
        return StateDiagnostics(np.inf, np.inf, -np.inf)
    herm = float(np.max(np.abs(rho - rho.conj().T))) if rho.size else 0.0
    evals = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    return StateDiagnostics(abs(float(np.trace(rho).real) - 1.0), herm, float(evals[0]))


def validate_density_matrix(rho) -> None:
    """Raise DomainError unless ``rho`` is Hermitian, unit-trace and PSD."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DomainError(f"density matrix must be square, got shape {rho.shape}")
    diag = state_diagnostics(rho)
    if not diag.ok():
        raise DomainError(f"invalid density matrix: {diag}")


def cauchy_schwarz_gap(photon_rho) -> float:
    """rho00*rho11 - |rho01|^2 of a reduced photon matrix; >= 0 for valid states."""
    p = np.asarray(photon_rho)
    return float(p[0, 0].real * p[1, 1].real - abs(p[0, 1]) ** 2)
