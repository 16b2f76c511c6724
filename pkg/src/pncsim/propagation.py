"""Exact propagation of the pulse-free master equation.

Without laser driving, the Hamiltonian and every jump operator change the
excitation number of bra and ket by the same amount.  The Liouvillian is
therefore block diagonal in ``k = N(bra) - N(ket)``, and each block is
small enough to diagonalise.  Observables of the form ``sum_i rho[i]``
(reduced-matrix elements, populations) then become finite sums of complex
exponentials, which can be sampled on any time grid or integrated in closed
form.

Blocks whose eigenvector matrix is badly conditioned fall back to explicit
matrix exponentials.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla


@dataclass
class _Block:
    k: int
    index: np.ndarray          # positions in vec(rho)
    generator: np.ndarray
    eigvals: np.ndarray | None = None
    vecs: np.ndarray | None = None
    vecs_inv: np.ndarray | None = None

    @property
    def spectral(self) -> bool:
        return self.eigvals is not None


class Functional:
    """Linear functional ``sum(rho.ravel()[index])``, split per Liouvillian block."""

    def __init__(self, name: str, index):
        self.name = name
        self.index = np.asarray(index, dtype=np.int64)

    def __call__(self, y: np.ndarray) -> complex:
        return complex(y[self.index].sum()) if self.index.size else 0j


class BlockSpectralPropagator:
    COND_LIMIT = 1e9

    def __init__(self, a_static: np.ndarray, jump_superop, excitations: np.ndarray):
        d = a_static.shape[0]
        self.dim = d
        labels = (excitations[:, None] - excitations[None, :]).ravel()
        self.labels = labels
        rows = np.repeat(np.arange(d), d)
        cols = np.tile(np.arange(d), d)
        jump_superop = jump_superop.tocsr()
        self.blocks: dict[int, _Block] = {}
        for k in np.unique(labels):
            idx = np.nonzero(labels == k)[0]
            r, c = rows[idx], cols[idx]
            gen = (a_static[np.ix_(r, r)] * (c[:, None] == c[None, :])
                   + (r[:, None] == r[None, :]) * a_static.conj()[np.ix_(c, c)])
            gen = gen + jump_superop[idx][:, idx].toarray()
            block = _Block(int(k), idx, gen)
            w, v = sla.eig(gen)
            if np.linalg.cond(v) < self.COND_LIMIT:
                block.eigvals, block.vecs, block.vecs_inv = w, v, np.linalg.inv(v)
            self.blocks[int(k)] = block

    @classmethod
    def from_model(cls, model) -> "BlockSpectralPropagator":
        return cls(model.a_static, model.jump_superop, model.space.excitation_numbers())

    # ------------------------------------------------------------------
    def propagate(self, y: np.ndarray, tau: float) -> np.ndarray:
        """vec(rho) after free evolution for a duration ``tau`` >= 0."""
        out = np.zeros_like(y, dtype=complex)
        for b in self.blocks.values():
            yb = y[b.index]
            if not np.any(yb):
                continue
            if b.spectral:
                out[b.index] = b.vecs @ (np.exp(b.eigvals * tau) * (b.vecs_inv @ yb))
            else:
                out[b.index] = sla.expm(b.generator * tau) @ yb
        return out

    def _split(self, functional: Functional):
        """Group the functional's indices by block, as positions local to each block."""
        parts = []
        if functional.index.size == 0:
            return parts
        ks = self.labels[functional.index]
        for k in np.unique(ks):
            b = self.blocks[int(k)]
            local = np.searchsorted(b.index, functional.index[ks == k])
            parts.append((b, local))
        return parts

    def series(self, y: np.ndarray, taus: np.ndarray, functionals) -> np.ndarray:
        """Values of each functional at times ``taus`` (relative to the state ``y``)."""
        taus = np.asarray(taus, dtype=float)
        out = np.zeros((len(functionals), taus.size), dtype=complex)
        cache: dict[int, tuple] = {}
        for n, fn in enumerate(functionals):
            for b, local in self._split(fn):
                yb = y[b.index]
                if not np.any(yb):
                    continue
                if b.spectral:
                    if b.k not in cache:
                        coeff = b.vecs_inv @ yb
                        keep = coeff != 0
                        cache[b.k] = (coeff[keep], b.eigvals[keep], keep,
                                      np.exp(np.outer(taus, b.eigvals[keep])))
                    coeff, _, keep, expo = cache[b.k]
                    amp = b.vecs[local][:, keep].sum(axis=0) * coeff
                    out[n] += expo @ amp
                else:
                    out[n] += self._series_fallback(b, yb, taus, local)
        return out

    def _series_fallback(self, b: _Block, yb, taus, local) -> np.ndarray:
        vals = np.empty(taus.size, dtype=complex)
        state, t_prev = yb.astype(complex), 0.0
        steps: dict[float, np.ndarray] = {}
        for i, t in enumerate(taus):
            dt = round(float(t - t_prev), 12)
            if dt:
                if dt not in steps:
                    steps[dt] = sla.expm(b.generator * dt)
                state = steps[dt] @ state
            vals[i] = state[local].sum()
            t_prev = t
        return vals

    def integral(self, y: np.ndarray, tau: float, functional: Functional) -> complex:
        """Exact time integral of a functional over [0, tau]."""
        total = 0j
        for b, local in self._split(functional):
            yb = y[b.index]
            if not np.any(yb):
                continue
            if b.spectral:
                w = b.eigvals
                small = np.abs(w * tau) < 1e-8
                safe = np.where(small, 1.0, w)
                # (exp(w tau) - 1) / w, with a series for tiny w tau
                fac = np.where(small, tau * (1 + w * tau / 2), np.expm1(w * tau) / safe)
                amp = b.vecs[local].sum(axis=0) * (b.vecs_inv @ yb)
                total += complex(np.sum(amp * fac))
            else:
                n = b.generator.shape[0]
                aug = np.zeros((n + 1, n + 1), dtype=complex)
                aug[:n, :n] = b.generator
                aug[n, :n] = np.isin(np.arange(n), local).astype(float)
                vec = np.append(yb, 0.0)
                total += complex((sla.expm(aug * tau) @ vec)[n])
        return total
