"""Populations, fidelity statistics, adiabatic coefficients and Wigner functions."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import fockspace
from .fockspace import EigenSystem, TruncationWarning, hermitian_eigh

DEGENERACY_TOL = 1e-9


class DegenerateLevelsError(ValueError):
    pass


def instantaneous_populations(psi: np.ndarray, h_rwa_now, count: int | None = None) -> np.ndarray:
    """Populations |<phi_n|psi>|^2 of the ``count`` highest levels.

    ``h_rwa_now`` is either a Hamiltonian matrix or a precomputed
    :class:`EigenSystem`. The top near-degenerate pair comes out ordered
    (even, odd).
    """
    es = h_rwa_now if isinstance(h_rwa_now, EigenSystem) else hermitian_eigh(h_rwa_now)
    vecs = es.states if count is None else es.states[:, :count]
    return np.abs(vecs.conj().T @ psi) ** 2


def density_populations(rho: np.ndarray, es: EigenSystem, count: int | None = None) -> np.ndarray:
    vecs = es.states if count is None else es.states[:, :count]
    return np.real(np.einsum("in,ij,jn->n", vecs.conj(), rho, vecs))


@dataclass(frozen=True)
class FidelityStats:
    value_at_T: float
    tail_mean: float
    tail_std: float
    tail_window: tuple[float, float]

    def as_row(self) -> tuple[float, float, float]:
        return self.value_at_T, self.tail_mean, self.tail_std


def fidelity_stats(times, p0, T: float, window: float) -> FidelityStats:
    """Value at ``T`` plus mean and population std of p0 over (T, T + window]."""
    times = np.asarray(times, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    eps = 1e-9 * max(1.0, abs(T))
    mask = (times > T + eps) & (times <= T + window + eps)
    if not mask.any():
        raise ValueError(f"no samples in tail window ({T}, {T + window}]")
    i_T = int(np.argmin(np.abs(times - T)))
    tail = p0[mask]
    return FidelityStats(
        float(p0[i_T]), float(tail.mean()), float(tail.std()), (float(T), float(T + window))
    )


def adiabatic_h(
    h_now: np.ndarray | EigenSystem, h_dot_now: np.ndarray, m: int, n: int
) -> float:
    """|<phi_n| dH/dt |phi_m>| / (E_n - E_m)^2 for instantaneous levels m != n.

    Levels are indexed in descending energy order (0 is the highest).
    """
    if m == n:
        raise ValueError("adiabatic coefficient needs m != n")
    es = h_now if isinstance(h_now, EigenSystem) else hermitian_eigh(h_now)
    m, n = sorted((m, n))  # bit-identical under m <-> n
    gap = es.energies[n] - es.energies[m]
    if abs(gap) < DEGENERACY_TOL:
        raise DegenerateLevelsError(
            f"levels {m} and {n} are degenerate (gap {gap:.3g}); use parity sectors"
        )
    element = np.vdot(es.state(n), h_dot_now @ es.state(m))
    return float(abs(element) / gap**2)


def adiabatic_h_fd(h_fn, t: float, m: int, n: int, dt: float = 1e-4) -> float:
    """Finite-difference h_mn: |<phi_n|d phi_m/dt>| / |E_n - E_m| with phase alignment."""
    es = hermitian_eigh(h_fn(t))
    ref = es.state(m)
    shifted = []
    for s in (t - dt, t + dt):
        v = hermitian_eigh(h_fn(s)).state(m)
        ov = np.vdot(ref, v)
        shifted.append(v * (abs(ov) / ov).conjugate())
    deriv = (shifted[1] - shifted[0]) / (2 * dt)
    return float(abs(np.vdot(es.state(n), deriv)) / abs(es.energies[n] - es.energies[m]))


def alpha_amplitude(beta: float, delta: float, chi: float) -> float:
    """Coherent amplitude sqrt((2 beta + delta) / chi) of the cat pair."""
    rad = (2.0 * beta + delta) / chi
    if rad < 0:
        raise ValueError(f"2*beta + delta = {2 * beta + delta} < 0: no cat-state regime")
    return math.sqrt(rad)


def dephasing_rate(kappa: float, alpha: float) -> float:
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    return 2.0 * kappa * alpha**2


def cat_overlap(alpha: float) -> float:
    """<-alpha|alpha> = exp(-2 |alpha|^2)."""
    return math.exp(-2.0 * abs(alpha) ** 2)


@dataclass(frozen=True)
class WignerGrid:
    x: np.ndarray
    p: np.ndarray
    values: np.ndarray  # values[i, j] at (x[i], p[j])

    def integral(self) -> float:
        dx = self.x[1] - self.x[0]
        dp = self.p[1] - self.p[0]
        return float(self.values.sum() * dx * dp)

    def records(self) -> np.ndarray:
        """Rows (x, p, W) with p varying fastest."""
        xx, pp = np.meshgrid(self.x, self.p, indexing="ij")
        return np.column_stack([xx.ravel(), pp.ravel(), self.values.ravel()])


def _displacements(gammas, dim):
    a = fockspace.annihilation(dim)
    ad = a.conj().T
    return np.array([expm(g * ad - np.conj(g) * a) for g in gammas])


def wigner(state: np.ndarray, x=None, p=None, *, pad: int = 40) -> WignerGrid:
    """W(x + ip) = (2/pi) Tr[D^dag rho D Pi] on a rectangular grid.

    Convention: x = Re(gamma), p = Im(gamma) of the displacement argument,
    so a coherent state |alpha> peaks at gamma = alpha. Because
    D(x + ip) = D(x) D(ip) up to a phase that cancels in D^dag rho D, only
    one matrix exponential per axis value is needed. The state is embedded
    in ``dim + pad`` levels so displaced states are not clipped at the cutoff.
    """
    x = np.linspace(-4, 4, 81) if x is None else np.asarray(x, dtype=float)
    p = np.linspace(-4, 4, 81) if p is None else np.asarray(p, dtype=float)
    state = np.asarray(state, dtype=complex)
    rho = np.outer(state, state.conj()) if state.ndim == 1 else state
    dim = rho.shape[0]
    tail = np.real(np.diag(rho))[-max(2, dim // 10):].sum()
    if tail > 1e-6:
        warnings.warn(f"state has weight {tail:.2g} near the Fock cutoff", TruncationWarning, stacklevel=2)
    big = dim + pad
    r = np.zeros((big, big), dtype=complex)
    r[:dim, :dim] = rho
    dx = _displacements(x, big)
    dp = _displacements(1j * p, big)
    parity = (-1.0) ** np.arange(big)
    # rho_x = D(x)^dag rho D(x); Q_p = D(ip) Pi D(ip)^dag
    rho_x = np.conj(np.swapaxes(dx, 1, 2)) @ r @ dx
    q_p = (dp * parity) @ np.conj(np.swapaxes(dp, 1, 2))
    # sum_ij rho_x[i, j] q_p[j, i] for every (x, p) pair
    values = (2.0 / np.pi) * np.real(rho_x.reshape(len(x), -1) @ np.swapaxes(q_p, 1, 2).reshape(len(p), -1).T)
    return WignerGrid(x, p, values)


def wigner_origin(state: np.ndarray) -> float:
    """W(0) = (2/pi) <Pi>, exact in any truncation."""
    state = np.asarray(state, dtype=complex)
    rho = np.outer(state, state.conj()) if state.ndim == 1 else state
    parity = (-1.0) ** np.arange(rho.shape[0])
    return float(2.0 / np.pi * np.real(np.sum(parity * np.diag(rho))))
