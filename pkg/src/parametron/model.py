"""Kerr parametric oscillator Hamiltonians in the frame rotating at omega_p/2.

The full rotating-frame Hamiltonian (hbar = 1, angular frequencies in rad/ns)

    H(t) = (wc(t) - wp/2) n - (chi/12) M(t)^4 + 2 beta(t) cos(wp t) M(t)^2,
    M(t) = a exp(-i wp t/2) + a^dag exp(i wp t/2),

is stored as a phase-grouped sum over fixed matrices: every operator word in
M(t)^k with c creation and k-c annihilation operators carries the phase
exp(i (2c - k) wp t/2), so words are grouped by net phase index 2c - k.
The resonator frequency follows wc(t) = wp/2 + delta(t) + chi so that the
frame stays fixed while the detuning moves.

Dropping every oscillating group leaves the RWA Hamiltonian

    H_RWA = delta n - (chi/2) a^dag a^dag a a + beta (a^2 + a^dag^2)

up to a c-number. The (a + a^dag)^4 cos(wp t) correction of order
chi beta / wc and all c-number terms of the lab-frame expansion are omitted.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import fockspace
from .schedules import Schedule, constant

RWA, NROT = "rwa", "nrot"


def build_h_rwa(delta: float, chi: float, beta: float, dim: int) -> np.ndarray:
    a = fockspace.annihilation(dim)
    ad = a.conj().T
    return delta * (ad @ a) - 0.5 * chi * (ad @ ad @ a @ a) + beta * (a @ a + ad @ ad)


def build_drive(dim: int) -> np.ndarray:
    a = fockspace.annihilation(dim)
    return a + a.conj().T


def kerr_rwa(chi: float, dim: int) -> np.ndarray:
    a = fockspace.annihilation(dim)
    ad = a.conj().T
    return -0.5 * chi * (ad @ ad @ a @ a)


def pump_rwa(dim: int) -> np.ndarray:
    a = fockspace.annihilation(dim)
    return a @ a + a.conj().T @ a.conj().T


@lru_cache(maxsize=None)
def _word_groups(length: int, dim: int) -> dict[int, np.ndarray]:
    a = fockspace.annihilation(dim)
    ops = (a, a.conj().T)
    groups: dict[int, np.ndarray] = {}
    for word in itertools.product((0, 1), repeat=length):
        mat = np.eye(dim, dtype=complex)
        for letter in word:
            mat = mat @ ops[letter]
        k = 2 * sum(word) - length
        groups[k] = groups.get(k, 0) + mat
    return groups


@dataclass(frozen=True)
class TermSet:
    """Phase-grouped matrices of the rotating-frame Hamiltonian.

    ``kerr_groups[k]`` already includes the -chi/12 prefactor;
    ``pump_groups[k]`` has unit scale.
    """

    chi: float
    dim: int
    number: np.ndarray
    kerr_groups: dict[int, np.ndarray]
    pump_groups: dict[int, np.ndarray]


def build_term_set(chi: float, dim: int) -> TermSet:
    dim = fockspace._check_dim(dim)
    kerr = {k: -chi / 12.0 * m for k, m in _word_groups(4, dim).items()}
    pump = {k: m.copy() for k, m in _word_groups(2, dim).items()}
    return TermSet(chi, dim, fockspace.number(dim), kerr, pump)


@dataclass(frozen=True)
class ModelParams:
    """Pump frequency, Kerr coefficient and control schedules (rad/ns)."""

    omega_p: float
    chi: float
    beta: Schedule
    delta: Schedule
    dim: int = 40
    drive: Schedule = field(default_factory=lambda: constant(0.0))

    def __post_init__(self):
        if self.omega_p <= 0:
            raise ValueError("omega_p must be positive")
        if self.chi <= 0:
            raise ValueError("chi must be positive")
        fockspace._check_dim(self.dim)

    def omega_c(self, t: float) -> float:
        return self.omega_p / 2 + self.delta(t) + self.chi


def h_rot_at(t: float, params: ModelParams, terms: TermSet) -> np.ndarray:
    """Full rotating-frame Hamiltonian, NROTs included, at time ``t``."""
    if terms.dim != params.dim:
        raise ValueError(f"TermSet dim {terms.dim} does not match params dim {params.dim}")
    if not math.isclose(terms.chi, params.chi, rel_tol=1e-15):
        raise ValueError("TermSet chi does not match params chi")
    theta = 0.5 * params.omega_p * t
    h = (params.omega_c(t) - params.omega_p / 2) * terms.number
    for k, m in terms.kerr_groups.items():
        h = h + np.exp(1j * k * theta) * m
    pump = sum(np.exp(1j * k * theta) * m for k, m in terms.pump_groups.items())
    h = h + 2.0 * params.beta(t) * math.cos(params.omega_p * t) * pump
    e = params.drive(t)
    if e != 0.0:
        h = h + e * build_drive(params.dim)
    return h


def h_rwa_at(t: float, params: ModelParams) -> np.ndarray:
    h = build_h_rwa(params.delta(t), params.chi, params.beta(t), params.dim)
    e = params.drive(t)
    if e != 0.0:
        h = h + e * build_drive(params.dim)
    return h


def h_rwa_dot(t: float, params: ModelParams) -> np.ndarray:
    """Time derivative of the RWA Hamiltonian from the schedule derivatives."""
    a = fockspace.annihilation(params.dim)
    ad = a.conj().T
    hdot = params.delta.derivative(t) * (ad @ a) + params.beta.derivative(t) * (a @ a + ad @ ad)
    if params.drive.derivative(t) != 0.0:
        hdot = hdot + params.drive.derivative(t) * (a + ad)
    return hdot


def h_rot_bruteforce(t: float, params: ModelParams) -> np.ndarray:
    """Rotating-frame Hamiltonian by direct matrix powers (reference only)."""
    a = fockspace.annihilation(params.dim)
    ad = a.conj().T
    theta = 0.5 * params.omega_p * t
    m = a * np.exp(-1j * theta) + ad * np.exp(1j * theta)
    m2 = m @ m
    h = (
        (params.omega_c(t) - params.omega_p / 2) * (ad @ a)
        - params.chi / 12.0 * (m2 @ m2)
        + 2.0 * params.beta(t) * math.cos(params.omega_p * t) * m2
    )
    e = params.drive(t)
    if e != 0.0:
        h = h + e * (a + ad)
    return h


class Hamiltonian:
    """Callable ``t -> H(t)`` for one dynamics mode, with banded data for the
    compiled propagators.

    Every in-scope Hamiltonian has nonzero entries only on the diagonals at
    offsets 0, +-1 (drive), +-2 and +-4, so the compiled kernels store the
    upper half of those bands and rebuild the lower half by conjugation.
    """

    def __init__(self, params: ModelParams, mode: str = NROT):
        if mode not in (RWA, NROT):
            raise ValueError(f"unknown dynamics mode {mode!r}")
        self.params = params
        self.mode = mode
        self.dim = params.dim
        self.terms = build_term_set(params.chi, params.dim) if mode == NROT else None

    def __call__(self, t: float) -> np.ndarray:
        if self.mode == NROT:
            return h_rot_at(t, self.params, self.terms)
        return h_rwa_at(t, self.params)

    def rwa(self, t: float) -> np.ndarray:
        return h_rwa_at(t, self.params)

    def band_data(self) -> np.ndarray:
        """Fixed band arrays, shape (8, dim), consumed by the kernels.

        Rows: number diagonal, static diagonal, pump diagonal, offset-2
        static, offset-2 pump, offset-4 static, offset-1 drive, unused. The
        stage coefficients multiplying each row are in ``_kernels._coeffs``.
        """
        dim = self.dim
        out = np.zeros((8, dim), dtype=complex)
        out[0] = np.arange(dim)
        chi = self.params.chi
        if self.mode == RWA:
            out[1] = np.diag(kerr_rwa(chi, dim))
            out[4, : dim - 2] = np.diag(pump_rwa(dim), 2)
        else:
            ts = self.terms
            out[1] = np.diag(ts.kerr_groups[0])
            out[2] = np.diag(ts.pump_groups[0])
            # offset +2 in (row, col) lowers photon number by 2: phase index -2
            out[3, : dim - 2] = np.diag(ts.kerr_groups[-2], 2)
            out[4, : dim - 2] = np.diag(ts.pump_groups[-2], 2)
            out[5, : dim - 4] = np.diag(ts.kerr_groups[-4], 4)
        out[6, : dim - 1] = np.diag(build_drive(dim), 1)
        return out
