"""Truncated Fock-space operators, states and a parity-aware eigensolver.

Operators and states are plain complex numpy arrays in the basis
|0>, |1>, ..., |dim-1>.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

EVEN, ODD = "even", "odd"

HERMITIAN_RTOL = 1e-12


class TruncationWarning(UserWarning):
    """State support reaches the Fock cutoff."""


def _check_dim(dim: int) -> int:
    if int(dim) != dim or dim < 2:
        raise ValueError(f"invalid Fock dimension {dim!r}; need an integer >= 2")
    return int(dim)


def annihilation(dim: int) -> np.ndarray:
    dim = _check_dim(dim)
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def creation(dim: int) -> np.ndarray:
    return annihilation(dim).conj().T


def number(dim: int) -> np.ndarray:
    dim = _check_dim(dim)
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def basis(dim: int, n: int) -> np.ndarray:
    dim = _check_dim(dim)
    if not 0 <= n < dim:
        raise ValueError(f"level {n} outside truncation dim={dim}")
    v = np.zeros(dim, dtype=complex)
    v[n] = 1.0
    return v


@dataclass(frozen=True)
class CoherentState:
    amplitudes: np.ndarray
    raw_norm: float
    truncated: bool

    def __array__(self, dtype=None, copy=None):
        return self.amplitudes if dtype is None else self.amplitudes.astype(dtype)


def coherent_state(alpha: complex, dim: int, *, full: bool = False):
    """Coherent state |alpha>, renormalized after truncation.

    With ``full=True`` a :class:`CoherentState` is returned carrying the
    pre-normalization norm and a ``truncated`` flag (set when that norm drops
    below 0.999).
    """
    dim = _check_dim(dim)
    n = np.arange(dim)
    # log-space keeps n! and alpha**n finite for large dim
    logfact = np.array([math.lgamma(k + 1) for k in n])
    if alpha == 0:
        c = np.zeros(dim, dtype=complex)
        c[0] = 1.0
    else:
        mag = abs(alpha)
        phase = np.exp(1j * n * np.angle(alpha))
        c = np.exp(-0.5 * mag**2 + n * math.log(mag) - 0.5 * logfact) * phase
    raw = float(np.linalg.norm(c))
    truncated = raw < 0.999
    if truncated:
        warnings.warn(
            f"coherent state alpha={alpha} badly truncated at dim={dim} "
            f"(norm {raw:.4f})",
            TruncationWarning,
            stacklevel=2,
        )
    c = c / raw
    if full:
        return CoherentState(c, raw, truncated)
    return c


def cat_states(alpha: float, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Even and odd cats (|-a> + |a>)/N+ and (|-a> - |a>)/N-.

    Raises ValueError for alpha == 0, where the odd cat vanishes.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if alpha == 0:
        raise ValueError("odd cat state is undefined for alpha = 0")
    plus = coherent_state(alpha, dim)
    minus = coherent_state(-alpha, dim)
    even = minus + plus
    odd = minus - plus
    return even / np.linalg.norm(even), odd / np.linalg.norm(odd)


def even_cat(alpha: float, dim: int) -> np.ndarray:
    if alpha == 0:
        return basis(dim, 0)
    return cat_states(alpha, dim)[0]


def cat_norm_squared(alpha: float, sign: int) -> float:
    """Exact N^2 = 2(1 +/- exp(-2 alpha^2)) of the untruncated cat."""
    return 2.0 * (1.0 + sign * math.exp(-2.0 * alpha**2))


def parity_projectors(dim: int) -> tuple[np.ndarray, np.ndarray]:
    dim = _check_dim(dim)
    mask = (np.arange(dim) % 2 == 0).astype(float)
    return np.diag(mask).astype(complex), np.diag(1.0 - mask).astype(complex)


def parity_operator(dim: int) -> np.ndarray:
    dim = _check_dim(dim)
    return np.diag((-1.0) ** np.arange(dim)).astype(complex)


def parity_of(v: np.ndarray) -> tuple[str, float]:
    """Dominant parity label of ``v`` and the norm fraction in that sector."""
    w = np.abs(v) ** 2
    total = w.sum()
    even = w[0::2].sum() / total
    return (EVEN, even) if even >= 0.5 else (ODD, 1.0 - even)


def is_hermitian(m: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    scale = max(np.linalg.norm(m), 1.0)
    return np.linalg.norm(m - m.conj().T) <= rtol * scale


def commutes_with_parity(m: np.ndarray, rtol: float = 1e-12) -> bool:
    # odd-offset entries are exactly the parity-mixing ones
    idx = np.arange(m.shape[0])
    mixing = (idx[:, None] + idx[None, :]) % 2 == 1
    scale = max(np.linalg.norm(m), 1.0)
    return np.linalg.norm(m[mixing]) <= rtol * scale


@dataclass(frozen=True)
class EigenSystem:
    """Spectrum sorted descending; ``states[:, i]`` pairs with ``energies[i]``."""

    energies: np.ndarray
    states: np.ndarray
    parities: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.energies)

    def state(self, i: int) -> np.ndarray:
        return self.states[:, i]

    def top_pair(self) -> tuple[np.ndarray, np.ndarray]:
        """Highest even and highest odd eigenvectors."""
        i_even = self.parities.index(EVEN)
        i_odd = self.parities.index(ODD)
        return self.states[:, i_even], self.states[:, i_odd]


def _fix_phase(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    lead = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(lead) / lead)[None, :]


def hermitian_eigh(m: np.ndarray, *, rtol: float = 1e-10) -> EigenSystem:
    """Full spectrum of a Hermitian matrix, sorted by descending energy.

    Matrices that commute with photon-number parity are diagonalized block by
    block, so every eigenvector has exact parity even when levels of opposite
    parity are degenerate. Each eigenvector is phase-fixed so its
    largest-magnitude component is real and positive. When the two highest
    levels have opposite parity and are degenerate to within
    ``rtol * ||m||``, the even one is placed first.
    """
    m = np.asarray(m)
    if not is_hermitian(m, 1e-10):
        raise ValueError("hermitian_eigh: input matrix is not Hermitian")
    dim = m.shape[0]
    if commutes_with_parity(m):
        energies = np.empty(dim)
        states = np.zeros((dim, dim), dtype=complex)
        labels: list[str] = []
        col = 0
        for start, label in ((0, EVEN), (1, ODD)):
            sl = slice(start, None, 2)
            block = m[sl, sl]
            if block.shape[0] == 0:
                continue
            e, v = np.linalg.eigh(block)
            k = len(e)
            energies[col : col + k] = e
            states[sl, col : col + k] = v
            labels += [label] * k
            col += k
        parities = np.array(labels)
    else:
        energies, states = np.linalg.eigh(m)
        parities = np.array([parity_of(states[:, i])[0] for i in range(dim)])

    order = np.argsort(-energies, kind="stable")
    energies = energies[order]
    states = _fix_phase(states[:, order])
    parities = list(parities[order])

    scale = max(np.linalg.norm(m), 1.0)
    if (
        dim > 1
        and parities[0] == ODD
        and parities[1] == EVEN
        and energies[0] - energies[1] <= rtol * scale
    ):
        energies[[0, 1]] = energies[[1, 0]]
        states[:, [0, 1]] = states[:, [1, 0]]
        parities[0], parities[1] = EVEN, ODD
    return EigenSystem(energies, states, tuple(parities))


def top_eigenvector(m: np.ndarray) -> np.ndarray:
    return hermitian_eigh(m).state(0)
