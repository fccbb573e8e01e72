"""Kerr parametric oscillator (parametron) cat-state and gate simulations,
with and without the rotating-wave approximation."""
from .fockspace import annihilation, basis, cat_states, coherent_state, hermitian_eigh
from .model import NROT, RWA, Hamiltonian, ModelParams
from .propagation import TimeGrid, propagate_density, propagate_state
from .schedules import Schedule

__all__ = [
    "NROT",
    "RWA",
    "Hamiltonian",
    "ModelParams",
    "Schedule",
    "TimeGrid",
    "annihilation",
    "basis",
    "cat_states",
    "coherent_state",
    "hermitian_eigh",
    "propagate_density",
    "propagate_state",
]

__version__ = "0.1.0"
