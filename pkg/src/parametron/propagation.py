"""Fixed-step RK4 propagation of state vectors and density matrices.

Any callable ``h_fn(t) -> ndarray`` can be propagated with the dense numpy
reference path. :class:`~parametron.model.Hamiltonian` instances are
recognized and dispatched to the compiled banded kernels, which compute the
same update much faster. States are never renormalized; norm (or trace)
drift is checked after the run and reported as an error.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .model import NROT, Hamiltonian

log = logging.getLogger(__name__)

NORM_TOL = 1e-6
TRACE_TOL = 1e-8
CONVERGENCE_TOL = 1e-5

# defaults in ns
DT_RWA = 1e-3
DT_NROT = 1e-5


class PropagationError(RuntimeError):
    pass


class DivergenceError(PropagationError):
    pass


class StepSizeError(PropagationError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    dt: float
    sample_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")
        span = (self.t_end - self.t_start) / self.dt
        if span < 0 or abs(span - round(span)) > 1e-6 * max(1.0, span):
            raise ValueError(f"(t_end - t_start)/dt = {span} is not an integer")
        if round(span) % self.sample_stride:
            raise ValueError("number of steps must be a multiple of sample_stride")

    @classmethod
    def with_cadence(cls, t_end: float, dt: float, every: float, t_start: float = 0.0):
        """Grid sampling every ``every`` ns (a multiple of ``dt``)."""
        stride = every / dt
        if abs(stride - round(stride)) > 1e-6 * stride:
            raise ValueError(f"sample cadence {every} ns is not a multiple of dt={dt} ns")
        return cls(t_start, t_end, dt, int(round(stride)))

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t_start) / self.dt))

    @property
    def sample_times(self) -> np.ndarray:
        idx = np.arange(0, self.n_steps + 1, self.sample_stride)
        return self.t_start + idx * self.dt

    def halved(self) -> "TimeGrid":
        return TimeGrid(self.t_start, self.t_end, self.dt / 2, self.sample_stride * 2)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    norms: np.ndarray
    observables: dict[str, np.ndarray] = field(default_factory=dict)
    mixed: bool = False
    dt: float = 0.0
    wall_time: float = 0.0

    def __len__(self) -> int:
        return len(self.times)

    def state_at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        return self.states[i]


def rk4_step(state: np.ndarray, t: float, dt: float, h_fn: Callable) -> np.ndarray:
    """Classic RK4 step of d(psi)/dt = -i H(t) psi."""
    h1 = h_fn(t)
    hm = h_fn(t + 0.5 * dt)
    h2 = h_fn(t + dt)
    k1 = -1j * (h1 @ state)
    k2 = -1j * (hm @ (state + 0.5 * dt * k1))
    k3 = -1j * (hm @ (state + 0.5 * dt * k2))
    k4 = -1j * (h2 @ (state + dt * k3))
    out = state + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise DivergenceError(f"non-finite state after step at t={t} ns")
    return out


def lindblad_rhs(rho: np.ndarray, h: np.ndarray, kappa: float) -> np.ndarray:
    """-i[H, rho] + (kappa/2)([a rho, a^dag] + [a, rho a^dag])."""
    d = rho.shape[0]
    out = -1j * (h @ rho - rho @ h)
    if kappa:
        a = np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1)
        ad = a.T
        ar = a @ rho
        ra = rho @ ad
        out = out + 0.5 * kappa * ((ar @ ad - ad @ ar) + (a @ ra - ra @ a))
    return out


def rk4_density_step(rho, t, dt, h_fn, kappa):
    h1, hm, h2 = h_fn(t), h_fn(t + 0.5 * dt), h_fn(t + dt)
    k1 = lindblad_rhs(rho, h1, kappa)
    k2 = lindblad_rhs(rho + 0.5 * dt * k1, hm, kappa)
    k3 = lindblad_rhs(rho + 0.5 * dt * k2, hm, kappa)
    k4 = lindblad_rhs(rho + dt * k3, h2, kappa)
    return rho + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _kernel_args(h: Hamiltonian):
    p = h.params
    sched = np.array([p.beta.encode(), p.delta.encode(), p.drive.encode()], dtype=float)
    mode = _kernels.MODE_NROT if h.mode == NROT else _kernels.MODE_RWA
    return h.band_data(), mode, float(p.omega_p), float(p.chi), sched


def _sector(h: Hamiltonian, psi0: np.ndarray) -> tuple[int, int] | None:
    """(start, step) of the parity sector holding ``psi0``.

    Returns the full space (0, 1) when a drive breaks parity and ``None`` for
    a parity-conserving Hamiltonian acting on a mixed-parity state.
    """
    p = h.params
    if p.drive.kind != "constant" or p.drive.amplitude != 0.0:
        return 0, 1
    if not np.any(psi0[1::2]):
        return 0, 2
    if not np.any(psi0[0::2]):
        return 1, 2
    return None


def _apply_samplers(traj: Trajectory, samplers):
    for name, fn in (samplers or {}).items():
        traj.observables[name] = np.array(
            [fn(t, s) for t, s in zip(traj.times, traj.states)], dtype=float
        )
    return traj


def _check_finite(times, states):
    bad = ~np.all(np.isfinite(states.reshape(len(states), -1)), axis=1)
    if bad.any():
        raise DivergenceError(f"propagation diverged near t={times[np.argmax(bad)]} ns")


def propagate_state(
    psi0: np.ndarray,
    grid: TimeGrid,
    h_fn: Callable,
    samplers: dict[str, Callable] | None = None,
    *,
    backend: str = "auto",
    check_norm: bool = True,
    parity_blocks: bool = True,
) -> Trajectory:
    """Propagate a pure state over ``grid``; snapshots every ``sample_stride`` steps.

    ``samplers`` maps names to ``f(t, psi) -> float`` and is evaluated on
    every snapshot. Raises :class:`StepSizeError` when the norm drifts by more
    than 1e-6. With ``parity_blocks`` the compiled path only touches the
    parity sector of ``psi0`` when the Hamiltonian conserves parity; the
    result is the same array either way.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.vdot(psi0, psi0).real - 1.0) > 1e-10:
        raise ValueError("initial state must be normalized")
    start = time.perf_counter()
    times = grid.sample_times
    if backend == "auto":
        backend = "kernel" if isinstance(h_fn, Hamiltonian) else "numpy"
    if backend == "kernel":
        bands, mode, wp, chi, sched = _kernel_args(h_fn)
        args = (grid.t_start, grid.dt, grid.n_steps, grid.sample_stride, bands, mode, wp, chi, sched)
        sector = _sector(h_fn, psi0) if parity_blocks else (0, 1)
        if sector is None:
            # parity-conserving but mixed: each sector evolves on its own
            even, odd = psi0.copy(), psi0.copy()
            even[1::2] = 0.0
            odd[0::2] = 0.0
            states = _kernels.propagate_pure(even, *args, 0, 2)
            states += _kernels.propagate_pure(odd, *args, 1, 2)
        else:
            states = _kernels.propagate_pure(psi0, *args, *sector)
        _check_finite(times[: len(states)], states)
    else:
        states = np.empty((len(times), len(psi0)), dtype=complex)
        states[0] = psi = psi0
        for step in range(grid.n_steps):
            psi = rk4_step(psi, grid.t_start + step * grid.dt, grid.dt, h_fn)
            if (step + 1) % grid.sample_stride == 0:
                states[(step + 1) // grid.sample_stride] = psi
    norms = np.linalg.norm(states, axis=1) ** 2
    traj = Trajectory(times, states, norms, dt=grid.dt, wall_time=time.perf_counter() - start)
    log.debug("propagated %d steps in %.2fs", grid.n_steps, traj.wall_time)
    drift = float(np.max(np.abs(norms - 1.0)))
    if check_norm and drift > NORM_TOL:
        raise StepSizeError(f"norm drift {drift:.3g} exceeds {NORM_TOL}; reduce dt (now {grid.dt} ns)")
    return _apply_samplers(traj, samplers)


def propagate_density(
    rho0: np.ndarray,
    grid: TimeGrid,
    h_fn: Callable,
    kappa: float,
    samplers: dict[str, Callable] | None = None,
    *,
    backend: str = "auto",
    check_trace: bool = True,
) -> Trajectory:
    """Propagate the Lindblad master equation with single-photon loss ``kappa``."""
    rho0 = np.asarray(rho0, dtype=complex)
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    start = time.perf_counter()
    times = grid.sample_times
    if backend == "auto":
        backend = "kernel" if isinstance(h_fn, Hamiltonian) else "numpy"
    if backend == "kernel":
        bands, mode, wp, chi, sched = _kernel_args(h_fn)
        states = _kernels.propagate_mixed(
            rho0, grid.t_start, grid.dt, grid.n_steps, grid.sample_stride,
            bands, mode, wp, chi, sched, float(kappa),
        )
        _check_finite(times[: len(states)], states)
    else:
        states = np.empty((len(times),) + rho0.shape, dtype=complex)
        states[0] = rho = rho0
        for step in range(grid.n_steps):
            rho = rk4_density_step(rho, grid.t_start + step * grid.dt, grid.dt, h_fn, kappa)
            if (step + 1) % grid.sample_stride == 0:
                states[(step + 1) // grid.sample_stride] = rho
        _check_finite(times, states)
    traces = np.real(np.einsum("kii->k", states))
    traj = Trajectory(times, states, traces, mixed=True, dt=grid.dt,
                      wall_time=time.perf_counter() - start)
    drift = float(np.max(np.abs(traces - 1.0)))
    if check_trace and drift > TRACE_TOL:
        raise StepSizeError(f"trace drift {drift:.3g} exceeds {TRACE_TOL}; reduce dt (now {grid.dt} ns)")
    return _apply_samplers(traj, samplers)


@dataclass
class ConvergenceReport:
    dt: float
    max_diff: float
    summary_diff: float
    converged: bool
    halvings: int
    tol: float = CONVERGENCE_TOL

    @property
    def status(self) -> str:
        return "pass" if self.converged else "fail"


def convergence_check(
    run: Callable[[float], tuple[np.ndarray, np.ndarray]],
    dt: float,
    *,
    tol: float = CONVERGENCE_TOL,
    max_halvings: int = 1,
) -> ConvergenceReport:
    """Compare ``run(dt)`` against ``run(dt/2)``.

    ``run`` returns ``(series, summary)``: the sampled p0(t) series and an
    array of summary statistics. When the difference exceeds ``tol`` the step
    is halved again, up to ``max_halvings`` extra times; the report records
    the finest dt whose comparison passed, or flags failure.
    """
    try:
        series, summary = run(dt)
    except PropagationError as exc:
        log.warning("run at dt=%g failed: %s", dt, exc)
        return ConvergenceReport(dt, math.inf, math.inf, False, 0, tol)
    for k in range(max_halvings + 1):
        try:
            fine_series, fine_summary = run(dt / 2)
        except PropagationError as exc:
            log.warning("run at dt=%g failed: %s", dt / 2, exc)
            return ConvergenceReport(dt, math.inf, math.inf, False, k, tol)
        max_diff = float(np.max(np.abs(np.asarray(series) - np.asarray(fine_series))))
        summary_diff = float(np.max(np.abs(np.asarray(summary) - np.asarray(fine_summary))))
        if max(max_diff, summary_diff) < tol:
            return ConvergenceReport(dt, max_diff, summary_diff, True, k, tol)
        if k == max_halvings:
            break
        dt, series, summary = dt / 2, fine_series, fine_summary
    log.warning("dt-halving did not converge (diff %.3g)", max(max_diff, summary_diff))
    return ConvergenceReport(dt, max_diff, summary_diff, False, max_halvings, tol)


def steps_per_second(h: Hamiltonian, n_steps: int = 200_000) -> float:
    psi = np.zeros(h.dim, dtype=complex)
    psi[0] = 1.0
    grid = TimeGrid(0.0, n_steps * 1e-5, 1e-5, n_steps)
    traj = propagate_state(psi, grid, h, check_norm=False)
    return n_steps / max(traj.wall_time, 1e-12)

