"""Compiled RK4 kernels for banded KPO Hamiltonians.

At every RK4 stage the Hamiltonian is

    diag   = cn * N + K0 + cp * P0
    band 1 = e * D1
    band 2 = ph2 * (K2 + cp2 * A2)
    band 4 = ph4 * K4

with fixed rows N, K0, P0, D1, K2, A2, K4 from ``model.Hamiltonian.band_data``
and six stage scalars from the schedules and the pump phase. Only upper
bands are stored; the lower half is the conjugate.
"""
import math

import numpy as np
from numba import njit

MODE_RWA = 0
MODE_NROT = 1

# band_data rows
ROW_N, ROW_K0, ROW_P0, ROW_K2, ROW_A2, ROW_K4, ROW_D1 = range(7)


@njit(cache=True)
def _sched(code, amp, dur, t):
    if code == 0:
        return amp
    if code == 1:
        return amp * t / dur if t <= dur else amp
    if t > dur:
        return 0.0
    if code == 2:
        return amp * (1.0 - t / dur)
    if code == 3:
        s = math.sin(math.pi * t / dur)
        return amp * s * s
    return amp * math.sin(math.pi * t / dur)


@njit(cache=True)
def _coeffs(t, mode, wp, chi, sched):
    beta = _sched(int(sched[0, 0]), sched[0, 1], sched[0, 2], t)
    delta = _sched(int(sched[1, 0]), sched[1, 1], sched[1, 2], t)
    e = _sched(int(sched[2, 0]), sched[2, 1], sched[2, 2], t)
    if mode == MODE_RWA:
        return delta, 0.0, beta, 1.0 + 0.0j, 1.0 + 0.0j, e
    phase = wp * t
    bc = 2.0 * beta * math.cos(phase)
    ph2 = complex(math.cos(phase), -math.sin(phase))
    return delta + chi, bc, bc, ph2, ph2 * ph2, e


@njit(cache=True)
def _apply(bands, cn, cp, cp2, ph2, ph4, e, x, y, start, step):
    """y = -i H x; with ``step == 2`` only one parity sector is touched."""
    dim = x.shape[0]
    for n in range(start, dim, step):
        acc = (cn * bands[ROW_N, n].real + bands[ROW_K0, n].real + cp * bands[ROW_P0, n].real) * x[n]
        if n + 2 < dim:
            acc += ph2 * (bands[ROW_K2, n] + cp2 * bands[ROW_A2, n]) * x[n + 2]
        if n >= 2:
            acc += (ph2 * (bands[ROW_K2, n - 2] + cp2 * bands[ROW_A2, n - 2])).conjugate() * x[n - 2]
        if n + 4 < dim:
            acc += ph4 * bands[ROW_K4, n] * x[n + 4]
        if n >= 4:
            acc += (ph4 * bands[ROW_K4, n - 4]).conjugate() * x[n - 4]
        if step == 1 and e != 0.0:
            if n + 1 < dim:
                acc += e * bands[ROW_D1, n] * x[n + 1]
            if n >= 1:
                acc += e * bands[ROW_D1, n - 1].conjugate() * x[n - 1]
        y[n] = complex(acc.imag, -acc.real)


@njit(cache=True, nogil=True)
def propagate_pure(psi0, t0, dt, nsteps, stride, bands, mode, wp, chi, sched, start, step):
    dim = psi0.shape[0]
    out = np.empty((nsteps // stride + 1, dim), dtype=np.complex128)
    psi = psi0.copy()
    tmp = np.zeros(dim, dtype=np.complex128)
    k1 = np.zeros(dim, dtype=np.complex128)
    k2 = np.zeros(dim, dtype=np.complex128)
    k3 = np.zeros(dim, dtype=np.complex128)
    k4 = np.zeros(dim, dtype=np.complex128)
    out[0] = psi
    isamp = 1
    half = 0.5 * dt
    sixth = dt / 6.0
    for i in range(nsteps):
        t = t0 + i * dt
        cn, cp, cp2, ph2, ph4, e = _coeffs(t, mode, wp, chi, sched)
        _apply(bands, cn, cp, cp2, ph2, ph4, e, psi, k1, start, step)
        cn, cp, cp2, ph2, ph4, e = _coeffs(t + half, mode, wp, chi, sched)
        for n in range(start, dim, step):
            tmp[n] = psi[n] + half * k1[n]
        _apply(bands, cn, cp, cp2, ph2, ph4, e, tmp, k2, start, step)
        for n in range(start, dim, step):
            tmp[n] = psi[n] + half * k2[n]
        _apply(bands, cn, cp, cp2, ph2, ph4, e, tmp, k3, start, step)
        cn, cp, cp2, ph2, ph4, e = _coeffs(t + dt, mode, wp, chi, sched)
        for n in range(start, dim, step):
            tmp[n] = psi[n] + dt * k3[n]
        _apply(bands, cn, cp, cp2, ph2, ph4, e, tmp, k4, start, step)
        for n in range(start, dim, step):
            psi[n] += sixth * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n])
        if (i + 1) % stride == 0:
            out[isamp] = psi
            isamp += 1
            if not np.isfinite(psi[start].real):
                return out[:isamp]
    return out


@njit(cache=True)
def _lindblad(bands, cn, cp, cp2, ph2, ph4, e, kappa, rho, col, hcol, hr, out):
    """out = -i[H, rho] + kappa (a rho a^dag - {n, rho}/2) for Hermitian rho."""
    dim = rho.shape[0]
    for j in range(dim):
        for i in range(dim):
            col[i] = rho[i, j]
        _apply(bands, cn, cp, cp2, ph2, ph4, e, col, hcol, 0, 1)
        for i in range(dim):
            hr[i, j] = hcol[i]
    # -i rho H = (-i H rho)^dag
    for i in range(dim):
        for j in range(dim):
            out[i, j] = hr[i, j] + hr[j, i].conjugate()
    if kappa != 0.0:
        for i in range(dim):
            for j in range(dim):
                acc = -0.5 * (i + j) * rho[i, j]
                if i + 1 < dim and j + 1 < dim:
                    acc += math.sqrt((i + 1) * (j + 1)) * rho[i + 1, j + 1]
                out[i, j] += kappa * acc


@njit(cache=True, nogil=True)
def propagate_mixed(rho0, t0, dt, nsteps, stride, bands, mode, wp, chi, sched, kappa):
    dim = rho0.shape[0]
    out = np.empty((nsteps // stride + 1, dim, dim), dtype=np.complex128)
    rho = rho0.copy()
    tmp = np.empty((dim, dim), dtype=np.complex128)
    hr = np.empty((dim, dim), dtype=np.complex128)
    col = np.empty(dim, dtype=np.complex128)
    hcol = np.empty(dim, dtype=np.complex128)
    k1 = np.empty((dim, dim), dtype=np.complex128)
    k2 = np.empty((dim, dim), dtype=np.complex128)
    k3 = np.empty((dim, dim), dtype=np.complex128)
    k4 = np.empty((dim, dim), dtype=np.complex128)
    out[0] = rho
    isamp = 1
    half = 0.5 * dt
    for i in range(nsteps):
        t = t0 + i * dt
        cn, cp, cp2, ph2, ph4, e = _coeffs(t, mode, wp, chi, sched)
        _lindblad(bands, cn, cp, cp2, ph2, ph4, e, kappa, rho, col, hcol, hr, k1)
        cn, cp, cp2, ph2, ph4, e = _coeffs(t + half, mode, wp, chi, sched)
        tmp[:, :] = rho + half * k1
        _lindblad(bands, cn, cp, cp2, ph2, ph4, e, kappa, tmp, col, hcol, hr, k2)
        tmp[:, :] = rho + half * k2
        _lindblad(bands, cn, cp, cp2, ph2, ph4, e, kappa, tmp, col, hcol, hr, k3)
        cn, cp, cp2, ph2, ph4, e = _coeffs(t + dt, mode, wp, chi, sched)
        tmp[:, :] = rho + dt * k3
        _lindblad(bands, cn, cp, cp2, ph2, ph4, e, kappa, tmp, col, hcol, hr, k4)
        rho += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (i + 1) % stride == 0:
            out[isamp] = rho
            isamp += 1
            if not np.isfinite(rho[0, 0].real):
                return out[:isamp]
    return out
