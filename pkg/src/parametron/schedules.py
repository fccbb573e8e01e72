"""Closed-form control schedules: pump ramp, detuning paths and drive envelopes.

All amplitudes are angular frequencies in rad/ns and all times in ns. A
schedule is evaluated analytically at any t >= 0 so that integrator stages
may fall between grid points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

CONSTANT = "constant"
RAMP_HOLD = "linear-ramp-hold"
LINEAR_DECAY = "linear-decay"
SIN2_PULSE = "sin2-pulse"
SINE_ENVELOPE = "sine-envelope"

KINDS = (CONSTANT, RAMP_HOLD, LINEAR_DECAY, SIN2_PULSE, SINE_ENVELOPE)
# integer codes understood by the compiled kernels
KIND_CODES = {kind: i for i, kind in enumerate(KINDS)}


@dataclass(frozen=True)
class Schedule:
    kind: str
    amplitude: float
    duration: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind != CONSTANT and not self.duration > 0:
            raise ValueError(f"{self.kind} schedule needs a positive duration, got {self.duration}")

    def __call__(self, t: float) -> float:
        return eval_schedule(self, t)

    def derivative(self, t: float) -> float:
        a, T = self.amplitude, self.duration
        if self.kind == CONSTANT or t > T:
            return 0.0
        if self.kind == RAMP_HOLD:
            return a / T
        if self.kind == LINEAR_DECAY:
            return -a / T
        if self.kind == SIN2_PULSE:
            return a * math.pi / T * math.sin(2 * math.pi * t / T)
        return a * math.pi / T * math.cos(math.pi * t / T)

    def encode(self) -> tuple[int, float, float]:
        return KIND_CODES[self.kind], float(self.amplitude), float(self.duration)

    def scaled(self, factor: float) -> "Schedule":
        return Schedule(self.kind, self.amplitude * factor, self.duration)


def eval_schedule(s: Schedule, t: float) -> float:
    if t < 0:
        raise ValueError(f"schedule evaluated at negative time {t}")
    a, T = s.amplitude, s.duration
    if s.kind == CONSTANT:
        return a
    if s.kind == RAMP_HOLD:
        return a * t / T if t <= T else a
    if t > T:
        return 0.0
    if s.kind == LINEAR_DECAY:
        return a * (1.0 - t / T)
    if s.kind == SIN2_PULSE:
        return a * math.sin(math.pi * t / T) ** 2
    return a * math.sin(math.pi * t / T)


def constant(value: float) -> Schedule:
    return Schedule(CONSTANT, value)


def linear_ramp(beta0: float, t_ramp: float) -> Schedule:
    """beta0 * t / T up to T, then held at beta0."""
    return Schedule(RAMP_HOLD, beta0, t_ramp)


def linear_decay(delta0: float, t_ramp: float) -> Schedule:
    """delta0 * (1 - t / T) up to T, then zero."""
    return Schedule(LINEAR_DECAY, delta0, t_ramp)


def sin2_pulse(delta0: float, t_gate: float) -> Schedule:
    return Schedule(SIN2_PULSE, delta0, t_gate)


def rz_envelope(beta: float, chi: float, t_gate: float, scale: float = 1.0) -> Schedule:
    """Sine drive envelope whose integral produces a pi phase flip (times ``scale``)."""
    peak = math.pi**2 / (8.0 * t_gate * math.sqrt(2.0 * beta / chi))
    return Schedule(SINE_ENVELOPE, scale * peak, t_gate)


def rz_phase(s: Schedule, beta: float, chi: float) -> float:
    """Relative phase 4 sqrt(2 beta / chi) * integral of E(t) over the pulse."""
    if s.kind != SINE_ENVELOPE:
        raise ValueError("rz_phase needs a sine-envelope schedule")
    area = s.amplitude * 2.0 * s.duration / math.pi
    return 4.0 * math.sqrt(2.0 * beta / chi) * area
