"""Excitation waveforms: exponential chirps, sines, trapezoidal pulses.

The workhorse is the exponential chirp pair: a differential sine sweep whose
instantaneous frequency rises geometrically from f0 to f1 over a horizon
chosen so the sweep contains exactly n_per periods. Sampling is uniform in
phase, which gives a constant number of samples per period at every
frequency; the closed-form phase inverse makes that grid cheap and exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .timeseries import TimeSeries


@dataclass(frozen=True)
class ChirpSpec:
    """Exponential differential chirp.

    f0, f1 : sweep endpoint frequencies in Hz, 0 < f0 < f1.
    v_bias : common-mode level in volts.
    amplitude : differential half-swing in volts (v1 = bias + a sin,
        v2 = bias - a sin).
    n_per : total number of periods in the sweep.
    samples_per_period : phase-uniform samples per period.
    """

    f0: float
    f1: float
    v_bias: float
    amplitude: float
    n_per: int
    samples_per_period: int = 500

    def __post_init__(self):
        if not (0 < self.f0 < self.f1):
            raise ValueError(f"need 0 < f0 < f1, got f0={self.f0}, f1={self.f1}")
        if self.n_per < 1 or self.samples_per_period < 2:
            raise ValueError("need n_per >= 1 and samples_per_period >= 2")

    @property
    def horizon(self):
        """Sweep length T = n_per (ln f1 - ln f0)/(f1 - f0).

        This is the unique T for which the accumulated phase over [0, T]
        equals 2 pi n_per when f(t) = f0 (f1/f0)^(t/T).
        """
        return self.n_per * math.log(self.f1 / self.f0) / (self.f1 - self.f0)


def chirp_phase(spec, t):
    """Accumulated phase (radians) of the chirp at time(s) t in [0, horizon]."""
    t = np.asarray(t, dtype=float)
    T = spec.horizon
    lnr = math.log(spec.f1 / spec.f0)
    # 2 pi T (f0^(1-t/T) f1^(t/T) - f0)/ln(f1/f0); the power form is written
    # via expm1 so phase(0) is exactly 0
    return 2.0 * math.pi * T * spec.f0 * np.expm1(lnr * t / T) / lnr


def invert_phase(spec, theta):
    """Time at which the chirp's accumulated phase reaches theta (radians)."""
    theta = np.asarray(theta, dtype=float)
    T = spec.horizon
    lnr = math.log(spec.f1 / spec.f0)
    return T * np.log1p(theta * lnr / (2.0 * math.pi * T * spec.f0)) / lnr


def instantaneous_frequency(spec, t):
    """f(t) = f0 (f1/f0)^(t/T), the chirp's frequency law."""
    t = np.asarray(t, dtype=float)
    T = spec.horizon
    return spec.f0 * (spec.f1 / spec.f0) ** (t / T)


def gen_chirp_pair(spec):
    """Sample the differential chirp pair on the phase-uniform grid.

    Returns a TimeSeries with channels v1, v2. Phase steps are exactly
    2 pi / samples_per_period by construction; timestamps come from the
    closed-form phase inverse, so the first sample is t = 0 and the last
    lands on the horizon (n_per * samples_per_period + 1 samples total).
    """
    m = np.arange(spec.n_per * spec.samples_per_period + 1)
    theta = m * (2.0 * math.pi / spec.samples_per_period)
    t = invert_phase(spec, theta)
    s = spec.amplitude * np.sin(theta)
    v1 = spec.v_bias + s
    v2 = spec.v_bias - s
    return TimeSeries(t, np.column_stack([v1, v2]), ("v1", "v2"))


@dataclass(frozen=True)
class SineSpec:
    """Constant-frequency differential pair; same channel convention as the chirp."""

    freq: float
    v_bias: float
    amplitude: float
    n_per: int
    samples_per_period: int = 500

    def __post_init__(self):
        if self.freq <= 0:
            raise ValueError(f"need freq > 0, got {self.freq}")
        if self.n_per < 1 or self.samples_per_period < 2:
            raise ValueError("need n_per >= 1 and samples_per_period >= 2")


def gen_sine(spec):
    """Uniformly sampled differential sine, endpoint included."""
    m = np.arange(spec.n_per * spec.samples_per_period + 1)
    theta = m * (2.0 * math.pi / spec.samples_per_period)
    t = m / (spec.freq * spec.samples_per_period)
    s = spec.amplitude * np.sin(theta)
    return TimeSeries(
        t, np.column_stack([spec.v_bias + s, spec.v_bias - s]), ("v1", "v2")
    )


@dataclass(frozen=True)
class PulseSpec:
    """Trapezoidal v1 against a constant v2.

    One cycle is dwell at v_lo, linear ramp up over t_ramp, dwell at v_hi,
    ramp down. Zero dwells give a triangle wave. dt_max bounds the sample
    spacing inside segments so integrators see interior points; corner
    breakpoints are always sampled exactly.
    """

    v_lo: float
    v_hi: float
    t_ramp: float
    t_dwell_lo: float
    t_dwell_hi: float
    v2_const: float
    n_cycles: int = 1
    dt_max: float = 0.0  # 0 means t_ramp / 8

    def __post_init__(self):
        if self.t_ramp <= 0:
            raise ValueError("t_ramp must be positive")
        if self.t_dwell_lo < 0 or self.t_dwell_hi < 0:
            raise ValueError("dwell times must be nonnegative")
        if self.n_cycles < 1:
            raise ValueError("n_cycles must be >= 1")


def gen_pulse(spec):
    """Sample the trapezoid; returns channels v1, v2."""
    dt_max = spec.dt_max if spec.dt_max > 0 else spec.t_ramp / 8.0
    knots_t = [0.0]
    knots_v = [spec.v_lo]
    t = 0.0
    for _ in range(spec.n_cycles):
        for seg_len, v_end in (
            (spec.t_dwell_lo, spec.v_lo),
            (spec.t_ramp, spec.v_hi),
            (spec.t_dwell_hi, spec.v_hi),
            (spec.t_ramp, spec.v_lo),
        ):
            if seg_len == 0.0:
                continue
            t += seg_len
            knots_t.append(t)
            knots_v.append(v_end)

    ts = []
    vs = []
    for k in range(len(knots_t) - 1):
        t0, t1 = knots_t[k], knots_t[k + 1]
        v0, v1 = knots_v[k], knots_v[k + 1]
        nseg = max(1, int(math.ceil((t1 - t0) / dt_max)))
        frac = np.arange(nseg) / nseg
        ts.append(t0 + frac * (t1 - t0))
        vs.append(v0 + frac * (v1 - v0))
    ts.append(np.array([knots_t[-1]]))
    vs.append(np.array([knots_v[-1]]))
    tt = np.concatenate(ts)
    vv = np.concatenate(vs)
    v2 = np.full_like(vv, spec.v2_const)
    return TimeSeries(tt, np.column_stack([vv, v2]), ("v1", "v2"))
