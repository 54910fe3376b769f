"""Echo read-out: from stored grating to time-domain signal.

A strong read-out pulse converts the spectral population grating into a
coherent burst delayed by the grating period's inverse, i.e. at t = tau.
This module synthesizes that trace by direct Fourier summation over the
frequency bins, integrates gated echo areas, and provides the closed-form
scaling models used to interpret constant-energy sweeps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .excitation import StatisticsModel
from .medium import SpectralGrating

_TIME_CHUNK = 256


@dataclass(frozen=True)
class ReadoutSpec:
    """Read-out pulse: area theta3 in (0, pi] and duration matching the write pulses."""

    theta3: float = math.pi / 2
    duration: float = 44e-9

    def __post_init__(self):
        if not 0 < self.theta3 <= math.pi:
            raise ValueError("theta3 must lie in (0, pi]")
        if self.duration <= 0:
            raise ValueError("duration must be positive")


@dataclass
class EchoTrace:
    """Gated intensity samples starting at the read-out time origin.

    Samples before gate_open are forced to zero (detector protection gate
    while the read-out pulse leaks through).
    """

    t0: float
    dt: float
    intensity: np.ndarray
    gate_open: float

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        self.intensity = np.asarray(self.intensity, dtype=np.float64)
        if np.any(self.intensity < 0):
            raise ValueError("intensity samples must be >= 0")

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.intensity)) * self.dt

    def peak_time(self) -> float:
        """Time of the largest gated intensity sample."""
        return float(self.times()[int(np.argmax(self.intensity))])


def readout_trace(g: SpectralGrating, r: ReadoutSpec, window: float, dt: float,
                  gate_open: float | None = None) -> EchoTrace:
    """Synthesize the echo intensity over [0, window] in steps of dt.

    field(t) = sin(theta3) * sum_bins deviation * env * exp(-i 2 pi nu t) * bin_width,
    intensity = |field|^2, zeroed before the gate opens (default: one pulse
    duration after the read-out).
    """
    if window <= 0:
        raise ValueError("window must be positive")
    nyquist_dt = 1.0 / (2.0 * g.grid.span)
    if dt > nyquist_dt:
        raise ValueError(
            f"dt = {dt:g} s undersamples the grid span {g.grid.span:g} Hz; "
            f"need dt <= {nyquist_dt:g} s"
        )
    if gate_open is None:
        gate_open = r.duration
    nu = g.grid.bin_centers()
    amp = g.deviation * np.sinc(nu * r.duration) * g.grid.bin_width
    n_samples = int(math.floor(window / dt)) + 1
    t = np.arange(n_samples) * dt
    field = np.empty(n_samples, dtype=np.complex128)
    for lo in range(0, n_samples, _TIME_CHUNK):
        hi = min(lo + _TIME_CHUNK, n_samples)
        kernel = np.exp(-2j * np.pi * np.outer(t[lo:hi], nu))
        field[lo:hi] = kernel @ amp
    intensity = math.sin(r.theta3) ** 2 * np.abs(field) ** 2
    intensity[t < gate_open] = 0.0
    return EchoTrace(t0=0.0, dt=dt, intensity=intensity, gate_open=gate_open)


def echo_area(trace: EchoTrace, gate_start: float, gate_end: float) -> float:
    """Integrated intensity over [gate_start, gate_end]; the scalar echo signal S."""
    if gate_start >= gate_end:
        raise ValueError("gate_start must be < gate_end")
    t = trace.times()
    mask = (t >= gate_start) & (t <= gate_end)
    if not np.any(mask):
        raise ValueError(
            f"gate [{gate_start:g}, {gate_end:g}] s contains no samples of the trace"
        )
    return float(trace.intensity[mask].sum() * trace.dt)


def expected_signal(n_mean: float, m_pairs: int, duration: float,
                    model: StatisticsModel) -> float:
    """Closed-form echo signal: N^2 M^2 T, times (1 - e^-N)^2 under TWO_PHOTON_MIN."""
    if n_mean < 0:
        raise ValueError("n_mean must be >= 0")
    if m_pairs < 1:
        raise ValueError("m_pairs must be >= 1")
    if duration <= 0:
        raise ValueError("duration must be positive")
    s = n_mean ** 2 * m_pairs ** 2 * duration
    if model is StatisticsModel.TWO_PHOTON_MIN:
        s *= (-math.expm1(-n_mean)) ** 2
    return s


@dataclass(frozen=True)
class CurvePoint:
    """One row of a constant-energy model-curve table (normalized signals)."""

    n_photons: float
    m_pairs: int
    s_all: float
    s_two: float
    ratio: float


def model_curves(n_list, energy_budget: float, duration: float) -> list[CurvePoint]:
    """Expected signals across an N sweep at fixed total energy N*M.

    Both models are normalized to their own largest-N entry, the point
    where they coincide; ratio is the normalized two-photon curve over the
    all-pairs curve.
    """
    n_arr = [float(n) for n in n_list]
    if not n_arr:
        raise ValueError("n_list must not be empty")
    if any(n <= 0 for n in n_arr):
        raise ValueError("all n_list entries must be positive")
    m_arr = [int(math.floor(energy_budget / n + 0.5)) for n in n_arr]
    for n, m in zip(n_arr, m_arr):
        if m < 1:
            raise ValueError(
                f"energy budget {energy_budget:g} gives no complete pair at N = {n:g}"
            )
    s_all = [expected_signal(n, m, duration, StatisticsModel.ALL_PAIRS)
             for n, m in zip(n_arr, m_arr)]
    s_two = [expected_signal(n, m, duration, StatisticsModel.TWO_PHOTON_MIN)
             for n, m in zip(n_arr, m_arr)]
    anchor = int(np.argmax(n_arr))
    points = []
    for n, m, sa, st in zip(n_arr, m_arr, s_all, s_two):
        sa_n = sa / s_all[anchor]
        st_n = st / s_two[anchor]
        points.append(CurvePoint(n_photons=n, m_pairs=m, s_all=sa_n, s_two=st_n,
                                 ratio=st_n / sa_n))
    return points


def dump_trace_csv(trace: EchoTrace, path: str | Path) -> None:
    """Write the trace as CSV with header ``time_s,intensity``."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["time_s", "intensity"])
        for t, i in zip(trace.times(), trace.intensity):
            writer.writerow([f"{t:.9e}", f"{i:.9e}"])


def dump_curves_csv(points: list[CurvePoint], path: str | Path) -> None:
    """Write model curves as CSV: ``n_photons,m_pairs,s_all,s_two,ratio``."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["n_photons", "m_pairs", "s_all", "s_two", "ratio"])
        for p in points:
            writer.writerow([f"{p.n_photons:g}", p.m_pairs, f"{p.s_all:.9e}",
                             f"{p.s_two:.9e}", f"{p.ratio:.9e}"])
