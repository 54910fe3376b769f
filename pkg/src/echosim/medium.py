"""Discrete spectral representation of an inhomogeneously broadened absorber.

The medium is modelled as a uniform grid of frequency bins, each holding the
ground-state population deviation left behind by the excitation sequence.
A periodic deviation pattern (period 1/tau for pulse separation tau) is the
stored grating that later radiates the echo.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MIN_BINS = 16


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid of frequency bins centred on ``center_detuning``.

    All frequencies are detunings in Hz relative to the optical carrier.
    """

    span: float
    n_bins: int
    center_detuning: float = 0.0

    def __post_init__(self):
        if self.span <= 0:
            raise ValueError(f"grid span must be positive, got {self.span}")
        if self.n_bins < MIN_BINS:
            raise ValueError(
                f"n_bins must be >= {MIN_BINS} for usable resolution, got {self.n_bins}"
            )

    @property
    def bin_width(self) -> float:
        return self.span / self.n_bins

    def bin_centers(self) -> np.ndarray:
        """Bin-centre detunings in ascending order (midpoint convention)."""
        i = np.arange(self.n_bins)
        return self.center_detuning - 0.5 * self.span + (i + 0.5) * self.bin_width

    def resolves_delay(self, delay: float) -> bool:
        """True if a grating of period 1/delay has >= 2 bins per period."""
        return delay > 0 and self.bin_width <= 1.0 / (2.0 * delay)

    def supports_pair_delay(self, tau: float) -> bool:
        """True if writes at intra-pair delay tau are resolved (>= 8 bins/period)."""
        return tau > 0 and self.bin_width <= 1.0 / (8.0 * tau)

    def covers_pulse_spectrum(self, duration: float) -> bool:
        """True if the span holds the main spectral lobe of a pulse this long."""
        return duration > 0 and self.span >= 4.0 / duration


def make_grid(span: float, n_bins: int, center_detuning: float = 0.0) -> FrequencyGrid:
    """Build a uniform frequency grid; rejects unusable resolutions."""
    return FrequencyGrid(span=span, n_bins=int(n_bins), center_detuning=center_detuning)


def default_grid(duration: float, tau: float, center_detuning: float = 0.0) -> FrequencyGrid:
    """Grid sized for a pulse of length ``duration`` paired at delay ``tau``.

    Span is 10/duration (pulse spectrum plus sidelobes with margin); the bin
    count is the smallest power of two giving at least 16 bins per grating
    period 1/tau.
    """
    if duration <= 0 or tau <= 0:
        raise ValueError("duration and tau must be positive")
    span = 10.0 / duration
    needed = span * 16.0 * tau
    n_bins = MIN_BINS
    while n_bins < needed:
        n_bins *= 2
    return FrequencyGrid(span=span, n_bins=n_bins, center_detuning=center_detuning)


@dataclass
class SpectralGrating:
    """Per-bin ground-state population deviation (negative = depleted).

    ``storage_efficiency`` scales how much of each excitation survives into
    long-lived storage; deviations are clamped to [-1, 0] by write operations
    since no bin can lose more than its full population.
    """

    grid: FrequencyGrid
    deviation: np.ndarray
    storage_efficiency: float = 1.0

    def __post_init__(self):
        self.deviation = np.asarray(self.deviation, dtype=np.float64)
        if self.deviation.shape != (self.grid.n_bins,):
            raise ValueError(
                f"deviation shape {self.deviation.shape} does not match grid "
                f"({self.grid.n_bins} bins)"
            )
        if not 0.0 <= self.storage_efficiency <= 1.0:
            raise ValueError("storage_efficiency must lie in [0, 1]")

    @classmethod
    def zeros(cls, grid: FrequencyGrid, storage_efficiency: float = 1.0) -> "SpectralGrating":
        return cls(grid=grid, deviation=np.zeros(grid.n_bins), storage_efficiency=storage_efficiency)

    def copy(self) -> "SpectralGrating":
        return SpectralGrating(
            grid=self.grid,
            deviation=self.deviation.copy(),
            storage_efficiency=self.storage_efficiency,
        )


def grating_fourier_component(g: SpectralGrating, delay: float) -> complex:
    """Complex modulation amplitude of the grating at period 1/delay.

    Returns sum over bins of deviation * exp(-i 2 pi nu delay) * bin_width.
    Raises if the period is not resolvable on the grid (aliasing).
    """
    if delay <= 0:
        raise ValueError(f"delay must be positive, got {delay}")
    if not g.grid.resolves_delay(delay):
        raise ValueError(
            f"delay {delay:g} s aliases on this grid: period {1.0 / delay:g} Hz "
            f"needs bin_width <= {1.0 / (2.0 * delay):g} Hz, have {g.grid.bin_width:g} Hz"
        )
    nu = g.grid.bin_centers()
    phase = np.exp(-2j * np.pi * nu * delay)
    return complex(np.sum(g.deviation * phase) * g.grid.bin_width)


def scale_grating(g: SpectralGrating, factor: float) -> SpectralGrating:
    """Multiply every bin by ``factor`` in [0, 1] (ages stored modulation)."""
    if not 0.0 <= factor <= 1.0:
        raise ValueError(f"scale factor must lie in [0, 1], got {factor}")
    g.deviation *= factor
    return g


def dump_grating_csv(g: SpectralGrating, path: str | Path) -> None:
    """Write the grating as CSV with header ``detuning_hz,deviation``."""
    nu = g.grid.bin_centers()
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["detuning_hz", "deviation"])
        for x, d in zip(nu, g.deviation):
            writer.writerow([f"{x:.9e}", f"{d:.9e}"])
