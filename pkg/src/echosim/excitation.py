"""Weak pulse-pair excitation of the spectral grating.

Each pulse pair carries a Poissonian photon number and writes a periodic
population modulation (period 1/tau) into the medium, attenuated by the
pulse spectrum. Laser imperfections enter as a random intra-pair phase
error (phase diffusion) and a slow random walk of the carrier frequency
inside a lock window. Accumulating many pairs builds the stored grating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .medium import SpectralGrating

# Per-pair expected depletion w*N above this invalidates the perturbative
# write model (clamping would distort every accumulation).
MAX_PAIR_DEPLETION = 1e-3

# Above this mean the sequential-search inversion loses its speed advantage;
# delegate to the generator's own Poisson sampler.
_INVERSION_MAX_MEAN = 30.0

_DRIFT_CHUNK = 256


@dataclass(frozen=True)
class PulseSequenceSpec:
    """Parameters of one accumulation sequence of M weak pulse pairs.

    n_mean      mean photon number per pulse pair
    duration    single-pulse duration in seconds
    tau         intra-pair delay in seconds (sets the grating period 1/tau)
    sigma       pair-to-pair repetition period in seconds
    m_pairs     number of pairs in the sequence
    write_gain  grating amplitude written per photon; kept small so the
                total depletion stays perturbative
    """

    n_mean: float
    duration: float
    tau: float
    sigma: float
    m_pairs: int
    write_gain: float = 1e-9

    def __post_init__(self):
        if self.n_mean < 0:
            raise ValueError("n_mean must be >= 0")
        if self.duration <= 0:
            raise ValueError("pulse duration must be positive")
        if self.tau <= self.duration:
            raise ValueError(
                f"tau ({self.tau:g} s) must exceed the pulse duration ({self.duration:g} s)"
            )
        if self.sigma <= self.tau + self.duration:
            raise ValueError(
                f"pair period sigma ({self.sigma:g} s) must exceed tau + duration"
            )
        if self.m_pairs < 1:
            raise ValueError("m_pairs must be >= 1")
        if self.write_gain <= 0:
            raise ValueError("write_gain must be positive")


@dataclass(frozen=True)
class LaserModel:
    """Source imperfections driving accumulation decoherence.

    linewidth_fwhm of 0 means an ideal monochromatic source (infinite
    coherence time). The carrier performs a reflected Gaussian random walk
    of rms step drift_step_rms per pair interval, confined to
    +-lock_window_halfwidth around the nominal frequency.
    """

    linewidth_fwhm: float = 0.0
    lock_window_halfwidth: float = 0.0
    drift_step_rms: float = 0.0

    def __post_init__(self):
        if self.linewidth_fwhm < 0:
            raise ValueError("linewidth_fwhm must be >= 0")
        if self.lock_window_halfwidth < 0:
            raise ValueError("lock_window_halfwidth must be >= 0")
        if self.drift_step_rms < 0:
            raise ValueError("drift_step_rms must be >= 0")

    @property
    def coherence_time(self) -> float:
        """Coherence time 1/(pi * linewidth); inf for an ideal source."""
        if self.linewidth_fwhm == 0:
            return math.inf
        return 1.0 / (math.pi * self.linewidth_fwhm)

    @classmethod
    def ideal(cls) -> "LaserModel":
        return cls()


class StatisticsModel(Enum):
    """Which pulse pairs are allowed to contribute to the grating."""

    ALL_PAIRS = "all"
    TWO_PHOTON_MIN = "two"

    @classmethod
    def from_name(cls, name: str) -> "StatisticsModel":
        key = name.strip().lower()
        for member in cls:
            if key in (member.value, member.name.lower()):
                return member
        raise ValueError(
            f"unknown statistics model {name!r}; use 'all' or 'two'"
        )


def _poisson_support_cap(n_mean: float) -> int:
    # Generous upper tail: P(n > cap) is far below 1e-15 for any mean
    # handled by the inversion path.
    return int(n_mean + 12.0 * math.sqrt(n_mean + 1.0) + 25.0)


def _poisson_cdf(n_mean: float, cap: int) -> np.ndarray:
    # Same recurrence and accumulation order as the scalar search so both
    # samplers map identical uniforms to identical counts.
    cdf = np.empty(cap + 1)
    p = math.exp(-n_mean)
    c = p
    cdf[0] = c
    for k in range(1, cap + 1):
        p *= n_mean / k
        c += p
        cdf[k] = c
    return cdf


def sample_photon_number(rng: np.random.Generator, n_mean: float) -> int:
    """Draw one Poissonian photon number with mean ``n_mean``.

    Uses inversion by sequential search (exact at the small means of
    interest); large means fall back to the generator's sampler.
    """
    if n_mean < 0:
        raise ValueError("n_mean must be >= 0")
    if n_mean == 0:
        return 0
    if n_mean > _INVERSION_MAX_MEAN:
        return int(rng.poisson(n_mean))
    cap = _poisson_support_cap(n_mean)
    u = rng.random()
    n = 0
    p = math.exp(-n_mean)
    c = p
    while u > c and n < cap:
        n += 1
        p *= n_mean / n
        c += p
    return n


def sample_photon_numbers(rng: np.random.Generator, n_mean: float, size: int) -> np.ndarray:
    """Vectorized ``sample_photon_number``: one uniform per draw, same mapping."""
    if n_mean < 0:
        raise ValueError("n_mean must be >= 0")
    if n_mean == 0:
        return np.zeros(size, dtype=np.int64)
    if n_mean > _INVERSION_MAX_MEAN:
        return rng.poisson(n_mean, size).astype(np.int64)
    cap = _poisson_support_cap(n_mean)
    cdf = _poisson_cdf(n_mean, cap)
    u = rng.random(size)
    n = np.searchsorted(cdf, u, side="left").astype(np.int64)
    return np.minimum(n, cap)


def pulse_envelope_amplitude(duration: float, detuning) -> np.ndarray | float:
    """Spectral amplitude of a square pulse of length ``duration`` at ``detuning``.

    sin(pi f T)/(pi f T); unity at zero detuning, first null at 1/T.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    return np.sinc(np.asarray(detuning) * duration)


def pair_phase_error(rng: np.random.Generator, laser: LaserModel, tau: float) -> float:
    """Intra-pair phase error accrued over ``tau`` by phase diffusion.

    Gaussian with variance 2*tau/T_c. The noiseless limits (ideal source,
    or tau = 0) return 0 without consuming the stream.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    tc = laser.coherence_time
    if not math.isfinite(tc) or tau == 0:
        return 0.0
    return float(rng.normal(0.0, math.sqrt(2.0 * tau / tc)))


def _reflect_into_window(x: float, halfwidth: float) -> float:
    # Elastic reflection at +-halfwidth via the triangle fold of period
    # 4*halfwidth; exact for arbitrarily large overshoots.
    if halfwidth == 0:
        return 0.0
    if -halfwidth <= x <= halfwidth:
        return x
    period = 4.0 * halfwidth
    y = (x + halfwidth) % period
    if y > 2.0 * halfwidth:
        y = period - y
    return y - halfwidth


def carrier_frequency_walk(rng: np.random.Generator, laser: LaserModel, previous: float) -> float:
    """Advance the carrier offset by one Gaussian step, reflected in the lock window.

    A zero rms step returns ``previous`` without consuming the stream.
    """
    if abs(previous) > laser.lock_window_halfwidth:
        raise ValueError(
            f"previous offset {previous:g} Hz lies outside the lock window "
            f"+-{laser.lock_window_halfwidth:g} Hz"
        )
    if laser.drift_step_rms == 0:
        return previous
    step = float(rng.normal(0.0, laser.drift_step_rms))
    return _reflect_into_window(previous + step, laser.lock_window_halfwidth)


def _apply_write(g: SpectralGrating, spec: PulseSequenceSpec, amplitude: float,
                 phase: float, carrier_offset: float) -> None:
    # One pair's population modulation, amplitude in photon-equivalents.
    nu = g.grid.bin_centers() - carrier_offset
    env = np.sinc(nu * spec.duration)
    depth = spec.write_gain * g.storage_efficiency * amplitude
    g.deviation -= depth * env * env * 0.5 * (1.0 + np.cos(2.0 * np.pi * nu * spec.tau + phase))
    np.clip(g.deviation, -1.0, 0.0, out=g.deviation)


def write_pair(g: SpectralGrating, spec: PulseSequenceSpec, n_photons: int,
               phase: float = 0.0, carrier_offset: float = 0.0) -> SpectralGrating:
    """Write one pulse pair carrying ``n_photons`` into the grating.

    Each bin at detuning nu loses
    w * beta * n * env^2(nu - carrier) * (1 + cos(2 pi (nu - carrier) tau + phase))/2
    of its population, clamped so no bin depletes past -1. Zero photons
    leave the grating untouched.
    """
    if n_photons < 0:
        raise ValueError("n_photons must be >= 0")
    if n_photons == 0:
        return g
    _apply_write(g, spec, float(n_photons), phase, carrier_offset)
    return g


def _coherent_block(g: SpectralGrating, spec: PulseSequenceSpec,
                    weights: np.ndarray, phases: np.ndarray, have_noise: bool) -> None:
    # No carrier drift: every pair shares the same envelope, so the sum over
    # pairs collapses to three scalars before touching the bins.
    s0 = float(weights.sum())
    if have_noise:
        c = float((weights * np.cos(phases)).sum())
        s = float((weights * np.sin(phases)).sum())
    else:
        c, s = s0, 0.0
    nu = g.grid.bin_centers()
    env = np.sinc(nu * spec.duration)
    arg = 2.0 * np.pi * nu * spec.tau
    depth = spec.write_gain * g.storage_efficiency * 0.5
    g.deviation -= depth * env * env * (s0 + c * np.cos(arg) - s * np.sin(arg))


def _drifting_block(g: SpectralGrating, spec: PulseSequenceSpec, weights: np.ndarray,
                    phases: np.ndarray, offsets: np.ndarray) -> None:
    # Per-pair envelopes differ once the carrier walks; accumulate chunked
    # outer products to bound the working set.
    nu = g.grid.bin_centers()
    acc = np.zeros(g.grid.n_bins)
    two_pi_tau = 2.0 * np.pi * spec.tau
    for lo in range(0, len(weights), _DRIFT_CHUNK):
        hi = min(lo + _DRIFT_CHUNK, len(weights))
        w = weights[lo:hi]
        live = w != 0.0
        if not np.any(live):
            continue
        d = nu[np.newaxis, :] - offsets[lo:hi][live, np.newaxis]
        env = np.sinc(d * spec.duration)
        mod = 0.5 * (1.0 + np.cos(two_pi_tau * d + phases[lo:hi][live, np.newaxis]))
        acc += (w[live, np.newaxis] * env * env * mod).sum(axis=0)
    g.deviation -= spec.write_gain * g.storage_efficiency * acc


def accumulate(g: SpectralGrating, spec: PulseSequenceSpec, laser: LaserModel,
               model: StatisticsModel, rng: np.random.Generator,
               pair_weights: np.ndarray | None = None):
    """Accumulate ``spec.m_pairs`` pulse pairs into the grating.

    Pair k is written at time k*sigma with a sampled photon number, a phase
    error, and the current carrier offset. Under TWO_PHOTON_MIN, pairs with
    fewer than two photons are skipped entirely. ``pair_weights`` optionally
    scales each pair's write amplitude (e.g. the surviving fraction at
    read-out when the storage decays during accumulation).

    Draw order, for reproducibility: (1) one uniform per pair for the photon
    numbers; (2) one normal per pair for the phase errors, skipped entirely
    for an ideal source; (3) m_pairs - 1 normals for the carrier steps,
    skipped when drift_step_rms is 0. The carrier starts on the nominal
    frequency, so pair 0 always writes at zero offset.

    Returns the grating and the array of write times.
    """
    expected_depletion = spec.write_gain * spec.n_mean
    if expected_depletion > MAX_PAIR_DEPLETION:
        raise ValueError(
            f"per-pair expected depletion w*N = {expected_depletion:g} exceeds "
            f"{MAX_PAIR_DEPLETION:g}; the perturbative write model is invalid"
        )
    m = spec.m_pairs
    if pair_weights is not None:
        pair_weights = np.asarray(pair_weights, dtype=np.float64)
        if pair_weights.shape != (m,):
            raise ValueError(f"pair_weights must have shape ({m},)")

    n = sample_photon_numbers(rng, spec.n_mean, m)

    tc = laser.coherence_time
    have_noise = math.isfinite(tc) and spec.tau > 0
    if have_noise:
        phases = rng.normal(0.0, math.sqrt(2.0 * spec.tau / tc), m)
    else:
        phases = np.zeros(m)

    offsets = None
    if laser.drift_step_rms > 0 and m > 1:
        steps = rng.normal(0.0, laser.drift_step_rms, m - 1)
        offsets = np.zeros(m)
        x = 0.0
        for k in range(m - 1):
            x = _reflect_into_window(x + steps[k], laser.lock_window_halfwidth)
            offsets[k + 1] = x

    if model is StatisticsModel.TWO_PHOTON_MIN:
        active = n >= 2
    else:
        active = n >= 1
    weights = n.astype(np.float64)
    weights[~active] = 0.0
    if pair_weights is not None:
        weights *= pair_weights

    # Batched application is exact as long as no bin can hit the clamp mid
    # sequence; otherwise fall back to faithful pair-by-pair writes.
    total_depth = spec.write_gain * g.storage_efficiency * float(weights.sum())
    headroom = 1.0 + float(g.deviation.min())
    if total_depth <= headroom:
        if offsets is None:
            _coherent_block(g, spec, weights, phases, have_noise)
        else:
            _drifting_block(g, spec, weights, phases, offsets)
        np.clip(g.deviation, -1.0, 0.0, out=g.deviation)
    else:
        for k in np.flatnonzero(weights):
            off = 0.0 if offsets is None else float(offsets[k])
            _apply_write(g, spec, float(weights[k]), float(phases[k]), off)

    write_times = np.arange(m) * spec.sigma
    return g, write_times
