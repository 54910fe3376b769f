"""Persistent-storage relaxation: decay model, fitting, and compensation.

The stored grating relaxes while the accumulation is still running, so
pairs written early contribute less at read-out than late ones. A
bi-exponential decay fitted to spectral-hole data supplies the decay law;
its time average over the accumulation window ("survival mean") squares
into the compensation factor for echo areas. Erasure resets the medium
between runs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .medium import SpectralGrating

_FIT_MAX_ITER = 200
_MIN_FIT_SAMPLES = 8
_SURVIVAL_FLOOR = 1e-12


class FitConvergenceError(RuntimeError):
    """Raised when the decay fit fails to converge; carries diagnostics."""

    def __init__(self, message: str, residual_norm: float = math.nan,
                 n_iterations: int = 0):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.n_iterations = n_iterations


@dataclass(frozen=True)
class BiExpDecay:
    """d(t) = a1 exp(-t/t1) + a2 exp(-t/t2), normalized so d(0) = 1.

    The fast component is first by convention (t1 <= t2).
    """

    a1: float
    t1: float
    a2: float
    t2: float

    def __post_init__(self):
        if self.a1 < 0 or self.a2 < 0:
            raise ValueError("amplitudes must be >= 0")
        if self.t1 <= 0 or self.t2 <= 0:
            raise ValueError("time constants must be positive")
        if self.t1 > self.t2:
            raise ValueError("components must be ordered t1 <= t2")
        if abs(self.a1 + self.a2 - 1.0) > 1e-6:
            raise ValueError("amplitudes must sum to 1 (d(0) = 1 normalization)")

    @classmethod
    def from_components(cls, a1: float, t1: float, a2: float, t2: float) -> "BiExpDecay":
        """Normalize the amplitude sum and order the components."""
        total = a1 + a2
        if total <= 0:
            raise ValueError("amplitude sum must be positive")
        if t1 > t2:
            a1, t1, a2, t2 = a2, t2, a1, t1
        return cls(a1=a1 / total, t1=t1, a2=a2 / total, t2=t2)

    def evaluate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return self.a1 * np.exp(-t / self.t1) + self.a2 * np.exp(-t / self.t2)

    __call__ = evaluate


# Fig.-anchored presets: the fast ~100 s component is common; the slow
# component stretches from several hundred seconds at zero field to
# thousands of seconds in a small magnetic field.
ZERO_FIELD_DECAY = BiExpDecay(a1=0.6, t1=100.0, a2=0.4, t2=500.0)
IN_FIELD_DECAY = BiExpDecay(a1=0.6, t1=100.0, a2=0.4, t2=3000.0)


@dataclass
class HoleDecaySamples:
    """Hole areas probed at increasing times after a burn at t = 0."""

    time_s: np.ndarray
    hole_area: np.ndarray
    noise_sigma: np.ndarray

    def __post_init__(self):
        self.time_s = np.asarray(self.time_s, dtype=np.float64)
        self.hole_area = np.asarray(self.hole_area, dtype=np.float64)
        self.noise_sigma = np.broadcast_to(
            np.asarray(self.noise_sigma, dtype=np.float64), self.time_s.shape
        ).copy()
        if self.time_s.shape != self.hole_area.shape:
            raise ValueError("time_s and hole_area must have equal length")
        if self.time_s.size and self.time_s[0] < 0:
            raise ValueError("probe times must be >= 0")
        if np.any(np.diff(self.time_s) <= 0):
            raise ValueError("probe times must be strictly increasing")
        if np.any(self.hole_area < 0):
            raise ValueError("hole areas must be >= 0")
        if np.any(self.noise_sigma < 0):
            raise ValueError("noise_sigma must be >= 0")

    def __len__(self) -> int:
        return self.time_s.size


@dataclass(frozen=True)
class FitDiagnostics:
    """Quality measures of a decay fit.

    covariance is the estimated parameter covariance in (a1, t1, a2, t2)
    order, from the Gauss-Newton normal equations at the solution.
    """

    residual_norm: float
    covariance: np.ndarray
    n_iterations: int


def simulate_hole_decay(decay: BiExpDecay, probe_times, noise_sigma: float,
                        rng: np.random.Generator) -> HoleDecaySamples:
    """Sample d(t) + Gaussian noise at the probe times, clamped at zero."""
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    t = np.asarray(probe_times, dtype=np.float64)
    areas = decay.evaluate(t)
    if noise_sigma > 0:
        areas = areas + rng.normal(0.0, noise_sigma, t.shape)
    areas = np.maximum(areas, 0.0)
    return HoleDecaySamples(time_s=t, hole_area=areas, noise_sigma=np.full(t.shape, noise_sigma))


def _params(theta: np.ndarray) -> np.ndarray:
    # Clamp the log parameters so wild trial steps cannot underflow a time
    # constant to zero; such steps are rejected by the damping anyway.
    return np.exp(np.clip(theta, -500.0, 500.0))


def _model(theta: np.ndarray, t: np.ndarray) -> np.ndarray:
    a1, t1, a2, t2 = _params(theta)
    return a1 * np.exp(-t / t1) + a2 * np.exp(-t / t2)


def _jacobian(theta: np.ndarray, t: np.ndarray) -> np.ndarray:
    # Derivatives with respect to log parameters keep the search positive
    # and roughly equilibrated across scales.
    a1, t1, a2, t2 = _params(theta)
    e1 = np.exp(-t / t1)
    e2 = np.exp(-t / t2)
    return np.column_stack([a1 * e1, a1 * e1 * t / t1, a2 * e2, a2 * e2 * t / t2])


def _initial_guess(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    span = t[-1] - t[0]
    tiny = 1e-12 * max(float(y.max()), 1.0)
    # Slow component from a log-linear fit to the last third.
    k = max(len(t) // 3, 4)
    tt, yy = t[-k:], y[-k:]
    pos = yy > tiny
    if pos.sum() >= 2:
        slope, intercept = np.polyfit(tt[pos], np.log(yy[pos]), 1)
        t2 = -1.0 / slope if slope < -1e-300 else 10.0 * span
        a2 = math.exp(intercept)
    else:
        t2 = span
        a2 = max(float(yy.mean()), tiny)
    t2 = min(max(t2, span / 50.0), 100.0 * span)
    a2 = min(max(a2, tiny), 2.0 * float(y.max()) + tiny)
    # Fast component from the early residual against the slow fit.
    resid = y - a2 * np.exp(-t / t2)
    early = resid > max(0.02 * float(resid.max()), tiny)
    early[len(t) // 2:] = False
    if early.sum() >= 2:
        slope, intercept = np.polyfit(t[early], np.log(resid[early]), 1)
        t1 = -1.0 / slope if slope < -1e-300 else t2 / 3.0
        a1 = math.exp(intercept)
    else:
        t1 = span / 20.0
        a1 = max(float(y[0]) - a2, 0.05 * a2)
    t1 = min(max(t1, 1e-6 * span), t2 * 0.9)
    a1 = max(a1, 1e-3 * a2)
    return np.log([a1, t1, a2, t2])


def fit_biexp(samples: HoleDecaySamples):
    """Least-squares bi-exponential fit to hole-decay samples.

    Initialization: log-linear fit to the last third of the samples for the
    slow component, then to the early residual for the fast one. Refinement:
    damped Gauss-Newton on the log parameters. The returned amplitudes are
    renormalized to sum to 1 and ordered t1 <= t2.

    Returns (BiExpDecay, FitDiagnostics). Raises FitConvergenceError if the
    refinement does not settle, ValueError for unusable or constant data.
    """
    if len(samples) < _MIN_FIT_SAMPLES:
        raise ValueError(f"need at least {_MIN_FIT_SAMPLES} samples, got {len(samples)}")
    t = samples.time_s
    y = samples.hole_area
    spread = float(y.max() - y.min())
    noise = float(np.median(samples.noise_sigma))
    if spread <= max(4.0 * noise, 1e-9 * float(np.abs(y).max()), 1e-15):
        raise ValueError("no decay detected: samples are constant within noise")

    theta = _initial_guess(t, y)
    r = _model(theta, t) - y
    cost = float(r @ r)
    lam = 1e-3
    stalled = 0
    n_iter = 0
    for n_iter in range(1, _FIT_MAX_ITER + 1):
        jac = _jacobian(theta, t)
        grad = jac.T @ r
        hess = jac.T @ jac
        accepted = False
        for _ in range(60):
            damped = hess + lam * np.diag(np.diag(hess) + 1e-12)
            try:
                step = np.linalg.solve(damped, -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = theta + step
            r_trial = _model(trial, t) - y
            cost_trial = float(r_trial @ r_trial)
            if cost_trial <= cost:
                improvement = cost - cost_trial
                theta, r, cost = trial, r_trial, cost_trial
                lam = max(lam / 3.0, 1e-14)
                accepted = True
                break
            lam *= 3.0
        if not accepted:
            raise FitConvergenceError(
                f"damping search failed after {n_iter} iterations",
                residual_norm=math.sqrt(cost), n_iterations=n_iter,
            )
        if np.max(np.abs(step)) < 1e-12 or improvement <= 1e-15 * max(cost, 1e-300):
            stalled += 1
            if stalled >= 2:
                break
        else:
            stalled = 0
    else:
        raise FitConvergenceError(
            f"no convergence within {_FIT_MAX_ITER} iterations",
            residual_norm=math.sqrt(cost), n_iterations=_FIT_MAX_ITER,
        )

    a1, t1, a2, t2 = _params(theta)
    decay = BiExpDecay.from_components(a1, t1, a2, t2)

    jac = _jacobian(theta, t)
    dof = max(len(samples) - 4, 1)
    sigma2 = cost / dof
    try:
        cov_log = sigma2 * np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        cov_log = sigma2 * np.linalg.pinv(jac.T @ jac)
    scale = np.diag(_params(theta))
    cov = scale @ cov_log @ scale
    diag = FitDiagnostics(residual_norm=math.sqrt(cost), covariance=cov, n_iterations=n_iter)
    return decay, diag


def survival_mean(decay: BiExpDecay, t_acc: float) -> float:
    """Time-averaged surviving fraction over an accumulation of length t_acc.

    (1/t_acc) * integral of d(t) from 0 to t_acc, in closed form.
    """
    if t_acc <= 0:
        raise ValueError("t_acc must be positive")
    term1 = decay.a1 * decay.t1 * -math.expm1(-t_acc / decay.t1)
    term2 = decay.a2 * decay.t2 * -math.expm1(-t_acc / decay.t2)
    return (term1 + term2) / t_acc


def compensate_signal(s: float, decay: BiExpDecay, t_acc: float) -> float:
    """Undo accumulation-time relaxation: echo areas scale as survival squared."""
    if s < 0:
        raise ValueError("echo area must be >= 0")
    surv = survival_mean(decay, t_acc)
    if surv < _SURVIVAL_FLOOR:
        raise RuntimeError(
            f"compensation ill-conditioned: survival mean {surv:g} below {_SURVIVAL_FLOOR:g}"
        )
    return s / surv ** 2


def accumulation_survival_weights(decay: BiExpDecay, m_pairs: int, sigma: float,
                                  exponent: float = 1.0) -> np.ndarray:
    """Surviving fraction at read-out for each pair of an accumulation.

    Pair k is written at k*sigma and read at m_pairs*sigma, so it ages by
    (m_pairs - k)*sigma. ``exponent`` scales the decay law for exploring a
    grating that relaxes differently from the hole data (default: same law).
    """
    if m_pairs < 1:
        raise ValueError("m_pairs must be >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    ages = np.arange(m_pairs, 0, -1, dtype=np.float64) * sigma
    weights = decay.evaluate(ages)
    if exponent != 1.0:
        weights = weights ** exponent
    return weights


def erase(g: SpectralGrating, scan_halfwidth: float) -> SpectralGrating:
    """Zero all bins within +-scan_halfwidth of the grid center (erasing scan)."""
    if scan_halfwidth <= 0:
        raise ValueError("scan_halfwidth must be positive")
    nu = g.grid.bin_centers()
    inside = np.abs(nu - g.grid.center_detuning) <= scan_halfwidth
    g.deviation[inside] = 0.0
    return g


def dump_decay_samples_csv(samples: HoleDecaySamples, path: str | Path) -> None:
    """Write samples as CSV with header ``time_s,hole_area``."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["time_s", "hole_area"])
        for t, a in zip(samples.time_s, samples.hole_area):
            writer.writerow([f"{t:.9e}", f"{a:.9e}"])


def load_decay_samples_csv(path: str | Path, noise_sigma: float = 0.0) -> HoleDecaySamples:
    """Read ``time_s,hole_area`` CSV; noise_sigma annotates the assumed noise level."""
    times = []
    areas = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["time_s", "hole_area"]:
            raise ValueError(f"{path}: expected CSV header 'time_s,hole_area'")
        for row in reader:
            if not row or not row[0].strip():
                continue
            times.append(float(row[0]))
            areas.append(float(row[1]))
    return HoleDecaySamples(
        time_s=np.array(times), hole_area=np.array(areas),
        noise_sigma=np.full(len(times), noise_sigma),
    )


def format_fit_params(decay: BiExpDecay, diagnostics: FitDiagnostics) -> str:
    """Render fitted parameters as a key=value line."""
    return (f"a1={decay.a1:.6g} t1_s={decay.t1:.6g} "
            f"a2={decay.a2:.6g} t2_s={decay.t2:.6g} "
            f"residual={diagnostics.residual_norm:.6g}")
