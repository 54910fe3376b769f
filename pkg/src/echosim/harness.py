"""Sweep orchestration: configs, constant-energy runs, and sanity checks.

A sweep holds the total pulse-pair energy N*M fixed while varying the
photon number N per pair, accumulates and reads out an echo for each
(N, seed) point, and normalizes mean echo areas to the largest-N point.
Desk-scale caps keep the pair counts tractable; normalized results are
scale-free.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .excitation import LaserModel, PulseSequenceSpec, StatisticsModel, accumulate
from .medium import SpectralGrating, default_grid
from .readout import ReadoutSpec, echo_area, readout_trace
from .relaxation import (
    BiExpDecay,
    accumulation_survival_weights,
    compensate_signal,
    survival_mean,
)

WORKERS_ENV_VAR = "ECHOSIM_WORKERS"

_REQUIRED_KEYS = ("n_list", "energy_budget", "t", "tau", "sigma")
_LASER_KEYS = ("laser_linewidth_fwhm", "laser_lock_window_halfwidth", "laser_drift_step_rms")
_DECAY_KEYS = ("decay_a1", "decay_t1", "decay_a2", "decay_t2")
_OPTIONAL_KEYS = ("model", "theta3", "seeds", "master_seed", "m_cap", "write_gain",
                  "decay_exponent")


@dataclass(frozen=True)
class SweepConfig:
    """Inputs of one constant-energy sweep.

    energy_budget is the target N*M photon product per point; m_cap bounds
    the per-point pair count, with the budget rescaled proportionally when
    the cap binds (the scale factor is reported with the results).
    """

    n_list: tuple
    energy_budget: float
    t: float
    tau: float
    sigma: float
    laser: LaserModel = LaserModel.ideal()
    model: StatisticsModel = StatisticsModel.ALL_PAIRS
    decay: BiExpDecay | None = None
    theta3: float = math.pi / 2
    seeds: int = 1
    master_seed: int = 0
    m_cap: int = 1_000_000
    write_gain: float = 1e-9
    decay_exponent: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "n_list", tuple(float(n) for n in self.n_list))
        if not self.n_list:
            raise ValueError("n_list must not be empty")
        if any(n <= 0 for n in self.n_list):
            raise ValueError("all n_list entries must be positive")
        if self.energy_budget <= 0:
            raise ValueError("energy_budget must be positive")
        if self.energy_budget / min(self.n_list) < 1:
            raise ValueError("energy_budget yields no complete pair at the smallest N")
        if self.t <= 0 or self.tau <= self.t or self.sigma <= self.tau + self.t:
            raise ValueError("need 0 < t < tau and sigma > tau + t")
        if not 0 < self.theta3 <= math.pi:
            raise ValueError("theta3 must lie in (0, pi]")
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        if self.m_cap < 1:
            raise ValueError("m_cap must be >= 1")
        if self.write_gain <= 0:
            raise ValueError("write_gain must be positive")


@dataclass(frozen=True)
class RunRecord:
    """One sweep point: inputs, echo area, and compensation bookkeeping.

    With no decay configured, echo_area_comp equals echo_area and
    survival_mean is 1.
    """

    n_photons: float
    m_pairs: int
    t_acc_s: float
    echo_area: float
    echo_area_comp: float
    survival_mean: float
    seed: int


@dataclass(frozen=True)
class SweepSummaryRow:
    """Per-N mean echo area (compensated when decay is on) and its normalization."""

    n_photons: float
    m_pairs: int
    mean_area: float
    std_error: float
    norm_mean: float
    norm_std_error: float


@dataclass
class SweepResult:
    records: list
    summary: list
    budget_scale: float
    effective_budget: float


def _parse_value(key: str, raw: str):
    if key == "n_list":
        values = [float(p) for p in raw.replace(",", " ").split()]
        if not values:
            raise ValueError("n_list must list at least one photon number")
        return values
    if key == "model":
        return StatisticsModel.from_name(raw)
    if key in ("seeds", "master_seed"):
        return int(raw)
    if key == "m_cap":
        return int(float(raw))
    return float(raw)


def parse_config_text(text: str) -> SweepConfig:
    """Parse flat ``key = value`` lines (# starts a comment) into a SweepConfig."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        known = (_REQUIRED_KEYS + _LASER_KEYS + _DECAY_KEYS + _OPTIONAL_KEYS)
        if key not in known:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        if key in values:
            raise ValueError(f"line {lineno}: duplicate config key {key!r}")
        values[key] = _parse_value(key, raw)

    missing = [k for k in _REQUIRED_KEYS if k not in values]
    if missing:
        raise ValueError(f"missing required config keys: {', '.join(missing)}")

    laser = LaserModel(
        linewidth_fwhm=values.pop("laser_linewidth_fwhm", 0.0),
        lock_window_halfwidth=values.pop("laser_lock_window_halfwidth", 0.0),
        drift_step_rms=values.pop("laser_drift_step_rms", 0.0),
    )
    present = [k for k in _DECAY_KEYS if k in values]
    decay = None
    if present:
        if len(present) != len(_DECAY_KEYS):
            absent = sorted(set(_DECAY_KEYS) - set(present))
            raise ValueError(f"incomplete decay model: missing {', '.join(absent)}")
        decay = BiExpDecay.from_components(
            values.pop("decay_a1"), values.pop("decay_t1"),
            values.pop("decay_a2"), values.pop("decay_t2"),
        )
    return SweepConfig(laser=laser, decay=decay, **values)


def parse_config(path) -> SweepConfig:
    with open(path) as f:
        return parse_config_text(f.read())


def plan_sweep(config: SweepConfig):
    """Per-point pair counts under the desk-scale cap.

    Returns (points, budget_scale, effective_budget) with points a list of
    (n, m). The whole sweep is rescaled by one factor so the constant-energy
    comparison across N survives the cap.
    """
    raw_m = [int(math.floor(config.energy_budget / n + 0.5)) for n in config.n_list]
    m_max = max(raw_m)
    scale = 1.0 if m_max <= config.m_cap else config.m_cap / m_max
    budget = config.energy_budget * scale
    points = []
    for n in config.n_list:
        m = int(math.floor(budget / n + 0.5))
        if m < 1:
            raise ValueError(f"budget {budget:g} gives no complete pair at N = {n:g}")
        points.append((n, m))
    return points, scale, budget


@dataclass(frozen=True)
class _PointTask:
    # Primitive-only mirror of one (N, seed) run so tasks pickle cheaply.
    n: float
    m: int
    t: float
    tau: float
    sigma: float
    theta3: float
    write_gain: float
    linewidth_fwhm: float
    lock_window_halfwidth: float
    drift_step_rms: float
    model: str
    decay: tuple | None
    decay_exponent: float
    master_seed: int
    point_index: int
    seed_index: int


def _run_point(task: _PointTask) -> RunRecord:
    rng = np.random.default_rng([task.master_seed, task.point_index])
    grid = default_grid(task.t, task.tau)
    grating = SpectralGrating.zeros(grid)
    spec = PulseSequenceSpec(n_mean=task.n, duration=task.t, tau=task.tau,
                             sigma=task.sigma, m_pairs=task.m,
                             write_gain=task.write_gain)
    laser = LaserModel(linewidth_fwhm=task.linewidth_fwhm,
                       lock_window_halfwidth=task.lock_window_halfwidth,
                       drift_step_rms=task.drift_step_rms)
    model = StatisticsModel(task.model)
    t_acc = task.m * task.sigma
    decay = None
    weights = None
    if task.decay is not None:
        decay = BiExpDecay(*task.decay)
        weights = accumulation_survival_weights(decay, task.m, task.sigma,
                                                task.decay_exponent)
    accumulate(grating, spec, laser, model, rng, pair_weights=weights)
    dt = 1.0 / (4.0 * grid.span)
    window = 2.5 * task.tau
    trace = readout_trace(grating, ReadoutSpec(theta3=task.theta3, duration=task.t),
                          window, dt)
    gate_lo = max(task.tau - 2.0 * task.t, trace.gate_open)
    gate_hi = min(task.tau + 2.0 * task.t, window)
    area = echo_area(trace, gate_lo, gate_hi)
    if decay is not None:
        surv = survival_mean(decay, t_acc)
        comp = compensate_signal(area, decay, t_acc)
    else:
        surv = 1.0
        comp = area
    return RunRecord(n_photons=task.n, m_pairs=task.m, t_acc_s=t_acc,
                     echo_area=area, echo_area_comp=comp, survival_mean=surv,
                     seed=task.seed_index)


def _build_tasks(config: SweepConfig):
    points, scale, budget = plan_sweep(config)
    decay = None
    if config.decay is not None:
        decay = (config.decay.a1, config.decay.t1, config.decay.a2, config.decay.t2)
    tasks = []
    for n_index, (n, m) in enumerate(points):
        for seed_index in range(config.seeds):
            tasks.append(_PointTask(
                n=n, m=m, t=config.t, tau=config.tau, sigma=config.sigma,
                theta3=config.theta3, write_gain=config.write_gain,
                linewidth_fwhm=config.laser.linewidth_fwhm,
                lock_window_halfwidth=config.laser.lock_window_halfwidth,
                drift_step_rms=config.laser.drift_step_rms,
                model=config.model.value, decay=decay,
                decay_exponent=config.decay_exponent,
                master_seed=config.master_seed,
                point_index=n_index * config.seeds + seed_index,
                seed_index=seed_index,
            ))
    return tasks, scale, budget


def resolve_workers(requested: int | None = None) -> int:
    """Worker count: explicit argument, then the environment, then serial."""
    if requested is not None:
        if requested < 1:
            raise ValueError("workers must be >= 1")
        return requested
    env = os.environ.get(WORKERS_ENV_VAR)
    if env:
        value = int(env)
        if value < 1:
            raise ValueError(f"{WORKERS_ENV_VAR} must be >= 1")
        return value
    return 1


def run_sweep(config: SweepConfig, workers: int | None = None) -> SweepResult:
    """Run every (N, seed) point and summarize normalized mean echo areas.

    Points fan out to a process pool when workers > 1; results are merged
    in point order, so the output is identical for any worker count.
    """
    workers = resolve_workers(workers)
    tasks, scale, budget = _build_tasks(config)
    if workers == 1 or len(tasks) == 1:
        records = [_run_point(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_point, tasks, chunksize=chunk))
    summary = _summarize(config, records)
    return SweepResult(records=records, summary=summary, budget_scale=scale,
                       effective_budget=budget)


def _summarize(config: SweepConfig, records) -> list:
    rows = []
    for n in config.n_list:
        areas = np.array([r.echo_area_comp for r in records if r.n_photons == n])
        m = next(r.m_pairs for r in records if r.n_photons == n)
        mean = float(areas.mean())
        sem = float(areas.std(ddof=1) / math.sqrt(len(areas))) if len(areas) > 1 else 0.0
        rows.append((n, m, mean, sem))
    anchor = max(range(len(rows)), key=lambda i: rows[i][0])
    mean_a, sem_a = rows[anchor][2], rows[anchor][3]
    summary = []
    for i, (n, m, mean, sem) in enumerate(rows):
        norm = mean / mean_a
        if i == anchor or mean == 0:
            norm_sem = 0.0
        else:
            norm_sem = norm * math.sqrt((sem / mean) ** 2 + (sem_a / mean_a) ** 2)
        summary.append(SweepSummaryRow(n_photons=n, m_pairs=m, mean_area=mean,
                                       std_error=sem, norm_mean=norm,
                                       norm_std_error=norm_sem))
    return summary


def dump_records_csv(records, path) -> None:
    """Write sweep records as CSV:
    ``n_photons,m_pairs,t_acc_s,echo_area,echo_area_comp,survival_mean,seed``.
    """
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["n_photons", "m_pairs", "t_acc_s", "echo_area",
                         "echo_area_comp", "survival_mean", "seed"])
        for r in records:
            writer.writerow([f"{r.n_photons:g}", r.m_pairs, f"{r.t_acc_s:.9e}",
                             f"{r.echo_area:.9e}", f"{r.echo_area_comp:.9e}",
                             f"{r.survival_mean:.9e}", r.seed])


@dataclass(frozen=True)
class ConsistencyCheck:
    name: str
    computed: float
    stated: float
    rel_err: float
    tol: float
    passed: bool


@dataclass
class ConsistencyReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def render(self) -> str:
        lines = []
        for c in self.checks:
            verdict = "PASS" if c.passed else "FAIL"
            lines.append(f"{verdict} {c.name}: computed {c.computed:.4g} vs stated "
                         f"{c.stated:.4g} (err {100.0 * c.rel_err:.2f}%, tol "
                         f"{100.0 * c.tol:.0f}%)")
        return "\n".join(lines)


def reported_values_check(sigma: float = 470e-9, tau: float = 175e-9,
                            total_pairs: float = 7.1e9,
                            stated_accumulation_s: float = 3300.0,
                            stated_rep_rate_hz: float = 2.1e6,
                            stated_grating_period_hz: float = 5.714e6,
                            tol: float = 0.02) -> ConsistencyReport:
    """Cross-check the published run parameters against each other.

    The reported pair count times the pair period must reproduce the quoted
    accumulation time; the pair period must match the quoted repetition
    rate; the pulse separation must match the quoted grating period.
    """
    def check(name, computed, stated):
        rel = abs(computed - stated) / stated
        return ConsistencyCheck(name=name, computed=computed, stated=stated,
                                rel_err=rel, tol=tol, passed=rel <= tol)

    return ConsistencyReport(checks=[
        check("accumulation_time_s", total_pairs * sigma, stated_accumulation_s),
        check("repetition_rate_hz", 1.0 / sigma, stated_rep_rate_hz),
        check("grating_period_hz", 1.0 / tau, stated_grating_period_hz),
    ])
