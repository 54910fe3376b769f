"""Command-line interface.

Subcommands: sweep (constant-energy Monte Carlo sweep), curves (closed-form
model curves), trace (single accumulated echo trace), fit-decay
(bi-exponential hole-decay fit), compensate (relaxation compensation of an
echo area), check (published-parameter arithmetic cross-checks), and
erase-demo (grating erasure). Report outputs are CSV files; a rendered
figure lands next to each CSV unless --no-figure is given.

Exit codes: 0 success, 1 usage or validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .excitation import LaserModel, PulseSequenceSpec, StatisticsModel, accumulate, write_pair
from .harness import (
    dump_records_csv,
    reported_values_check,
    parse_config,
    plan_sweep,
    resolve_workers,
    run_sweep,
)
from .medium import SpectralGrating, default_grid, dump_grating_csv, grating_fourier_component
from .readout import ReadoutSpec, dump_curves_csv, dump_trace_csv, echo_area, model_curves, readout_trace
from .relaxation import (
    IN_FIELD_DECAY,
    ZERO_FIELD_DECAY,
    BiExpDecay,
    accumulation_survival_weights,
    compensate_signal,
    dump_decay_samples_csv,
    fit_biexp,
    format_fit_params,
    load_decay_samples_csv,
    simulate_hole_decay,
    survival_mean,
)

_PRESETS = {"zero-field": ZERO_FIELD_DECAY, "in-field": IN_FIELD_DECAY}


class UsageError(Exception):
    def __init__(self, message: str, usage: str):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; the CLI contract reserves
    # 2 for runtime errors, so route usage problems through an exception.
    def error(self, message):
        raise UsageError(message, self.format_usage())


def _figure_path(out) -> Path:
    return Path(out).with_suffix(".png")


def _parse_n_list(raw: str) -> list[float]:
    values = [float(p) for p in raw.replace(",", " ").split()]
    if not values:
        raise ValueError("expected a comma-separated list of photon numbers")
    return values


def _decay_from_args(args) -> BiExpDecay:
    if getattr(args, "decay", None):
        parts = [float(p) for p in args.decay.replace(",", " ").split()]
        if len(parts) != 4:
            raise ValueError("--decay expects 'a1,t1,a2,t2'")
        return BiExpDecay.from_components(*parts)
    return _PRESETS[args.preset]


def cmd_sweep(args) -> int:
    config = parse_config(args.config)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    if args.model is not None:
        config = replace(config, model=StatisticsModel.from_name(args.model))
    workers = resolve_workers(args.workers)
    result = run_sweep(config, workers=workers)
    print(f"# model={config.model.value} seeds={config.seeds} "
          f"effective_budget={result.effective_budget:g} "
          f"budget_scale={result.budget_scale:g}")
    print("# n_photons m_pairs mean_area norm_mean norm_3se")
    for row in result.summary:
        print(f"{row.n_photons:g} {row.m_pairs} {row.mean_area:.6e} "
              f"{row.norm_mean:.6f} {3.0 * row.norm_std_error:.6f}")
    if args.out:
        dump_records_csv(result.records, args.out)
        if not args.no_figure:
            from .plotting import save_sweep_figure

            n_dense = np.geomspace(min(config.n_list), max(config.n_list), 64)
            curve = model_curves(n_dense, result.effective_budget, config.t)
            save_sweep_figure(result.summary, curve, _figure_path(args.out),
                              model_label=config.model.value)
    return 0


def cmd_curves(args) -> int:
    points = model_curves(_parse_n_list(args.n), args.budget, args.t)
    if args.out:
        dump_curves_csv(points, args.out)
        if not args.no_figure:
            from .plotting import save_curves_figure

            n_dense = np.geomspace(min(p.n_photons for p in points),
                                   max(p.n_photons for p in points), 64)
            save_curves_figure(model_curves(n_dense, args.budget, args.t),
                               _figure_path(args.out))
    else:
        print("n_photons,m_pairs,s_all,s_two,ratio")
        for p in points:
            print(f"{p.n_photons:g},{p.m_pairs},{p.s_all:.9e},{p.s_two:.9e},{p.ratio:.9e}")
    return 0


def cmd_trace(args) -> int:
    config = parse_config(args.config)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    points, _, budget = plan_sweep(config)
    if args.n is None:
        n, m = max(points, key=lambda p: p[0])
    else:
        n = args.n
        m = min(int(round(budget / n)), config.m_cap)
        if m < 1:
            raise ValueError(f"budget {budget:g} gives no complete pair at N = {n:g}")
    rng = np.random.default_rng([config.master_seed, 0])
    grid = default_grid(config.t, config.tau)
    grating = SpectralGrating.zeros(grid)
    spec = PulseSequenceSpec(n_mean=n, duration=config.t, tau=config.tau,
                             sigma=config.sigma, m_pairs=m,
                             write_gain=config.write_gain)
    weights = None
    if config.decay is not None:
        weights = accumulation_survival_weights(config.decay, m, config.sigma,
                                                config.decay_exponent)
    accumulate(grating, spec, config.laser, config.model, rng, pair_weights=weights)
    trace = readout_trace(grating, ReadoutSpec(theta3=config.theta3, duration=config.t),
                          window=2.5 * config.tau, dt=1.0 / (4.0 * grid.span))
    gate_lo = max(config.tau - 2.0 * config.t, trace.gate_open)
    gate_hi = min(config.tau + 2.0 * config.t, 2.5 * config.tau)
    area = echo_area(trace, gate_lo, gate_hi)
    print(f"n_photons={n:g} m_pairs={m} peak_time_s={trace.peak_time():.6e} "
          f"echo_area={area:.6e}")
    if args.out:
        dump_trace_csv(trace, args.out)
        if not args.no_figure:
            from .plotting import save_trace_figure

            save_trace_figure(trace, _figure_path(args.out), tau=config.tau)
    return 0


def _demo_probe_times(t_max: float) -> np.ndarray:
    # Dense early cadence for the fast component, then sparse coverage out
    # to t_max for the slow one.
    early = np.arange(20.0, 620.0, 20.0)
    late = np.linspace(700.0, t_max, 20)
    return np.concatenate([early[early < late[0]], late])


def cmd_fit_decay(args) -> int:
    if args.infile:
        samples = load_decay_samples_csv(args.infile, noise_sigma=args.noise)
    else:
        decay = _PRESETS[args.preset]
        rng = np.random.default_rng(args.seed if args.seed is not None else 0)
        samples = simulate_hole_decay(decay, _demo_probe_times(args.t_max),
                                      args.noise, rng)
    fitted, diagnostics = fit_biexp(samples)
    line = format_fit_params(fitted, diagnostics)
    print(line)
    if args.out:
        Path(args.out).write_text(line + "\n")
        if not args.no_figure:
            from .plotting import save_decay_fit_figure

            save_decay_fit_figure(samples, fitted, _figure_path(args.out))
    return 0


def cmd_compensate(args) -> int:
    decay = _decay_from_args(args)
    surv = survival_mean(decay, args.t_acc)
    comp = compensate_signal(args.area, decay, args.t_acc)
    print(f"echo_area_comp={comp:.9e} survival_mean={surv:.9e}")
    return 0


def cmd_check(args) -> int:
    report = reported_values_check(sigma=args.sigma, tau=args.tau,
                                     total_pairs=args.pairs_total)
    print(report.render())
    return 0


def cmd_erase_demo(args) -> int:
    grid = default_grid(args.t, args.tau)
    grating = SpectralGrating.zeros(grid)
    spec = PulseSequenceSpec(n_mean=1.0, duration=args.t, tau=args.tau,
                             sigma=2.0 * (args.tau + args.t), m_pairs=1,
                             write_gain=1e-6)
    write_pair(grating, spec, n_photons=100)
    before = grating.copy()
    amp_before = abs(grating_fourier_component(grating, args.tau))
    from .relaxation import erase

    erase(grating, args.scan_halfwidth)
    amp_after = abs(grating_fourier_component(grating, args.tau))
    print(f"scan_halfwidth_hz={args.scan_halfwidth:g} "
          f"fourier_amp_before={amp_before:.6e} fourier_amp_after={amp_after:.6e}")
    if args.out:
        base = Path(args.out)
        dump_grating_csv(before, base.with_name(base.stem + "_before" + base.suffix))
        dump_grating_csv(grating, base.with_name(base.stem + "_after" + base.suffix))
        if not args.no_figure:
            from .plotting import save_grating_figure

            save_grating_figure(before, grating, _figure_path(args.out))
    return 0


def _add_out_flags(parser) -> None:
    parser.add_argument("--out", metavar="PATH", help="output CSV path")
    parser.add_argument("--no-figure", action="store_true",
                        help="do not render a figure next to the CSV")


def build_parser() -> _Parser:
    parser = _Parser(prog="echosim",
                     description="Accumulated photon echo simulator for weak pulse pairs.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("sweep", help="run a constant-energy Monte Carlo sweep")
    p.add_argument("--config", required=True, metavar="PATH")
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--model", choices=["all", "two"], help="override statistics model")
    p.add_argument("--workers", type=int, help="process pool size (or ECHOSIM_WORKERS)")
    _add_out_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("curves", help="closed-form constant-energy model curves")
    p.add_argument("--n", default="0.54,1.65,12.5", metavar="LIST",
                   help="photon numbers, comma separated")
    p.add_argument("--budget", type=float, default=3.834e9,
                   help="energy budget N*M in photons")
    p.add_argument("--t", type=float, default=44e-9, help="pulse duration in seconds")
    _add_out_flags(p)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("trace", help="synthesize one accumulated echo trace")
    p.add_argument("--config", required=True, metavar="PATH")
    p.add_argument("--n", type=float, help="photon number (default: largest in config)")
    p.add_argument("--seed", type=int, help="override master_seed")
    _add_out_flags(p)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("fit-decay", help="fit a bi-exponential to hole-decay samples")
    source = p.add_mutually_exclusive_group()
    source.add_argument("--in", dest="infile", metavar="PATH",
                        help="CSV of time_s,hole_area samples")
    source.add_argument("--preset", choices=sorted(_PRESETS), default="in-field",
                        help="simulate samples from a decay preset")
    p.add_argument("--noise", type=float, default=0.05, help="sample noise sigma")
    p.add_argument("--t-max", type=float, default=4800.0,
                   help="last probe time for simulated samples (s)")
    p.add_argument("--seed", type=int, help="rng seed for simulated samples")
    _add_out_flags(p)
    p.set_defaults(func=cmd_fit_decay)

    p = sub.add_parser("compensate", help="compensate an echo area for relaxation")
    p.add_argument("--area", type=float, required=True, help="raw echo area")
    p.add_argument("--t-acc", type=float, required=True, help="accumulation time (s)")
    p.add_argument("--preset", choices=sorted(_PRESETS), default="in-field")
    p.add_argument("--decay", metavar="A1,T1,A2,T2", help="explicit decay parameters")
    p.set_defaults(func=cmd_compensate)

    p = sub.add_parser("check", help="cross-check published run parameters")
    p.add_argument("--sigma", type=float, default=470e-9, help="pair period (s)")
    p.add_argument("--tau", type=float, default=175e-9, help="pulse separation (s)")
    p.add_argument("--pairs-total", type=float, default=7.1e9,
                   help="total accumulated pairs")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("erase-demo", help="write one pair, then erase the grating")
    p.add_argument("--t", type=float, default=44e-9, help="pulse duration (s)")
    p.add_argument("--tau", type=float, default=175e-9, help="pulse separation (s)")
    p.add_argument("--scan-halfwidth", type=float, default=40e6,
                   help="erasing scan halfwidth (Hz)")
    _add_out_flags(p)
    p.set_defaults(func=cmd_erase_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        sys.stderr.write(err.usage)
        print(f"error: {err}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        raise
    except Exception as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
