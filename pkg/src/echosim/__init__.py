"""Accumulated photon echo simulator for highly attenuated pulse pairs.

Weak pulse pairs write a periodic population grating into an
inhomogeneously broadened absorber; a strong read-out pulse later converts
the stored grating into a delayed coherent burst. The package simulates
the accumulation (Poissonian photon numbers, laser phase and frequency
noise, storage relaxation), synthesizes echo traces, and provides the
closed-form scaling models and sweep tooling used to compare the
all-pairs and two-photon-minimum contribution hypotheses.
"""

from .excitation import (
    LaserModel,
    PulseSequenceSpec,
    StatisticsModel,
    accumulate,
    carrier_frequency_walk,
    pair_phase_error,
    pulse_envelope_amplitude,
    sample_photon_number,
    sample_photon_numbers,
    write_pair,
)
from .harness import (
    ConsistencyCheck,
    ConsistencyReport,
    RunRecord,
    SweepConfig,
    SweepResult,
    SweepSummaryRow,
    dump_records_csv,
    parse_config,
    parse_config_text,
    plan_sweep,
    reported_values_check,
    resolve_workers,
    run_sweep,
)
from .medium import (
    FrequencyGrid,
    SpectralGrating,
    default_grid,
    dump_grating_csv,
    grating_fourier_component,
    make_grid,
    scale_grating,
)
from .readout import (
    CurvePoint,
    EchoTrace,
    ReadoutSpec,
    dump_curves_csv,
    dump_trace_csv,
    echo_area,
    expected_signal,
    model_curves,
    readout_trace,
)
from .relaxation import (
    IN_FIELD_DECAY,
    ZERO_FIELD_DECAY,
    BiExpDecay,
    FitConvergenceError,
    FitDiagnostics,
    HoleDecaySamples,
    accumulation_survival_weights,
    compensate_signal,
    dump_decay_samples_csv,
    erase,
    fit_biexp,
    format_fit_params,
    load_decay_samples_csv,
    simulate_hole_decay,
    survival_mean,
)

__version__ = "0.1.0"

__all__ = [
    "BiExpDecay",
    "ConsistencyCheck",
    "ConsistencyReport",
    "CurvePoint",
    "EchoTrace",
    "FitConvergenceError",
    "FitDiagnostics",
    "FrequencyGrid",
    "HoleDecaySamples",
    "IN_FIELD_DECAY",
    "LaserModel",
    "PulseSequenceSpec",
    "ReadoutSpec",
    "RunRecord",
    "SpectralGrating",
    "StatisticsModel",
    "SweepConfig",
    "SweepResult",
    "SweepSummaryRow",
    "ZERO_FIELD_DECAY",
    "accumulate",
    "accumulation_survival_weights",
    "carrier_frequency_walk",
    "compensate_signal",
    "default_grid",
    "dump_curves_csv",
    "dump_decay_samples_csv",
    "dump_grating_csv",
    "dump_records_csv",
    "dump_trace_csv",
    "echo_area",
    "erase",
    "expected_signal",
    "fit_biexp",
    "format_fit_params",
    "grating_fourier_component",
    "load_decay_samples_csv",
    "make_grid",
    "model_curves",
    "pair_phase_error",
    "parse_config",
    "parse_config_text",
    "plan_sweep",
    "pulse_envelope_amplitude",
    "readout_trace",
    "reported_values_check",
    "resolve_workers",
    "run_sweep",
    "sample_photon_number",
    "sample_photon_numbers",
    "scale_grating",
    "simulate_hole_decay",
    "survival_mean",
    "write_pair",
]
