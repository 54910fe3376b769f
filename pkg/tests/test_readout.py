"""Echo trace synthesis, gated areas, and closed-form scaling curves."""

import math

import numpy as np
import pytest

from echosim import (
    CurvePoint,
    EchoTrace,
    LaserModel,
    PulseSequenceSpec,
    ReadoutSpec,
    SpectralGrating,
    StatisticsModel,
    accumulate,
    default_grid,
    dump_curves_csv,
    dump_trace_csv,
    echo_area,
    expected_signal,
    model_curves,
    readout_trace,
    scale_grating,
)

T = 44e-9
TAU = 175e-9


def written_grating(tau=TAU, m_pairs=500, n_mean=2.0, seed=0):
    grid = default_grid(T, tau)
    g = SpectralGrating.zeros(grid)
    sigma = max(470e-9, 2.0 * (tau + T))
    spec = PulseSequenceSpec(n_mean=n_mean, duration=T, tau=tau, sigma=sigma,
                             m_pairs=m_pairs)
    accumulate(g, spec, LaserModel.ideal(), StatisticsModel.ALL_PAIRS,
               np.random.default_rng(seed))
    return g


def trace_of(g, tau, oversample=4):
    dt = 1.0 / (oversample * g.grid.span)
    return readout_trace(g, ReadoutSpec(duration=T), window=2.5 * tau, dt=dt)


class TestReadoutSpec:
    def test_rejects_bad_pulse_area(self):
        for theta in (0.0, -0.1, math.pi + 0.1):
            with pytest.raises(ValueError):
                ReadoutSpec(theta3=theta)

    def test_rejects_bad_duration(self):
        with pytest.raises(ValueError):
            ReadoutSpec(duration=0.0)


class TestEchoTrace:
    def test_rejects_bad_dt_and_negative_intensity(self):
        with pytest.raises(ValueError):
            EchoTrace(t0=0.0, dt=0.0, intensity=np.ones(4), gate_open=0.0)
        with pytest.raises(ValueError):
            EchoTrace(t0=0.0, dt=1e-9, intensity=np.array([1.0, -0.1]), gate_open=0.0)

    def test_times_and_peak(self):
        tr = EchoTrace(t0=1e-9, dt=2e-9, intensity=np.array([0.0, 3.0, 1.0]),
                       gate_open=0.0)
        assert np.allclose(tr.times(), [1e-9, 3e-9, 5e-9], rtol=1e-12)
        assert np.isclose(tr.peak_time(), 3e-9, rtol=1e-12)


class TestReadoutTrace:
    def test_zero_grating_gives_zero_trace(self):
        g = SpectralGrating.zeros(default_grid(T, TAU))
        tr = trace_of(g, TAU)
        assert np.all(tr.intensity == 0.0)

    def test_undersampled_grid_rejected(self):
        g = SpectralGrating.zeros(default_grid(T, TAU))
        with pytest.raises(ValueError):
            readout_trace(g, ReadoutSpec(), window=1e-6, dt=1.0 / g.grid.span)

    def test_nonpositive_window_rejected(self):
        g = SpectralGrating.zeros(default_grid(T, TAU))
        with pytest.raises(ValueError):
            readout_trace(g, ReadoutSpec(), window=0.0, dt=1e-10)

    def test_echo_emerges_at_the_pair_delay(self):
        g = written_grating()
        tr = trace_of(g, TAU)
        assert abs(tr.peak_time() - TAU) <= tr.dt

    def test_gate_zeroes_the_readout_leakage(self):
        g = written_grating()
        tr = trace_of(g, TAU)
        t = tr.times()
        assert np.all(tr.intensity[t < tr.gate_open] == 0.0)
        assert tr.gate_open == T

    def test_gate_override(self):
        g = written_grating()
        dt = 1.0 / (4.0 * g.grid.span)
        tr = readout_trace(g, ReadoutSpec(duration=T), window=2.5 * TAU, dt=dt,
                           gate_open=100e-9)
        t = tr.times()
        assert np.all(tr.intensity[t < 100e-9] == 0.0)
        assert np.any(tr.intensity[t >= 100e-9] > 0.0)

    def test_readout_area_scales_as_sin_squared_theta(self):
        g = written_grating()
        dt = 1.0 / (4.0 * g.grid.span)
        full = readout_trace(g, ReadoutSpec(theta3=math.pi / 2, duration=T),
                             window=2.5 * TAU, dt=dt)
        half = readout_trace(g, ReadoutSpec(theta3=math.pi / 4, duration=T),
                             window=2.5 * TAU, dt=dt)
        a_full = echo_area(full, TAU - 2.0 * T, TAU + 2.0 * T)
        a_half = echo_area(half, TAU - 2.0 * T, TAU + 2.0 * T)
        assert np.isclose(a_full / a_half, 2.0, rtol=1e-9)


class TestEchoArea:
    def test_quadratic_in_grating_amplitude(self):
        g = written_grating()
        h = g.copy()
        scale_grating(h, 0.5)
        a = echo_area(trace_of(g, TAU), TAU - 2.0 * T, TAU + 2.0 * T)
        b = echo_area(trace_of(h, TAU), TAU - 2.0 * T, TAU + 2.0 * T)
        assert np.isclose(a / b, 4.0, rtol=1e-9)

    def test_bad_gates_rejected(self):
        tr = trace_of(written_grating(), TAU)
        with pytest.raises(ValueError):
            echo_area(tr, 200e-9, 100e-9)
        with pytest.raises(ValueError):
            echo_area(tr, 10e-6, 20e-6)

    def test_area_outside_the_echo_is_negligible(self):
        # Gate closed before the echo arrives: the residual is read-out
        # leakage shoulder only. Finely sampled so the discrete sum tracks
        # the continuous integral.
        g = written_grating()
        dt = 1.0 / (16.0 * g.grid.span)
        tr = readout_trace(g, ReadoutSpec(duration=T), window=2.5 * TAU, dt=dt)
        off = echo_area(tr, 0.0, 50e-9)
        full = echo_area(tr, 0.0, 2.5 * TAU)
        assert off < 0.01 * full


class TestExpectedSignal:
    def test_all_pairs_form(self):
        assert expected_signal(2.0, 100, T, StatisticsModel.ALL_PAIRS) == \
            4.0 * 1e4 * T

    def test_two_photon_attenuation_factor(self):
        s_all = expected_signal(0.54, 1000, T, StatisticsModel.ALL_PAIRS)
        s_two = expected_signal(0.54, 1000, T, StatisticsModel.TWO_PHOTON_MIN)
        assert np.isclose(s_two / s_all, 0.17409902089695983, rtol=1e-12)

    def test_models_coincide_at_large_photon_number(self):
        s_all = expected_signal(100.0, 10, T, StatisticsModel.ALL_PAIRS)
        s_two = expected_signal(100.0, 10, T, StatisticsModel.TWO_PHOTON_MIN)
        assert s_two / s_all >= 1.0 - 1e-40

    def test_constant_energy_invariance_all_pairs(self):
        a = expected_signal(0.5, 2000, T, StatisticsModel.ALL_PAIRS)
        b = expected_signal(2.0, 500, T, StatisticsModel.ALL_PAIRS)
        assert a == b

    def test_validation(self):
        with pytest.raises(ValueError):
            expected_signal(-1.0, 10, T, StatisticsModel.ALL_PAIRS)
        with pytest.raises(ValueError):
            expected_signal(1.0, 0, T, StatisticsModel.ALL_PAIRS)
        with pytest.raises(ValueError):
            expected_signal(1.0, 10, 0.0, StatisticsModel.ALL_PAIRS)


class TestModelCurves:
    def test_normalized_all_pairs_curve_is_flat(self):
        points = model_curves([0.54, 1.65, 12.5], 3.834e9, T)
        for p in points:
            assert np.isclose(p.s_all, 1.0, rtol=1e-8)

    def test_two_photon_suppression_values(self):
        # ratio is normalized to the largest-N anchor, so the closed-form
        # suppression factors are divided by the anchor's own one.
        points = model_curves([0.54, 1.65, 12.5], 3.834e9, T)
        by_n = {p.n_photons: p for p in points}
        anchor = 0.9999925467075438
        assert np.isclose(by_n[0.54].ratio, 0.17409902089695983 / anchor, rtol=1e-9)
        assert np.isclose(by_n[1.65].ratio, 0.6527833501597318 / anchor, rtol=1e-9)
        assert by_n[12.5].s_two == 1.0

    def test_two_photon_never_exceeds_all_pairs(self):
        points = model_curves(np.geomspace(0.1, 20.0, 25), 1e8, T)
        assert all(p.s_two <= p.s_all + 1e-12 for p in points)
        ratios = [p.ratio for p in points]
        assert ratios == sorted(ratios)

    def test_singleton_list_normalizes_to_unity(self):
        (p,) = model_curves([3.0], 1e6, T)
        assert p.s_all == 1.0 and p.s_two == 1.0 and p.ratio == 1.0

    def test_budget_too_small_rejected(self):
        with pytest.raises(ValueError):
            model_curves([0.5, 30.0], 10.0, T)

    def test_empty_and_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            model_curves([], 1e6, T)
        with pytest.raises(ValueError):
            model_curves([1.0, -2.0], 1e6, T)


def test_trace_csv_dump(tmp_path):
    tr = trace_of(written_grating(m_pairs=50), TAU)
    path = tmp_path / "trace.csv"
    dump_trace_csv(tr, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "time_s,intensity"
    assert len(lines) == len(tr.intensity) + 1
    t0, i0 = lines[1].split(",")
    assert float(t0) == 0.0
    assert float(i0) == 0.0


def test_curves_csv_dump(tmp_path):
    points = model_curves([0.54, 1.65, 12.5], 3.834e9, T)
    path = tmp_path / "curves.csv"
    dump_curves_csv(points, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "n_photons,m_pairs,s_all,s_two,ratio"
    assert len(lines) == 4
    first = lines[1].split(",")
    assert float(first[0]) == 0.54
    assert int(first[1]) == points[0].m_pairs


def test_curve_point_is_frozen():
    p = CurvePoint(n_photons=1.0, m_pairs=10, s_all=1.0, s_two=0.5, ratio=0.5)
    with pytest.raises(AttributeError):
        p.s_all = 2.0
