"""Sweep configuration, orchestration, consistency checks, and the CLI."""

import math

import numpy as np
import pytest

from echosim import (
    ZERO_FIELD_DECAY,
    LaserModel,
    StatisticsModel,
    SweepConfig,
    dump_records_csv,
    parse_config_text,
    plan_sweep,
    reported_values_check,
    resolve_workers,
    run_sweep,
    survival_mean,
)
from echosim.cli import main

BASE_CONFIG = """
# constant-energy sweep, desk scale
n_list = 0.54, 1.65, 12.5
energy_budget = 5.4e4
t = 44e-9
tau = 175e-9
sigma = 470e-9
seeds = 2
master_seed = 7
"""


def small_config(**overrides):
    kw = dict(n_list=(0.54, 12.5), energy_budget=5400.0, t=44e-9, tau=175e-9,
              sigma=470e-9, seeds=2, master_seed=7)
    kw.update(overrides)
    return SweepConfig(**kw)


class TestParseConfig:
    def test_full_roundtrip(self):
        config = parse_config_text(BASE_CONFIG)
        assert config.n_list == (0.54, 1.65, 12.5)
        assert config.energy_budget == 5.4e4
        assert config.seeds == 2
        assert config.master_seed == 7
        assert config.model is StatisticsModel.ALL_PAIRS
        assert config.laser == LaserModel.ideal()
        assert config.decay is None

    def test_model_and_laser_keys(self):
        config = parse_config_text(BASE_CONFIG + """
model = two
laser_linewidth_fwhm = 1e6
laser_lock_window_halfwidth = 2e6
laser_drift_step_rms = 5e5
""")
        assert config.model is StatisticsModel.TWO_PHOTON_MIN
        assert config.laser.linewidth_fwhm == 1e6
        assert config.laser.lock_window_halfwidth == 2e6
        assert config.laser.drift_step_rms == 5e5

    def test_decay_keys_build_a_normalized_model(self):
        config = parse_config_text(BASE_CONFIG + """
decay_a1 = 3
decay_t1 = 900
decay_a2 = 2
decay_t2 = 90
""")
        assert config.decay is not None
        assert config.decay.t1 == 90.0 and config.decay.t2 == 900.0
        assert np.isclose(config.decay.a1 + config.decay.a2, 1.0)

    def test_partial_decay_rejected(self):
        with pytest.raises(ValueError, match="incomplete decay"):
            parse_config_text(BASE_CONFIG + "decay_a1 = 0.6\n")

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown config key"):
            parse_config_text(BASE_CONFIG + "bogus = 1\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            parse_config_text(BASE_CONFIG + "tau = 200e-9\n")

    def test_missing_required_keys_reported(self):
        with pytest.raises(ValueError, match="missing required"):
            parse_config_text("n_list = 1.0\n")

    def test_unparseable_line_rejected(self):
        with pytest.raises(ValueError, match="key = value"):
            parse_config_text("just words\n")

    def test_bad_model_name_rejected(self):
        with pytest.raises(ValueError):
            parse_config_text(BASE_CONFIG + "model = three\n")


class TestSweepConfig:
    def test_rejects_empty_or_nonpositive_n_list(self):
        with pytest.raises(ValueError):
            small_config(n_list=())
        with pytest.raises(ValueError):
            small_config(n_list=(1.0, -2.0))

    def test_rejects_budget_below_one_pair(self):
        with pytest.raises(ValueError):
            small_config(energy_budget=0.2)

    def test_rejects_bad_timing(self):
        with pytest.raises(ValueError):
            small_config(tau=30e-9)
        with pytest.raises(ValueError):
            small_config(sigma=100e-9)

    def test_rejects_bad_counts(self):
        with pytest.raises(ValueError):
            small_config(seeds=0)
        with pytest.raises(ValueError):
            small_config(m_cap=0)
        with pytest.raises(ValueError):
            small_config(theta3=0.0)


class TestPlanSweep:
    def test_uncapped_plan_preserves_the_budget(self):
        points, scale, budget = plan_sweep(small_config())
        assert scale == 1.0
        assert budget == 5400.0
        assert points == [(0.54, 10000), (12.5, 432)]

    def test_cap_rescales_all_points_together(self):
        config = small_config(n_list=(0.54, 12.5), energy_budget=5.4e5,
                              m_cap=10000)
        points, scale, budget = plan_sweep(config)
        assert np.isclose(scale, 1e-2)
        assert np.isclose(budget, 5400.0)
        assert points[0] == (0.54, 10000)
        # energy per point stays near the effective budget
        for n, m in points:
            assert abs(n * m - budget) <= 0.5 * n

    def test_cap_that_starves_a_point_is_an_error(self):
        config = small_config(n_list=(0.5, 600.0), energy_budget=600.0, m_cap=1)
        with pytest.raises(ValueError, match="no complete pair"):
            plan_sweep(config)


class TestRunSweep:
    def test_records_shape_and_accumulation_time(self):
        config = small_config()
        result = run_sweep(config)
        assert len(result.records) == 4
        for r in result.records:
            assert r.t_acc_s == r.m_pairs * config.sigma
            assert r.echo_area > 0
            assert r.echo_area_comp == r.echo_area
            assert r.survival_mean == 1.0
        assert sorted(r.seed for r in result.records if r.n_photons == 0.54) == [0, 1]

    def test_reproducible_across_runs(self):
        a = run_sweep(small_config())
        b = run_sweep(small_config())
        assert a.records == b.records

    def test_seed_changes_the_areas(self):
        a = run_sweep(small_config())
        b = run_sweep(small_config(master_seed=8))
        assert any(x.echo_area != y.echo_area for x, y in zip(a.records, b.records))

    def test_worker_count_does_not_change_results(self):
        a = run_sweep(small_config(), workers=1)
        b = run_sweep(small_config(), workers=3)
        assert a.records == b.records

    def test_summary_normalizes_to_the_largest_photon_number(self):
        config = small_config(n_list=(12.5, 0.54))
        result = run_sweep(config)
        assert result.summary[0].n_photons == 12.5
        assert result.summary[0].norm_mean == 1.0
        assert result.summary[0].norm_std_error == 0.0
        assert result.summary[1].norm_std_error > 0.0

    def test_write_gain_cancels_in_normalized_means(self):
        a = run_sweep(small_config())
        b = run_sweep(small_config(write_gain=2e-9))
        for ra, rb in zip(a.summary, b.summary):
            assert np.isclose(ra.norm_mean, rb.norm_mean, rtol=1e-9)
        assert b.records[0].echo_area > a.records[0].echo_area

    def test_decay_compensation_bookkeeping(self):
        config = small_config(decay=ZERO_FIELD_DECAY, seeds=1)
        result = run_sweep(config)
        for r in result.records:
            surv = survival_mean(config.decay, r.t_acc_s)
            assert np.isclose(r.survival_mean, surv, rtol=1e-12)
            assert np.isclose(r.echo_area_comp, r.echo_area / surv ** 2, rtol=1e-12)
            assert r.echo_area_comp > r.echo_area


def test_records_csv_dump(tmp_path):
    result = run_sweep(small_config(seeds=1))
    path = tmp_path / "records.csv"
    dump_records_csv(result.records, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "n_photons,m_pairs,t_acc_s,echo_area,echo_area_comp,survival_mean,seed"
    assert len(lines) == len(result.records) + 1
    first = lines[1].split(",")
    assert float(first[0]) == 0.54
    assert float(first[3]) > 0


class TestResolveWorkers:
    def test_explicit_wins(self, monkeypatch):
        monkeypatch.setenv("ECHOSIM_WORKERS", "5")
        assert resolve_workers(3) == 3

    def test_environment_fallback(self, monkeypatch):
        monkeypatch.setenv("ECHOSIM_WORKERS", "5")
        assert resolve_workers() == 5

    def test_default_is_serial(self, monkeypatch):
        monkeypatch.delenv("ECHOSIM_WORKERS", raising=False)
        assert resolve_workers() == 1

    def test_invalid_values_rejected(self, monkeypatch):
        with pytest.raises(ValueError):
            resolve_workers(0)
        monkeypatch.setenv("ECHOSIM_WORKERS", "0")
        with pytest.raises(ValueError):
            resolve_workers()


class TestReportedValuesCheck:
    def test_defaults_are_mutually_consistent(self):
        report = reported_values_check()
        assert report.passed
        by_name = {c.name: c for c in report.checks}
        assert np.isclose(by_name["accumulation_time_s"].computed, 3337.0, rtol=1e-9)
        assert np.isclose(by_name["repetition_rate_hz"].computed,
                          2127659.574468085, rtol=1e-9)
        assert np.isclose(by_name["grating_period_hz"].computed,
                          5714285.714285715, rtol=1e-9)
        for c in report.checks:
            assert c.rel_err <= 0.02

    def test_inconsistent_inputs_fail(self):
        report = reported_values_check(sigma=1e-6)
        assert not report.passed

    def test_render_lines(self):
        text = reported_values_check().render()
        lines = text.splitlines()
        assert len(lines) == 3
        assert all(line.startswith("PASS") for line in lines)
        assert "FAIL" in reported_values_check(sigma=1e-6).render()


@pytest.fixture()
def config_file(tmp_path):
    path = tmp_path / "sweep.cfg"
    path.write_text(BASE_CONFIG)
    return path


class TestCli:
    def test_check_passes(self, capsys):
        assert main(["check"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 3

    def test_curves_to_stdout(self, capsys):
        assert main(["curves"]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "n_photons,m_pairs,s_all,s_two,ratio"
        assert "0.54," in out

    def test_curves_files_and_figure(self, tmp_path, capsys):
        out = tmp_path / "curves.csv"
        assert main(["curves", "--out", str(out)]) == 0
        assert out.exists()
        assert (tmp_path / "curves.png").exists()

    def test_no_figure_flag(self, tmp_path, capsys):
        out = tmp_path / "curves.csv"
        assert main(["curves", "--out", str(out), "--no-figure"]) == 0
        assert out.exists()
        assert not (tmp_path / "curves.png").exists()

    def test_sweep_outputs(self, config_file, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        assert main(["sweep", "--config", str(config_file), "--out", str(out)]) == 0
        stdout = capsys.readouterr().out
        assert "# n_photons m_pairs mean_area norm_mean norm_3se" in stdout
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("n_photons,")
        assert len(lines) == 1 + 3 * 2
        assert (tmp_path / "sweep.png").exists()

    def test_sweep_model_override(self, config_file, capsys):
        assert main(["sweep", "--config", str(config_file), "--model", "two"]) == 0
        assert "model=two" in capsys.readouterr().out

    def test_trace_reports_the_echo(self, config_file, capsys):
        assert main(["trace", "--config", str(config_file)]) == 0
        out = capsys.readouterr().out
        assert "peak_time_s=" in out
        peak = float(out.split("peak_time_s=")[1].split()[0])
        assert abs(peak - 175e-9) <= 5e-9

    def test_fit_decay_preset(self, capsys):
        assert main(["fit-decay", "--preset", "in-field", "--noise", "0.01",
                     "--seed", "1"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("a1=")

    def test_fit_decay_from_csv(self, tmp_path, capsys):
        import echosim

        samples = echosim.simulate_hole_decay(
            echosim.IN_FIELD_DECAY, np.linspace(0.0, 6000.0, 50), 0.0,
            np.random.default_rng(0))
        path = tmp_path / "decay.csv"
        echosim.dump_decay_samples_csv(samples, path)
        assert main(["fit-decay", "--in", str(path)]) == 0
        out = capsys.readouterr().out
        assert "t2_s=3000" in out

    def test_compensate(self, capsys):
        assert main(["compensate", "--area", "1.0", "--t-acc", "3300",
                     "--preset", "zero-field"]) == 0
        out = capsys.readouterr().out
        assert "echo_area_comp=" in out and "survival_mean=" in out

    def test_erase_demo(self, capsys):
        assert main(["erase-demo"]) == 0
        out = capsys.readouterr().out
        before = float(out.split("fourier_amp_before=")[1].split()[0])
        after = float(out.split("fourier_amp_after=")[1].split()[0])
        assert after < before

    def test_missing_config_is_a_usage_failure(self, tmp_path, capsys):
        assert main(["sweep", "--config", str(tmp_path / "nope.cfg")]) == 1

    def test_bad_flag_exits_one(self, capsys):
        assert main(["curves", "--bogus"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_unknown_subcommand_exits_one(self, capsys):
        assert main(["frobnicate"]) == 1

    def test_no_subcommand_exits_one(self, capsys):
        assert main([]) == 1

    def test_ill_conditioned_compensation_is_a_runtime_failure(self, capsys):
        code = main(["compensate", "--area", "1.0", "--t-acc", "1e16",
                     "--decay", "0.5,100,0.5,100"])
        assert code == 2
        assert "runtime error" in capsys.readouterr().err
