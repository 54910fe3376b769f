"""Figure rendering for the CLI report outputs (headless backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_sweep_figure(summary, curve_points, path, model_label: str) -> None:
    """Normalized sweep means with error bars over the closed-form curves."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    n_curve = [p.n_photons for p in curve_points]
    ax.plot(n_curve, [p.s_all for p in curve_points], "-", color="tab:gray",
            label="all pairs contribute")
    ax.plot(n_curve, [p.s_two for p in curve_points], "--", color="tab:blue",
            label="two-photon minimum")
    n_pts = [row.n_photons for row in summary]
    means = [row.norm_mean for row in summary]
    errs = [3.0 * row.norm_std_error for row in summary]
    ax.errorbar(n_pts, means, yerr=errs, fmt="o", color="tab:red", capsize=3,
                label=f"simulation ({model_label}), 3 s.e.")
    ax.set_xscale("log")
    ax.set_xlabel("photons per pulse pair")
    ax.set_ylabel("normalized echo area")
    ax.legend(loc="lower right", fontsize=9)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_curves_figure(curve_points, path) -> None:
    """Closed-form constant-energy signal curves for both statistics models."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    n = [p.n_photons for p in curve_points]
    ax.plot(n, [p.s_all for p in curve_points], "o-", label="all pairs contribute")
    ax.plot(n, [p.s_two for p in curve_points], "s--", label="two-photon minimum")
    ax.set_xscale("log")
    ax.set_xlabel("photons per pulse pair")
    ax.set_ylabel("normalized expected signal")
    ax.legend(loc="lower right", fontsize=9)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_trace_figure(trace, path, tau: float | None = None) -> None:
    """Echo intensity versus time; optionally marks the expected echo delay."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    t_ns = trace.times() * 1e9
    ax.plot(t_ns, trace.intensity, "-", lw=1.0)
    ax.axvspan(0, trace.gate_open * 1e9, color="0.85", label="detector gate closed")
    if tau is not None:
        ax.axvline(tau * 1e9, color="tab:red", ls=":", label="expected echo delay")
    ax.set_xlabel("time after read-out (ns)")
    ax.set_ylabel("intensity (arb. units)")
    ax.legend(loc="upper right", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_decay_fit_figure(samples, decay, path) -> None:
    """Hole-decay samples with the fitted bi-exponential overlaid."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(samples.time_s, samples.hole_area, "o", ms=4, alpha=0.7, label="samples")
    t = np.linspace(samples.time_s[0], samples.time_s[-1], 400)
    ax.plot(t, decay.evaluate(t), "-", color="tab:red",
            label=f"fit: t1={decay.t1:.3g} s, t2={decay.t2:.3g} s")
    ax.set_yscale("log")
    ax.set_xlabel("time after burn (s)")
    ax.set_ylabel("hole area (norm.)")
    ax.legend(loc="upper right", fontsize=9)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_grating_figure(before, after, path) -> None:
    """Grating deviation before and after the erasing scan."""
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.4, 5.0), sharex=True)
    for ax, g, title in ((ax1, before, "before erase"), (ax2, after, "after erase")):
        ax.plot(g.grid.bin_centers() / 1e6, g.deviation, lw=0.7)
        ax.set_ylabel("deviation")
        ax.set_title(title, fontsize=10)
    ax2.set_xlabel("detuning (MHz)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
