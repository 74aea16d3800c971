"""Delimited output, structured reports, and figure rendering.

Every command writes its tables as CSV with a one-line header; report files
are ``key: value`` lines grouped by blank-line sections.  Figures are
rendered alongside the delimited output as PNG files (disable with the CLI
``--no-figures`` flag); all output is deterministic for a fixed seed.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .campaign import CampaignResult, SystematicBudget
from .stats import AllanSeries

_FMT = "%.12g"
_PNG_META = {"Software": "braggfall"}


def _fmt(value) -> str:
    return _FMT % value


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")
    return path


def records_csv(records, path):
    return write_csv(path,
                     ["timestamp_s", "state_F", "alpha_rad_s2", "probability",
                      "shot_role"],
                     ((r.timestamp, r.state.f_number, r.alpha, r.probability,
                       r.shot_role) for r in records))


def fringe_csv(points, path):
    return write_csv(path,
                     ["timestamp_s", "state_F", "alpha_rad_s2", "probability"],
                     ((p.timestamp, p.state.f_number, p.alpha, p.probability)
                      for p in points))


def binned_csv(result: CampaignResult, path):
    b = result.binned_series
    return write_csv(path,
                     ["time_s", "g_f1_mps2", "g_f2_mps2", "delta_g_mps2",
                      "sigma_delta_g_mps2"],
                     zip(b.times, b.g_f1, b.g_f2, b.delta_g, b.sigma_delta_g))


def allan_csv(series: AllanSeries, path):
    return write_csv(path, ["tau_s", "allan_deviation_g"],
                     zip(series.taus, series.deviations))


def sweep_csv(detunings, omega_1, omega_2, path):
    return write_csv(path, ["detuning_hz", "omega_f1_rad_s", "omega_f2_rad_s"],
                     zip(detunings, omega_1, omega_2))


def modulation_csv(points, path):
    return write_csv(path, ["current_a", "delta_g_g"], points)


# ---------------------------------------------------------------------------
# Structured text
# ---------------------------------------------------------------------------

def budget_table(budget: SystematicBudget) -> str:
    """Error budget in the familiar three-column layout, units of 1e-10 g."""
    names = {
        "statistical": "Statistical uncertainty",
        "quadratic_zeeman": "Quadratic Zeeman shift",
        "ac_stark": "AC Stark shift",
        "tide_alternation": "Tide effect",
    }
    lines = [f"{'Channel':<28}{'dg (1e-10 g)':>16}{'uncertainty (1e-10 g)':>24}"]
    lines.append("-" * 68)
    for row in budget.rows:
        label = names.get(row.channel, row.channel)
        lines.append(f"{label:<28}{row.value / 1e-10:>16.2f}"
                     f"{row.uncertainty / 1e-10:>24.2f}")
    lines.append("-" * 68)
    lines.append(f"{'Corrected':<28}{budget.corrected_value / 1e-10:>16.2f}"
                 f"{budget.corrected_uncertainty / 1e-10:>24.2f}")
    return "\n".join(lines) + "\n"


def campaign_report(result: CampaignResult, duration_hours: float,
                    seed: int) -> str:
    """Structured campaign summary: key: value lines, blank-line sections."""
    lines = [
        "report: campaign",
        f"duration_hours: {_fmt(duration_hours)}",
        f"seed: {seed}",
        f"bins: {len(result.binned_series)}",
        f"dropped_bins: {result.n_dropped_bins}",
        "",
        f"delta_g_stat_g: {_fmt(result.delta_g_stat.value)}",
        f"delta_g_stat_uncertainty_g: {_fmt(result.delta_g_stat.uncertainty)}",
        f"g_mean_f1_mps2: {_fmt(result.g_mean_f1)}",
        f"g_mean_f2_mps2: {_fmt(result.g_mean_f2)}",
    ]
    if result.eta is not None:
        lines += [
            "",
            f"eta: {_fmt(result.eta.value)}",
            f"eta_uncertainty: {_fmt(result.eta.uncertainty)}",
            f"k_tilde: {_fmt(result.k_tilde.value)}",
            f"k_tilde_uncertainty: {_fmt(result.k_tilde.uncertainty)}",
            f"r_diff: {_fmt(result.r_diff.value)}",
            f"r_diff_uncertainty: {_fmt(result.r_diff.uncertainty)}",
        ]
    return "\n".join(lines) + "\n"


def write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------

def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, metadata=_PNG_META)
    plt.close(fig)
    return path


def fig_fringes(points_by_state, fits, path):
    """Both states' chirp-scanned fringes with their sine fits."""
    fig, ax = plt.subplots(figsize=(7, 4))
    styles = {1: ("k^", "k-"), 2: ("ro", "r-")}
    for f, points in points_by_state.items():
        alphas = np.array([p.alpha for p in points])
        probs = np.array([p.probability for p in points])
        marker, line = styles[f]
        ax.plot(alphas, probs, marker, ms=4, label=f"F={f}")
        if f in fits:
            from .stats import fringe_model
            offset, contrast, phase, config = fits[f]
            grid = np.linspace(alphas.min(), alphas.max(), 400)
            ax.plot(grid, fringe_model(grid, offset, contrast, phase, config),
                    line, lw=1)
    ax.set_xlabel(r"chirp rate $\alpha$ (rad/s$^2$)")
    ax.set_ylabel(r"$P(|p_0 + 2n\hbar k\rangle)$")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def fig_campaign(result: CampaignResult, tide_curve, path):
    """Binned per-state accelerations over the tide model, and the residual
    differential series."""
    b = result.binned_series
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    hours = b.times / 3600.0
    g_ref = 0.5 * (np.mean(b.g_f1) + np.mean(b.g_f2))
    ax1.plot(hours, (b.g_f1 - g_ref) * 1e8, "k^", ms=3, label="F=1")
    ax1.plot(hours, (b.g_f2 - g_ref) * 1e8, "ro", ms=3, label="F=2")
    if tide_curve is not None:
        ax1.plot(hours, (tide_curve - np.mean(tide_curve)) * 1e8, "g-",
                 lw=1.2, label="tide model")
    ax1.set_ylabel(r"$g - g_{\rm offset}$ ($\mu$Gal)")
    ax1.legend(ncol=3, fontsize=8)
    ax2.errorbar(hours, b.delta_g / 9.794 / 1e-9, yerr=b.sigma_delta_g / 9.794 / 1e-9,
                 fmt="bs", ms=3, lw=0.8)
    ax2.axhline(0.0, color="0.6", lw=0.8)
    ax2.set_xlabel("time (h)")
    ax2.set_ylabel(r"$\Delta g$ ($10^{-9}$ g)")
    fig.tight_layout()
    return _save(fig, path)


def fig_allan(series: AllanSeries, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(series.taus, series.deviations, "bs-", ms=4, label="overlapping Allan")
    grid = np.array([series.taus[0], series.taus[-1]])
    ax.loglog(grid, series.slope_fit / np.sqrt(grid), "m-", lw=1,
              label=rf"{series.slope_fit:.2e} g$\,\tau^{{-1/2}}$")
    ax.set_xlabel(r"averaging time $\tau$ (s)")
    ax.set_ylabel(r"$\sigma_{\Delta g}(\tau)$ (g)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def fig_modulation(points, coeffs, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    currents = np.array([p[0] for p in points])
    dg = np.array([p[1] for p in points])
    ax.plot(currents * 1e3, dg / 1e-10, "rs", ms=5, label="evaluated bias")
    if coeffs is not None:
        grid = np.linspace(currents.min(), currents.max(), 200)
        ax.plot(grid * 1e3, np.polyval(coeffs, grid) / 1e-10, "b-", lw=1,
                label="quadratic fit")
    ax.set_xlabel("solenoid current (mA)")
    ax.set_ylabel(r"$\Delta g$ ($10^{-10}$ g)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def fig_detuning(detunings, omega_1, omega_2, root, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    ghz = np.asarray(detunings) / 1e9
    ax.plot(ghz, np.asarray(omega_1) / (2 * np.pi * 1e3), "k-", label=r"$\Omega_1$")
    ax.plot(ghz, np.asarray(omega_2) / (2 * np.pi * 1e3), "r--", label=r"$\Omega_2$")
    ax.axvline(root / 1e9, color="0.5", lw=0.8)
    ax.set_xlabel(r"single-photon detuning $\Delta$ (GHz)")
    ax.set_ylabel(r"two-photon Rabi frequency (kHz)")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)
