"""Command-line surface.

Commands: detuning, fringe, allan, campaign, zeeman-modulation, budget,
constants.  Common flags: --config PATH, --seed N, --out DIR, --hours H,
--check, --set key=value, --no-figures.

Exit codes: 0 success, 1 usage error, 2 numerical failure,
3 acceptance-check failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bragg, campaign as cp, interferometer as itf, report, systematics as sy
from .config import KEY_TABLE, RunConfig
from .core import F1, F2, BraggfallError, Trajectory
from .stats import allan_deviation, sine_fringe_fit

USAGE_EXIT = 1
NUMERICAL_EXIT = 2
CHECK_EXIT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(USAGE_EXIT)


def _build_parser() -> _Parser:
    parser = _Parser(prog="braggfall",
                     description="Dual-hyperfine-state Bragg interferometer simulator")
    parser.add_argument("--config", help="flat key=value configuration file")
    parser.add_argument("--seed", type=int, help="override the RNG seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key")
    parser.add_argument("--no-figures", action="store_true",
                        help="skip PNG rendering, emit delimited output only")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detuning", help="solve the balanced detuning")
    p.add_argument("--bracket", nargs=2, type=float, metavar=("LO_GHZ", "HI_GHZ"),
                   default=(0.3, 6.0), help="search bracket in GHz")
    p.add_argument("--sweep", action="store_true",
                   help="also emit the Rabi-frequency curves")

    p = sub.add_parser("fringe", help="simulate and fit chirp-scanned fringes")
    p.add_argument("--state", choices=("1", "2", "both"), default="both")
    p.add_argument("--noise", default="on",
                   help="on/off (0 disables noise)")

    p = sub.add_parser("allan", help="stability of a simulated differential series")
    p.add_argument("--hours", type=float, help="series length (default from config)")

    p = sub.add_parser("campaign", help="full campaign simulation and analysis")
    p.add_argument("--hours", type=float, help="campaign length (default from config)")
    p.add_argument("--noise", default="on", help="on/off")
    p.add_argument("--systematics", default="on", help="on/off")
    p.add_argument("--check", action="store_true",
                   help="exit 3 unless the self-checks pass")

    p = sub.add_parser("zeeman-modulation", help="bias versus solenoid current")
    p.add_argument("--currents", default="0,25,50,75,100,125,150,175,200,225,250,275,300",
                   help="comma-separated currents in mA")

    p = sub.add_parser("budget", help="evaluate the systematic error budget")
    p.add_argument("--hours", type=float, help="assumed campaign length")

    sub.add_parser("constants", help="dump the constants table")
    return parser


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig.defaults()
    for item in args.set:
        if "=" not in item:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        cfg.set(key.strip(), value.strip())
    if args.seed is not None:
        cfg.values["seed"] = args.seed
    if args.out is not None:
        cfg.values["output_dir"] = args.out
    if getattr(args, "hours", None) is not None:
        cfg.values["campaign.duration_hours"] = args.hours
    for flag, key in (("noise", "noise.enabled"),
                      ("systematics", None)):
        raw = getattr(args, flag, None)
        if raw is None:
            continue
        on = raw.strip().lower() not in ("off", "0", "false", "no")
        if flag == "noise":
            cfg.values["noise.enabled"] = on
        else:
            cfg.values["systematics.zeeman_enabled"] = on
            cfg.values["systematics.tide_enabled"] = on
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    path = Path(cfg["output_dir"])
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_constants(cfg: RunConfig, args) -> int:
    c = cfg.constants()
    lines = [
        "constants: 87Rb D2",
        f"hbar_j_s: {c.hbar!r}",
        f"atom_mass_kg: {c.atom_mass!r}",
        f"wavelength_m: {c.wavelength!r}",
        f"wavenumber_1_m: {c.wavenumber!r}",
        f"recoil_omega_rad_s: {c.recoil_omega!r}",
        f"recoil_omega_over_2pi_hz: {c.recoil_omega / (2 * math.pi)!r}",
        f"k_eff_1_m: {c.k_eff!r}",
        f"g_nominal_mps2: {c.g_nominal!r}",
        f"hyperfine_splitting_hz: {c.hyperfine_splitting!r}",
        f"clock_quadratic_coeff_hz_t2: {c.clock_quadratic_coeff!r}",
    ]
    for f_exc, off in sorted(c.excited_splittings.items()):
        lines.append(f"excited_splitting_fprime{f_exc}_hz: {off!r}")
    for (f, f_exc), w in sorted(c.excited_couplings.items()):
        lines.append(f"sigma_path_weight_f{f}_fprime{f_exc}: {w!r}")
    print("\n".join(lines))
    return 0


def cmd_detuning(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg)
    constants = cfg.constants()
    template = cfg.laser_field()
    lo, hi = (b * 1e9 for b in args.bracket)
    delta = bragg.balanced_detuning_solve(template, constants, bracket=(lo, hi))
    f_star = replace(template, detuning=delta)
    o1 = bragg.two_photon_rabi(F1, f_star, constants)
    o2 = bragg.two_photon_rabi(F2, f_star, constants)
    print(f"balanced_detuning_ghz: {delta / 1e9:.6f}")
    print(f"omega_f1_rad_s: {o1:.6f}")
    print(f"omega_f2_rad_s: {o2:.6f}")
    print(f"f1_red_detuned: {bragg.two_photon_rabi_signed(F1, f_star, constants) < 0}")
    print(f"f2_blue_detuned: {bragg.two_photon_rabi_signed(F2, f_star, constants) > 0}")
    if args.sweep:
        grid = np.linspace(lo, hi, 241)
        o1s, o2s = [], []
        for d in grid:
            f = replace(template, detuning=float(d))
            o1s.append(bragg.two_photon_rabi(F1, f, constants))
            o2s.append(bragg.two_photon_rabi(F2, f, constants))
        report.sweep_csv(grid, o1s, o2s, out / "detuning_sweep.csv")
        if not args.no_figures:
            report.fig_detuning(grid, o1s, o2s, delta, out / "detuning.png")
    return 0


def cmd_fringe(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg)
    constants = cfg.constants()
    config = cfg.interferometer()
    noise = cfg.noise_model()
    seed = cfg["seed"]
    ppp = cfg["fringe.points_per_period"]
    periods = cfg["fringe.periods"]
    alpha_c = config.k_eff * constants.g_nominal

    states = {"1": [F1], "2": [F2], "both": [F1, F2]}[args.state]
    points_by_state, fits = {}, {}
    lines = ["report: fringe",
             f"seed: {seed}",
             f"points_per_period: {ppp}",
             f"periods: {periods}",
             f"scan_duration_s: {itf.scan_duration(ppp, periods, config):g}"]
    for state in states:
        rng = np.random.default_rng([seed, state.f_number])
        points = itf.fringe_scan(state, alpha_c, config, ppp, periods,
                                 noise, rng, constants)
        points_by_state[state.f_number] = points
        report.fringe_csv(points, out / f"fringe_points_F{state.f_number}.csv")
        offset, contrast, phase, cov = sine_fringe_fit(points, config, constants)
        fits[state.f_number] = (offset, contrast, phase, config)
        resid = _fringe_residual_rms(points, offset, contrast, phase, config)
        lines += ["",
                  f"state: F={state.f_number}",
                  f"fit_offset: {offset!r}",
                  f"fit_contrast: {contrast!r}",
                  f"fit_phase_rad: {phase!r}",
                  f"fit_phase_sigma_rad: {math.sqrt(cov[2, 2])!r}",
                  f"fit_residual_rms: {resid!r}"]
    report.write_text(out / "fringe_fit_report.txt", "\n".join(lines) + "\n")
    if not args.no_figures:
        report.fig_fringes(points_by_state, fits, out / "fringe.png")
    print("\n".join(lines))
    return 0


def _fringe_residual_rms(points, offset, contrast, phase, config) -> float:
    from .stats import fringe_model
    alphas = np.array([p.alpha for p in points])
    probs = np.array([p.probability for p in points])
    model = fringe_model(alphas, offset, contrast, phase, config)
    return float(np.sqrt(np.mean((probs - model) ** 2)))


def _differential_series(cfg: RunConfig, hours: float):
    constants = cfg.constants()
    config = cfg.interferometer()
    noise = cfg.noise_model()
    context = cfg.systematics_context()
    records = cp.run_campaign(hours * 3600.0, config, noise, context,
                              seed=cfg["seed"], constants=constants)
    return records, config, constants, context, noise


def _allan_of_records(records, config, constants):
    times, g1, g2 = cp.pair_differences(records, config, constants)
    dg = (g1 - g2) / constants.g_nominal
    pair_period = 2.0 * config.alternation_lag
    taus = [pair_period * 2**j for j in range(int(math.log2(max(len(dg) // 2, 2))))]
    taus = sorted(set(taus) | {20000.0})
    return allan_deviation(dg, pair_period, taus=taus)


def cmd_allan(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg)
    hours = cfg["campaign.duration_hours"]
    records, config, constants, _, _ = _differential_series(cfg, hours)
    series = _allan_of_records(records, config, constants)
    report.allan_csv(series, out / "allan.csv")
    if not args.no_figures:
        report.fig_allan(series, out / "allan.png")
    print(f"sensitivity_g_rthz: {series.slope_fit!r}")
    tau_long = float(series.taus[np.argmin(np.abs(series.taus - 20000.0))])
    print(f"allan_at_{tau_long:.0f}s_g: {series.at_tau(tau_long)!r}")
    return 0


def cmd_campaign(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg)
    hours = cfg["campaign.duration_hours"]
    records, config, constants, context, noise = _differential_series(cfg, hours)
    bin_s = cfg["campaign.bin_s"]

    rows = _budget_rows(cfg, config, constants, hours)
    result = cp.analyze_campaign(records, config, bin_width=bin_s,
                                 constants=constants, zeeman=rows["zeeman"],
                                 ac_stark=rows["ac_stark"], tide=rows["tide"])
    series = _allan_of_records(records, config, constants)

    report.records_csv(records, out / "records.csv")
    report.binned_csv(result, out / "binned.csv")
    report.allan_csv(series, out / "allan.csv")
    table = report.budget_table(result.budget)
    summary = report.campaign_report(result, hours, cfg["seed"])
    report.write_text(out / "budget_report.txt", summary + "\n" + table)
    if not args.no_figures:
        tide_curve = (sy.tide_g(result.binned_series.times, context.tide_model)
                      if context.tide_model is not None else None)
        report.fig_campaign(result, tide_curve, out / "campaign.png")
        report.fig_allan(series, out / "allan.png")
    print(summary)
    print(table)

    if args.check:
        failures = _self_checks(result, records, config, hours, bin_s)
        for msg in failures:
            print(f"CHECK FAIL: {msg}", file=sys.stderr)
        if failures:
            return CHECK_EXIT
        print("all self-checks passed")
    return 0


def _budget_rows(cfg: RunConfig, config, constants, hours: float) -> dict:
    zero = lambda name: sy.SystematicShift(name, 0.0, 0.0)
    rows = {"zeeman": zero("quadratic_zeeman"), "ac_stark": zero("ac_stark"),
            "tide": zero("tide_alternation")}
    if cfg["systematics.zeeman_enabled"]:
        profile = cfg.magnetic_profile()
        trajectory = Trajectory.from_config(config, constants)
        value = sy.zeeman_differential_bias(profile, trajectory, config, constants,
                                            current=cfg["systematics.nominal_current_a"])
        rows["zeeman"] = sy.SystematicShift("quadratic_zeeman", value,
                                            cfg["systematics.zeeman_uncertainty_g"])
        pi_pulse = bragg.calibrate_pi_pulse(config.pi_pulse_sigma, config, constants)
        ac = sy.ac_stark_bound(cfg["systematics.ac_stark_gradient_fraction"],
                               cfg["systematics.ac_stark_imbalance_fraction"],
                               pi_pulse.peak_rabi, config, constants)
        tpls = sy.two_photon_light_shift_bound(cfg["systematics.tpls_freq_error_hz"],
                                               config, constants,
                                               field_template=cfg.laser_field())
        rows["ac_stark"] = sy.SystematicShift(
            "ac_stark", 0.0, math.hypot(ac.uncertainty, tpls.uncertainty))
    if cfg["systematics.tide_enabled"]:
        rows["tide"] = sy.tide_alternation_bias(
            cfg.tide_model(), config.alternation_lag, hours * 3600.0,
            g_nominal=constants.g_nominal)
    return rows


def _self_checks(result, records, config, hours: float, bin_s: float) -> list[str]:
    failures = []
    budget = result.budget
    stat = budget.rows[0]
    recon = stat.value - sum(r.value for r in budget.rows[1:])
    if abs(recon - budget.corrected_value) > 1e-15:
        failures.append("budget correction arithmetic inconsistent")
    rss = math.sqrt(sum(r.uncertainty**2 for r in budget.rows))
    if abs(rss - budget.corrected_uncertainty) > 1e-18:
        failures.append("budget uncertainty is not the row RSS")
    if result.eta.value != budget.corrected_value:
        failures.append("eta differs from the corrected budget value")
    if result.k_tilde.value != -result.eta.value / 4.0:
        failures.append("k_tilde is not -eta/4")
    if result.r_diff.value != result.eta.value:
        failures.append("r_diff is not eta")
    pair_period = 2.0 * config.alternation_lag
    expected_pairs = int(hours * 3600.0 // pair_period)
    if len(records) != 4 * expected_pairs:
        failures.append(f"record count {len(records)} != 4 * {expected_pairs}")
    expected_bins = int(((expected_pairs - 1) * pair_period) // bin_s) + 1
    if len(result.binned_series) + result.n_dropped_bins != expected_bins:
        failures.append("bin count inconsistent with the schedule")
    if any(not (0.0 <= r.probability <= 1.0) for r in records):
        failures.append("probability outside [0, 1]")
    return failures


def cmd_zeeman_modulation(cfg: RunConfig, args) -> int:
    out = _out_dir(cfg)
    constants = cfg.constants()
    config = cfg.interferometer()
    try:
        currents = [float(c) * 1e-3 for c in args.currents.split(",") if c.strip()]
    except ValueError as exc:
        raise ValueError(f"bad --currents list: {exc}") from exc
    profile = cfg.magnetic_profile()
    points, coeffs = sy.zeeman_modulation_curve(profile, currents, config,
                                                constants=constants)
    if coeffs is None:
        print("fit refused: need at least 3 currents", file=sys.stderr)
        return USAGE_EXIT
    report.modulation_csv(points, out / "zeeman_modulation.csv")
    lines = ["report: zeeman_modulation",
             f"bias_field_at_100mA_gauss: {profile.solenoid_field(0.100) * 1e4!r}",
             f"quadratic_coeff_g_per_a2: {float(coeffs[0])!r}",
             f"linear_coeff_g_per_a: {float(coeffs[1])!r}",
             f"constant_coeff_g: {float(coeffs[2])!r}"]
    report.write_text(out / "zeeman_modulation_report.txt", "\n".join(lines) + "\n")
    if not args.no_figures:
        report.fig_modulation(points, coeffs, out / "zeeman_modulation.png")
    print("\n".join(lines))
    return 0


def cmd_budget(cfg: RunConfig, args) -> int:
    constants = cfg.constants()
    config = cfg.interferometer()
    hours = cfg["campaign.duration_hours"]
    rows = _budget_rows(cfg, config, constants, hours)
    sens = cfg["noise.target_sensitivity_g_rthz"]
    stat = sy.SystematicShift("statistical", 0.0,
                              sens / math.sqrt(hours * 3600.0))
    budget = cp.assemble_budget(stat, rows["zeeman"], rows["ac_stark"],
                                rows["tide"])
    print(report.budget_table(budget))
    return 0


_COMMANDS = {
    "constants": cmd_constants,
    "detuning": cmd_detuning,
    "fringe": cmd_fringe,
    "allan": cmd_allan,
    "campaign": cmd_campaign,
    "zeeman-modulation": cmd_zeeman_modulation,
    "budget": cmd_budget,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        return _COMMANDS[args.command](cfg, args)
    except BraggfallError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_EXIT
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
