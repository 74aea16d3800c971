"""Mach-Zehnder fringe model, shot-level simulation, and chirp scanning.

Campaign throughput uses the closed-form three-pulse phase
phi = n (k_eff g - alpha) T^2; the momentum-ladder solver is reserved for
pulse calibration and for the cross-check that both descriptions agree.
Fringes are acquired by stepping the chirp rate alpha, matching how the
instrument modulates its beat frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bragg
from .core import (
    HyperfineState,
    InterferometerConfig,
    PhysicalConstants,
    ShotRecord,
    rb87_constants,
)
from .systematics import TideModel, tide_g


@dataclass(frozen=True)
class FringePoint:
    """One point of a chirp-scanned fringe."""

    alpha: float                # rad/s^2
    probability: float
    state: HyperfineState
    timestamp: float            # s

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("probability must lie in [0, 1]")


@dataclass(frozen=True)
class NoiseModel:
    """Per-shot noise terms.

    per_shot_phase_sigma: white interferometer phase noise, independent per
    probability point.  detection_sigma: fluorescence noise on each
    normalised Raman sample.  vibration_common: mirror-vibration phase
    applied identically to both states within an alternation pair, so it
    cancels in the difference.
    """

    per_shot_phase_sigma: float = 0.15     # rad
    detection_sigma: float = 0.003         # probability units
    vibration_common: float = 0.10         # rad

    def __post_init__(self):
        for name in ("per_shot_phase_sigma", "detection_sigma", "vibration_common"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @classmethod
    def off(cls) -> "NoiseModel":
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def calibrated(cls, config: InterferometerConfig,
                   constants: PhysicalConstants | None = None,
                   target_sensitivity: float = 1.2e-7,
                   detection_sigma: float = 0.003,
                   vibration_common: float = 0.10) -> "NoiseModel":
        """Choose the phase noise so the differential white-noise level is
        ``target_sensitivity`` (units of g per root-hertz).

        One differential sample takes one alternation pair
        (2 * alternation_lag seconds), so the per-sample scatter is
        target / sqrt(pair period), split evenly between the two states'
        phase readouts after subtracting the detection contribution.
        """
        constants = constants or rb87_constants()
        pair_period = 2.0 * config.alternation_lag
        sigma_dg = target_sensitivity / math.sqrt(pair_period)   # g units
        sigma_phi_eff = (sigma_dg * constants.g_nominal
                         * config.scale_factor) / math.sqrt(2.0)
        det_phi = (detection_sigma * math.sqrt(0.5)
                   / (config.fringe_contrast / 2.0))
        phase_sq = sigma_phi_eff**2 - det_phi**2
        if phase_sq <= 0:
            raise ValueError("detection noise alone exceeds the target sensitivity")
        return cls(math.sqrt(phase_sq), detection_sigma, vibration_common)


@dataclass(frozen=True)
class SystematicsContext:
    """Per-run systematic inputs applied inside shot simulation.

    zeeman biases are in units of g; k_tilde is the injected strength of the
    spin-perpendicular violation, scaling each state's gravity by
    (1 + k_tilde * |F_perp|^2).
    """

    tide_model: TideModel | None = None
    zeeman_bias_f1: float = 0.0
    zeeman_bias_f2: float = 0.0
    k_tilde: float = 0.0

    @classmethod
    def off(cls) -> "SystematicsContext":
        return cls()

    def g_total(self, state: HyperfineState, t: float,
                constants: PhysicalConstants) -> float:
        g = constants.g_nominal
        if self.tide_model is not None:
            g = g + tide_g(t, self.tide_model)
        g = g * (1.0 + self.k_tilde * state.spin_perp_sq)
        bias = self.zeeman_bias_f1 if state.f_number == 1 else self.zeeman_bias_f2
        return g + bias * constants.g_nominal


# ---------------------------------------------------------------------------
# Closed-form phase model
# ---------------------------------------------------------------------------

def resonance_offset(v_a: float, n: int,
                     constants: PhysicalConstants | None = None) -> float:
    """Beat-frequency resonance 2 k v_a + 4 n omega_r (rad/s)."""
    if n < 1:
        raise ValueError("Bragg order must be >= 1")
    constants = constants or rb87_constants()
    return 2.0 * constants.wavenumber * v_a + 4.0 * n * constants.recoil_omega


def mz_phase(g: float, alpha: float, config: InterferometerConfig) -> float:
    """Three-pulse phase n (k_eff g - alpha) T^2 (rad)."""
    return config.bragg_order * (config.k_eff * g - alpha) * config.T**2


def fringe_period_alpha(config: InterferometerConfig) -> float:
    """Chirp-rate change per fringe: 2 pi / (n T^2) (rad/s^2)."""
    return 2.0 * math.pi / (config.bragg_order * config.T**2)


def transition_probability(phi, contrast: float = 1.0, offset: float = 0.5):
    """P = offset - (contrast/2) cos(phi); the ideal fringe has offset = 1/2,
    contrast = 1."""
    if not 0.0 <= contrast <= 1.0:
        raise ValueError("contrast must lie in [0, 1]")
    if offset - contrast / 2.0 < 0.0 or offset + contrast / 2.0 > 1.0:
        raise ValueError("offset +/- contrast/2 must stay within [0, 1]")
    return offset - (contrast / 2.0) * np.cos(phi)


def probability_to_g(probability: float, alpha: float,
                     config: InterferometerConfig,
                     constants: PhysicalConstants | None = None) -> float:
    """Invert one fringe-side probability reading into an acceleration.

    Valid while the phase stays on the arccos branch [0, pi]; the mid-fringe
    operating point keeps the nominal phase at pi/2.
    """
    constants = constants or rb87_constants()
    cos_phi = (config.fringe_offset - probability) / (config.fringe_contrast / 2.0)
    phi = math.acos(min(1.0, max(-1.0, cos_phi)))
    return (phi / (config.bragg_order * config.T**2) + alpha) / config.k_eff


# ---------------------------------------------------------------------------
# Shot simulation
# ---------------------------------------------------------------------------

def simulate_shot(state: HyperfineState, alpha: float, t: float,
                  config: InterferometerConfig, noise: NoiseModel,
                  systematics_context: SystematicsContext | None = None,
                  rng: np.random.Generator | None = None,
                  constants: PhysicalConstants | None = None,
                  common_phase: float = 0.0) -> ShotRecord:
    """Simulate one probability point (one pair of detection shots).

    ``common_phase`` carries the mirror-vibration phase shared by both
    states of an alternation pair; the campaign driver draws it once per
    pair.  Detection runs through the two-sample amplitude-ratio estimator
    with fluorescence noise on each fixed-frequency Raman sample.
    """
    constants = constants or rb87_constants()
    context = systematics_context or SystematicsContext.off()
    rng = rng or np.random.default_rng(0)

    g = context.g_total(state, t, constants)
    phi = mz_phase(g, alpha, config) + common_phase
    if noise.per_shot_phase_sigma > 0:
        phi += rng.normal(0.0, noise.per_shot_phase_sigma)
    p_true = float(transition_probability(phi, config.fringe_contrast,
                                          config.fringe_offset))

    from .stats import population_from_two_samples, sample_peaks
    r1, r2 = sample_peaks(1.0 - p_true, p_true, constants)
    if noise.detection_sigma > 0:
        r1 = max(r1 + rng.normal(0.0, noise.detection_sigma), 0.0)
        r2 = max(r2 + rng.normal(0.0, noise.detection_sigma), 0.0)
    p_meas = min(1.0, max(0.0, population_from_two_samples(r1, r2)))
    return ShotRecord(timestamp=t, state=state, alpha=alpha,
                      probability=p_meas, shot_role="peak1")


def fringe_scan(state: HyperfineState, alpha_center: float,
                config: InterferometerConfig,
                points_per_period: int = 20, periods: int = 2,
                noise: NoiseModel | None = None,
                rng: np.random.Generator | None = None,
                constants: PhysicalConstants | None = None,
                start_time: float = 0.0) -> list[FringePoint]:
    """Scan the chirp rate across ``periods`` fringes for one state.

    Probability points follow the alternating-shot cadence (one point per
    2 * alternation_lag), so a two-period scan with the default 20 points
    per period spans 160 simulated seconds.
    """
    if periods < 1:
        raise ValueError("periods must be >= 1")
    noise = noise or NoiseModel.off()
    rng = rng or np.random.default_rng(0)
    constants = constants or rb87_constants()

    n_points = points_per_period * periods
    span = periods * fringe_period_alpha(config)
    alphas = alpha_center + np.linspace(-span / 2.0, span / 2.0, n_points)
    pair_period = 2.0 * config.alternation_lag
    t0 = start_time + (config.alternation_lag if state.f_number == 1 else 0.0)

    points = []
    for i, a in enumerate(alphas):
        rec = simulate_shot(state, float(a), t0 + i * pair_period, config,
                            noise, None, rng, constants)
        points.append(FringePoint(rec.alpha, rec.probability, state,
                                  rec.timestamp))
    return points


def scan_duration(points_per_period: int, periods: int,
                  config: InterferometerConfig) -> float:
    """Wall-clock seconds one interleaved two-state scan occupies."""
    return points_per_period * periods * 2.0 * config.alternation_lag


# ---------------------------------------------------------------------------
# Ladder cross-check of the closed-form phase
# ---------------------------------------------------------------------------

def mz_ladder_crosscheck(config: InterferometerConfig | None = None,
                         constants: PhysicalConstants | None = None,
                         target_phase: float = 0.3,
                         max_order: int = 5) -> tuple[float, float]:
    """Run one full pi/2 - pi - pi/2 sequence on the momentum ladder.

    The chirp is detuned from the closed fringe so the analytic phase is
    ``target_phase``; returns (ladder_phase, analytic_phase).  Both should
    agree to ~1e-3 rad, justifying the closed-form model for campaign use.
    """
    config = config or InterferometerConfig()
    constants = constants or rb87_constants()
    n = config.bragg_order
    omega_r = constants.recoil_omega
    T = config.T

    pi_pulse = bragg.calibrate_pi_pulse(config.pi_pulse_sigma, config, constants)
    splitter = bragg.splitter_waveform(pi_pulse)
    ramp = target_phase / (n * T**2)   # residual detuning rate, rad/s^2

    orders = np.arange(-max_order, max_order + 1).astype(float)
    base = 4.0 * omega_r * orders**2 - 4.0 * n * omega_r * orders

    def pulse(amps, waveform, t_center):
        """Integrate one pulse window with the linear detuning ramp.

        Time referenced to the mirror pulse at T: delta(t) = ramp * (t - T).
        """
        from scipy.integrate import solve_ivp
        sig, peak = waveform.sigma, waveform.peak_rabi
        half = waveform.truncation * sig

        def rhs(tau, y):
            om_half = 0.5 * peak * math.exp(-tau * tau / (2.0 * sig * sig))
            det = ramp * (t_center + tau - T)
            dc = (base + orders * det) * y
            dc[1:] += om_half * y[:-1]
            dc[:-1] += om_half * y[1:]
            return -1j * dc

        sol = solve_ivp(rhs, (-half, half), amps, method="DOP853",
                        rtol=1e-11, atol=1e-13)
        return sol.y[:, -1]

    def free(amps, t_a, t_b):
        kinetic = base * (t_b - t_a)
        chirp = orders * ramp * 0.5 * ((t_b - T) ** 2 - (t_a - T) ** 2)
        return amps * np.exp(-1j * (kinetic + chirp))

    half_w = splitter.truncation * splitter.sigma
    amps = np.zeros(2 * max_order + 1, dtype=complex)
    amps[max_order] = 1.0
    amps = pulse(amps, splitter, 0.0)
    amps = free(amps, half_w, T - half_w)
    amps = pulse(amps, pi_pulse, T)
    amps = free(amps, T + half_w, 2.0 * T - half_w)

    # Four-step phase extraction: shift the lattice phase of the final
    # splitter by 0, pi/2, pi, 3pi/2 and read the port population.  The
    # atan2 combination cancels the fringe offset and contrast exactly, so
    # splitter imperfections do not bias the recovered phase.
    port = []
    for phi_l in (0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi):
        shifted = amps * np.exp(-1j * orders * phi_l)
        out = pulse(shifted, splitter, 2.0 * T)
        port.append(float(np.abs(out[max_order + n]) ** 2))
    i1, i2, i3, i4 = port
    ladder_phase = math.atan2(i2 - i4, i3 - i1) % (2.0 * math.pi)
    return ladder_phase, target_phase % (2.0 * math.pi)
