"""Systematic-effect models for the differential free-fall comparison.

Channels modelled quantitatively:

* quadratic Zeeman bias from the spatial arm separation in an inhomogeneous
  field (the dominant term, opposite in sign for the two clock states),
* AC Stark and two-photon light-shift upper bounds (documented
  reconstructions; their inputs are apparatus assumptions, not measurements),
* solid-earth tides and the bias from the 2 s state-alternation lag.

Gravity-gradient, Coriolis and wavefront channels are carried only as
zero-valued budget rows: they are common to both states and reject in the
difference.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .core import (
    HyperfineState,
    InterferometerConfig,
    PhysicalConstants,
    ProfileDomainError,
    Trajectory,
    rb87_constants,
)
from . import bragg


@dataclass(frozen=True)
class SystematicShift:
    """One error-budget row: a bias on the differential acceleration."""

    channel: str
    value: float            # units of g
    uncertainty: float      # units of g

    def __post_init__(self):
        if self.uncertainty < 0:
            raise ValueError("uncertainty must be >= 0")


class TideWindowWarning(UserWarning):
    """Averaging window shorter than the slowest tidal constituent."""


# ---------------------------------------------------------------------------
# Quadratic Zeeman channel
# ---------------------------------------------------------------------------

class MagneticProfile:
    """Field magnitude along the fountain axis, split into a solenoid part
    that scales with the bias current and a current-independent residual.

    B(z, I) = bias_scale * I * shape(z) + residual(z)

    ``shape`` is dimensionless and ~1 inside the solenoid; its inhomogeneity
    is what turns the bias current into a B^2 gradient and hence a
    state-dependent phase.
    """

    def __init__(self, z_grid, shape, residual=None,
                 bias_scale: float = 9.0e-5, nominal_current: float = 0.100):
        z_grid = np.asarray(z_grid, dtype=float)
        shape = np.asarray(shape, dtype=float)
        if z_grid.ndim != 1 or len(z_grid) < 4:
            raise ValueError("need a 1-D grid with at least 4 samples")
        if np.any(np.diff(z_grid) <= 0):
            raise ValueError("z grid must be strictly increasing")
        if residual is None:
            residual = np.zeros_like(z_grid)
        residual = np.asarray(residual, dtype=float)
        if shape.shape != z_grid.shape or residual.shape != z_grid.shape:
            raise ValueError("shape/residual arrays must match the grid")
        if bias_scale <= 0 or nominal_current <= 0:
            raise ValueError("bias_scale and nominal_current must be positive")
        if np.any(bias_scale * nominal_current * shape + residual < 0):
            raise ValueError("field magnitude must be non-negative on the grid")
        self.z_grid = z_grid
        self.bias_scale = bias_scale
        self.nominal_current = nominal_current
        self._shape = CubicSpline(z_grid, shape)
        self._residual = CubicSpline(z_grid, residual)

    @property
    def z_min(self) -> float:
        return float(self.z_grid[0])

    @property
    def z_max(self) -> float:
        return float(self.z_grid[-1])

    def solenoid_field(self, current: float) -> float:
        """Nominal solenoid field bias_scale * I (T); 90 mG at 100 mA."""
        return self.bias_scale * current

    def field(self, z, current: float | None = None):
        """B(z) in tesla at the given (default: nominal) current."""
        current = self.nominal_current if current is None else current
        z = np.asarray(z, dtype=float)
        if np.any(z < self.z_min) or np.any(z > self.z_max):
            raise ProfileDomainError(
                f"z outside sampled profile [{self.z_min}, {self.z_max}] m")
        return self.bias_scale * current * self._shape(z) + self._residual(z)

    @classmethod
    def from_file(cls, path, bias_scale: float = 9.0e-5,
                  nominal_current: float = 0.100) -> "MagneticProfile":
        """Load a two-column text file (z_m, B_tesla) sampled at the nominal
        current; the whole field is attributed to the solenoid."""
        data = np.loadtxt(path)
        if data.ndim != 2 or data.shape[1] != 2:
            raise ValueError("profile file must have two columns: z_m B_tesla")
        z, b = data[:, 0], data[:, 1]
        return cls(z, b / (bias_scale * nominal_current),
                   bias_scale=bias_scale, nominal_current=nominal_current)


# Default synthetic profile: a smooth solenoid roll-off below the
# interferometry region plus a few-mG residual background.  The bump
# amplitude is calibrated once (see calibrate_profile_inhomogeneity) so the
# differential bias at the nominal 100 mA equals -2.1e-10 g.
_DEFAULT_BUMP_AMPLITUDE = 1.3169370242996244e-02
_BUMP_CENTER = 0.50      # m
_BUMP_WIDTH = 0.08       # m


def _synthetic_profile(bump_amplitude: float) -> MagneticProfile:
    z = np.linspace(0.30, 0.80, 501)
    shape = 1.0 + bump_amplitude * np.exp(-((z - _BUMP_CENTER) ** 2)
                                          / (2.0 * _BUMP_WIDTH ** 2))
    residual = 2.0e-7 + 1.0e-7 * (z - 0.55)
    return MagneticProfile(z, shape, residual)


def default_profile() -> MagneticProfile:
    """The shipped profile reproducing the -2.1e-10 g differential bias."""
    return _synthetic_profile(_DEFAULT_BUMP_AMPLITUDE)


def zeeman_potential(state: HyperfineState, b_field,
                     constants: PhysicalConstants | None = None):
    """Quadratic Zeeman energy of one m_F = 0 clock level (J).

    The clock transition shifts by K_q B^2; the two levels move oppositely,
    each by half of that.
    """
    constants = constants or rb87_constants()
    b = np.asarray(b_field, dtype=float)
    if np.any(b < 0):
        raise ValueError("field magnitude must be >= 0")
    h = 2.0 * math.pi * constants.hbar
    return state.zeeman_sign * 0.5 * h * constants.clock_quadratic_coeff * b * b


def _zeeman_phase(profile: MagneticProfile, trajectory: Trajectory,
                  state: HyperfineState, constants: PhysicalConstants,
                  current: float | None) -> float:
    """First-order perturbative phase (rad): -(1/hbar) integral of the
    upper-minus-lower potential difference over the sequence."""
    T = trajectory.T
    nodes, weights = np.polynomial.legendre.leggauss(64)

    def branch(t0, t1):
        t = 0.5 * (t1 - t0) * nodes + 0.5 * (t1 + t0)
        b_up = profile.field(trajectory.z_upper(t), current)
        b_lo = profile.field(trajectory.z_lower(t), current)
        du = (zeeman_potential(state, b_up, constants)
              - zeeman_potential(state, b_lo, constants))
        return 0.5 * (t1 - t0) * np.dot(weights, du)

    integral = branch(0.0, T) + branch(T, 2.0 * T)
    return -integral / constants.hbar


def zeeman_bias(profile: MagneticProfile, trajectory: Trajectory,
                state: HyperfineState, config: InterferometerConfig,
                constants: PhysicalConstants | None = None,
                current: float | None = None) -> float:
    """Acceleration bias (units of g) of one state's interferometer."""
    constants = constants or rb87_constants()
    phase = _zeeman_phase(profile, trajectory, state, constants, current)
    return phase / (config.scale_factor * constants.g_nominal)


def zeeman_differential_bias(profile: MagneticProfile, trajectory: Trajectory,
                             config: InterferometerConfig,
                             constants: PhysicalConstants | None = None,
                             current: float | None = None) -> float:
    """bias(F=1) - bias(F=2), the quantity entering the error budget."""
    from .core import F1, F2
    return (zeeman_bias(profile, trajectory, F1, config, constants, current)
            - zeeman_bias(profile, trajectory, F2, config, constants, current))


def zeeman_modulation_curve(profile: MagneticProfile, currents,
                            config: InterferometerConfig,
                            trajectory: Trajectory | None = None,
                            constants: PhysicalConstants | None = None):
    """Differential bias versus solenoid current plus its quadratic fit.

    Returns (points, coeffs) with points = [(current, delta_g), ...] and
    coeffs the descending-order quadratic polynomial coefficients.
    """
    constants = constants or rb87_constants()
    trajectory = trajectory or Trajectory.from_config(config, constants)
    currents = np.asarray(currents, dtype=float)
    if np.any(currents < 0):
        raise ValueError("currents must be non-negative")
    dg = np.array([zeeman_differential_bias(profile, trajectory, config,
                                            constants, current=i)
                   for i in currents])
    if len(currents) >= 3:
        coeffs = np.polyfit(currents, dg, 2)
    else:
        coeffs = None
    return list(zip(currents.tolist(), dg.tolist())), coeffs


def calibrate_profile_inhomogeneity(target: float = -2.1e-10,
                                    config: InterferometerConfig | None = None,
                                    constants: PhysicalConstants | None = None) -> float:
    """Solve for the solenoid-shape bump amplitude that makes the default
    synthetic profile reproduce ``target`` at the nominal current.

    This is the one-time calibration that produced _DEFAULT_BUMP_AMPLITUDE.
    """
    config = config or InterferometerConfig()
    constants = constants or rb87_constants()
    trajectory = Trajectory.from_config(config, constants)

    def miss(amp):
        prof = _synthetic_profile(amp)
        return zeeman_differential_bias(prof, trajectory, config, constants) - target

    return brentq(miss, 0.0, 0.05, xtol=1e-12)


# ---------------------------------------------------------------------------
# Light-shift upper bounds
# ---------------------------------------------------------------------------

def ac_stark_bound(intensity_gradient_fraction: float,
                   pulse1_pulse3_imbalance_fraction: float,
                   omega_peak: float,
                   config: InterferometerConfig | None = None,
                   constants: PhysicalConstants | None = None) -> SystematicShift:
    """Upper bound on the single-photon light-shift channel (units of g).

    Two contributions, both proportional to their input fractions:

    * arm-separation term: the single-photon shift is ~2x the two-photon
      Rabi frequency at the balanced point, so a fractional intensity
      difference f between the separated arms during the mirror pulse leaves
      a phase <= f * 2 * (pi-pulse area);
    * pulse-1/pulse-3 term: the off-resonant ladder orders tilt the
      beam-splitter rotation axis by ~Omega/(16 w_r); an intensity
      imbalance between the splitters leaves the tilt mismatch uncancelled.

    This is a bound on magnitudes, not an estimate; value is reported as 0.
    """
    if not (0.0 <= intensity_gradient_fraction <= 1.0
            and 0.0 <= pulse1_pulse3_imbalance_fraction <= 1.0):
        raise ValueError("fractions must lie in [0, 1]")
    config = config or InterferometerConfig()
    constants = constants or rb87_constants()
    area_pi = omega_peak * config.pi_pulse_sigma * math.sqrt(2.0 * math.pi)
    shift_ratio = 2.0                         # single-photon shift / Omega
    tilt = (omega_peak / 2.0) / (16.0 * constants.recoil_omega)
    phase = (intensity_gradient_fraction * shift_ratio * area_pi
             + pulse1_pulse3_imbalance_fraction * tilt)
    bound = phase / (config.scale_factor * constants.g_nominal)
    return SystematicShift("ac_stark", 0.0, abs(bound))


def two_photon_light_shift_bound(freq_error: float,
                                 config: InterferometerConfig | None = None,
                                 constants: PhysicalConstants | None = None,
                                 field_template: bragg.LaserField | None = None,
                                 splitter_miscancellation: float = 0.10) -> SystematicShift:
    """Bound on the two-photon light-shift channel from a detuning error.

    Evaluates d(Omega_1 - Omega_2)/dDelta at the balanced point; the
    resulting fractional Rabi imbalance tilts the two states' beam-splitter
    axes differently.  In a symmetric Mach-Zehnder the two splitter tilts
    cancel; ``splitter_miscancellation`` is the assumed residual fraction.
    The returned value is odd in freq_error (first-order model).
    """
    config = config or InterferometerConfig()
    constants = constants or rb87_constants()
    field_template = field_template or bragg.LaserField.from_power(detuning=3.0e9)
    from .core import F1, F2

    delta_star = bragg.balanced_detuning_solve(field_template, constants)
    h = 1.0e5  # Hz step for the central derivative

    def imbalance(delta):
        f = replace(field_template, detuning=delta)
        return (bragg.two_photon_rabi(F1, f, constants)
                - bragg.two_photon_rabi(F2, f, constants))

    d_imb = (imbalance(delta_star + h) - imbalance(delta_star - h)) / (2.0 * h)
    omega_bal = bragg.two_photon_rabi(F2,
                                      replace(field_template, detuning=delta_star),
                                      constants)
    rel_imbalance = d_imb * freq_error / omega_bal

    pi_pulse = bragg.calibrate_pi_pulse(config.pi_pulse_sigma, config, constants)
    splitter_peak = bragg.splitter_waveform(pi_pulse).peak_rabi
    tilt = splitter_peak / (16.0 * constants.recoil_omega)
    phase = rel_imbalance * tilt * splitter_miscancellation
    value = phase / (config.scale_factor * constants.g_nominal)
    return SystematicShift("two_photon_light_shift", value, abs(value))


# ---------------------------------------------------------------------------
# Solid-earth tides
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TideConstituent:
    name: str
    omega: float        # rad/s
    amplitude: float    # m/s^2
    phase: float        # rad


@dataclass(frozen=True)
class TideModel:
    """Harmonic gravity-tide series: sum of A_i cos(w_i t + phi_i) + offset."""

    constituents: tuple
    site_offset: float = 0.0    # m/s^2

    def __post_init__(self):
        omegas = [c.omega for c in self.constituents]
        if len(set(omegas)) != len(omegas):
            raise ValueError("constituent frequencies must be distinct")
        if any(c.amplitude < 0 for c in self.constituents):
            raise ValueError("constituent amplitudes must be non-negative")

    @property
    def longest_period(self) -> float:
        if not self.constituents:
            return 0.0
        return max(2.0 * math.pi / c.omega for c in self.constituents)

    @property
    def max_amplitude(self) -> float:
        """Envelope bound sum(A_i) on |tide - offset| (m/s^2)."""
        return sum(c.amplitude for c in self.constituents)


def tide_g(t, model: TideModel):
    """Tidal gravity perturbation at time t (m/s^2)."""
    t = np.asarray(t, dtype=float)
    out = np.full(t.shape, model.site_offset)
    for c in model.constituents:
        out = out + c.amplitude * np.cos(c.omega * t + c.phase)
    return out if out.shape else float(out)


def tide_g_rate(t, model: TideModel):
    """Analytic time derivative of tide_g (m/s^3)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    for c in model.constituents:
        out = out - c.amplitude * c.omega * np.sin(c.omega * t + c.phase)
    return out if out.shape else float(out)


def tide_alternation_bias(model: TideModel, lag: float, window: float,
                          g_nominal: float = 9.794) -> SystematicShift:
    """Mean of tide(t + lag) - tide(t) over the window, in units of g.

    This is the bias left in the differential acceleration by measuring one
    state a fixed lag after the other.  Computed from the analytic
    antiderivative, so it is exact for the harmonic model.  The uncertainty
    reports the worst case over constituent phases, 2 * lag * max|tide| / window.
    """
    if lag <= 0:
        raise ValueError("lag must be positive")
    if window < model.longest_period:
        warnings.warn(
            f"window {window:.0f} s shorter than the slowest constituent "
            f"period {model.longest_period:.0f} s; the mean may not average out",
            TideWindowWarning, stacklevel=2)

    def antiderivative(t):
        total = 0.0
        for c in model.constituents:
            total += c.amplitude / c.omega * math.sin(c.omega * t + c.phase)
        return total

    mean = ((antiderivative(window + lag) - antiderivative(window))
            - (antiderivative(lag) - antiderivative(0.0))) / window
    bound = 2.0 * lag * model.max_amplitude / window
    return SystematicShift("tide_alternation", mean / g_nominal,
                           bound / g_nominal)


def load_tide_model(path) -> TideModel:
    """Read a constituent table: name, period_h, amplitude_ugal, phase_rad."""
    constituents = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            name, period_h, amp_ugal, phase = line.split()
            constituents.append(TideConstituent(
                name=name,
                omega=2.0 * math.pi / (float(period_h) * 3600.0),
                amplitude=float(amp_ugal) * 1.0e-8,
                phase=float(phase)))
    return TideModel(tuple(constituents))


def default_tide_model() -> TideModel:
    """Six-constituent mid-latitude model shipped with the package."""
    from importlib.resources import files
    return load_tide_model(files("braggfall") / "data" / "tide_constituents_default.txt")
