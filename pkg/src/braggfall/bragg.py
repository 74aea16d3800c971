"""Two-photon Bragg pulse physics on the momentum ladder.

The two clock states couple to the same pair of vertical beams; the
balanced single-photon detuning makes their two-photon Rabi frequencies
equal so one beam pair can drive both interferometers.  Pulse propagation
keeps a truncated ladder of momentum states |p0 + 2m*hbar*k> and integrates
the coupled amplitudes through the Gaussian envelope.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .core import (
    CalibrationError,
    HyperfineState,
    IntegrationError,
    InterferometerConfig,
    NoSolutionError,
    PhysicalConstants,
    ResonanceError,
    rb87_constants,
)

# 5S_1/2 -> 5P_3/2 reduced dipole moment (C m) and vacuum constants; these set
# only the absolute Rabi scale, not the balance point.
_D2_DIPOLE = 3.584e-29
_EPS0 = 8.8541878128e-12
_C_LIGHT = 2.99792458e8

# Refuse to evaluate couplings closer than this to a hyperfine line (Hz).
_RESONANCE_GUARD = 1.0e6


@dataclass(frozen=True)
class LaserField:
    """Bragg beam pair: single-photon detuning plus beam parameters.

    ``detuning`` is referenced to the F=2 -> F'=3 transition (blue is
    positive); the balanced operating point sits in the gap between the two
    ground-state manifolds, red of every F=1 line and blue of every F=2 line.
    """

    detuning: float                     # Hz from the F=2 -> F'=3 line
    intensity_1: float                  # W/m^2
    intensity_2: float                  # W/m^2
    beam_diameter: float = 0.019        # m, e^-2 diameter
    total_power: float = 0.080          # W
    freq_difference: float = 0.0        # rad/s, omega_1 - omega_2

    def __post_init__(self):
        if self.intensity_1 < 0 or self.intensity_2 < 0:
            raise ValueError("beam intensities must be non-negative")
        if self.beam_diameter <= 0:
            raise ValueError("beam_diameter must be positive")

    @classmethod
    def from_power(cls, detuning: float, total_power: float = 0.080,
                   beam_diameter: float = 0.019, intensity_ratio: float = 1.0,
                   freq_difference: float = 0.0) -> "LaserField":
        """Split a total power between the two beams (Gaussian peak intensity)."""
        w = beam_diameter / 2.0
        p1 = total_power * intensity_ratio / (1.0 + intensity_ratio)
        p2 = total_power / (1.0 + intensity_ratio)
        peak = lambda p: 2.0 * p / (math.pi * w * w)
        return cls(detuning=detuning, intensity_1=peak(p1), intensity_2=peak(p2),
                   beam_diameter=beam_diameter, total_power=total_power,
                   freq_difference=freq_difference)


def _rabi_sum(state: HyperfineState, field_: LaserField,
              constants: PhysicalConstants) -> float:
    """Signed sum over excited levels of weight / angular detuning (s/rad)."""
    total = 0.0
    for (f, f_exc), weight in constants.excited_couplings.items():
        if f != state.f_number or weight == 0.0:
            continue
        delta_hz = field_.detuning - constants.line_offset(f, f_exc)
        if abs(delta_hz) < _RESONANCE_GUARD:
            raise ResonanceError(
                f"detuning within {_RESONANCE_GUARD/1e6:.1f} MHz of the "
                f"F={f} -> F'={f_exc} line")
        total += weight / (2.0 * math.pi * delta_hz)
    return total


def two_photon_rabi_signed(state: HyperfineState, field_: LaserField,
                           constants: PhysicalConstants | None = None) -> float:
    """Signed two-photon Rabi frequency (rad/s).

    Negative means the red-detuned paths dominate (the case for F=1 near the
    balanced point); the magnitude is what drives the diffraction.
    """
    constants = constants or rb87_constants()
    e1 = math.sqrt(2.0 * field_.intensity_1 / (_EPS0 * _C_LIGHT))
    e2 = math.sqrt(2.0 * field_.intensity_2 / (_EPS0 * _C_LIGHT))
    prefactor = _D2_DIPOLE**2 * e1 * e2 / (2.0 * constants.hbar**2)
    return prefactor * _rabi_sum(state, field_, constants)


def two_photon_rabi(state: HyperfineState, field_: LaserField,
                    constants: PhysicalConstants | None = None) -> float:
    """Two-photon Rabi frequency magnitude (rad/s)."""
    return abs(two_photon_rabi_signed(state, field_, constants))


def balanced_detuning_solve(field_template: LaserField,
                            constants: PhysicalConstants | None = None,
                            bracket: tuple[float, float] = (0.3e9, 6.0e9)) -> float:
    """Detuning (Hz) at which both clock states see the same Rabi frequency.

    Root of |Omega_1| - |Omega_2| inside ``bracket``; raises NoSolutionError
    when the bracket contains no sign change.
    """
    constants = constants or rb87_constants()
    from .core import F1, F2

    def imbalance(delta):
        f = replace(field_template, detuning=delta)
        return (two_photon_rabi(F1, f, constants)
                - two_photon_rabi(F2, f, constants))

    lo, hi = bracket
    f_lo, f_hi = imbalance(lo), imbalance(hi)
    if f_lo * f_hi > 0:
        raise NoSolutionError(
            f"no Rabi-balance sign change in bracket ({lo:.3e}, {hi:.3e}) Hz")
    root = brentq(imbalance, lo, hi, xtol=1e-4, rtol=8.9e-16)
    f_star = replace(field_template, detuning=root)
    o1 = two_photon_rabi(F1, f_star, constants)
    o2 = two_photon_rabi(F2, f_star, constants)
    if abs(o1 - o2) / o1 > 1e-10:
        raise NoSolutionError("balance root failed its residual contract")
    return root


# ---------------------------------------------------------------------------
# Momentum ladder
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentumLadderState:
    """Complex amplitudes over |p0 + 2m*hbar*k>, m in [-M, M]."""

    amplitudes: np.ndarray              # complex, length 2M+1
    max_order: int
    reference_momentum: float = 0.0     # kg m/s

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2 * self.max_order + 1,):
            raise ValueError("amplitudes length must be 2*max_order + 1")
        object.__setattr__(self, "amplitudes", amps)
        if abs(self.norm_sq - 1.0) > 1e-9:
            raise ValueError(f"state norm^2 = {self.norm_sq} violates unitarity")

    @classmethod
    def ground(cls, max_order: int = 5, reference_momentum: float = 0.0):
        amps = np.zeros(2 * max_order + 1, dtype=complex)
        amps[max_order] = 1.0
        return cls(amps, max_order, reference_momentum)

    @property
    def orders(self) -> np.ndarray:
        return np.arange(-self.max_order, self.max_order + 1)

    @property
    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def population(self, m: int) -> float:
        return float(np.abs(self.amplitudes[m + self.max_order]) ** 2)


@dataclass(frozen=True)
class PulseWaveform:
    """Gaussian Rabi envelope Omega(t) = peak * exp(-t^2 / 2 sigma^2)."""

    sigma: float                        # s
    peak_rabi: float                    # rad/s
    truncation: float = 4.0             # envelope support half-width, in sigmas

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.peak_rabi < 0:
            raise ValueError("peak_rabi must be non-negative")
        if self.truncation < 4.0:
            raise ValueError("truncation must be >= 4 sigma")

    def omega(self, t):
        return self.peak_rabi * np.exp(-np.asarray(t) ** 2 / (2.0 * self.sigma**2))

    @property
    def area(self) -> float:
        """Full-envelope pulse area (rad)."""
        return self.peak_rabi * self.sigma * math.sqrt(2.0 * math.pi)

    def halved(self) -> "PulseWaveform":
        """Same envelope at half the peak (half this waveform's area)."""
        return replace(self, peak_rabi=self.peak_rabi / 2.0)


def splitter_waveform(pi_pulse: PulseWaveform) -> PulseWaveform:
    """Beam-splitter pulse: half the nominal pi area at the pi pulse's width.

    The calibrated pi pulse sits a few percent above the two-level area pi
    (quasi-Bragg losses shift its optimum); equal 50/50 splitting happens at
    the nominal area pi/2, so the splitter is derived from that, not from
    half the calibrated peak.
    """
    peak = 0.5 * math.pi / (pi_pulse.sigma * math.sqrt(2.0 * math.pi))
    return replace(pi_pulse, peak_rabi=peak)


def _ladder_diagonal(orders: np.ndarray, n: int, omega_r: float,
                     doppler_offset) -> np.ndarray:
    """Rotating-frame kinetic phases: 4 w_r m^2 - 4 n w_r m + m * doppler."""
    m = orders.astype(float)
    return 4.0 * omega_r * m * m - 4.0 * n * omega_r * m + m * np.asarray(doppler_offset)


def _propagate_batch(amplitudes0: np.ndarray, waveform: PulseWaveform,
                     bragg_order: int, omega_r: float,
                     doppler_offsets: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Propagate a batch of ladders, one Doppler offset per row.

    amplitudes0: (S, K) complex, K = 2M+1.  Returns the final (S, K) array.
    All rows share the envelope, so they integrate as one stacked ODE.
    """
    S, K = amplitudes0.shape
    max_order = (K - 1) // 2
    orders = np.arange(-max_order, max_order + 1)
    diag = np.empty((S, K))
    for i, dop in enumerate(doppler_offsets):
        diag[i] = _ladder_diagonal(orders, bragg_order, omega_r, dop)

    sigma, peak = waveform.sigma, waveform.peak_rabi
    half_span = waveform.truncation * sigma

    def rhs(t, y):
        c = y.reshape(S, K)
        om_half = 0.5 * peak * math.exp(-t * t / (2.0 * sigma * sigma))
        dc = diag * c
        dc[:, 1:] += om_half * c[:, :-1]
        dc[:, :-1] += om_half * c[:, 1:]
        return (-1j * dc).ravel()

    sol = solve_ivp(rhs, (-half_span, half_span), amplitudes0.ravel(),
                    method="DOP853", rtol=rtol, atol=1e-12)
    if not sol.success:
        raise IntegrationError(f"ladder integration failed: {sol.message}")
    out = sol.y[:, -1].reshape(S, K)
    norms = np.sum(np.abs(out) ** 2, axis=1)
    drift = np.max(np.abs(norms - 1.0))
    if drift > 1e-6:
        raise IntegrationError(f"norm drift {drift:.2e} exceeds 1e-6")
    return out / np.sqrt(norms)[:, None]


def propagate_pulse(state: MomentumLadderState, waveform: PulseWaveform,
                    config: InterferometerConfig,
                    doppler_offset: float = 0.0,
                    constants: PhysicalConstants | None = None,
                    rtol: float = 1e-9) -> MomentumLadderState:
    """Propagate one ladder state through one Gaussian Bragg pulse.

    doppler_offset is the residual two-photon detuning 2k * dv (rad/s) of
    this atom relative to the velocity the beat frequency is matched to.
    """
    constants = constants or rb87_constants()
    if state.max_order < config.bragg_order + 3:
        raise ValueError("ladder truncation must satisfy M >= n + 3")
    out = _propagate_batch(state.amplitudes[None, :], waveform,
                           config.bragg_order, constants.recoil_omega,
                           np.array([doppler_offset]), rtol=rtol)
    return MomentumLadderState(out[0], state.max_order, state.reference_momentum)


def transfer_probability(waveform: PulseWaveform, config: InterferometerConfig,
                         constants: PhysicalConstants | None = None,
                         doppler_offset: float = 0.0,
                         max_order: int = 5) -> float:
    """Population moved to |p0 + 2n hbar k> from rest by a single pulse."""
    constants = constants or rb87_constants()
    psi = MomentumLadderState.ground(max_order)
    out = propagate_pulse(psi, waveform, config, doppler_offset, constants)
    return out.population(config.bragg_order)


def calibrate_pi_pulse(sigma: float, config: InterferometerConfig,
                       constants: PhysicalConstants | None = None,
                       max_order: int = 5) -> PulseWaveform:
    """Find the peak Rabi frequency maximising single-atom transfer.

    In the quasi-Bragg regime the optimum sits a few percent above the
    two-level pulse-area estimate pi / (sigma * sqrt(2 pi)); the optimiser
    refines it to relative 1e-6.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    constants = constants or rb87_constants()
    guess = math.pi / (sigma * math.sqrt(2.0 * math.pi))

    def loss(peak):
        w = PulseWaveform(sigma=sigma, peak_rabi=peak)
        return -transfer_probability(w, config, constants, max_order=max_order)

    res = minimize_scalar(loss, bracket=(0.7 * guess, guess, 1.6 * guess),
                          method="brent", options={"xtol": 1e-6})
    if not res.success or -res.fun < 0.5:
        raise CalibrationError(
            f"pi-pulse calibration failed (best transfer {-res.fun:.3f})")
    return PulseWaveform(sigma=sigma, peak_rabi=float(res.x))


def diffraction_efficiency(waveform: PulseWaveform, momentum_width: float,
                           samples: int, config: InterferometerConfig | None = None,
                           constants: PhysicalConstants | None = None,
                           method: str = "quadrature",
                           rng: np.random.Generator | None = None) -> float:
    """Single-pulse transfer averaged over the vertical momentum spread.

    momentum_width is the full (2 sigma) spread in hbar*k units; an atom at
    momentum offset beta*hbar*k is Doppler-detuned by 4 * omega_r * beta.
    """
    if samples < 100:
        raise ValueError("need at least 100 momentum samples")
    if momentum_width < 0:
        raise ValueError("momentum_width must be non-negative")
    config = config or InterferometerConfig()
    constants = constants or rb87_constants()
    sigma_beta = momentum_width / 2.0

    if momentum_width == 0.0:
        return transfer_probability(waveform, config, constants)

    if method == "quadrature":
        # Gauss-Legendre against the Gaussian density; stable at any order
        # (Gauss-Hermite weight evaluation overflows beyond ~150 nodes) and
        # the +/-6 sigma truncation discards < 2e-9 of the distribution.
        nodes, weights = np.polynomial.legendre.leggauss(samples)
        x = 6.0 * nodes
        density = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        weights = 6.0 * weights * density
        weights = weights / np.sum(weights)
        betas = x * sigma_beta
    elif method == "mc":
        rng = rng or np.random.default_rng(0)
        betas = rng.normal(0.0, sigma_beta, samples)
        weights = np.full(samples, 1.0 / samples)
    else:
        raise ValueError(f"unknown averaging method {method!r}")

    max_order = max(5, config.bragg_order + 3)
    K = 2 * max_order + 1
    amps0 = np.zeros((len(betas), K), dtype=complex)
    amps0[:, max_order] = 1.0
    doppler = 4.0 * constants.recoil_omega * betas
    out = _propagate_batch(amps0, waveform, config.bragg_order,
                           constants.recoil_omega, doppler)
    transfer = np.abs(out[:, max_order + config.bragg_order]) ** 2
    return float(np.dot(weights, transfer))


# ---------------------------------------------------------------------------
# Structured-text serialisation (golden-file regression format)
# ---------------------------------------------------------------------------

def waveform_to_text(w: PulseWaveform) -> str:
    return (f"type = pulse_waveform\nshape = gaussian\n"
            f"sigma_s = {w.sigma!r}\npeak_rabi_rad_s = {w.peak_rabi!r}\n"
            f"truncation_sigmas = {w.truncation!r}\n")


def waveform_from_text(text: str) -> PulseWaveform:
    fields_ = _parse_kv(text)
    if fields_.get("type") != "pulse_waveform":
        raise ValueError("not a pulse_waveform record")
    return PulseWaveform(sigma=float(fields_["sigma_s"]),
                         peak_rabi=float(fields_["peak_rabi_rad_s"]),
                         truncation=float(fields_["truncation_sigmas"]))


def ladder_to_text(s: MomentumLadderState) -> str:
    buf = io.StringIO()
    buf.write("type = momentum_ladder\n")
    buf.write(f"max_order = {s.max_order}\n")
    buf.write(f"reference_momentum_kg_m_s = {s.reference_momentum!r}\n")
    for m, a in zip(s.orders, s.amplitudes):
        buf.write(f"amp {m:+d} = {float(a.real)!r} {float(a.imag)!r}\n")
    return buf.getvalue()


def ladder_from_text(text: str) -> MomentumLadderState:
    fields_ = _parse_kv(text)
    if fields_.get("type") != "momentum_ladder":
        raise ValueError("not a momentum_ladder record")
    max_order = int(fields_["max_order"])
    amps = np.zeros(2 * max_order + 1, dtype=complex)
    for key, value in fields_.items():
        if key.startswith("amp "):
            m = int(key.split()[1])
            re, im = (float(v) for v in value.split())
            amps[m + max_order] = re + 1j * im
    return MomentumLadderState(amps, max_order,
                               float(fields_["reference_momentum_kg_m_s"]))


def _parse_kv(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out
