"""Shared physical constants, hyperfine-state vocabulary, and geometry.

Everything downstream (pulse dynamics, fringe model, systematics, campaign
statistics) pulls its numbers from the single frozen table defined here, so
there is exactly one place where the atomic data can be wrong.

Unit conventions: SI throughout.  Frequencies are Hz when the name says so,
angular frequencies (rad/s) otherwise.  Magnetic fields are tesla.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace


class BraggfallError(Exception):
    """Base class for all package-specific failures."""


class ResonanceError(BraggfallError):
    """Laser detuning sits on top of an excited-state hyperfine line."""


class NoSolutionError(BraggfallError):
    """A bracketed root search found no sign change."""


class IntegrationError(BraggfallError):
    """Numerical propagation violated its accuracy contract."""


class CalibrationError(BraggfallError):
    """Pulse-amplitude optimisation failed to converge."""


class FitError(BraggfallError):
    """Least-squares fringe fit could not be performed."""


class UnconstrainedPhaseError(FitError):
    """Fringe fit with (near-)zero contrast: the phase is undetermined."""


class ProfileDomainError(BraggfallError):
    """Trajectory leaves the sampled magnetic-profile domain."""


# ---------------------------------------------------------------------------
# Hyperfine clock states
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HyperfineState:
    """One of the two magnetically insensitive 5S_1/2 clock states.

    zeeman_sign is the sign of the state's quadratic Zeeman energy shift
    (F=1 shifts down, F=2 up, each by half the clock-transition shift).
    spin_perp_sq is |F_perp|^2 = F(F+1) for m_F = 0, the coupling strength
    of the hypothesised spin-perpendicular free-fall violation.
    """

    f_number: int
    m_f: int = 0
    zeeman_sign: int = 0
    spin_perp_sq: float = 0.0

    def __post_init__(self):
        if self.f_number not in (1, 2):
            raise ValueError(f"F must be 1 or 2, got {self.f_number}")
        if self.m_f != 0:
            raise ValueError("only m_F = 0 clock states are modelled")
        object.__setattr__(self, "zeeman_sign", -1 if self.f_number == 1 else +1)
        object.__setattr__(self, "spin_perp_sq", float(spin_perp_amplitude(self.f_number)))

    @property
    def label(self) -> str:
        return f"F={self.f_number}"


def spin_perp_amplitude(f_number: int) -> float:
    """Squared horizontal spin projection |F_perp|^2 = F(F+1) for m_F = 0."""
    if f_number not in (1, 2):
        raise ValueError(f"F must be 1 or 2, got {f_number}")
    return float(f_number * (f_number + 1))


F1 = HyperfineState(1)
F2 = HyperfineState(2)


# ---------------------------------------------------------------------------
# Constants table
# ---------------------------------------------------------------------------

# Relative two-photon path weights |<F', m'=+/-1| d_sigma |F, m=0>|^2 summed per
# excited level, in units of the reduced 5S->5P_3/2 dipole element squared.
# Computed from 3j/6j algebra for J=1/2 -> J'=3/2, I=3/2 (sigma-polarised
# beams along the quantisation axis; F'=0 is unreachable from m=0).
# A unit test re-derives these from Wigner symbols.
_SIGMA_PATH_WEIGHTS = {
    (1, 0): 0.0,
    (1, 1): 5.0 / 12.0,
    (1, 2): 1.0 / 4.0,
    (2, 1): 1.0 / 60.0,
    (2, 2): 1.0 / 4.0,
    (2, 3): 2.0 / 5.0,
}


@dataclass(frozen=True)
class PhysicalConstants:
    """Frozen 87Rb D2 data plus site gravity.

    excited_splittings holds the 5P_3/2 hyperfine level offsets from the
    excited-state centroid; single-photon detunings are referenced to the
    F=2 -> F'=3 transition (see ``line_offset``).
    """

    hbar: float = 1.054571817e-34            # J s
    atom_mass: float = 1.44316060e-25        # kg
    wavelength: float = 780.241e-9           # m
    g_nominal: float = 9.794                 # m/s^2, configurable site value
    hyperfine_splitting: float = 6.834682610904e9   # Hz, 5S_1/2 F=1 <-> F=2
    excited_splittings: dict = field(default_factory=lambda: {
        0: -302.0738e6, 1: -229.8518e6, 2: -72.9112e6, 3: +193.7407e6,
    })                                       # Hz from 5P_3/2 centroid
    clock_quadratic_coeff: float = 5.7515e10  # Hz/T^2 (= 575.15 Hz/G^2)
    excited_couplings: dict = field(default_factory=lambda: dict(_SIGMA_PATH_WEIGHTS))

    def __post_init__(self):
        for name in ("hbar", "atom_mass", "wavelength", "g_nominal",
                     "hyperfine_splitting", "clock_quadratic_coeff"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    # -- derived quantities -------------------------------------------------

    @property
    def wavenumber(self) -> float:
        """Single-beam wavenumber k = 2 pi / lambda (1/m)."""
        return 2.0 * math.pi / self.wavelength

    @property
    def recoil_omega(self) -> float:
        """Single-photon recoil angular frequency hbar k^2 / 2m (rad/s)."""
        k = self.wavenumber
        return self.hbar * k * k / (2.0 * self.atom_mass)

    @property
    def k_eff(self) -> float:
        """Effective two-photon wavevector 2k (1/m)."""
        return 2.0 * self.wavenumber

    @property
    def recoil_velocity(self) -> float:
        """hbar k / m (m/s)."""
        return self.hbar * self.wavenumber / self.atom_mass

    def ground_offset(self, f_number: int) -> float:
        """5S_1/2 hyperfine level offset from the ground centroid (Hz)."""
        if f_number == 1:
            return -0.625 * self.hyperfine_splitting
        if f_number == 2:
            return +0.375 * self.hyperfine_splitting
        raise ValueError(f"F must be 1 or 2, got {f_number}")

    def line_offset(self, f_number: int, f_excited: int) -> float:
        """Offset of the F -> F' transition from the F=2 -> F'=3 reference (Hz).

        A laser with single-photon detuning ``delta`` (Hz above the reference
        line) is detuned by ``delta - line_offset(F, F')`` from F -> F'.
        """
        ref = self.excited_splittings[3] - self.ground_offset(2)
        return (self.excited_splittings[f_excited] - self.ground_offset(f_number)) - ref

    def with_gravity(self, g_nominal: float) -> "PhysicalConstants":
        return replace(self, g_nominal=g_nominal)


def rb87_constants(g_nominal: float = 9.794) -> PhysicalConstants:
    """The authoritative 87Rb constants table used across the package."""
    return PhysicalConstants(g_nominal=g_nominal)


# ---------------------------------------------------------------------------
# Interferometer configuration & geometry
# ---------------------------------------------------------------------------

_FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))  # 1/2.3548


@dataclass(frozen=True)
class InterferometerConfig:
    """Mach-Zehnder sequence parameters.

    pi_pulse_sigma is the Gaussian width parameter of the pi-pulse Rabi
    envelope; the quoted 42 us "width" is taken as the envelope FWHM, so
    sigma = 42 us / 2.3548.  momentum_width is the full (2 sigma) vertical
    momentum spread of the velocity-selected cloud in units of hbar*k.
    """

    T: float = 0.150                      # s, pulse separation
    bragg_order: int = 1
    k_eff: float = rb87_constants().k_eff  # 1/m
    chirp_alpha: float | None = None      # rad/s^2; None = mid-fringe operating point
    launch_velocity: float = 3.60         # m/s
    fountain_height: float = 0.66         # m
    momentum_width: float = 0.37          # hbar*k units, full 2-sigma spread
    pi_pulse_sigma: float = 42e-6 * _FWHM_TO_SIGMA   # s
    cycle_time: float = 1.0               # s per physical shot
    alternation_lag: float = 2.0          # s between F=2 and F=1 points
    fringe_contrast: float = 0.40
    fringe_offset: float = 0.50

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("T must be positive")
        if self.bragg_order < 1:
            raise ValueError("bragg_order must be >= 1")
        if self.momentum_width <= 0:
            raise ValueError("momentum_width must be positive")
        if self.alternation_lag < self.cycle_time:
            raise ValueError("alternation_lag must be >= cycle_time")
        lo = self.fringe_offset - self.fringe_contrast / 2.0
        hi = self.fringe_offset + self.fringe_contrast / 2.0
        if lo < 0.0 or hi > 1.0:
            raise ValueError("fringe offset +/- contrast/2 must stay within [0, 1]")

    @property
    def scale_factor(self) -> float:
        """Phase per unit acceleration, n * k_eff * T^2 (rad per m/s^2)."""
        return self.bragg_order * self.k_eff * self.T**2

    def operating_alpha(self, constants: PhysicalConstants) -> float:
        """Chirp rate actually used: configured value or mid-fringe default.

        The mid-fringe point puts the nominal phase at +pi/2 where the fringe
        slope is maximal and the arccos inversion is single-valued.
        """
        if self.chirp_alpha is not None:
            return self.chirp_alpha
        return self.k_eff * constants.g_nominal - (0.5 * math.pi) / (self.bragg_order * self.T**2)


@dataclass(frozen=True)
class Trajectory:
    """Two-arm vertical geometry of one Mach-Zehnder sequence.

    Times are measured from the first beam-splitter pulse; z is the fountain
    coordinate (m above the launch point).  The lower arm is the undiffracted
    ballistic path; the upper arm carries the extra 2n*hbar*k of momentum
    between the first and second pulses, and the roles swap at the mirror
    pulse, closing the diamond at 2T.
    """

    launch_velocity: float      # m/s at launch
    g: float                    # m/s^2
    pulse_start: float          # s after launch of the first pulse
    T: float                    # s
    kick_velocity: float        # 2n hbar k / m (m/s)

    @classmethod
    def from_config(cls, config: InterferometerConfig,
                    constants: PhysicalConstants) -> "Trajectory":
        """Apex-centred sequence: the mirror pulse fires at the turning point."""
        t_apex = config.launch_velocity / constants.g_nominal
        vk = 2.0 * config.bragg_order * constants.hbar * constants.wavenumber / constants.atom_mass
        return cls(launch_velocity=config.launch_velocity, g=constants.g_nominal,
                   pulse_start=t_apex - config.T, T=config.T, kick_velocity=vk)

    def z_lower(self, tau):
        """Lower-arm height at time tau in [0, 2T] after the first pulse (m)."""
        t = self.pulse_start + tau
        return self.launch_velocity * t - 0.5 * self.g * t * t

    def arm_separation(self, tau):
        """Vertical arm separation (m); triangular, peaking at tau = T."""
        import numpy as np
        tau = np.asarray(tau, dtype=float)
        sep = self.kick_velocity * np.minimum(tau, 2.0 * self.T - tau)
        return np.clip(sep, 0.0, None)

    def z_upper(self, tau):
        return self.z_lower(tau) + self.arm_separation(tau)

    @property
    def max_separation(self) -> float:
        return self.kick_velocity * self.T


# ---------------------------------------------------------------------------
# Shot records (shared detection vocabulary)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShotRecord:
    """One detection shot: a fluorescence sample at one fixed Raman frequency.

    Two shots (roles ``peak1`` and ``peak2``) form one probability point;
    both rows carry the combined measured transition probability.
    """

    timestamp: float            # s from run start
    state: HyperfineState
    alpha: float                # rad/s^2 chirp setting
    probability: float          # measured P(|p0 + 2n hbar k>)
    shot_role: str = "peak1"    # "peak1" | "peak2"

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("probability must lie in [0, 1]")
        if self.shot_role not in ("peak1", "peak2"):
            raise ValueError(f"unknown shot_role {self.shot_role!r}")
