"""Flat namespaced run configuration.

Config files are plain ``key = value`` text with namespaced keys
(``interferometer.T_s = 0.150``).  Every key has a documented default,
unknown keys are rejected, and command-line flags override file values.
The accessors at the bottom turn a RunConfig into the domain objects the
simulation modules consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import InterferometerConfig, PhysicalConstants, rb87_constants


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_optional_float(text: str):
    t = text.strip().lower()
    if t in ("", "none", "auto"):
        return None
    return float(text)


# key -> (parser, default, documentation)
KEY_TABLE = {
    "seed": (int, 12345, "campaign RNG seed"),
    "output_dir": (str, "out", "directory for emitted files"),

    "gravity.g_nominal_mps2": (float, 9.794, "site gravity (m/s^2)"),

    "interferometer.T_s": (float, 0.150, "pulse separation time (s)"),
    "interferometer.bragg_order": (int, 1, "Bragg diffraction order n"),
    "interferometer.launch_velocity_mps": (float, 3.60, "fountain launch velocity (m/s)"),
    "interferometer.fountain_height_m": (float, 0.66, "total fountain height (m)"),
    "interferometer.momentum_width_hk": (float, 0.37, "full vertical momentum spread (hbar k)"),
    "interferometer.pi_pulse_fwhm_s": (float, 42e-6, "Gaussian pi-pulse FWHM (s)"),
    "interferometer.cycle_time_s": (float, 1.0, "single-shot cycle time (s)"),
    "interferometer.alternation_lag_s": (float, 2.0, "F=2 to F=1 point lag (s)"),
    "interferometer.fringe_contrast": (float, 0.40, "fringe contrast"),
    "interferometer.fringe_offset": (float, 0.50, "fringe offset"),
    "interferometer.chirp_alpha_rad_s2": (_parse_optional_float, None,
                                          "chirp rate; auto = mid-fringe point"),

    "bragg.total_power_w": (float, 0.080, "total Bragg beam power (W)"),
    "bragg.beam_diameter_m": (float, 0.019, "e^-2 beam diameter (m)"),
    "bragg.intensity_ratio": (float, 1.0, "beam 1 / beam 2 intensity ratio"),
    "bragg.ladder_orders": (int, 5, "momentum-ladder truncation M"),

    "noise.enabled": (_parse_bool, True, "enable stochastic noise"),
    "noise.target_sensitivity_g_rthz": (float, 1.2e-7,
                                        "differential white-noise level (g/rtHz)"),
    "noise.per_shot_phase_sigma_rad": (_parse_optional_float, None,
                                       "phase noise per point; auto = calibrated"),
    "noise.detection_sigma": (float, 0.003, "fluorescence sample noise"),
    "noise.vibration_common_rad": (float, 0.10, "pair-common vibration phase (rad)"),

    "systematics.zeeman_enabled": (_parse_bool, True, "apply the Zeeman channel"),
    "systematics.tide_enabled": (_parse_bool, True, "apply the tide channel"),
    "systematics.profile_file": (str, "", "magnetic profile file; empty = builtin"),
    "systematics.tide_file": (str, "", "tide constituent file; empty = builtin"),
    "systematics.nominal_current_a": (float, 0.100, "bias solenoid current (A)"),
    "systematics.bias_scale_t_per_a": (float, 9.0e-5, "solenoid field per current (T/A)"),
    "systematics.zeeman_uncertainty_g": (float, 0.5e-10,
                                         "assigned Zeeman row uncertainty (g)"),
    "systematics.ac_stark_gradient_fraction": (float, 3e-6,
                                               "arm intensity difference fraction"),
    "systematics.ac_stark_imbalance_fraction": (float, 1e-4,
                                                "pulse 1/3 intensity imbalance"),
    "systematics.tpls_freq_error_hz": (float, 1.0e6, "absolute detuning error (Hz)"),

    "violation.k_tilde": (float, 0.0, "injected violation strength"),

    "campaign.duration_hours": (float, 63.0, "campaign length (h)"),
    "campaign.bin_s": (float, 400.0, "analysis bin width (s)"),

    "fringe.points_per_period": (int, 20, "fringe points per period per state"),
    "fringe.periods": (int, 2, "fringe periods per scan"),
}


@dataclass
class RunConfig:
    """Validated flat key set; values carry their parsed types."""

    values: dict

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls({k: d for k, (_, d, _) in KEY_TABLE.items()})

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        cfg = cls.defaults()
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key = value")
                key, _, value = line.partition("=")
                cfg.set(key.strip(), value.strip())
        return cfg

    def set(self, key: str, raw_value: str):
        if key not in KEY_TABLE:
            raise ValueError(f"unknown configuration key {key!r}")
        parser = KEY_TABLE[key][0]
        try:
            self.values[key] = parser(raw_value)
        except ValueError as exc:
            raise ValueError(f"bad value for {key}: {raw_value!r} ({exc})") from exc

    def __getitem__(self, key: str):
        return self.values[key]

    def dump(self) -> str:
        lines = [f"{k} = {self.values[k]}" for k in sorted(self.values)]
        return "\n".join(lines) + "\n"

    # -- domain-object accessors -------------------------------------------

    def constants(self) -> PhysicalConstants:
        return rb87_constants(g_nominal=self["gravity.g_nominal_mps2"])

    def interferometer(self) -> InterferometerConfig:
        fwhm_to_sigma = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
        return InterferometerConfig(
            T=self["interferometer.T_s"],
            bragg_order=self["interferometer.bragg_order"],
            k_eff=self.constants().k_eff,
            chirp_alpha=self["interferometer.chirp_alpha_rad_s2"],
            launch_velocity=self["interferometer.launch_velocity_mps"],
            fountain_height=self["interferometer.fountain_height_m"],
            momentum_width=self["interferometer.momentum_width_hk"],
            pi_pulse_sigma=self["interferometer.pi_pulse_fwhm_s"] * fwhm_to_sigma,
            cycle_time=self["interferometer.cycle_time_s"],
            alternation_lag=self["interferometer.alternation_lag_s"],
            fringe_contrast=self["interferometer.fringe_contrast"],
            fringe_offset=self["interferometer.fringe_offset"],
        )

    def laser_field(self, detuning: float = 3.0e9):
        from .bragg import LaserField
        return LaserField.from_power(
            detuning=detuning,
            total_power=self["bragg.total_power_w"],
            beam_diameter=self["bragg.beam_diameter_m"],
            intensity_ratio=self["bragg.intensity_ratio"])

    def noise_model(self):
        from .interferometer import NoiseModel
        if not self["noise.enabled"]:
            return NoiseModel.off()
        sigma = self["noise.per_shot_phase_sigma_rad"]
        if sigma is None:
            return NoiseModel.calibrated(
                self.interferometer(), self.constants(),
                target_sensitivity=self["noise.target_sensitivity_g_rthz"],
                detection_sigma=self["noise.detection_sigma"],
                vibration_common=self["noise.vibration_common_rad"])
        return NoiseModel(sigma, self["noise.detection_sigma"],
                          self["noise.vibration_common_rad"])

    def magnetic_profile(self):
        from . import systematics as sy
        path = self["systematics.profile_file"]
        if path:
            return sy.MagneticProfile.from_file(
                path, bias_scale=self["systematics.bias_scale_t_per_a"],
                nominal_current=self["systematics.nominal_current_a"])
        return sy.default_profile()

    def tide_model(self):
        from . import systematics as sy
        path = self["systematics.tide_file"]
        return sy.load_tide_model(path) if path else sy.default_tide_model()

    def systematics_context(self):
        from .core import Trajectory
        from .interferometer import SystematicsContext
        from . import systematics as sy
        constants = self.constants()
        config = self.interferometer()
        bias_f1 = bias_f2 = 0.0
        if self["systematics.zeeman_enabled"]:
            profile = self.magnetic_profile()
            trajectory = Trajectory.from_config(config, constants)
            current = self["systematics.nominal_current_a"]
            from .core import F1, F2
            bias_f1 = sy.zeeman_bias(profile, trajectory, F1, config,
                                     constants, current=current)
            bias_f2 = sy.zeeman_bias(profile, trajectory, F2, config,
                                     constants, current=current)
        tide = self.tide_model() if self["systematics.tide_enabled"] else None
        return SystematicsContext(tide_model=tide, zeeman_bias_f1=bias_f1,
                                  zeeman_bias_f2=bias_f2,
                                  k_tilde=self["violation.k_tilde"])
