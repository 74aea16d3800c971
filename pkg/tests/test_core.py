"""Constants table, hyperfine states, configuration, and geometry."""

import math

import numpy as np
import pytest

from braggfall.core import (
    F1,
    F2,
    HyperfineState,
    InterferometerConfig,
    ShotRecord,
    Trajectory,
    rb87_constants,
    spin_perp_amplitude,
)


class TestConstants:
    def test_recoil_frequency_hand_calculation(self):
        # independent arithmetic from first principles, typed out explicitly
        hbar = 1.054571817e-34
        mass = 1.44316060e-25
        k = 2.0 * math.pi / 780.241e-9
        f_recoil = hbar * k * k / (2.0 * mass) / (2.0 * math.pi)
        assert f_recoil == pytest.approx(3.771e3, rel=2e-4)
        c = rb87_constants()
        assert c.recoil_omega / (2 * math.pi) == pytest.approx(f_recoil, rel=1e-12)

    def test_four_recoil_is_two_photon_resonance_scale(self):
        c = rb87_constants()
        assert 4 * c.recoil_omega / (2 * math.pi) == pytest.approx(15.1e3, rel=5e-3)

    def test_hyperfine_splitting_positive(self):
        assert rb87_constants().hyperfine_splitting > 0

    def test_recoil_invariant_recomputes(self):
        c = rb87_constants()
        recomputed = c.hbar * c.wavenumber**2 / (2.0 * c.atom_mass)
        assert abs(recomputed - c.recoil_omega) / c.recoil_omega < 1e-12

    def test_all_entries_positive(self):
        c = rb87_constants()
        assert min(c.hbar, c.atom_mass, c.wavelength, c.g_nominal,
                   c.hyperfine_splitting, c.clock_quadratic_coeff) > 0

    def test_positive_validation(self):
        with pytest.raises(ValueError):
            rb87_constants(g_nominal=-1.0)

    def test_reference_line_is_f2_to_fprime3(self):
        c = rb87_constants()
        assert c.line_offset(2, 3) == 0.0
        # manifold gap: hand-combined hyperfine offsets
        gap = (-302.0738e6 + 0.625 * 6.834682610904e9) \
            - (193.7407e6 - 0.375 * 6.834682610904e9)
        assert c.line_offset(1, 0) == pytest.approx(gap, abs=1.0)

    def test_gravity_override(self):
        assert rb87_constants(g_nominal=9.81).g_nominal == 9.81
        assert rb87_constants().with_gravity(9.80).g_nominal == 9.80


class TestHyperfineStates:
    def test_spin_perp_values(self):
        assert spin_perp_amplitude(1) == 2.0
        assert spin_perp_amplitude(2) == 6.0

    def test_spin_perp_difference(self):
        assert spin_perp_amplitude(2) - spin_perp_amplitude(1) == 4.0

    @pytest.mark.parametrize("bad", [0, 3, -1])
    def test_spin_perp_rejects(self, bad):
        with pytest.raises(ValueError):
            spin_perp_amplitude(bad)

    def test_zeeman_signs_flip(self):
        assert F1.zeeman_sign == -1
        assert F2.zeeman_sign == +1

    def test_states_match_f_f_plus_one(self):
        for state in (F1, F2):
            f = state.f_number
            assert state.spin_perp_sq == f * (f + 1)
            assert state.m_f == 0

    def test_rejects_nonclock(self):
        with pytest.raises(ValueError):
            HyperfineState(3)
        with pytest.raises(ValueError):
            HyperfineState(1, m_f=1)


class TestConfig:
    def test_defaults_valid(self):
        cfg = InterferometerConfig()
        assert cfg.T == 0.150
        assert cfg.bragg_order == 1

    def test_scale_factor_hand_calculation(self):
        cfg = InterferometerConfig()
        expected = 1 * (2 * 2.0 * math.pi / 780.241e-9) * 0.15**2
        assert cfg.scale_factor == pytest.approx(expected, rel=1e-12)
        assert cfg.scale_factor == pytest.approx(3.62e5, rel=1e-2)

    def test_lag_must_cover_cycle(self):
        with pytest.raises(ValueError):
            InterferometerConfig(alternation_lag=0.5, cycle_time=1.0)

    def test_fringe_range_validated(self):
        with pytest.raises(ValueError):
            InterferometerConfig(fringe_contrast=0.9, fringe_offset=0.4)

    def test_operating_alpha_sits_mid_fringe(self):
        from braggfall.interferometer import mz_phase
        cfg = InterferometerConfig()
        c = rb87_constants()
        alpha = cfg.operating_alpha(c)
        assert mz_phase(c.g_nominal, alpha, cfg) == pytest.approx(math.pi / 2, abs=1e-9)

    def test_explicit_alpha_wins(self):
        cfg = InterferometerConfig(chirp_alpha=1.0)
        assert cfg.operating_alpha(rb87_constants()) == 1.0


class TestTrajectory:
    def setup_method(self):
        self.cfg = InterferometerConfig()
        self.c = rb87_constants()
        self.traj = Trajectory.from_config(self.cfg, self.c)

    def test_closes_at_start_and_end(self):
        assert self.traj.arm_separation(0.0) == 0.0
        assert self.traj.arm_separation(2 * self.cfg.T) == pytest.approx(0.0, abs=1e-18)

    def test_max_separation_independent_arithmetic(self):
        # 2 hbar k T / m for first order, done by hand
        expected = (2.0 * 1.054571817e-34 * (2 * math.pi / 780.241e-9)
                    / 1.44316060e-25) * 0.15
        assert expected == pytest.approx(1.77e-3, rel=0.01)
        assert self.traj.max_separation == pytest.approx(expected, rel=1e-9)
        assert self.traj.arm_separation(self.cfg.T) == pytest.approx(expected, rel=1e-9)

    def test_upper_arm_above_lower(self):
        tau = np.linspace(0.0, 2 * self.cfg.T, 101)
        assert np.all(self.traj.z_upper(tau) >= self.traj.z_lower(tau))

    def test_apex_centred(self):
        # mirror pulse fires at the ballistic turning point
        t_apex = self.cfg.launch_velocity / self.c.g_nominal
        assert self.traj.pulse_start + self.cfg.T == pytest.approx(t_apex, rel=1e-12)

    def test_stays_below_fountain_height(self):
        tau = np.linspace(0.0, 2 * self.cfg.T, 101)
        assert np.max(self.traj.z_upper(tau)) < self.cfg.fountain_height + 0.01


class TestShotRecord:
    def test_probability_validated(self):
        with pytest.raises(ValueError):
            ShotRecord(0.0, F1, 0.0, 1.2)

    def test_role_validated(self):
        with pytest.raises(ValueError):
            ShotRecord(0.0, F1, 0.0, 0.5, shot_role="peak3")
