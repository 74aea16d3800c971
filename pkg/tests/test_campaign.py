"""Scheduling, campaign execution, differential analysis, and the budget."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from braggfall import campaign as cp
from braggfall import systematics as sy
from braggfall.core import F1, F2, InterferometerConfig, Trajectory, rb87_constants
from braggfall.interferometer import NoiseModel, SystematicsContext

CONSTANTS = rb87_constants()
CONFIG = InterferometerConfig()


class TestScheduling:
    def test_160_seconds_is_one_two_period_fringe_per_state(self):
        plan = cp.schedule_shots(160.0, CONFIG)
        assert plan.n_pairs == 40    # 20 points/period x 2 periods per state

    def test_63_hours_pair_count(self):
        plan = cp.schedule_shots(63 * 3600.0, CONFIG)
        assert plan.n_pairs == 63 * 3600 // 4

    def test_deterministic(self):
        a = cp.schedule_shots(1000.0, CONFIG)
        b = cp.schedule_shots(1000.0, CONFIG)
        np.testing.assert_array_equal(a.pair_starts, b.pair_starts)

    def test_states_two_seconds_apart(self):
        plan = cp.schedule_shots(100.0, CONFIG)
        assert plan.point_time(3, F1) - plan.point_time(3, F2) == 2.0

    def test_minimum_duration(self):
        with pytest.raises(ValueError):
            cp.schedule_shots(3.0, CONFIG)


class TestRunCampaign:
    def test_record_stream_structure(self):
        noise = NoiseModel.off()
        records = cp.run_campaign(16.0, CONFIG, noise, None, seed=1,
                                  constants=CONSTANTS)
        assert len(records) == 16            # 4 pairs x 2 states x 2 shots
        assert [r.state.f_number for r in records[:4]] == [2, 2, 1, 1]
        assert [r.shot_role for r in records[:4]] == ["peak1", "peak2"] * 2
        times = [r.timestamp for r in records]
        assert times == sorted(times)

    def test_same_seed_identical(self):
        noise = NoiseModel.calibrated(CONFIG, CONSTANTS)
        a = cp.run_campaign(200.0, CONFIG, noise, None, seed=5, constants=CONSTANTS)
        b = cp.run_campaign(200.0, CONFIG, noise, None, seed=5, constants=CONSTANTS)
        assert a == b

    def test_different_seed_differs(self):
        noise = NoiseModel.calibrated(CONFIG, CONSTANTS)
        a = cp.run_campaign(200.0, CONFIG, noise, None, seed=5, constants=CONSTANTS)
        b = cp.run_campaign(200.0, CONFIG, noise, None, seed=6, constants=CONSTANTS)
        assert a != b

    def test_extending_run_preserves_prefix(self):
        noise = NoiseModel.calibrated(CONFIG, CONSTANTS)
        short = cp.run_campaign(100.0, CONFIG, noise, None, seed=3,
                                constants=CONSTANTS)
        long = cp.run_campaign(200.0, CONFIG, noise, None, seed=3,
                               constants=CONSTANTS)
        assert long[:len(short)] == short


class TestDifferentialAnalysis:
    def test_noise_and_systematics_off_gives_exact_zero(self):
        records = cp.run_campaign(3600.0, CONFIG, NoiseModel.off(), None,
                                  seed=1, constants=CONSTANTS)
        result = cp.differential_analysis(records, 400.0, CONFIG, CONSTANTS)
        assert np.all(result.binned_series.delta_g == 0.0)
        assert result.delta_g_stat.value == 0.0

    def test_tide_common_mode_cancels_to_lag_effect(self):
        """Tides move both states; only the 2 s lag survives in Delta g."""
        model = sy.default_tide_model()
        ctx = SystematicsContext(tide_model=model)
        records = cp.run_campaign(4 * 3600.0, CONFIG, NoiseModel.off(), ctx,
                                  seed=1, constants=CONSTANTS)
        times, g1, g2 = cp.pair_differences(records, CONFIG, CONSTANTS)
        lag_prediction = (sy.tide_g(times + CONFIG.alternation_lag, model)
                          - sy.tide_g(times, model))
        residual = (g1 - g2) - lag_prediction
        assert np.max(np.abs(residual)) / CONSTANTS.g_nominal < 1e-12

    def test_bin_count_for_one_hour(self):
        records = cp.run_campaign(3600.0, CONFIG, NoiseModel.off(), None,
                                  seed=1, constants=CONSTANTS)
        result = cp.differential_analysis(records, 400.0, CONFIG, CONSTANTS)
        assert len(result.binned_series) == 9

    def test_incomplete_pairs_dropped_with_notice(self):
        records = cp.run_campaign(2000.0, CONFIG, NoiseModel.off(), None,
                                  seed=1, constants=CONSTANTS)
        # strip every F=1 record in one 400 s window
        filtered = [r for r in records
                    if not (r.state.f_number == 1 and 800 <= r.timestamp < 1200)]
        result = cp.differential_analysis(filtered, 400.0, CONFIG, CONSTANTS)
        assert result.n_dropped_bins == 1

    def test_unordered_records_rejected(self):
        records = cp.run_campaign(100.0, CONFIG, NoiseModel.off(), None,
                                  seed=1, constants=CONSTANTS)
        with pytest.raises(ValueError):
            cp.differential_analysis(list(reversed(records)), 10.0, CONFIG,
                                     CONSTANTS)

    def test_repartitioned_binning_consistent(self):
        noise = NoiseModel.calibrated(CONFIG, CONSTANTS)
        records = cp.run_campaign(4 * 3600.0, CONFIG, noise, None, seed=17,
                                  constants=CONSTANTS)
        r400 = cp.differential_analysis(records, 400.0, CONFIG, CONSTANTS)
        r200 = cp.differential_analysis(records, 200.0, CONFIG, CONSTANTS)
        diff = abs(r400.delta_g_stat.value - r200.delta_g_stat.value)
        assert diff < 0.3 * r400.delta_g_stat.uncertainty


class TestViolationParameters:
    def test_eotvos_null(self):
        assert cp.eotvos_ratio(9.794, 9.794) == 0.0

    def test_eotvos_needs_positive_sum(self):
        with pytest.raises(ValueError):
            cp.eotvos_ratio(-5.0, 5.0)

    @given(st.floats(9.0, 10.0), st.floats(9.0, 10.0))
    @settings(max_examples=100, deadline=None)
    def test_eotvos_antisymmetric(self, g1, g2):
        assert cp.eotvos_ratio(g1, g2) == pytest.approx(
            -cp.eotvos_ratio(g2, g1), abs=1e-18)

    def test_k_tilde_quarter_rule(self):
        assert cp.k_tilde_bound(0.0) == 0.0
        assert cp.k_tilde_bound(0.9e-10) == pytest.approx(-0.225e-10, rel=1e-12)
        m = cp.k_tilde_bound(cp.Measurement(0.9e-10, 2.7e-10))
        assert m.value == pytest.approx(-0.225e-10)
        assert m.uncertainty == pytest.approx(0.675e-10)
        # rounds to the reported (-0.2 +/- 0.7) x 1e-10
        assert round(m.value / 1e-10, 1) == -0.2
        assert round(m.uncertainty / 1e-10, 1) == 0.7

    def test_r_diff_is_identity(self):
        m = cp.r_diff(cp.Measurement(0.9e-10, 2.7e-10))
        assert (m.value, m.uncertainty) == (0.9e-10, 2.7e-10)
        assert cp.r_diff(0.0) == 0.0


class TestBudget:
    @staticmethod
    def table_rows():
        return (sy.SystematicShift("statistical", -1.2e-10, 2.6e-10),
                sy.SystematicShift("quadratic_zeeman", -2.1e-10, 0.5e-10),
                sy.SystematicShift("ac_stark", 0.0, 0.2e-10),
                sy.SystematicShift("tide_alternation", 0.0, 0.03e-10))

    def test_reported_correction(self):
        budget = cp.assemble_budget(*self.table_rows())
        assert budget.corrected_value == pytest.approx(0.9e-10, rel=1e-12)
        # independent RSS arithmetic
        rss = math.sqrt(2.6**2 + 0.5**2 + 0.2**2 + 0.03**2) * 1e-10
        assert budget.corrected_uncertainty == pytest.approx(rss, rel=1e-12)
        # the quoted 2.7 is the RSS after rounding to one decimal
        assert abs(budget.corrected_uncertainty - 2.7e-10) < 0.05e-10

    def test_all_zero_rows(self):
        zero = sy.SystematicShift("x", 0.0, 0.0)
        budget = cp.assemble_budget(zero, zero, zero, zero)
        assert budget.corrected_value == 0.0
        assert budget.corrected_uncertainty == 0.0

    def test_correction_is_subtraction(self):
        budget = cp.assemble_budget(*self.table_rows())
        stat, *biases = budget.rows
        assert budget.corrected_value == stat.value - sum(b.value for b in biases)


class TestEndToEnd:
    def run(self, hours, seed, **ctx_kwargs):
        noise = NoiseModel.calibrated(CONFIG, CONSTANTS)
        ctx = SystematicsContext(**ctx_kwargs)
        records = cp.run_campaign(hours * 3600.0, CONFIG, noise, ctx,
                                  seed=seed, constants=CONSTANTS)
        return records

    def test_violation_recovery_small_strength(self):
        k0 = 1e-9
        records = self.run(4.0, 21, k_tilde=k0)
        result = cp.analyze_campaign(records, CONFIG, constants=CONSTANTS)
        assert abs(result.k_tilde.value - k0) < 3 * result.k_tilde.uncertainty

    def test_violation_recovery_larger_strength(self):
        k0 = 1e-8
        records = self.run(4.0, 22, k_tilde=k0)
        result = cp.analyze_campaign(records, CONFIG, constants=CONSTANTS)
        assert abs(result.k_tilde.value - k0) < 3 * result.k_tilde.uncertainty
        # the identity k = -eta/4 holds exactly through the chain
        assert result.k_tilde.value == -result.eta.value / 4.0

    def test_zeeman_injection_corrects_back(self):
        """Inject a 50x Zeeman bias, correct with the same channel model."""
        traj = Trajectory.from_config(CONFIG, CONSTANTS)
        prof = sy._synthetic_profile(50 * sy._DEFAULT_BUMP_AMPLITUDE)
        b1 = sy.zeeman_bias(prof, traj, F1, CONFIG, CONSTANTS)
        b2 = sy.zeeman_bias(prof, traj, F2, CONFIG, CONSTANTS)
        records = self.run(2.0, 23, zeeman_bias_f1=b1, zeeman_bias_f2=b2)
        row = sy.SystematicShift("quadratic_zeeman", b1 - b2, 0.5e-10)
        result = cp.analyze_campaign(records, CONFIG, constants=CONSTANTS,
                                     zeeman=row)
        assert abs(b1 - b2) > 5 * result.eta.uncertainty   # injection is big
        assert abs(result.eta.value) < 2 * result.eta.uncertainty

    def test_result_invariant_corrected_eta_consistency(self):
        records = self.run(2.0, 24)
        result = cp.analyze_campaign(records, CONFIG, constants=CONSTANTS)
        stat = result.budget.rows[0]
        recon = stat.value - sum(r.value for r in result.budget.rows[1:])
        assert abs(recon - result.eta.value) <= 1e-15
