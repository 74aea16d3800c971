"""Shot scheduling, long campaigns, differential analysis, and the budget.

The measurement alternates the two clock states on a fixed cadence: each
probability point costs two one-second shots, and the F=1 point always
trails the F=2 point by the alternation lag.  A 63 h run is then just a
long deterministic plan executed shot by shot with disjoint counter-based
random streams, followed by binning, weighted averaging, systematic
corrections, and the violation-parameter extraction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import (
    F1,
    F2,
    HyperfineState,
    InterferometerConfig,
    PhysicalConstants,
    ShotRecord,
    Trajectory,
    rb87_constants,
)
from .interferometer import (
    NoiseModel,
    SystematicsContext,
    probability_to_g,
    simulate_shot,
)
from .stats import weighted_mean
from .systematics import SystematicShift

log = logging.getLogger(__name__)


class Measurement(NamedTuple):
    """A value with a one-sigma uncertainty (dimensionless or g units)."""

    value: float
    uncertainty: float


# ---------------------------------------------------------------------------
# Scheduling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShotPlan:
    """Deterministic interleaved plan of probability points.

    Pair k starts at k * (2 * alternation_lag): the F=2 point at the pair
    start, the F=1 point one lag later; each point occupies two cycle-time
    shots (the two fixed Raman frequencies).
    """

    pair_starts: np.ndarray
    alternation_lag: float
    cycle_time: float

    @property
    def n_pairs(self) -> int:
        return len(self.pair_starts)

    def point_time(self, pair_index: int, state: HyperfineState) -> float:
        t = float(self.pair_starts[pair_index])
        return t if state.f_number == 2 else t + self.alternation_lag


def schedule_shots(duration: float, config: InterferometerConfig) -> ShotPlan:
    """Plan an alternating-state run of the given duration (s)."""
    pair_period = 2.0 * config.alternation_lag
    if duration < pair_period:
        raise ValueError(f"duration must be at least one pair period ({pair_period} s)")
    n_pairs = int(math.floor(duration / pair_period))
    starts = np.arange(n_pairs, dtype=float) * pair_period
    return ShotPlan(starts, config.alternation_lag, config.cycle_time)


# ---------------------------------------------------------------------------
# Campaign execution
# ---------------------------------------------------------------------------

def _point_stream(base: np.random.Philox, index: int) -> np.random.Generator:
    """Disjoint counter-based stream for one draw site.

    Streams are jumps of a shared Philox generator, so results do not depend
    on execution order and extending a run never changes earlier draws.
    """
    return np.random.Generator(base.jumped(index + 1))


def run_campaign(duration: float, config: InterferometerConfig,
                 noise: NoiseModel,
                 systematics: SystematicsContext | None = None,
                 seed: int = 12345,
                 constants: PhysicalConstants | None = None) -> list[ShotRecord]:
    """Execute the full plan and return the raw shot stream.

    Pair k draws its common vibration phase from stream 3k, the F=2 point
    from stream 3k+1 and the F=1 point from stream 3k+2.  Two records are
    emitted per probability point (roles peak1/peak2), both carrying the
    point's measured probability.
    """
    constants = constants or rb87_constants()
    systematics = systematics or SystematicsContext.off()
    plan = schedule_shots(duration, config)
    alpha = config.operating_alpha(constants)
    base = np.random.Philox(key=seed)

    records: list[ShotRecord] = []
    for k in range(plan.n_pairs):
        if noise.vibration_common > 0:
            vib = _point_stream(base, 3 * k).normal(0.0, noise.vibration_common)
        else:
            vib = 0.0
        for offset, state in ((1, F2), (2, F1)):
            t = plan.point_time(k, state)
            rec = simulate_shot(state, alpha, t, config, noise, systematics,
                                rng=_point_stream(base, 3 * k + offset),
                                constants=constants, common_phase=vib)
            records.append(rec)
            records.append(ShotRecord(timestamp=t + plan.cycle_time,
                                      state=state, alpha=alpha,
                                      probability=rec.probability,
                                      shot_role="peak2"))
    return records


# ---------------------------------------------------------------------------
# Differential analysis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BinnedSeries:
    """Per-bin accelerations: times are bin centres (s), g in m/s^2."""

    times: np.ndarray
    g_f1: np.ndarray
    g_f2: np.ndarray
    delta_g: np.ndarray          # m/s^2
    sigma_delta_g: np.ndarray    # m/s^2

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class SystematicBudget:
    """Machine-readable error budget.

    corrected_value = statistical value minus the sum of bias rows;
    corrected_uncertainty = root-sum-square of all row uncertainties.
    """

    rows: tuple
    corrected_value: float
    corrected_uncertainty: float


@dataclass(frozen=True)
class CampaignResult:
    binned_series: BinnedSeries
    delta_g_stat: Measurement            # units of g
    g_mean_f1: float                     # m/s^2, weighted campaign mean
    g_mean_f2: float                     # m/s^2
    n_dropped_bins: int = 0
    budget: SystematicBudget | None = None
    eta: Measurement | None = None
    k_tilde: Measurement | None = None
    r_diff: Measurement | None = None


def pair_differences(records, config: InterferometerConfig,
                     constants: PhysicalConstants | None = None):
    """Pairwise differential series: one Delta g sample per alternation pair.

    Probability points are matched into (F=2, F=1) pairs by their pair slot
    floor(t / (2 * lag)); pairs missing either member are dropped with a
    notice.  Returns (pair_times, g_f1, g_f2) in (s, m/s^2, m/s^2); the
    differential g_f1 - g_f2 cancels the pair-common vibration phase sample
    by sample, which is the point of the alternation scheme.
    """
    constants = constants or rb87_constants()
    pair_period = 2.0 * config.alternation_lag
    half_c = config.fringe_contrast / 2.0
    slots: dict[int, dict[int, tuple[float, float]]] = {}
    last_t = -math.inf
    alpha = None
    for rec in records:
        if rec.timestamp < last_t:
            raise ValueError("records must be time-ordered")
        last_t = rec.timestamp
        if rec.shot_role != "peak1":
            continue
        alpha = rec.alpha if alpha is None else alpha
        slot = int(math.floor(rec.timestamp / pair_period))
        slots.setdefault(slot, {})[rec.state.f_number] = (rec.timestamp,
                                                          rec.probability)

    times, p1, p2 = [], [], []
    for slot in sorted(slots):
        members = slots[slot]
        if len(members) < 2:
            log.info("pair slot %d dropped: single-state data", slot)
            continue
        times.append(members[2][0])
        p2.append(members[2][1])
        p1.append(members[1][1])
    if not times:
        raise ValueError("no complete alternation pairs in the records")

    def invert(probs):
        cos_phi = np.clip((config.fringe_offset - np.asarray(probs)) / half_c,
                          -1.0, 1.0)
        phi = np.arccos(cos_phi)
        return (phi / (config.bragg_order * config.T**2) + alpha) / config.k_eff

    return np.asarray(times), invert(p1), invert(p2)


def differential_analysis(records, bin_width: float,
                          config: InterferometerConfig,
                          constants: PhysicalConstants | None = None) -> CampaignResult:
    """Bin the record stream and form the per-bin differential acceleration.

    Probabilities are inverted into accelerations at the operating point;
    each bin averages its pairwise differences (standard error as the bin
    uncertainty) alongside the per-state means used for the tide tracking.
    Bins with fewer than two complete pairs are dropped with a notice.  The
    campaign statistic is the inverse-variance mean over bins.
    """
    constants = constants or rb87_constants()
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    times, g1, g2 = pair_differences(records, config, constants)
    n_bins = int(math.floor(times.max() / bin_width)) + 1
    if n_bins < 2:
        raise ValueError("records must span at least two bins")

    diff = g1 - g2
    rows = []
    dropped = 0
    for b in range(n_bins):
        lo, hi = b * bin_width, (b + 1) * bin_width
        sel = (times >= lo) & (times < hi)
        n = int(np.count_nonzero(sel))
        if n < 2:
            dropped += 1
            log.info("bin %d [%.0f, %.0f) s dropped: not enough pairs", b, lo, hi)
            continue
        d = diff[sel]
        rows.append((lo + bin_width / 2.0,
                     float(np.mean(g1[sel])), float(np.mean(g2[sel])),
                     float(np.mean(d)), float(np.std(d, ddof=1) / math.sqrt(n)),
                     float(np.std(g1[sel], ddof=1) / math.sqrt(n)),
                     float(np.std(g2[sel], ddof=1) / math.sqrt(n))))

    if len(rows) < 2:
        raise ValueError("fewer than two usable bins after dropping")
    arr = np.array(rows)
    binned = BinnedSeries(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4])

    def robust_mean(values, sigmas):
        # noiseless runs have zero in-bin scatter; the weighted mean then
        # degenerates to the plain mean with no statistical uncertainty
        if np.all(sigmas > 0):
            return weighted_mean(values, sigmas)
        return float(np.mean(values)), 0.0

    dg_mean, dg_sigma = robust_mean(binned.delta_g, binned.sigma_delta_g)
    g1_mean, _ = robust_mean(arr[:, 1], arr[:, 5])
    g2_mean, _ = robust_mean(arr[:, 2], arr[:, 6])
    stat = Measurement(dg_mean / constants.g_nominal,
                       dg_sigma / constants.g_nominal)
    return CampaignResult(binned_series=binned, delta_g_stat=stat,
                          g_mean_f1=g1_mean, g_mean_f2=g2_mean,
                          n_dropped_bins=dropped)


# ---------------------------------------------------------------------------
# Violation parameters and budget
# ---------------------------------------------------------------------------

def eotvos_ratio(g1: float, g2: float) -> float:
    """Normalised differential acceleration 2 (g1 - g2) / (g1 + g2)."""
    if g1 + g2 <= 0:
        raise ValueError("g1 + g2 must be positive")
    return 2.0 * (g1 - g2) / (g1 + g2)


def k_tilde_bound(eta):
    """Violation strength bound -eta/4.

    The spin-perpendicular coupling differs by |F_perp|^2 = 6 - 2 = 4
    between the two states, so the ratio maps directly onto the violation
    strength.  Accepts a float or a Measurement; uncertainties scale by 1/4.
    """
    if isinstance(eta, Measurement):
        return Measurement(-eta.value / 4.0, eta.uncertainty / 4.0)
    return -float(eta) / 4.0


def r_diff(eta):
    """Difference of the diagonal violation-operator terms: equal to eta."""
    if isinstance(eta, Measurement):
        return Measurement(eta.value, eta.uncertainty)
    return float(eta)


def assemble_budget(stat: SystematicShift, zeeman: SystematicShift,
                    ac_stark: SystematicShift, tide: SystematicShift) -> SystematicBudget:
    """Combine the four budget rows: subtract biases, RSS the uncertainties."""
    rows = (stat, zeeman, ac_stark, tide)
    corrected = stat.value - (zeeman.value + ac_stark.value + tide.value)
    uncertainty = math.sqrt(sum(r.uncertainty**2 for r in rows))
    return SystematicBudget(rows, corrected, uncertainty)


def analyze_campaign(records, config: InterferometerConfig,
                     bin_width: float = 400.0,
                     constants: PhysicalConstants | None = None,
                     zeeman: SystematicShift | None = None,
                     ac_stark: SystematicShift | None = None,
                     tide: SystematicShift | None = None) -> CampaignResult:
    """Full analysis chain: binning, budget assembly, eta / k-tilde / r_diff.

    The systematic rows default to zero; the caller passes the evaluated
    channel shifts (normally from the same models that were injected).
    """
    constants = constants or rb87_constants()
    base = differential_analysis(records, bin_width, config, constants)

    zero = lambda name: SystematicShift(name, 0.0, 0.0)
    zeeman = zeeman or zero("quadratic_zeeman")
    ac_stark = ac_stark or zero("ac_stark")
    tide = tide or zero("tide_alternation")

    eta_raw = eotvos_ratio(base.g_mean_f1, base.g_mean_f2)
    stat_row = SystematicShift("statistical", eta_raw, base.delta_g_stat.uncertainty)
    budget = assemble_budget(stat_row, zeeman, ac_stark, tide)
    eta = Measurement(budget.corrected_value, budget.corrected_uncertainty)
    return CampaignResult(
        binned_series=base.binned_series, delta_g_stat=base.delta_g_stat,
        g_mean_f1=base.g_mean_f1, g_mean_f2=base.g_mean_f2,
        n_dropped_bins=base.n_dropped_bins, budget=budget, eta=eta,
        k_tilde=k_tilde_bound(eta), r_diff=r_diff(eta))
