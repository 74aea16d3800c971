"""Doppler-sensitive Raman detection, fringe fitting, and stability statistics.

The two momentum classes leaving the interferometer overlap spatially, so
populations are read out spectroscopically: two fluorescence samples at two
fixed Raman frequencies, one per Doppler peak.  The estimators here stay
deliberately close to what the instrument does - amplitude-ratio population
readout, fixed-period sine fringe fits, overlapping Allan deviation, and
inverse-variance averaging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    FitError,
    InterferometerConfig,
    PhysicalConstants,
    UnconstrainedPhaseError,
    rb87_constants,
)


# ---------------------------------------------------------------------------
# Raman momentum-state readout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RamanSpectrum:
    """Fluorescence response versus Raman frequency offset.

    Offsets are angular frequencies relative to the hyperfine splitting;
    the two peaks sit 8 * omega_r apart (the Doppler shift of a 2 hbar k
    momentum difference on a counter-propagating Raman transition).
    """

    frequency_offsets: np.ndarray   # rad/s
    responses: np.ndarray           # arbitrary units, >= 0
    linewidth: float                # rad/s, Gaussian sigma of each peak
    peak_positions: tuple           # (offset_p0, offset_p2) rad/s

    def __post_init__(self):
        if np.any(np.asarray(self.responses) < 0):
            raise ValueError("responses must be non-negative")


def doppler_peak_separation(constants: PhysicalConstants | None = None) -> float:
    """Raman-spectrum separation of |p0> and |p0 + 2 hbar k|: 8 omega_r (rad/s)."""
    constants = constants or rb87_constants()
    return 8.0 * constants.recoil_omega


def simulate_raman_spectrum(pop_p0: float, pop_p2: float,
                            constants: PhysicalConstants | None = None,
                            linewidth: float = 2.0 * math.pi * 300.0,
                            points: int = 801) -> RamanSpectrum:
    """Two Gaussian peaks with amplitudes proportional to the populations."""
    if pop_p0 < 0 or pop_p2 < 0 or pop_p0 + pop_p2 > 1.0 + 1e-12:
        raise ValueError("populations must be non-negative with sum <= 1")
    constants = constants or rb87_constants()
    sep = doppler_peak_separation(constants)
    offsets = np.linspace(-4.0 * linewidth, sep + 4.0 * linewidth, points)
    resp = (pop_p0 * np.exp(-(offsets**2) / (2.0 * linewidth**2))
            + pop_p2 * np.exp(-((offsets - sep) ** 2) / (2.0 * linewidth**2)))
    return RamanSpectrum(offsets, resp, linewidth, (0.0, sep))


def sample_peaks(pop_p0: float, pop_p2: float,
                 constants: PhysicalConstants | None = None,
                 linewidth: float = 2.0 * math.pi * 300.0) -> tuple[float, float]:
    """Responses at the two fixed Raman frequencies (the two peak centres).

    Includes the (exponentially small) cross-talk of each peak at the other
    peak's position.
    """
    constants = constants or rb87_constants()
    sep = doppler_peak_separation(constants)
    cross = math.exp(-(sep**2) / (2.0 * linewidth**2))
    r1 = pop_p0 + pop_p2 * cross
    r2 = pop_p2 + pop_p0 * cross
    return r1, r2


def population_from_two_samples(response_at_peak1: float,
                                response_at_peak2: float) -> float:
    """Amplitude-ratio estimate of P(|p0 + 2n hbar k>)."""
    if response_at_peak1 < 0 or response_at_peak2 < 0:
        raise ValueError("responses must be non-negative")
    total = response_at_peak1 + response_at_peak2
    if total == 0.0:
        raise FitError("both Raman samples are zero: probability undefined")
    return response_at_peak2 / total


# ---------------------------------------------------------------------------
# Fringe fitting
# ---------------------------------------------------------------------------

def sine_fringe_fit(points, config: InterferometerConfig,
                    constants: PhysicalConstants | None = None):
    """Least-squares fit of P(alpha) = offset - (C/2) cos(n T^2 (k_eff g - alpha)).

    The fringe period is fixed by the known n and T, so the model is linear
    in (offset, C cos(phi0)/2, C sin(phi0)/2) and solves in closed form.
    Returns (offset, contrast, phase, covariance) where ``phase`` is the
    fitted k_eff*g*n*T^2 modulo 2 pi and ``covariance`` is the 3x3 parameter
    covariance of (offset, contrast, phase) from the linearised normal
    equations scaled by the residual variance.
    """
    constants = constants or rb87_constants()
    alphas = np.array([p.alpha for p in points], dtype=float)
    probs = np.array([p.probability for p in points], dtype=float)
    if len(points) < 5:
        raise FitError("need at least 5 fringe points")
    span = alphas.max() - alphas.min()
    period = 2.0 * math.pi / (config.bragg_order * config.T**2)
    if span < period:
        raise FitError("fringe points must span at least one period")

    # Reference the harmonic basis to the scan centre: n T^2 alpha is ~1e6 rad
    # and evaluating cos there loses ~1e-10 to argument reduction; the small
    # centred arguments keep the fit exact to machine precision.
    alpha_ref = float(np.mean(alphas))
    scale = config.bragg_order * config.T**2
    theta = scale * (alphas - alpha_ref)
    design = np.column_stack([np.ones_like(theta), np.cos(theta), np.sin(theta)])
    gram = design.T @ design
    if np.linalg.matrix_rank(gram) < 3:
        raise FitError("rank-deficient fringe design (degenerate alpha values)")
    coeffs, *_ = np.linalg.lstsq(design, probs, rcond=None)
    c0, c1, c2 = coeffs

    # P = c0 + c1 cos(theta) + c2 sin(theta) with
    # c1 = -(C/2) cos(Phi_c), c2 = -(C/2) sin(Phi_c),
    # Phi_c = n T^2 (k_eff g - alpha_ref)
    contrast = 2.0 * math.hypot(c1, c2)
    residuals = probs - design @ coeffs
    dof = max(len(points) - 3, 1)
    sigma_sq = float(residuals @ residuals) / dof
    cov_lin = sigma_sq * np.linalg.inv(gram)

    if contrast < 1e-12 or contrast**2 < 16.0 * np.trace(cov_lin[1:, 1:]):
        raise UnconstrainedPhaseError(
            "fitted contrast consistent with zero: phase unconstrained")

    # restore the absolute phase n T^2 k_eff g; the alpha_ref product is
    # formed in extended precision so the shift does not round at ~1e-10
    phase_centred = math.atan2(-c2, -c1)
    ref_shift = np.longdouble(scale) * np.longdouble(alpha_ref)
    phase = float((np.longdouble(phase_centred) + ref_shift)
                  % np.longdouble(2.0 * math.pi))
    # delta-method Jacobian from (c0, c1, c2) to (offset, contrast, phase)
    amp_sq = c1 * c1 + c2 * c2
    jac = np.array([
        [1.0, 0.0, 0.0],
        [0.0, 2.0 * c1 / math.sqrt(amp_sq), 2.0 * c2 / math.sqrt(amp_sq)],
        [0.0, c2 / amp_sq, -c1 / amp_sq],
    ])
    covariance = jac @ cov_lin @ jac.T
    return float(c0), float(contrast), float(phase), covariance


def fringe_model(alphas, offset: float, contrast: float, phase: float,
                 config: InterferometerConfig):
    """Evaluate offset - (C/2) cos(phase - n T^2 alpha) without the precision
    loss of forming the huge absolute argument in double precision."""
    alphas = np.asarray(alphas, dtype=float)
    alpha_ref = float(np.mean(alphas))
    scale = config.bragg_order * config.T**2
    phase_c = float((np.longdouble(phase)
                     - np.longdouble(scale) * np.longdouble(alpha_ref))
                    % np.longdouble(2.0 * math.pi))
    theta = scale * (alphas - alpha_ref)
    return offset - 0.5 * contrast * np.cos(phase_c - theta)


# ---------------------------------------------------------------------------
# Allan deviation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AllanSeries:
    """Overlapping Allan deviation versus averaging time.

    slope_fit is the amplitude a of the white-noise law a * tau^(-1/2)
    fitted in the short-tau region, i.e. the one-second sensitivity.
    """

    taus: np.ndarray          # s, strictly increasing
    deviations: np.ndarray    # same units as the input series
    slope_fit: float

    def __post_init__(self):
        if np.any(np.diff(self.taus) <= 0):
            raise ValueError("taus must be strictly increasing")
        if np.any(self.deviations < 0):
            raise ValueError("deviations must be non-negative")

    def at_tau(self, tau: float) -> float:
        idx = int(np.argmin(np.abs(self.taus - tau)))
        return float(self.deviations[idx])


def allan_deviation(series, sample_interval: float, taus=None,
                    white_region_fraction: float = 0.1) -> AllanSeries:
    """Overlapping Allan deviation of a time-ordered series.

    taus may be given in seconds (rounded down to multiples of the sample
    interval); by default an octave-spaced ladder is used.  Averaging times
    that the series cannot support are omitted.  The tau^(-1/2) amplitude is
    fitted over taus up to ``white_region_fraction`` of the record length.
    """
    y = np.asarray(series, dtype=float)
    n = len(y)
    if n < 4:
        raise ValueError("series too short for an Allan estimate")
    if sample_interval <= 0:
        raise ValueError("sample_interval must be positive")

    if taus is None:
        ms = []
        m = 1
        while 2 * m < n:
            ms.append(m)
            m *= 2
    else:
        ms = sorted({max(1, int(round(t / sample_interval))) for t in np.atleast_1d(taus)})
        ms = [m for m in ms if 2 * m < n]
    if not ms:
        raise ValueError("no requested tau is supported by the series length")

    # offset-invariant estimator: remove the mean so long cumulative sums do
    # not lose precision against a large static level
    csum = np.concatenate([[0.0], np.cumsum(y - np.mean(y))])
    out_taus, out_devs = [], []
    for m in ms:
        avg = (csum[m:] - csum[:-m]) / m          # overlapping m-sample means
        diff = avg[m:] - avg[:-m]
        out_taus.append(m * sample_interval)
        out_devs.append(math.sqrt(0.5 * float(np.mean(diff * diff))))
    out_taus = np.array(out_taus)
    out_devs = np.array(out_devs)

    record = n * sample_interval
    white = (out_taus <= white_region_fraction * record) & (out_devs > 0)
    if not np.any(white):
        white = out_devs > 0
    if not np.any(white):
        return AllanSeries(out_taus, out_devs, 0.0)   # e.g. constant input
    # amplitude-only fit of log sigma = log a - 0.5 log tau
    log_a = np.mean(np.log(out_devs[white]) + 0.5 * np.log(out_taus[white]))
    return AllanSeries(out_taus, out_devs, float(math.exp(log_a)))


# ---------------------------------------------------------------------------
# Weighted statistics
# ---------------------------------------------------------------------------

def weighted_mean(values, uncertainties) -> tuple[float, float]:
    """Inverse-variance weighted mean and its standard deviation.

    Returns (mean, sigma_mean) with sigma_mean = (sum of weights)^(-1/2).
    """
    v = np.asarray(values, dtype=float)
    u = np.asarray(uncertainties, dtype=float)
    if v.size == 0:
        raise ValueError("weighted_mean of an empty sequence")
    if v.shape != u.shape:
        raise ValueError("values and uncertainties must have equal length")
    if np.any(u <= 0):
        raise ValueError("uncertainties must be strictly positive")
    w = 1.0 / (u * u)
    mean = float(np.sum(w * v) / np.sum(w))
    return mean, float(1.0 / math.sqrt(np.sum(w)))
