"""Dual-hyperfine-state Bragg atom-interferometer free-fall comparator.

Simulates the full measurement chain of a state-labelled Bragg gravimeter
pair: pulse-level diffraction dynamics, fringe acquisition, noise,
systematic channels, and the campaign statistics that turn 63 hours of
alternating shots into an Eötvös ratio with an error budget.
"""

from .core import (
    F1,
    F2,
    HyperfineState,
    InterferometerConfig,
    PhysicalConstants,
    ShotRecord,
    Trajectory,
    rb87_constants,
    spin_perp_amplitude,
)

__version__ = "0.1.0"

__all__ = [
    "F1", "F2", "HyperfineState", "InterferometerConfig", "PhysicalConstants",
    "ShotRecord", "Trajectory", "rb87_constants", "spin_perp_amplitude",
    "__version__",
]
