"""Pulsed optomechanical phonon counting.

Forward models for the mechanical occupancy under a pulsed pump with a
delayed hot bath, the photon-counting chain that measures it, laser phase
noise, heralded single-phonon states, and the fits that invert them.
Rates are angular (rad/s) throughout.
"""
from .counting import (Histogram, calibrate_trace, occupancy_from_asymmetry,
                       occupancy_from_counts, synth_histogram)
from .dynamics import OccupancyTrace, pulse_trace, steady_initial_occupancy
from .exceptions import PhononCountError
from .fit import FitResult
from .params import (BathParams, Config, DetectionParams, DeviceParams, Detuning, PulseParams,
                     default_config, gamma_om, load_config)

__version__ = "0.1.0"

__all__ = [
    "BathParams", "Config", "DetectionParams", "DeviceParams", "Detuning", "FitResult",
    "Histogram", "OccupancyTrace", "PhononCountError", "PulseParams", "calibrate_trace",
    "default_config", "gamma_om", "load_config", "occupancy_from_asymmetry",
    "occupancy_from_counts", "pulse_trace", "steady_initial_occupancy", "synth_histogram",
    "__version__",
]
