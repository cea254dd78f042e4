"""Laser phase-noise contributions to heating and to the counting noise floor.

The phase-noise PSD ``s_phiphi`` is taken flat around the mechanical
frequency.  ``gamma`` arguments are the total mechanical linewidth (rad/s).
"""
from __future__ import annotations

import warnings

from .params import DetectionParams, DeviceParams, Detuning, gamma_om


def n_phi(dev: DeviceParams, det: DetectionParams, n_c: float) -> float:
    """Effective phase-noise quanta ``omega_m**2 n_c S_phiphi / kappa_e``."""
    return dev.omega_m**2 * n_c * det.s_phiphi / dev.kappa_e


def phase_heating(dev: DeviceParams, det: DetectionParams, n_c: float, gamma: float) -> float:
    """Added occupancy ``(kappa_e/kappa)(gamma_OM/gamma) n_phi``, either detuning."""
    return dev.eta_kappa * gamma_om(dev, n_c) / gamma * n_phi(dev, det, n_c)


def _squash_bracket(dev: DeviceParams, det: DetectionParams, n_c: float,
                    detuning: Detuning, gamma: float) -> float:
    if det.kappa_f < 10 * gamma:
        warnings.warn("phase-noise formula assumes kappa_f >> gamma", stacklevel=3)
    rho = dev.eta_kappa
    imbalance = 1.0 - 2.0 * rho
    gom = gamma_om(dev, n_c)
    return (det.kappa_f / 4.0 * imbalance**2
            + rho * gom * (gom * rho / gamma + Detuning.coerce(detuning).sign * imbalance))


def phase_noise_rate(dev: DeviceParams, det: DetectionParams, n_c: float,
                     detuning: Detuning | str, gamma: float) -> float:
    """Phase-noise count rate with the detuning-dependent (anti-)squashing term."""
    return det.eta * n_phi(dev, det, n_c) * _squash_bracket(dev, det, n_c, detuning, gamma)


def nep_phase_resonant(dev: DeviceParams, det: DetectionParams, n_c: float,
                       detuning: Detuning | str, gamma: float) -> float:
    """Phase-noise part of the noise-equivalent phonon number at ``Delta = +/- omega_m``."""
    prefactor = (dev.omega_m * dev.kappa / (2.0 * dev.kappa_e * dev.g0)) ** 2
    return prefactor * det.s_phiphi * _squash_bracket(dev, det, n_c, detuning, gamma)


def nep_phase_far_detuned(dev: DeviceParams, det: DetectionParams) -> float:
    """Noise-equivalent phonon number of phase noise with the pump far off resonance."""
    return (dev.omega_m * dev.kappa / (4.0 * dev.kappa_e * dev.g0)) ** 2 * det.kappa_f * det.s_phiphi


def s_phiphi_from_far_detuned_nep(dev: DeviceParams, kappa_f: float, n_nep: float) -> float:
    """Invert :func:`nep_phase_far_detuned` for the phase-noise PSD (1/Hz)."""
    return n_nep / ((dev.omega_m * dev.kappa / (4.0 * dev.kappa_e * dev.g0)) ** 2 * kappa_f)
