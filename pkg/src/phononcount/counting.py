"""Photon-counting forward model and its inverse.

Count rates follow the filtered-sideband picture: a red-detuned pump yields
``eta (kappa_e/kappa) gamma_OM <n>`` anti-Stokes counts per second, a
blue-detuned pump ``eta (kappa_e/kappa) gamma_OM (<n> + 1)`` Stokes counts,
on top of detector dark counts and residual pump transmission.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .dynamics import OccupancyTrace, pulse_trace, rates
from .exceptions import (InsufficientCountsError, ParameterError, PhononCountError,
                         SaturationError)
from .noise import phase_noise_rate
from .params import (SPD_SATURATION_RATE, BathParams, DetectionParams, DeviceParams,
                     Detuning, PulseParams, gamma_om)

#: Fraction of detector saturation above which a simulation is refused.
SATURATION_FRACTION = 0.1


@dataclass(frozen=True)
class CountRateBreakdown:
    signal: float
    pump_bleed: float
    dark: float
    phase_noise: float

    @property
    def total(self) -> float:
        return self.signal + self.pump_bleed + self.dark + self.phase_noise

    @property
    def background(self) -> float:
        return self.pump_bleed + self.dark + self.phase_noise


@dataclass(frozen=True)
class Histogram:
    """Photon counts binned by arrival time relative to the pulse start."""

    bin_edges: np.ndarray
    counts: np.ndarray
    integration_time: float
    pulse: PulseParams

    def __post_init__(self) -> None:
        edges = np.asarray(self.bin_edges, dtype=float)
        counts = np.asarray(self.counts)
        if edges.ndim != 1 or edges.size < 2:
            raise ParameterError("need at least two bin edges")
        if np.any(np.diff(edges) <= 0):
            raise ParameterError("bin edges must be strictly increasing")
        if counts.shape != (edges.size - 1,):
            raise ParameterError("counts length must equal number of bins")
        if np.any(counts < 0):
            raise ParameterError("counts must be non-negative")
        if not self.integration_time > 0:
            raise ParameterError("integration_time must be > 0")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def bin_widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def n_pulses(self) -> int:
        return n_pulses(self.integration_time, self.pulse.t_per)

    @property
    def on_mask(self) -> np.ndarray:
        c = self.bin_centers
        return (c >= 0) & (c < self.pulse.t_pulse)

    def rates(self) -> np.ndarray:
        """Count rate per bin during the illuminated time (counts/s)."""
        return self.counts / (self.bin_widths * self.n_pulses)


def n_pulses(integration_time: float, t_per: float) -> int:
    # guard against 0.9999999 periods from float division
    return int(math.floor(integration_time / t_per * (1 + 1e-12)))


def per_phonon_rate(dev: DeviceParams, det: DetectionParams, n_c: float) -> float:
    """``Gamma_SB,0 = eta (kappa_e/kappa) gamma_OM``: counts/s per phonon."""
    return det.eta * dev.eta_kappa * gamma_om(dev, n_c)


def sideband_rate(dev: DeviceParams, det: DetectionParams, n_c, occupancy,
                  detuning: Detuning | str):
    """Detected sideband photons per second."""
    if np.any(np.asarray(occupancy) < 0):
        raise ParameterError("occupancy must be >= 0")
    extra = 0.0 if Detuning.coerce(detuning) is Detuning.RED else 1.0
    return per_phonon_rate(dev, det, n_c) * (occupancy + extra)


def pump_bleed_rate(dev: DeviceParams, det: DetectionParams, n_c):
    """Residual pump counts ``eta A omega_m**2 n_c / kappa_e``."""
    if np.any(np.asarray(n_c) < 0):
        raise ParameterError("n_c must be >= 0")
    return det.eta * det.pump_attenuation_A * dev.omega_m**2 * n_c / dev.kappa_e


def total_rate(dev: DeviceParams, det: DetectionParams, n_c: float, occupancy: float,
               detuning: Detuning | str, include_phase_noise: bool = False,
               gamma: float | None = None) -> CountRateBreakdown:
    """Break the detected count rate into its sources.

    ``gamma`` (total mechanical linewidth) is needed only for the phase-noise term.
    """
    phase = 0.0
    if include_phase_noise and det.s_phiphi > 0 and n_c > 0:
        if gamma is None:
            raise ParameterError("gamma is required for the phase-noise term")
        phase = phase_noise_rate(dev, det, n_c, detuning, gamma)
    return CountRateBreakdown(
        signal=float(sideband_rate(dev, det, n_c, occupancy, detuning)),
        pump_bleed=float(pump_bleed_rate(dev, det, n_c)),
        dark=det.gamma_dark,
        phase_noise=phase,
    )


def nep(dev: DeviceParams, det: DetectionParams, n_c, include_phase_noise: bool = False,
        gamma: float | None = None, detuning: Detuning | str = Detuning.RED):
    """Noise-equivalent phonon number.

    Dark counts contribute ``kappa**2 Gamma_dark / (4 eta kappa_e g0**2 n_c)`` and
    pump bleed-through ``A (kappa omega_m / (2 kappa_e g0))**2``.
    """
    n_c = np.asarray(n_c, dtype=float)
    if np.any(n_c <= 0):
        raise ParameterError("n_c must be > 0")
    dark = dev.kappa**2 * det.gamma_dark / (4.0 * det.eta * dev.kappa_e * dev.g0**2 * n_c)
    pump = det.pump_attenuation_A * (dev.kappa * dev.omega_m / (2.0 * dev.kappa_e * dev.g0)) ** 2
    out = dark + pump
    if include_phase_noise and det.s_phiphi > 0:
        from .noise import nep_phase_resonant

        if gamma is None:
            raise ParameterError("gamma is required for the phase-noise term")
        out = out + np.vectorize(lambda x: nep_phase_resonant(dev, det, x, detuning, gamma))(n_c)
    return out if out.ndim else float(out)


def asymmetry(rate_red, rate_blue):
    """Sideband asymmetry ``xi = Gamma_blue / Gamma_red - 1``."""
    rate_red = np.asarray(rate_red, dtype=float)
    if np.any(rate_red == 0):
        raise ZeroDivisionError("red-detuned rate is zero")
    out = np.asarray(rate_blue, dtype=float) / rate_red - 1.0
    return out if out.ndim else float(out)


def occupancy_from_asymmetry(xi):
    """Occupancy ``1/xi`` implied by the asymmetry when backaction is negligible."""
    xi = np.asarray(xi, dtype=float)
    if np.any(xi <= 0):
        raise ParameterError("asymmetry must be > 0 to define an occupancy")
    out = 1.0 / xi
    return out if out.ndim else float(out)


def filtered_rate_integral(dev: DeviceParams, det: DetectionParams, n_c: float,
                           occupancy: float, detuning: Detuning | str, gamma: float,
                           rtol: float = 1e-8) -> float:
    """Sideband rate through a Lorentzian filter, by numerical quadrature.

    Integrates ``(kappa_e/kappa) gamma_OM / (2 pi) * |F|**2 S_bb`` over
    frequency with the filter centred on the sideband.  Excludes ``eta``.
    """
    if det.kappa_f <= 0 or gamma <= 0:
        raise ParameterError("kappa_f and gamma must be > 0")
    n_eff = occupancy + (0.0 if Detuning.coerce(detuning) is Detuning.RED else 1.0)
    if n_eff == 0:
        return 0.0
    # x = (gamma/2) tan(theta) maps [0, inf) onto [0, pi/2] with a bounded integrand
    r = det.kappa_f / gamma

    def integrand(theta: float) -> float:
        t = math.tan(theta)
        return 2.0 * r * r / (t * t + r * r)

    knee = math.atan(r)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            total = sum(integrate.quad(integrand, a, b, epsrel=rtol * 1e-2, epsabs=0, limit=200)[0]
                        for a, b in ((0.0, knee), (knee, math.pi / 2)))
        except integrate.IntegrationWarning as exc:
            raise PhononCountError(f"quadrature did not converge: {exc}") from None
    spectral = 2.0 * total / (2.0 * math.pi)
    return dev.eta_kappa * gamma_om(dev, n_c) * n_eff * spectral


def _bin_edges(pulse: PulseParams, window: tuple[float, float] | None) -> np.ndarray:
    t0, t1 = (0.0, pulse.t_per) if window is None else map(float, window)
    if not 0.0 <= t0 < t1 <= pulse.t_per * (1 + 1e-12):
        raise ParameterError("window must lie within one pulse period")
    nbins = int(math.ceil((t1 - t0) / pulse.bin_width - 1e-9))
    return t0 + pulse.bin_width * np.arange(nbins + 1)


def expected_counts(dev: DeviceParams, det: DetectionParams, pulse: PulseParams,
                    bin_edges: np.ndarray, n_pulse_count: int,
                    occupancy: Callable[[np.ndarray], np.ndarray],
                    gamma: float | None = None) -> np.ndarray:
    """Mean counts per bin for an occupancy evaluated at the bin centres."""
    centers = 0.5 * (bin_edges[1:] + bin_edges[:-1])
    widths = np.diff(bin_edges)
    n_t = np.asarray(occupancy(centers), dtype=float)
    if np.any(n_t < 0):
        raise ParameterError("occupancy must be >= 0")
    on = (centers >= 0) & (centers < pulse.t_pulse)
    n_c = np.where(on, pulse.n_c_on, pulse.n_c_off)
    rate = sideband_rate(dev, det, n_c, n_t, pulse.detuning) + pump_bleed_rate(dev, det, n_c) + det.gamma_dark
    if det.s_phiphi > 0 and gamma is not None:
        rate = rate + np.where(on, phase_noise_rate(dev, det, pulse.n_c_on, pulse.detuning, gamma), 0.0)
    if np.max(rate) > SATURATION_FRACTION * SPD_SATURATION_RATE:
        raise SaturationError(
            f"peak count rate {np.max(rate):.3g} c/s exceeds {SATURATION_FRACTION:.0%} of detector saturation"
        )
    return rate * widths * n_pulse_count


def synth_histogram(dev: DeviceParams, bath: BathParams, det: DetectionParams,
                    pulse: PulseParams, integration_time: float,
                    rng_seed: int | None = None, window: tuple[float, float] | None = None,
                    occupancy: Callable[[np.ndarray], np.ndarray] | float | None = None) -> Histogram:
    """Simulate a TCSPC histogram accumulated over ``integration_time``.

    With ``rng_seed=None`` the expected counts are returned unchanged
    (expectation mode); otherwise counts are Poisson draws from a generator
    seeded with ``rng_seed``.  ``occupancy`` overrides the dynamics model with
    a callable of time or a constant.
    """
    if integration_time < pulse.t_per:
        raise ParameterError("integration_time must cover at least one period")
    edges = _bin_edges(pulse, window)
    gamma = rates(dev, bath, pulse).gamma_total if det.s_phiphi > 0 else None
    if occupancy is None:
        def occupancy(t):
            return pulse_trace(dev, bath, pulse, t).n
    elif not callable(occupancy):
        value = float(occupancy)

        def occupancy(t, _v=value):
            return np.full(np.shape(t), _v)
    lam = expected_counts(dev, det, pulse, edges, n_pulses(integration_time, pulse.t_per),
                          occupancy, gamma)
    if rng_seed is None:
        counts = lam
    else:
        counts = np.random.default_rng(rng_seed).poisson(lam)
    return Histogram(edges, counts, float(integration_time), pulse)


def _background_counts(hist: Histogram, dev: DeviceParams, det: DetectionParams,
                       bath: BathParams | None = None) -> np.ndarray:
    """Dark, pump and (when ``bath`` is given) phase-noise counts per bin, on-state level."""
    rate = det.gamma_dark + pump_bleed_rate(dev, det, hist.pulse.n_c_on)
    if bath is not None and det.s_phiphi > 0:
        gamma = rates(dev, bath, hist.pulse).gamma_total
        rate = rate + phase_noise_rate(dev, det, hist.pulse.n_c_on, hist.pulse.detuning, gamma)
    return rate * hist.bin_widths * hist.n_pulses


def initial_occupancy(hist_red: Histogram, hist_blue: Histogram, dev: DeviceParams,
                      det: DetectionParams, bath: BathParams | None = None) -> tuple[float, float]:
    """Occupancy in the first on-state bin from the sideband asymmetry, with its Poisson error.

    Pass ``bath`` to subtract phase-noise counts as well as dark and pump counts.
    """
    _check_pair(hist_red, hist_blue)
    i0 = int(np.flatnonzero(hist_red.on_mask)[0])
    raw_r, raw_b = float(hist_red.counts[i0]), float(hist_blue.counts[i0])
    r = raw_r - _background_counts(hist_red, dev, det, bath)[i0]
    b = raw_b - _background_counts(hist_blue, dev, det, bath)[i0]
    if raw_r <= 0 or r <= 0:
        raise InsufficientCountsError("no red-detuned signal counts in the first on-state bin")
    if math.sqrt(raw_r) / r > 0.5:
        raise InsufficientCountsError(
            f"first-bin relative Poisson error {math.sqrt(raw_r) / r:.2f} exceeds 50%"
        )
    n0 = float(occupancy_from_asymmetry(asymmetry(r, b)))
    # n0 = r / (b - r); Poisson variances equal the raw counts
    sigma = math.sqrt(b * b * raw_r + r * r * raw_b) / (b - r) ** 2
    return n0, sigma


def _check_pair(hist_red: Histogram, hist_blue: Histogram) -> None:
    if hist_red.pulse.detuning is not Detuning.RED or hist_blue.pulse.detuning is not Detuning.BLUE:
        raise ParameterError("expected a red-detuned and a blue-detuned histogram")
    if not np.array_equal(hist_red.bin_edges, hist_blue.bin_edges):
        raise ParameterError("histograms must share binning")
    if hist_red.n_pulses != hist_blue.n_pulses:
        raise ParameterError("histograms must cover the same number of pulses")
    if not np.any(hist_red.on_mask):
        raise ParameterError("histogram contains no on-state bins")


def calibrate_trace(hist_red: Histogram, hist_blue: Histogram, dev: DeviceParams,
                    det: DetectionParams, detuning: Detuning | str = Detuning.RED,
                    bath: BathParams | None = None) -> OccupancyTrace:
    """Convert on-state counts to occupancy, anchored by the first-bin asymmetry.

    The first bin fixes ``<n>`` through ``xi = 1/<n>``; every later bin is
    scaled by its background-subtracted count rate.  ``sigma`` holds the
    per-bin shot noise (the common calibration error is not included).
    """
    n0, _ = initial_occupancy(hist_red, hist_blue, dev, det, bath)
    detuning = Detuning.coerce(detuning)
    hist = hist_red if detuning is Detuning.RED else hist_blue
    mask = hist.on_mask
    signal = hist.counts[mask] - _background_counts(hist, dev, det, bath)[mask]
    anchor = signal[0]
    level = n0 if detuning is Detuning.RED else n0 + 1.0
    scale = level / anchor
    n = signal * scale - (level - n0)
    sigma = np.sqrt(np.asarray(hist.counts[mask], dtype=float)) * abs(scale)
    return OccupancyTrace(hist.bin_centers[mask], n, None, sigma)


def occupancy_from_counts(hist: Histogram, dev: DeviceParams, det: DetectionParams,
                          bath: BathParams | None = None) -> OccupancyTrace:
    """Convert on-state counts to occupancy using the known per-phonon rate."""
    mask = hist.on_mask
    exposure = hist.bin_widths[mask] * hist.n_pulses
    scale = 1.0 / (per_phonon_rate(dev, det, hist.pulse.n_c_on) * exposure)
    signal = hist.counts[mask] - _background_counts(hist, dev, det, bath)[mask]
    n = signal * scale - (0.0 if hist.pulse.detuning is Detuning.RED else 1.0)
    sigma = np.sqrt(np.asarray(hist.counts[mask], dtype=float)) * scale
    return OccupancyTrace(hist.bin_centers[mask], n, None, sigma)
