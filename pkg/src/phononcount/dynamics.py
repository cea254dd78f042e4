"""Mean phonon occupancy during and between optical pulses.

During the on-state the occupancy obeys

    dn/dt = -gamma n + gamma_p n_p (1 - delta_b exp(-gamma_S t)) + gamma_0 n_0 + s

with ``gamma = gamma_0 + gamma_p +/- gamma_OM`` (+ for red, - for blue) and a
spontaneous term ``s = gamma_OM`` for blue detuning only.  Between pulses the
mode relaxes towards ``n_0`` at ``gamma_0``.  All solutions here are closed
form.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateBathError, InstabilityError, ParameterError
from .params import BathParams, DeviceParams, Detuning, PulseParams, gamma_om

# relative |gamma_S - gamma| below which n_delta is reported as degenerate
DEGENERATE_RTOL = 1e-9


@dataclass(frozen=True)
class RateBundle:
    gamma_total: float
    n_H: float
    n_delta: float
    gamma_S: float
    hot_delta: float  # gamma_p * n_p * delta_b
    gamma_om: float
    degenerate: bool = False


@dataclass(frozen=True)
class OccupancyTrace:
    times: np.ndarray
    n: np.ndarray
    segments: np.ndarray = field(default=None)  # "on"/"off" per sample
    sigma: np.ndarray | None = None

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        n = np.asarray(self.n, dtype=float)
        if times.shape != n.shape or times.ndim != 1:
            raise ParameterError("times and n must be 1-d arrays of equal length")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ParameterError("trace times must be strictly increasing")
        segments = self.segments
        segments = np.full(times.shape, "on") if segments is None else np.asarray(segments, dtype=str)
        if segments.shape != times.shape:
            raise ParameterError("segments must match times")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "segments", segments)
        if self.sigma is not None:
            sigma = np.asarray(self.sigma, dtype=float)
            if sigma.shape != times.shape:
                raise ParameterError("sigma must match times")
            object.__setattr__(self, "sigma", sigma)

    def __len__(self) -> int:
        return self.times.size

    def on_state(self) -> "OccupancyTrace":
        mask = self.segments == "on"
        return OccupancyTrace(
            self.times[mask], self.n[mask], self.segments[mask],
            None if self.sigma is None else self.sigma[mask],
        )


def rates(dev: DeviceParams, bath: BathParams, pulse: PulseParams,
          n_c: float | None = None) -> RateBundle:
    """Total damping, asymptotic occupancy and transient amplitude for the on-state."""
    n_c = pulse.n_c_on if n_c is None else n_c
    gom = gamma_om(dev, n_c)
    damping = dev.gamma_0 + bath.gamma_p
    if pulse.detuning is Detuning.RED:
        gamma = damping + gom
        spont = 0.0
    else:
        if gom >= damping:
            raise InstabilityError(
                f"blue detuning unstable: gamma_OM={gom:.4g} >= gamma_0+gamma_p={damping:.4g} rad/s"
            )
        gamma = damping - gom
        spont = gom
    n_H = (bath.hot_source() + dev.gamma_0 * bath.n_0 + spont) / gamma
    hot_delta = bath.hot_source() * bath.delta_b
    diff = bath.gamma_S - gamma
    degenerate = abs(diff) < DEGENERATE_RTOL * gamma
    n_delta = math.nan if degenerate else hot_delta / diff
    return RateBundle(gamma, n_H, n_delta, bath.gamma_S, hot_delta, gom, degenerate)


def _exp_difference(gamma_S: float, gamma: float, t):
    """``(exp(-gamma_S t) - exp(-gamma t)) / (gamma_S - gamma)`` without the pole."""
    t = np.asarray(t, dtype=float)
    eps = gamma_S - gamma
    x = eps * t
    small = np.abs(x) < 1.0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        xs = np.where(small, x, 1.0)
        # (1 - e^{-x})/x, equal to 1 at x = 0
        phi = np.where(xs == 0.0, 1.0, -np.expm1(-xs) / np.where(xs == 0.0, 1.0, xs))
        near = -t * np.exp(-gamma * t) * phi
        far = (np.exp(-gamma_S * t) - np.exp(-gamma * t)) / np.where(small, 1.0, eps)
    return np.where(small, near, far)


def _on_solution(rb: RateBundle, n_initial, t):
    t = np.asarray(t, dtype=float)
    decay = np.exp(-rb.gamma_total * t)
    out = n_initial * decay + rb.n_H * (-np.expm1(-rb.gamma_total * t))
    out = out + rb.hot_delta * _exp_difference(rb.gamma_S, rb.gamma_total, t)
    return out


def occupancy_on(dev: DeviceParams, bath: BathParams, pulse: PulseParams,
                 n_initial: float, t):
    """Occupancy at time ``t`` after the start of a pulse."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr > pulse.t_pulse * (1 + 1e-12)):
        raise ParameterError("occupancy_on requires 0 <= t <= t_pulse")
    out = _on_solution(rates(dev, bath, pulse), n_initial, t_arr)
    return out if out.ndim else float(out)


def occupancy_off(bath: BathParams, dev: DeviceParams, n_at_pulse_end, dt):
    """Relaxation towards the fridge occupancy after the pulse ends."""
    dt = np.asarray(dt, dtype=float)
    if np.any(dt < 0):
        raise ParameterError("dt must be >= 0")
    out = bath.n_0 + (np.asarray(n_at_pulse_end, dtype=float) - bath.n_0) * np.exp(-dev.gamma_0 * dt)
    return out if out.ndim else float(out)


def steady_initial_occupancy(dev: DeviceParams, bath: BathParams, pulse: PulseParams,
                             form: str = "exact") -> float:
    """Occupancy at the start of each pulse once the pulse train is periodic.

    ``form="exact"`` is the fixed point of one on-state of ``t_pulse``
    followed by ``t_per - t_pulse`` of free relaxation.  ``form="full_period"``
    evaluates the closed form, which lets the off-state last the full
    period and carries the transient as ``exp(-gamma_S t_pulse) -
    exp(-gamma_S t_per)``; it is only meaningful for ``t_per >> t_pulse``.
    """
    if pulse.t_per < 10 * pulse.t_pulse:
        warnings.warn("steady_initial_occupancy assumes t_per >> t_pulse", stacklevel=2)
    rb = rates(dev, bath, pulse)
    g, gs, tp, tper = rb.gamma_total, rb.gamma_S, pulse.t_pulse, pulse.t_per
    if form == "exact":
        a = math.exp(-g * tp)
        b = rb.n_H * -math.expm1(-g * tp) + rb.hot_delta * float(_exp_difference(gs, g, tp))
        e_off = math.exp(-dev.gamma_0 * (tper - tp))
        return (bath.n_0 * -math.expm1(-dev.gamma_0 * (tper - tp)) + b * e_off) / (1.0 - a * e_off)
    if form == "full_period":
        if rb.degenerate:
            raise ParameterError("full_period form undefined for gamma_S == gamma")
        e0 = math.exp(-dev.gamma_0 * tper)
        num = (bath.n_0 * (1.0 - e0)
               + rb.n_H * (1.0 - math.exp(-g * tp)) * e0
               + rb.n_delta * (math.exp(-gs * tp) - math.exp(-gs * tper)) * e0)
        return num / (1.0 - math.exp(-g * tp - dev.gamma_0 * tper))
    raise ValueError(f"unknown form {form!r}")


def pulse_trace(dev: DeviceParams, bath: BathParams, pulse: PulseParams, times,
                n_initial: float | None = None) -> OccupancyTrace:
    """Occupancy over one period, on-state followed by free relaxation.

    ``times`` are measured from the pulse start and must lie in ``[0, t_per]``.
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or np.any(times > pulse.t_per):
        raise ParameterError("trace times must lie within one period")
    if n_initial is None:
        n_initial = steady_initial_occupancy(dev, bath, pulse)
    rb = rates(dev, bath, pulse)
    on = times <= pulse.t_pulse
    n = np.empty_like(times)
    n[on] = _on_solution(rb, n_initial, times[on])
    n_end = float(_on_solution(rb, n_initial, pulse.t_pulse))
    n[~on] = occupancy_off(bath, dev, n_end, times[~on] - pulse.t_pulse)
    return OccupancyTrace(times, n, np.where(on, "on", "off"))


def _as_grid(t_pers, t_pulses):
    t_pers = np.atleast_1d(np.asarray(t_pers, dtype=float))
    t_pulses = np.atleast_1d(np.asarray(t_pulses, dtype=float))
    return t_pers, t_pulses


def _require_red(pulse: PulseParams) -> None:
    if pulse.detuning is not Detuning.RED:
        raise ParameterError("this sweep is defined for red-detuned pulses")


def max_occupancy(dev: DeviceParams, bath: BathParams, pulse: PulseParams,
                  n_grid: int = 256) -> float:
    """Largest occupancy reached during one pulse of the periodic train."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        n_init = steady_initial_occupancy(dev, bath, pulse)
    rb = rates(dev, bath, pulse)
    tp = pulse.t_pulse
    candidates = [0.0, tp]
    if not rb.degenerate:
        # n(t) = n_H + b e^{-gamma t} + c e^{-gamma_S t}; at most one stationary point
        b = n_init - rb.n_H - rb.n_delta
        c = rb.n_delta
        if b != 0 and c != 0:
            ratio = -c * rb.gamma_S / (b * rb.gamma_total)
            if ratio > 0:
                t_star = math.log(ratio) / (rb.gamma_S - rb.gamma_total)
                if 0.0 < t_star < tp:
                    candidates.append(t_star)
    t = np.concatenate([np.linspace(0.0, tp, n_grid), candidates])
    return float(np.max(_on_solution(rb, n_init, t)))


def max_occupancy_map(dev: DeviceParams, bath: BathParams, pulse: PulseParams,
                      t_pers, t_pulses, n_grid: int = 256) -> np.ndarray:
    """``<n>_max`` on a ``(len(t_pers), len(t_pulses))`` grid; nan where t_pulse >= t_per."""
    _require_red(pulse)
    t_pers, t_pulses = _as_grid(t_pers, t_pulses)
    out = np.full((t_pers.size, t_pulses.size), np.nan)
    for i, tper in enumerate(t_pers):
        for j, tp in enumerate(t_pulses):
            if tp >= tper:
                continue
            cell = pulse.with_(t_per=tper, t_pulse=tp, bin_width=min(pulse.bin_width, tp))
            out[i, j] = max_occupancy(dev, bath, cell, n_grid)
    return out


def c_eff_trace(dev: DeviceParams, bath: BathParams, pulse: PulseParams, t):
    """Instantaneous effective cooperativity during a pulse.

    ``gamma_OM / (gamma_0 n_0 + gamma_p n_p (1 - delta_b exp(-gamma_S t)))``.
    Returns ``inf`` where the bath input vanishes.
    """
    _require_red(pulse)
    if dev.gamma_0 * bath.n_0 == 0 and bath.hot_source() == 0:
        raise DegenerateBathError("no bath input; C_eff undefined")
    gom = gamma_om(dev, pulse.n_c_on)
    t = np.asarray(t, dtype=float)
    denom = dev.gamma_0 * bath.n_0 + bath.hot_source() * (1.0 - bath.delta_b * np.exp(-bath.gamma_S * t))
    denom = np.maximum(denom, 0.0)
    with np.errstate(divide="ignore"):
        out = np.where(denom > 0, gom / np.where(denom > 0, denom, 1.0), np.inf)
    return out if out.ndim else float(out)


def min_c_eff_map(dev: DeviceParams, bath: BathParams, pulse: PulseParams,
                  t_pers, t_pulses) -> np.ndarray:
    """Smallest C_eff reached over ``[0, t_pulse]`` on the same grid as :func:`max_occupancy_map`.

    The bath input grows monotonically during a pulse, so the minimum sits at
    the end of the pulse.
    """
    _require_red(pulse)
    t_pers, t_pulses = _as_grid(t_pers, t_pulses)
    row = c_eff_trace(dev, bath, pulse, t_pulses)
    out = np.broadcast_to(np.atleast_1d(row), (t_pers.size, t_pulses.size)).copy()
    out[t_pulses[None, :] >= t_pers[:, None]] = np.nan
    return out
