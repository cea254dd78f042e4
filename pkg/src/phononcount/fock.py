"""Heralded phonon addition/subtraction with bath heating to lowest order.

A short pulse of length ``tau`` acts on the mechanics as two-mode squeezing
(blue detuning) or a beam splitter (red detuning) with the optical temporal
mode.  Detecting one sideband photon heralds ``B^dag rho B`` or
``B rho B^dag``; mechanical bath noise during the pulse enters through
``gamma_b tau`` and the integrated noise moment ``<F^dag F>``.  Every state in
this pipeline is diagonal in the Fock basis, so states are stored as
occupation probabilities.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import steady_initial_occupancy
from .exceptions import PhononCountError, TruncationError, ValidityError
from .params import BathParams, DetectionParams, DeviceParams, Detuning, PulseParams, gamma_om

DEFAULT_DIM = 32
TAIL_TOL = 1e-12
VALIDITY_WARN = 0.1
VALIDITY_ERROR = 0.3
NEGATIVE_TOL = 1e-12


@dataclass(frozen=True)
class FockState:
    """Diagonal density matrix; ``weights[n]`` is the population of ``|n>``."""

    weights: np.ndarray
    trace_defect: float = 0.0

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty 1-d array")
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        """Truncation level N_max (highest Fock number kept)."""
        return self.weights.size - 1

    @property
    def trace(self) -> float:
        return float(self.weights.sum())

    @property
    def mean(self) -> float:
        return float(np.arange(self.weights.size) @ self.weights)

    @classmethod
    def fock(cls, n: int, dim: int | None = None) -> "FockState":
        w = np.zeros((n if dim is None else dim) + 1)
        w[n] = 1.0
        return cls(w)


@dataclass(frozen=True)
class PulseInteraction:
    gamma_om_tau: float
    gamma_b_tau: float
    f_moment: float

    @property
    def r(self) -> float:
        """Squeezing parameter with ``cosh(r) = exp(gamma_OM tau / 2)``."""
        return math.acosh(math.exp(self.gamma_om_tau / 2.0))

    def validity(self) -> str:
        """``"ok"`` or ``"warn"``; raises :class:`ValidityError` beyond the hard limit."""
        worst = max(self.gamma_om_tau, self.gamma_b_tau, self.f_moment)
        if worst > VALIDITY_ERROR:
            raise ValidityError(
                f"first-order pulse expansion invalid: gamma_OM tau={self.gamma_om_tau:.3g}, "
                f"gamma_b tau={self.gamma_b_tau:.3g}, <F^dag F>={self.f_moment:.3g}"
            )
        return "warn" if worst > VALIDITY_WARN else "ok"


def _integral_exp(k: float, tau: float) -> float:
    """``int_0^tau exp(-k s) ds``."""
    x = k * tau
    if x == 0:
        return tau
    return -math.expm1(-x) / k


def f_moment(dev: DeviceParams, bath: BathParams, pulse: PulseParams, tau: float) -> float:
    """``<F^dag F> = exp(gamma_OM tau) int_0^tau exp(-gamma_OM s) gamma_b n_b(s) ds``.

    The bath drive is ``gamma_b n_b(s) = gamma_0 n_0 + gamma_p n_p (1 - delta_b exp(-gamma_S s))``.
    """
    if tau <= 0:
        raise ValueError("tau must be > 0")
    a = gamma_om(dev, pulse.n_c_on)
    steady = dev.gamma_0 * bath.n_0 + bath.hot_source()
    slow = bath.hot_source() * bath.delta_b
    integral = steady * _integral_exp(a, tau) - slow * _integral_exp(a + bath.gamma_S, tau)
    return math.exp(a * tau) * integral


def pulse_interaction(dev: DeviceParams, bath: BathParams, pulse: PulseParams,
                      tau: float) -> PulseInteraction:
    gamma_b = dev.gamma_0 + bath.gamma_p
    return PulseInteraction(
        gamma_om_tau=gamma_om(dev, pulse.n_c_on) * tau,
        gamma_b_tau=gamma_b * tau,
        f_moment=f_moment(dev, bath, pulse, tau),
    )


def _thermal_weights(n_mean: float, dim: int) -> np.ndarray:
    if n_mean == 0:
        w = np.zeros(dim + 1)
        w[0] = 1.0
        return w
    q = n_mean / (1.0 + n_mean)
    w = q ** np.arange(dim + 1)
    return w / w.sum()


def thermal_state(n_mean: float, dim: int | None = None) -> FockState:
    """Thermal state truncated at ``dim``.

    With ``dim=None`` the truncation starts at 32 and doubles until the top
    level holds less than 1e-12; an explicit ``dim`` that is too small raises
    :class:`TruncationError`.
    """
    if n_mean < 0:
        raise ValueError("n_mean must be >= 0")
    if dim is not None:
        w = _thermal_weights(n_mean, dim)
        if w[-1] >= TAIL_TOL:
            raise TruncationError(f"tail mass {w[-1]:.3g} at N_max={dim}")
        return FockState(w)
    dim = DEFAULT_DIM
    while True:
        w = _thermal_weights(n_mean, dim)
        if w[-1] < TAIL_TOL:
            return FockState(w)
        dim *= 2


def _ideal_map(p: np.ndarray, detuning: Detuning) -> tuple[np.ndarray, float]:
    """Unnormalised ``B^dag rho B`` or ``B rho B^dag`` and its trace."""
    out = np.zeros(p.size + 1)
    if detuning is Detuning.BLUE:
        out[1:] = np.arange(1, p.size + 1) * p
    else:
        out[:-2] = np.arange(1, p.size) * p[1:]
    return out, float(out.sum())


def conditional_state(initial: FockState, interaction: PulseInteraction,
                      detuning: Detuning | str, spontaneous_herald: bool = True) -> tuple[FockState, float]:
    """Mechanical state after a heralding detection, and the herald probability.

    Returns ``(state, P)`` where ``P = gamma_OM tau (<n> + 1)`` for blue and
    ``gamma_OM tau <n>`` for red detuning.  ``spontaneous_herald=False`` drops
    the spontaneous term and uses ``gamma_OM tau <n>`` for blue as well.
    """
    detuning = Detuning.coerce(detuning)
    interaction.validity()
    p = initial.weights / initial.weights.sum()
    n_mean = float(np.arange(p.size) @ p)
    ideal, norm = _ideal_map(p, detuning)
    if norm == 0:
        raise PhononCountError("no phonon to subtract from the ground state")
    ideal /= norm
    if detuning is Detuning.BLUE and spontaneous_herald:
        prob = interaction.gamma_om_tau * (n_mean + 1.0)
    else:
        prob = interaction.gamma_om_tau * n_mean

    f = interaction.f_moment
    g = interaction.gamma_b_tau
    q = np.concatenate([ideal, [0.0]])
    n = np.arange(q.size)
    out = (1.0 - f) * q - (g + 2.0 * f) * n * q
    out[1:] += f * n[1:] * q[:-1]              # B^dag rho B
    out[:-1] += (g + f) * n[1:] * q[1:]        # B rho B^dag
    most_negative = out.min()
    if most_negative < -NEGATIVE_TOL:
        raise ValidityError(f"conditional state has negative population {most_negative:.3g}")
    if most_negative < 0:
        warnings.warn("clipping tiny negative populations", stacklevel=2)
        out = np.clip(out, 0.0, None)
    trace = float(out.sum())
    out = np.trim_zeros(out, "b")
    return FockState(out / trace, trace_defect=abs(1.0 - trace)), prob


def fidelity(a: FockState, b: FockState) -> float:
    """Uhlmann fidelity of two diagonal states, ``sum sqrt(p_n q_n)``."""
    size = max(a.weights.size, b.weights.size)
    p = np.zeros(size)
    q = np.zeros(size)
    p[: a.weights.size] = a.weights
    q[: b.weights.size] = b.weights
    return float(np.sum(np.sqrt(np.clip(p, 0, None) * np.clip(q, 0, None))))


@dataclass(frozen=True)
class FockSweep:
    t_pulses: np.ndarray
    t_pers: np.ndarray
    fidelity: np.ndarray      # shape (len(t_pulses), len(t_pers))
    t_fock: np.ndarray
    trace_defect: np.ndarray
    flag: np.ndarray          # "ok" / "warn" / "error"


def fock_cell(dev: DeviceParams, bath: BathParams, det: DetectionParams, pulse: PulseParams,
              spontaneous_herald: bool = True) -> tuple[float, float, float, str]:
    """Fidelity to ``|1>``, heralding time, trace defect and validity for one blue pulse."""
    pulse = pulse.with_(detuning=Detuning.BLUE)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        n_init = steady_initial_occupancy(dev, bath, pulse)
    interaction = pulse_interaction(dev, bath, pulse, pulse.t_pulse)
    flag = interaction.validity()
    state, prob = conditional_state(thermal_state(n_init), interaction, Detuning.BLUE, spontaneous_herald)
    fid = fidelity(state, FockState.fock(1))
    t_fock = pulse.t_per / (det.eta * prob) if prob > 0 else math.inf
    return fid, t_fock, state.trace_defect, flag


def fock_fidelity_sweep(dev: DeviceParams, bath: BathParams, det: DetectionParams,
                        pulse: PulseParams, t_pulses, t_pers,
                        spontaneous_herald: bool = True) -> FockSweep:
    """Fidelity and heralding time over a grid of pulse widths and periods.

    Cells where the model fails are marked ``"error"`` with nan values
    instead of aborting the sweep.
    """
    t_pulses = np.atleast_1d(np.asarray(t_pulses, dtype=float))
    t_pers = np.atleast_1d(np.asarray(t_pers, dtype=float))
    shape = (t_pulses.size, t_pers.size)
    fid = np.full(shape, np.nan)
    t_fock = np.full(shape, np.nan)
    defect = np.full(shape, np.nan)
    flag = np.full(shape, "error", dtype=object)
    for i, tp in enumerate(t_pulses):
        for j, tper in enumerate(t_pers):
            try:
                cell = pulse.with_(t_pulse=tp, t_per=tper, bin_width=min(pulse.bin_width, tp))
                fid[i, j], t_fock[i, j], defect[i, j], flag[i, j] = fock_cell(
                    dev, bath, det, cell, spontaneous_herald)
            except (PhononCountError, ValueError):
                continue
    return FockSweep(t_pulses, t_pers, fid, t_fock, defect, flag.astype(str))
