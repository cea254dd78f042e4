"""Device, bath, pulse and detection parameter sets.

Every rate is stored as an angular frequency (rad/s).  Config files carry
``*_over_2pi_hz`` fields; the loaders multiply by 2*pi exactly once.
"""
from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .exceptions import DegenerateBathError, ParameterError

TWO_PI = 2.0 * math.pi

#: Maximum count rate of the single photon detector (counts/s).
SPD_SATURATION_RATE = 2.5e7


class Detuning(str, enum.Enum):
    """Pump detuning ``Delta = omega_c - omega_l``.

    RED is ``Delta = +omega_m`` (anti-Stokes readout, damping);
    BLUE is ``Delta = -omega_m`` (Stokes readout, anti-damping).
    """

    RED = "red"
    BLUE = "blue"

    @property
    def sign(self) -> int:
        return 1 if self is Detuning.RED else -1

    @classmethod
    def coerce(cls, value: "Detuning | str") -> "Detuning":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ParameterError(f"detuning must be 'red' or 'blue', got {value!r}") from None


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ParameterError(msg)


def _finite(name: str, value: float) -> float:
    value = float(value)
    _require(math.isfinite(value), f"{name} must be finite, got {value}")
    return value


@dataclass(frozen=True)
class DeviceParams:
    g0: float
    kappa: float
    kappa_e: float
    omega_m: float
    gamma_0: float

    def __post_init__(self) -> None:
        for name in ("g0", "kappa", "kappa_e", "omega_m", "gamma_0"):
            _require(_finite(name, getattr(self, name)) > 0, f"{name} must be > 0")
        _require(self.kappa_e <= self.kappa, "kappa_e must not exceed kappa")
        if self.kappa / self.omega_m >= 1.0:
            warnings.warn(
                f"kappa/omega_m = {self.kappa / self.omega_m:.3g} is not sideband resolved",
                stacklevel=3,
            )

    @property
    def kappa_i(self) -> float:
        return self.kappa - self.kappa_e

    @property
    def eta_kappa(self) -> float:
        """Cavity-to-waveguide coupling fraction kappa_e/kappa."""
        return self.kappa_e / self.kappa

    @classmethod
    def from_hz(
        cls,
        g0_over_2pi_hz: float,
        kappa_over_2pi_hz: float,
        kappa_e_over_2pi_hz: float,
        omega_m_over_2pi_hz: float,
        gamma_0_over_2pi_hz: float,
    ) -> "DeviceParams":
        return cls(
            g0=TWO_PI * g0_over_2pi_hz,
            kappa=TWO_PI * kappa_over_2pi_hz,
            kappa_e=TWO_PI * kappa_e_over_2pi_hz,
            omega_m=TWO_PI * omega_m_over_2pi_hz,
            gamma_0=TWO_PI * gamma_0_over_2pi_hz,
        )

    def to_config(self) -> dict[str, float]:
        return {f"{k}_over_2pi_hz": v / TWO_PI for k, v in asdict(self).items()}


@dataclass(frozen=True)
class BathParams:
    """Hot-bath and fridge-bath model.

    ``gamma_p`` and ``n_p`` are the hot-bath coupling and occupancy at the
    on-state photon number.  The ``cw_*`` coefficients describe their
    steady-state dependence on photon number::

        n_p(n_c)     = cw_alpha * n_c**0.25
        gamma_p(n_c) = cw_beta * n_c**0.25 * exp(-cw_theta * n_c**-0.25)
    """

    gamma_p: float
    n_p: float
    n_0: float
    delta_b: float = 0.0
    gamma_S: float = 0.0
    cw_alpha: float = 0.0
    cw_beta: float = 0.0
    cw_theta: float = 0.0

    def __post_init__(self) -> None:
        for name in ("gamma_p", "n_p", "n_0", "gamma_S", "cw_alpha", "cw_beta", "cw_theta"):
            _require(_finite(name, getattr(self, name)) >= 0, f"{name} must be >= 0")
        _require(0.0 <= _finite("delta_b", self.delta_b) <= 1.0, "delta_b must lie in [0, 1]")

    def hot_source(self) -> float:
        """Steady hot-bath drive gamma_p * n_p (1/s)."""
        return self.gamma_p * self.n_p

    def cw_n_p(self, n_c):
        return self.cw_alpha * np.power(n_c, 0.25)

    def cw_gamma_p(self, n_c):
        n_c = np.asarray(n_c, dtype=float)
        q = np.power(n_c, 0.25)
        with np.errstate(divide="ignore"):
            out = self.cw_beta * q * np.exp(-self.cw_theta / q)
        out = np.where(n_c > 0, out, 0.0)
        return out if out.ndim else float(out)

    def at_photon_number(self, n_c: float) -> "BathParams":
        """Copy with ``gamma_p``/``n_p`` taken from the CW power laws at ``n_c``."""
        return replace(self, gamma_p=float(self.cw_gamma_p(n_c)), n_p=float(self.cw_n_p(n_c)))

    def to_config(self) -> dict[str, float]:
        return {
            "gamma_p_over_2pi_hz": self.gamma_p / TWO_PI,
            "n_p": self.n_p,
            "n_0": self.n_0,
            "delta_b": self.delta_b,
            "gamma_S_over_2pi_hz": self.gamma_S / TWO_PI,
            "cw_alpha": self.cw_alpha,
            "cw_beta_over_2pi_hz": self.cw_beta / TWO_PI,
            "cw_theta": self.cw_theta,
        }


@dataclass(frozen=True)
class PulseParams:
    detuning: Detuning
    n_c_on: float
    n_c_off: float
    t_pulse: float
    t_per: float
    bin_width: float = 25e-9

    def __post_init__(self) -> None:
        object.__setattr__(self, "detuning", Detuning.coerce(self.detuning))
        _require(_finite("n_c_on", self.n_c_on) > 0, "n_c_on must be > 0")
        _require(0.0 <= _finite("n_c_off", self.n_c_off) <= self.n_c_on, "need 0 <= n_c_off <= n_c_on")
        _require(0.0 < _finite("t_pulse", self.t_pulse) < _finite("t_per", self.t_per),
                 "need 0 < t_pulse < t_per")
        _require(0.0 < _finite("bin_width", self.bin_width) <= self.t_pulse,
                 "need 0 < bin_width <= t_pulse")

    @property
    def n_pulses_per_second(self) -> float:
        return 1.0 / self.t_per

    def with_(self, **changes: Any) -> "PulseParams":
        return replace(self, **changes)

    def to_config(self) -> dict[str, Any]:
        return {
            "detuning": self.detuning.value,
            "n_c_on": self.n_c_on,
            "n_c_off": self.n_c_off,
            "t_pulse_s": self.t_pulse,
            "t_per_s": self.t_per,
            "bin_width_s": self.bin_width,
        }


@dataclass(frozen=True)
class DetectionParams:
    """Counting chain.

    ``eta`` excludes the cavity coupling fraction kappa_e/kappa, which the
    count-rate formulas apply separately.
    """

    eta: float
    gamma_dark: float = 0.0
    pump_attenuation_A: float = 0.0
    kappa_f: float = TWO_PI * 50e6
    s_phiphi: float = 0.0

    def __post_init__(self) -> None:
        _require(0.0 < _finite("eta", self.eta) <= 1.0, "eta must lie in (0, 1]")
        for name in ("gamma_dark", "pump_attenuation_A", "kappa_f", "s_phiphi"):
            _require(_finite(name, getattr(self, name)) >= 0, f"{name} must be >= 0")
        _require(self.pump_attenuation_A <= 1.0, "pump_attenuation_A must be <= 1")

    def to_config(self) -> dict[str, float]:
        return {
            "eta": self.eta,
            "gamma_dark_cps": self.gamma_dark,
            "pump_attenuation_A": self.pump_attenuation_A,
            "kappa_f_over_2pi_hz": self.kappa_f / TWO_PI,
            "s_phiphi_per_hz": self.s_phiphi,
        }


@dataclass(frozen=True)
class Config:
    device: DeviceParams
    bath: BathParams
    pulse: PulseParams
    detection: DetectionParams

    def to_dict(self) -> dict[str, dict[str, Any]]:
        return {
            "device": self.device.to_config(),
            "bath": self.bath.to_config(),
            "pulse": self.pulse.to_config(),
            "detection": self.detection.to_config(),
        }


_DEVICE_KEYS = ("g0", "kappa", "kappa_e", "omega_m", "gamma_0")


def _section(raw: Mapping[str, Any], name: str) -> Mapping[str, Any]:
    if name not in raw or not isinstance(raw[name], Mapping):
        raise ParameterError(f"config: missing object '{name}'")
    return {k: v for k, v in raw[name].items() if not k.startswith("_")}


def _take(section: Mapping[str, Any], where: str, key: str, default: Any = ...) -> Any:
    if key in section:
        return section[key]
    if default is ...:
        raise ParameterError(f"config: {where}.{key} is required")
    return default


def _check_unknown(section: Mapping[str, Any], where: str, known: set[str]) -> None:
    extra = sorted(set(section) - known)
    if extra:
        raise ParameterError(f"config: unknown field(s) in {where}: {', '.join(extra)}")


def pulse_from_dict(pulse_s: Mapping[str, Any]) -> PulseParams:
    """Parse the ``pulse`` section (also used for histogram file headers)."""
    pulse_s = {k: v for k, v in pulse_s.items() if not k.startswith("_")}
    _check_unknown(pulse_s, "pulse",
                   {"detuning", "n_c_on", "n_c_off", "t_pulse_s", "t_per_s", "bin_width_s"})
    try:
        return PulseParams(
            detuning=_take(pulse_s, "pulse", "detuning"),
            n_c_on=float(_take(pulse_s, "pulse", "n_c_on")),
            n_c_off=float(_take(pulse_s, "pulse", "n_c_off", 0.0)),
            t_pulse=float(_take(pulse_s, "pulse", "t_pulse_s")),
            t_per=float(_take(pulse_s, "pulse", "t_per_s")),
            bin_width=float(_take(pulse_s, "pulse", "bin_width_s", 25e-9)),
        )
    except (ParameterError, TypeError, ValueError) as exc:
        raise ParameterError(f"config: pulse: {exc}") from None


def config_from_dict(raw: Mapping[str, Any]) -> Config:
    """Build a :class:`Config` from the JSON layout, with field-level errors.

    Keys beginning with ``_`` are annotations and ignored.
    """
    dev_s = _section(raw, "device")
    _check_unknown(dev_s, "device", {f"{k}_over_2pi_hz" for k in _DEVICE_KEYS})
    try:
        device = DeviceParams.from_hz(
            *(float(_take(dev_s, "device", f"{k}_over_2pi_hz")) for k in _DEVICE_KEYS)
        )
    except ParameterError as exc:
        raise ParameterError(f"config: device: {exc}") from None

    pulse = pulse_from_dict(_section(raw, "pulse"))

    bath_s = _section(raw, "bath")
    _check_unknown(bath_s, "bath", {"gamma_p_over_2pi_hz", "n_p", "n_0", "delta_b",
                                    "gamma_S_over_2pi_hz", "cw_alpha", "cw_beta_over_2pi_hz",
                                    "cw_theta"})
    try:
        bath = BathParams(
            gamma_p=0.0,
            n_p=0.0,
            n_0=float(_take(bath_s, "bath", "n_0")),
            delta_b=float(_take(bath_s, "bath", "delta_b", 0.0)),
            gamma_S=TWO_PI * float(_take(bath_s, "bath", "gamma_S_over_2pi_hz", 0.0)),
            cw_alpha=float(_take(bath_s, "bath", "cw_alpha", 0.0)),
            cw_beta=TWO_PI * float(_take(bath_s, "bath", "cw_beta_over_2pi_hz", 0.0)),
            cw_theta=float(_take(bath_s, "bath", "cw_theta", 0.0)),
        )
        # gamma_p / n_p default to the CW laws evaluated at the on-state photon number
        cw = bath.at_photon_number(pulse.n_c_on)
        bath = replace(
            bath,
            gamma_p=TWO_PI * float(bath_s["gamma_p_over_2pi_hz"]) if "gamma_p_over_2pi_hz" in bath_s else cw.gamma_p,
            n_p=float(bath_s["n_p"]) if "n_p" in bath_s else cw.n_p,
        )
    except (ParameterError, TypeError, ValueError) as exc:
        raise ParameterError(f"config: bath: {exc}") from None

    det_s = _section(raw, "detection")
    _check_unknown(det_s, "detection", {"eta", "gamma_dark_cps", "pump_attenuation_A",
                                        "kappa_f_over_2pi_hz", "s_phiphi_per_hz"})
    try:
        detection = DetectionParams(
            eta=float(_take(det_s, "detection", "eta")),
            gamma_dark=float(_take(det_s, "detection", "gamma_dark_cps", 0.0)),
            pump_attenuation_A=float(_take(det_s, "detection", "pump_attenuation_A", 0.0)),
            kappa_f=TWO_PI * float(_take(det_s, "detection", "kappa_f_over_2pi_hz", 50e6)),
            s_phiphi=float(_take(det_s, "detection", "s_phiphi_per_hz", 0.0)),
        )
    except ParameterError as exc:
        raise ParameterError(f"config: detection: {exc}") from None

    return Config(device, bath, pulse, detection)


def load_config(path: str | Path) -> Config:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParameterError(f"config {path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ParameterError(f"config {path}: top level must be an object")
    return config_from_dict(raw)


def default_config_path() -> Path:
    return Path(__file__).with_name("data") / "device_config.json"


def default_config() -> Config:
    """Configuration describing the 5.6 GHz silicon nanobeam device."""
    return load_config(default_config_path())


def gamma_om(dev: DeviceParams, n_c):
    """Optomechanical scattering rate ``4 g0**2 n_c / kappa`` (rad/s)."""
    if np.any(np.asarray(n_c) < 0):
        raise ParameterError("n_c must be >= 0")
    return 4.0 * dev.g0**2 * n_c / dev.kappa


def cooperativity(dev: DeviceParams, bath: BathParams, n_c: float) -> tuple[float, float]:
    """Return ``(C, C_eff)`` for steady bath conditions.

    ``C = gamma_OM / gamma_b`` with ``gamma_b = gamma_0 + gamma_p``, and
    ``C_eff = C / n_b`` where ``gamma_b n_b = gamma_0 n_0 + gamma_p n_p``.
    """
    gom = gamma_om(dev, n_c)
    gamma_b = dev.gamma_0 + bath.gamma_p
    c = gom / gamma_b
    bath_input = dev.gamma_0 * bath.n_0 + bath.hot_source()
    if bath_input == 0:
        raise DegenerateBathError("effective bath occupancy is zero; C_eff undefined")
    return c, gom / bath_input


def thermal_decoherence_time(gamma_0: float, n_mean: float) -> float:
    """``1 / (gamma_0 (1 + <n>))`` in seconds."""
    return 1.0 / (gamma_0 * (1.0 + n_mean))

