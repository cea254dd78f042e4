"""Parameter recovery from occupancy decays, pulsed traces, CW sweeps and linewidths.

Nonlinear fits search a bounded box with Nelder-Mead from a fixed 8-point
lattice, keep the best start, then polish with a bounded least-squares step
whose Jacobian supplies the standard errors.  Everything is deterministic
given the data.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from itertools import product
from typing import Callable, Sequence

import numpy as np
from scipy import optimize
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from .dynamics import OccupancyTrace, _exp_difference
from .exceptions import FitError, ParameterError
from .params import BathParams, DeviceParams, Detuning, gamma_om

MAX_EVALS = 20_000
SIMPLEX_XTOL = 1e-10
# a parameter closer than this (relative to its box) to a hard bound is "pinned"
PIN_TOL = 1e-6


@dataclass
class FitResult:
    params: dict[str, float]
    stderr: dict[str, float]
    residual_norm: float
    n_evals: int
    converged: bool
    flags: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.residual_norm >= 0:
            raise ValueError("residual_norm must be >= 0")

    def to_dict(self) -> dict:
        out = asdict(self)
        # json has no inf/nan
        for key in ("params", "stderr"):
            out[key] = {k: (v if math.isfinite(v) else None) for k, v in out[key].items()}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, raw: dict) -> "FitResult":
        fix = lambda d: {k: (math.nan if v is None else float(v)) for k, v in d.items()}  # noqa: E731
        return cls(fix(raw["params"]), fix(raw["stderr"]), float(raw["residual_norm"]),
                   int(raw["n_evals"]), bool(raw["converged"]), list(raw.get("flags", [])))


# ---------------------------------------------------------------- optimizer

@dataclass(frozen=True)
class _Param:
    name: str
    lo: float          # search box, in the internal coordinate
    hi: float
    log: bool = False  # internal coordinate is log(value)
    hard_lo: float | None = None  # true bounds on the value itself
    hard_hi: float | None = None

    def to_value(self, u: float) -> float:
        z = self.lo + u * (self.hi - self.lo)
        return math.exp(z) if self.log else z


def _lattice(dim: int) -> np.ndarray:
    """Eight start points in the unit cube: a 2^3 factorial, or its 2^(4-1) half fraction."""
    levels = (0.25, 0.75)
    if dim == 3:
        return np.array(list(product(levels, repeat=3)))
    if dim == 4:
        return np.array([[levels[a], levels[b], levels[c], levels[(a + b + c) % 2]]
                         for a, b, c in product((0, 1), repeat=3)])
    raise ValueError("start lattice defined for 3 or 4 parameters")


def _multistart(residuals: Callable[[np.ndarray], np.ndarray], spec: Sequence[_Param]):
    """Minimise ``sum(residuals**2)`` over the spec; returns ``(values, n_evals, converged, jac)``."""
    dim = len(spec)

    def values_from_u(u):
        return np.array([p.to_value(float(np.clip(x, 0.0, 1.0))) for p, x in zip(spec, u)])

    n_evals = 0

    def objective(u):
        nonlocal n_evals
        n_evals += 1
        r = residuals(values_from_u(u))
        out = float(r @ r)
        return out if math.isfinite(out) else 1e300

    best = None
    for idx, start in enumerate(_lattice(dim)):
        # stop when the simplex is small or the objective flat to 1e-14 of its start value
        fatol = 1e-14 * objective(start)
        res = optimize.minimize(
            objective, start, method="Nelder-Mead", bounds=[(0.0, 1.0)] * dim,
            options={"xatol": SIMPLEX_XTOL, "fatol": fatol, "maxfev": MAX_EVALS,
                     "adaptive": dim > 2},
        )
        # strict "<" keeps the earliest start on ties
        if best is None or res.fun < best[1].fun:
            best = (idx, res)
    simplex_ok = bool(best[1].nit > 0 and best[1].nfev < MAX_EVALS)

    # polish in the natural coordinates (log for log-scaled parameters)
    z0 = np.array([math.log(v) if p.log else v for p, v in zip(spec, values_from_u(best[1].x))])
    lo = np.array([(math.log(p.hard_lo) if p.hard_lo and p.hard_lo > 0 else -np.inf) if p.log
                   else (-np.inf if p.hard_lo is None else p.hard_lo) for p in spec])
    hi = np.array([(math.log(p.hard_hi) if p.hard_hi else np.inf) if p.log
                   else (np.inf if p.hard_hi is None else p.hard_hi) for p in spec])
    z0 = np.clip(z0, lo, hi)

    def from_z(z):
        return np.array([math.exp(x) if p.log else x for p, x in zip(spec, z)])

    def res_z(z):
        r = residuals(from_z(z))
        return np.where(np.isfinite(r), r, 1e150)

    polish = optimize.least_squares(res_z, z0, bounds=(lo, hi), method="trf",
                                    xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000,
                                    x_scale="jac")
    n_evals += int(polish.nfev)
    z = polish.x
    r0 = res_z(z0)
    if float(r0 @ r0) < float(polish.fun @ polish.fun):
        z = z0
    values = from_z(z)
    # Jacobian in the internal coordinates; _stderr maps it back to values
    jac = polish.jac if z is polish.x else None
    converged = bool(np.all(np.isfinite(values)) and (simplex_ok or polish.success))
    return values, n_evals, converged, jac


def _stderr(jac: np.ndarray | None, resid: np.ndarray, spec: Sequence[_Param],
            values: np.ndarray, absolute: bool) -> dict[str, float]:
    names = [p.name for p in spec]
    if jac is None:
        return {n: math.nan for n in names}
    m, p = jac.shape
    jtj = jac.T @ jac
    try:
        cov = np.linalg.pinv(jtj, rcond=1e-14, hermitian=True)
    except np.linalg.LinAlgError:
        return {n: math.nan for n in names}
    if not absolute:
        dof = max(m - p, 1)
        cov = cov * float(resid @ resid) / dof
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    # first-order propagation out of log coordinates
    se = np.array([s * v if p.log else s for p, s, v in zip(spec, se, values)])
    # a zero column means the data carry no information on that parameter
    dead = np.linalg.norm(jac, axis=0) == 0
    return {n: (math.inf if d else float(s)) for n, s, d in zip(names, se, dead)}


def _weighted_rms(resid: np.ndarray) -> float:
    return float(math.sqrt(np.mean(resid * resid))) if resid.size else 0.0


def _pinned(spec: Sequence[_Param], values: np.ndarray) -> list[str]:
    flags = []
    for p, v in zip(spec, values):
        width = p.hi - p.lo if not p.log else abs(v)
        width = width or 1.0
        if p.hard_lo is not None and abs(v - p.hard_lo) <= PIN_TOL * width:
            flags.append(f"boundary_pinned:{p.name}")
        elif p.hard_hi is not None and abs(v - p.hard_hi) <= PIN_TOL * width:
            flags.append(f"boundary_pinned:{p.name}")
    return flags


# ---------------------------------------------------------------- decay

def _as_points(points, ncols: int, what: str) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != ncols:
        raise ParameterError(f"{what} must be a sequence of {ncols}-tuples")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{what} contain non-finite values")
    return arr


def _weights(weights, n: int) -> np.ndarray:
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w < 0) or not np.all(np.isfinite(w)) or not np.any(w > 0):
        raise ParameterError("weights must be finite, non-negative, not all zero, one per point")
    return w


def fit_decay(points, weights=None) -> FitResult:
    """Free-decay rate from ``(t_per, ratio)`` pairs with ``ratio = exp(-gamma_0 t_per)``.

    Weighted least squares of ``log(ratio)`` against ``t_per`` through the
    origin.  The standard error comes from the residual scatter.
    """
    arr = _as_points(points, 2, "points")
    if arr.shape[0] < 3:
        raise ParameterError("fit_decay needs at least 3 points")
    t, ratio = arr[:, 0], arr[:, 1]
    if np.any(ratio <= 0):
        raise ParameterError("ratios must be positive")
    if np.any(ratio > 1.5):
        raise ParameterError("ratios must not exceed 1.5")
    if np.all(t == t[0]):
        raise FitError("degenerate design: all periods are equal")
    w = _weights(weights, t.size)
    y = np.log(ratio)
    stt = float(np.sum(w * t * t))
    gamma_0 = -float(np.sum(w * t * y)) / stt
    resid = np.sqrt(w) * (y + gamma_0 * t)
    dof = t.size - 1
    se = math.sqrt(float(resid @ resid) / dof / stt)
    return FitResult({"gamma_0": gamma_0}, {"gamma_0": se}, _weighted_rms(resid), 1, True)


# ---------------------------------------------------------------- pulse occupancy

def heat_model(t, n_init: float, delta_b: float, gamma_S: float, gamma: float,
               hot_source: float, cold_source: float = 0.0, spontaneous: float = 0.0):
    """On-state occupancy with the slowly switching hot bath, for fitting."""
    t = np.asarray(t, dtype=float)
    n_H = (hot_source + cold_source + spontaneous) / gamma
    return (n_init * np.exp(-gamma * t) - n_H * np.expm1(-gamma * t)
            + hot_source * delta_b * _exp_difference(gamma_S, gamma, t))


def _trace_arrays(trace, weights):
    if isinstance(trace, OccupancyTrace):
        tr = trace.on_state()
        t, n, sigma = tr.times, tr.n, tr.sigma
    else:
        arr = np.asarray(trace, dtype=float)
        t, n, sigma = arr[:, 0], arr[:, 1], (arr[:, 2] if arr.shape[1] > 2 else None)
    if weights is None and sigma is not None:
        sigma = np.asarray(sigma, dtype=float)
        if np.any(sigma <= 0):
            # empty bins: borrow the smallest positive error bar
            pos = sigma[sigma > 0]
            sigma = np.where(sigma > 0, sigma, pos.min() if pos.size else 1.0)
        return t, n, 1.0 / sigma**2, True
    return t, n, _weights(weights, t.size), False


def fit_pulse_occupancy(trace, gamma: float, hot_source: float, cold_source: float = 0.0,
                        spontaneous: float = 0.0, weights=None) -> FitResult:
    """Recover ``n_init``, ``delta_b`` and ``gamma_S`` from an on-state occupancy trace.

    ``gamma`` is the total on-state damping, ``hot_source`` is
    ``gamma_p n_p``, ``cold_source`` is ``gamma_0 n_0`` and ``spontaneous``
    is ``gamma_OM`` for blue detuning (0 for red).  Weights default to
    ``1/sigma**2`` when the trace carries error bars, else uniform.
    """
    t, n, w, absolute = _trace_arrays(trace, weights)
    if t.size < 10:
        raise ParameterError("fit_pulse_occupancy needs at least 10 on-state bins")
    if not (gamma > 0 and hot_source >= 0 and cold_source >= 0 and spontaneous >= 0):
        raise ParameterError("rates must be non-negative with gamma > 0")
    sw = np.sqrt(w)
    t = t - t[0] if t[0] < 0 else t

    def residuals(v):
        return sw * (heat_model(t, v[0], v[1], v[2], gamma, hot_source, cold_source, spontaneous) - n)

    n_top = max(float(np.max(np.abs(n))), 1e-6)
    spec = [
        _Param("n_init", 0.0, 2.0 * n_top, hard_lo=0.0),
        _Param("delta_b", 0.0, 1.0, hard_lo=0.0, hard_hi=1.0),
        _Param("gamma_S", math.log(gamma * 1e-2), math.log(gamma * 1e2), log=True, hard_lo=0.0),
    ]
    values, n_evals, converged, jac = _multistart(residuals, spec)
    resid = residuals(values)
    names = [p.name for p in spec]
    stderr = _stderr(jac, resid, spec, values, absolute)
    flags = _pinned(spec, values)
    rel = stderr["gamma_S"] / values[2] if values[2] > 0 else math.inf
    if values[1] * hot_source < 1e-6 * gamma * n_top or not rel < 1.0:
        flags.append("unidentifiable:gamma_S")
    for f in flags:
        warnings.warn(f"fit_pulse_occupancy: {f}", stacklevel=2)
    return FitResult(dict(zip(names, map(float, values))), stderr, _weighted_rms(resid),
                     n_evals, converged, flags)


# ---------------------------------------------------------------- CW heating

def cw_occupancy(n_c, dev: DeviceParams, cw_alpha: float, cw_beta: float, cw_theta: float,
                 n_0: float, detuning: Detuning | str = Detuning.RED):
    """Steady-state occupancy under a continuous pump of ``n_c`` photons."""
    n_c = np.asarray(n_c, dtype=float)
    bath = BathParams(0.0, 0.0, n_0, cw_alpha=cw_alpha, cw_beta=cw_beta, cw_theta=cw_theta)
    gp = bath.cw_gamma_p(n_c)
    source = dev.gamma_0 * n_0 + gp * bath.cw_n_p(n_c)
    gom = gamma_om(dev, n_c)
    if Detuning.coerce(detuning) is Detuning.RED:
        return source / (dev.gamma_0 + gp + gom)
    damping = dev.gamma_0 + gp - gom
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(damping > 0, (source + gom) / damping, np.nan)


def fit_cw_heating(points, dev: DeviceParams, detuning: Detuning | str = Detuning.RED,
                   weights=None) -> FitResult:
    """Fit the power-law bath coefficients and ``n_0`` to ``(n_c, n_ss)`` pairs.

    Residuals are taken in log occupancy, so noise is treated as
    multiplicative.
    """
    arr = _as_points(points, 2, "points")
    if arr.shape[0] < 6:
        raise ParameterError("fit_cw_heating needs at least 6 points")
    n_c, n_ss = arr[:, 0], arr[:, 1]
    if np.any(n_c <= 0) or np.any(n_ss <= 0):
        raise ParameterError("n_c and n_ss must be positive")
    if math.log10(n_c.max() / n_c.min()) < 2.0:
        raise ParameterError("n_c must span at least two decades")
    detuning = Detuning.coerce(detuning)
    sw = np.sqrt(_weights(weights, n_c.size))
    y = np.log(n_ss)

    def residuals(v):
        with np.errstate(divide="ignore", invalid="ignore"):
            model = cw_occupancy(n_c, dev, v[0], v[1], v[2], v[3], detuning)
            return sw * (np.log(model) - y)

    gom_max = float(gamma_om(dev, n_c.max()))
    spec = [
        _Param("cw_alpha", math.log(1e-3), math.log(1e3), log=True, hard_lo=0.0),
        _Param("cw_beta", math.log(dev.gamma_0), math.log(100 * max(gom_max, dev.gamma_0)),
               log=True, hard_lo=0.0),
        _Param("cw_theta", 0.0, 10.0, hard_lo=0.0),
        _Param("n_0", math.log(n_ss.min() * 1e-2), math.log(n_ss.max() * 10), log=True, hard_lo=0.0),
    ]
    values, n_evals, converged, jac = _multistart(residuals, spec)
    resid = residuals(values)
    names = [p.name for p in spec]
    stderr = _stderr(jac, resid, spec, values, absolute=False)
    flags = _pinned(spec, values)
    alpha, beta, theta, n_0 = values
    bath = BathParams(0.0, 0.0, n_0, cw_alpha=alpha, cw_beta=beta, cw_theta=theta)
    hot = bath.cw_gamma_p(n_c) * bath.cw_n_p(n_c)
    if np.max(hot / (dev.gamma_0 * n_0 + hot)) < 1e-3:
        flags.append("degenerate:gamma_p")
    elif not stderr["cw_theta"] < max(1.0, abs(theta)):
        flags.append("ill_conditioned:cw_theta")
    for f in flags:
        warnings.warn(f"fit_cw_heating: {f}", stacklevel=2)
    return FitResult(dict(zip(names, map(float, values))), stderr, _weighted_rms(resid),
                     n_evals, converged, flags)


# ---------------------------------------------------------------- g0

def extract_g0(points, dev: DeviceParams) -> FitResult:
    """``g0`` and the mean bath linewidth from ``(n_c, linewidth_red, linewidth_blue)``.

    ``gamma_OM = (red - blue)/2`` per point is fitted linearly in ``n_c``
    through the origin; ``gamma_b`` is the mean of ``(red + blue)/2``.
    """
    arr = _as_points(points, 3, "points")
    if arr.shape[0] < 2:
        raise ParameterError("extract_g0 needs at least 2 photon numbers")
    n_c, red, blue = arr.T
    if np.any(n_c <= 0) or np.any(red <= 0) or np.any(blue <= 0):
        raise ParameterError("photon numbers and linewidths must be positive")
    gom = 0.5 * (red - blue)
    if np.any(gom < 0):
        bad = int(np.flatnonzero(gom < 0)[0])
        raise FitError(f"negative gamma_OM at n_c={n_c[bad]:.3g}: red linewidth below blue")
    gb = 0.5 * (red + blue)
    snn = float(n_c @ n_c)
    slope = float(n_c @ gom) / snn
    resid = gom - slope * n_c
    dof = max(n_c.size - 1, 1)
    se_slope = math.sqrt(float(resid @ resid) / dof / snn)
    g0 = math.sqrt(slope * dev.kappa / 4.0)
    # d g0 / d slope = kappa / (8 g0)
    se_g0 = se_slope * dev.kappa / (8.0 * g0) if g0 > 0 else math.inf
    se_gb = float(np.std(gb, ddof=1) / math.sqrt(gb.size)) if gb.size > 1 else math.nan
    return FitResult({"g0": g0, "gamma_b": float(gb.mean())}, {"g0": se_g0, "gamma_b": se_gb},
                     _weighted_rms(resid), 1, True)


# ---------------------------------------------------------------- estimators

class DecayFitter(RegressorMixin, BaseEstimator):
    """``fit(t_per, ratio)`` / ``predict(t_per)`` wrapper around :func:`fit_decay`."""

    def fit(self, X, y, sample_weight=None):
        t = check_array(X, ensure_2d=False).reshape(-1)
        y = check_array(y, ensure_2d=False).reshape(-1)
        check_consistent_length(t, y)
        self.result_ = fit_decay(np.column_stack([t, y]), sample_weight)
        self.gamma_0_ = self.result_.params["gamma_0"]
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        return np.exp(-self.gamma_0_ * check_array(X, ensure_2d=False).reshape(-1))


class PulseOccupancyFitter(RegressorMixin, BaseEstimator):
    def __init__(self, gamma=1.0, hot_source=0.0, cold_source=0.0, spontaneous=0.0):
        self.gamma = gamma
        self.hot_source = hot_source
        self.cold_source = cold_source
        self.spontaneous = spontaneous

    def fit(self, X, y, sample_weight=None):
        t = check_array(X, ensure_2d=False).reshape(-1)
        y = check_array(y, ensure_2d=False).reshape(-1)
        check_consistent_length(t, y)
        self.result_ = fit_pulse_occupancy(np.column_stack([t, y]), self.gamma, self.hot_source,
                                           self.cold_source, self.spontaneous, sample_weight)
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        p = self.result_.params
        return heat_model(check_array(X, ensure_2d=False).reshape(-1), p["n_init"], p["delta_b"],
                          p["gamma_S"], self.gamma, self.hot_source, self.cold_source,
                          self.spontaneous)


class CWHeatingFitter(RegressorMixin, BaseEstimator):
    def __init__(self, device=None, detuning="red"):
        self.device = device
        self.detuning = detuning

    def fit(self, X, y, sample_weight=None):
        if self.device is None:
            raise ParameterError("CWHeatingFitter needs device parameters")
        n_c = check_array(X, ensure_2d=False).reshape(-1)
        y = check_array(y, ensure_2d=False).reshape(-1)
        check_consistent_length(n_c, y)
        self.result_ = fit_cw_heating(np.column_stack([n_c, y]), self.device, self.detuning,
                                      sample_weight)
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        p = self.result_.params
        return cw_occupancy(check_array(X, ensure_2d=False).reshape(-1), self.device,
                            p["cw_alpha"], p["cw_beta"], p["cw_theta"], p["n_0"], self.detuning)


class G0Extractor(BaseEstimator):
    """``fit(n_c, [[red, blue], ...])``; ``predict(n_c)`` returns ``gamma_OM``."""

    def __init__(self, device=None):
        self.device = device

    def fit(self, X, y):
        if self.device is None:
            raise ParameterError("G0Extractor needs device parameters")
        n_c = check_array(X, ensure_2d=False).reshape(-1)
        y = check_array(y)
        check_consistent_length(n_c, y)
        if y.shape[1] != 2:
            raise ParameterError("y must have columns (linewidth_red, linewidth_blue)")
        self.result_ = extract_g0(np.column_stack([n_c, y]), self.device)
        self.g0_ = self.result_.params["g0"]
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        n_c = check_array(X, ensure_2d=False).reshape(-1)
        return 4.0 * self.g0_**2 * n_c / self.device.kappa
