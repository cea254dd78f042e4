"""Acceptance criteria.

Each test prints one ``criterion N: PASS|FAIL`` line, also collected into the
terminal summary.
"""
import math
import subprocess
import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

import conftest
from phononcount import counting as C
from phononcount import dynamics as D
from phononcount import fit as FT
from phononcount import fock as F
from phononcount import noise as N
from phononcount.params import TWO_PI, gamma_om, thermal_decoherence_time

from conftest import make_det

INTEGRATION_S = 45000.0
DECAY_PERIODS_S = np.array([0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5]) * 1e-3


def report(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_criterion_01_gamma_om(dev):
    value = gamma_om(dev, 45.0) / TWO_PI
    report(1, abs(value / 205e3 - 1) <= 0.01, f"gamma_OM/2pi = {value / 1e3:.2f} kHz (205 kHz +/- 1%)")


def test_criterion_02_thermal_decoherence():
    tau = thermal_decoherence_time(TWO_PI * 328.0, 0.021)
    report(2, abs(tau / 475e-6 - 1) <= 0.01, f"tau_th = {tau * 1e6:.1f} us (475 us +/- 1%)")


def test_criterion_03_asymmetry_calibration(dev, bath, det, pulse):
    red_p = pulse.with_(bin_width=2.5e-7)
    blue_p = red_p.with_(detuning="blue")
    window = (0.0, pulse.t_pulse)
    red = C.synth_histogram(dev, bath, det, red_p, INTEGRATION_S, None, window, 0.021)
    blue = C.synth_histogram(dev, bath, det, blue_p, INTEGRATION_S, None, window, 0.021)
    n0, _ = C.initial_occupancy(red, blue, dev, det, bath)
    exact = abs(n0 - 0.021) <= 1e-10
    hits, sigmas = 0, []
    for seed in range(100):
        red = C.synth_histogram(dev, bath, det, red_p, INTEGRATION_S, 2 * seed, window, 0.021)
        blue = C.synth_histogram(dev, bath, det, blue_p, INTEGRATION_S, 2 * seed + 1, window, 0.021)
        n, sigma = C.initial_occupancy(red, blue, dev, det, bath)
        sigmas.append(sigma)
        hits += abs(n - 0.021) <= 3 * sigma
    ok = exact and hits >= 95 and max(sigmas) < 0.007
    report(3, ok, f"noiseless |n-0.021| = {abs(n0 - 0.021):.1e}; noisy within 3 sigma in {hits}/100 "
                  f"(median sigma {np.median(sigmas):.4f})")


def test_criterion_04_decay_fit():
    g0 = TWO_PI * 328.0
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        ratio = np.exp(-g0 * DECAY_PERIODS_S) * (1 + 0.05 * rng.standard_normal(DECAY_PERIODS_S.size))
        res = FT.fit_decay(np.column_stack([DECAY_PERIODS_S, ratio]))
        hits += abs(res.params["gamma_0"] - g0) <= 3 * res.stderr["gamma_0"]
    report(4, hits >= 95, f"gamma_0 within 3 sigma in {hits}/100 seeds")


def test_criterion_05_pulse_fit(dev, bath, det, pulse):
    rb = D.rates(dev, bath, pulse)
    window = (0.0, pulse.t_pulse)
    hits = 0
    for seed in range(100):
        hist = C.synth_histogram(dev, bath, det, pulse, INTEGRATION_S, seed, window)
        trace = C.occupancy_from_counts(hist, dev, det, bath)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = FT.fit_pulse_occupancy(trace, rb.gamma_total, bath.hot_source(),
                                         dev.gamma_0 * bath.n_0)
        hits += (abs(res.params["delta_b"] - bath.delta_b) <= 0.08
                 and abs(res.params["gamma_S"] - bath.gamma_S) <= TWO_PI * 29e3)
    report(5, hits >= 90, f"delta_b within 0.08 and gamma_S within 2pi*29 kHz in {hits}/100 seeds")


def test_criterion_06_fock_fidelity(dev, bath, det, pulse):
    p = pulse.with_(t_per=1e-3)
    f0 = F.fock_cell(dev, bath, det, p.with_(t_pulse=1e-10, bin_width=1e-10))[0]
    f100 = F.fock_cell(dev, bath, det, p.with_(t_pulse=1e-7, bin_width=1e-7))[0]
    ok = 0.98 <= f0 <= 0.99 and 0.80 <= f100 <= 0.90
    report(6, ok, f"F(0) = {f0:.4f} in [0.98, 0.99]; F(100 ns) = {f100:.4f} in [0.80, 0.90]")


def test_criterion_07_heralding_time(dev, bath, pulse):
    det = make_det(eta=0.055)
    t_pulses = np.linspace(1e-9, 1e-7, 100)
    sweep = F.fock_fidelity_sweep(dev, bath, det, pulse, t_pulses, [1e-3])
    ok_cells = sweep.flag != "error"
    t_min = float(np.min(sweep.t_fock[ok_cells]))
    report(7, bool(np.all(ok_cells)) and t_min >= 0.1, f"min T_Fock = {t_min * 1e3:.0f} ms at eta = 0.055")


def test_criterion_08_phase_noise(dev, det):
    s = N.s_phiphi_from_far_detuned_nep(dev, TWO_PI * 50e6, 4e-3)
    nphi = N.n_phi(dev, det, 45.0)
    ok = 6e-19 <= s <= 1e-18 and abs(nphi / 3.2e-5 - 1) <= 0.05
    report(8, ok, f"S_phiphi = {s:.3g} /Hz in [6e-19, 1e-18]; n_phi(45) = {nphi:.3g} (3.2e-5 +/- 5%)")


def test_criterion_09_c_eff_region(dev, bath, pulse):
    p = pulse.with_(bin_width=1e-8)
    t_pers = np.array([1e-6, 1e-3])
    c_min = D.min_c_eff_map(dev, bath, p, t_pers, [3e-7])[:, 0]
    ok = bool(np.all(c_min >= 1.0))
    report(9, ok, f"min C_eff over a 300 ns pulse: {c_min[0]:.3f} at 1 us period, "
                  f"{c_min[1]:.3f} at 1 ms period (synthetic CW coefficients)")


PROPERTY_TESTS = [
    "test_dynamics.py::test_rate_equation_residual_device_params",
    "test_dynamics.py::test_rate_equation_residual_random",
    "test_dynamics.py::test_fixed_point_device_params",
    "test_dynamics.py::test_fixed_point_random",
    "test_counting.py::test_monte_carlo_mean_and_variance",
    "test_counting.py::test_detailed_balance_exact",
    "test_fock.py::test_f_moment_matches_quadrature",
    "test_fock.py::test_f_moment_quadrature_random",
    "test_fock.py::test_noise_map_trace_positivity_and_l1",
    "test_fock.py::test_truncation_independence",
    "test_fit.py::test_pulse_deterministic",
    "test_fit.py::test_pulse_noiseless_recovery",
    "test_fit.py::test_cw_noiseless",
    "test_fit.py::test_decay_exact",
    "test_fit.py::test_g0_exact",
]


def test_criterion_10_property_suites():
    here = Path(__file__).parent
    cmd = [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider"] + [str(here / t) for t in PROPERTY_TESTS]
    proc = subprocess.run(cmd, capture_output=True, text=True, cwd=here.parent)
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    report(10, proc.returncode == 0, f"{len(PROPERTY_TESTS)} property tests: {summary}")
