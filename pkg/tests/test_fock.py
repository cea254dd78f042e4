import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from phononcount import fock as F
from phononcount.exceptions import TruncationError, ValidityError
from phononcount.params import TWO_PI, gamma_om

from conftest import make_bath, make_det, make_pulse


def _f_moment_quad(dev, bath, pulse, tau):
    a = gamma_om(dev, pulse.n_c_on)

    def drive(s):
        n_b = dev.gamma_0 * bath.n_0 + bath.gamma_p * bath.n_p * (1 - bath.delta_b * math.exp(-bath.gamma_S * s))
        return math.exp(a * (tau - s)) * n_b

    return integrate.quad(drive, 0, tau, epsabs=0, epsrel=1e-13)[0]


def test_f_moment_matches_quadrature(dev, bath, pulse):
    for tau in (1e-9, 5e-8, 1e-7, 1e-6):
        assert F.f_moment(dev, bath, pulse, tau) == pytest.approx(_f_moment_quad(dev, bath, pulse, tau), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(tau=st.floats(1e-9, 1e-6), delta_b=st.floats(0, 1), gs=st.floats(1e4, 1e7), n_p=st.floats(0, 10))
def test_f_moment_quadrature_random(dev, tau, delta_b, gs, n_p):
    bath = make_bath(delta_b=delta_b, gamma_S=gs, n_p=n_p)
    pulse = make_pulse(detuning="blue")
    expect = _f_moment_quad(dev, bath, pulse, tau)
    got = F.f_moment(dev, bath, pulse, tau)
    assert got == pytest.approx(expect, rel=1e-10, abs=1e-300)


def test_thermal_state():
    s = F.thermal_state(1.0)
    assert s.weights[:5] == pytest.approx(0.5 ** np.arange(1, 6), rel=1e-9)
    assert s.trace == pytest.approx(1.0, abs=1e-15)
    assert s.mean == pytest.approx(1.0, rel=1e-9)
    assert s.weights[-1] < F.TAIL_TOL
    assert F.thermal_state(0.0).weights[0] == 1.0
    big = F.thermal_state(20.0)
    assert big.dim > F.DEFAULT_DIM and big.mean == pytest.approx(20.0, rel=1e-9)
    with pytest.raises(TruncationError):
        F.thermal_state(1.0, dim=10)
    with pytest.raises(ValueError):
        F.thermal_state(-0.1)


IDEAL = F.PulseInteraction(gamma_om_tau=0.05, gamma_b_tau=0.0, f_moment=0.0)


def test_ground_state_addition():
    state, prob = F.conditional_state(F.FockState.fock(0, 4), IDEAL, "blue")
    assert state.weights[1] == pytest.approx(1.0)
    assert prob == pytest.approx(0.05)
    assert F.fidelity(state, F.FockState.fock(1)) == pytest.approx(1.0)


def test_red_subtraction_hand_case():
    state, prob = F.conditional_state(F.FockState(np.array([0.5, 0.3, 0.2])), IDEAL, "red")
    assert state.weights[:2] == pytest.approx([0.3 / 0.7, 0.4 / 0.7])
    assert prob == pytest.approx(0.05 * 0.7)


@pytest.mark.parametrize("nbar", [0.02, 0.3, 2.0])
def test_thermal_conditional_means(nbar):
    th = F.thermal_state(nbar)
    red, _ = F.conditional_state(th, IDEAL, "red")
    blue, _ = F.conditional_state(th, IDEAL, "blue")
    assert red.mean == pytest.approx(2 * nbar, rel=1e-9)
    assert blue.mean == pytest.approx(2 * nbar + 1, rel=1e-9)
    assert F.fidelity(blue, F.FockState.fock(1)) == pytest.approx(1 / (1 + nbar), rel=1e-9)


def test_herald_probability_without_spontaneous_term():
    th = F.thermal_state(0.5)
    _, p = F.conditional_state(th, IDEAL, "blue")
    _, p_strict = F.conditional_state(th, IDEAL, "blue", spontaneous_herald=False)
    assert p == pytest.approx(0.05 * 1.5) and p_strict == pytest.approx(0.05 * 0.5)


def test_ground_state_subtraction_refused():
    with pytest.raises(Exception, match="no phonon"):
        F.conditional_state(F.FockState.fock(0, 3), IDEAL, "red")


@pytest.mark.filterwarnings("ignore:clipping")
@settings(max_examples=60, deadline=None)
@given(nbar=st.floats(0, 0.5), g=st.floats(0, 0.05), f=st.floats(0, 0.05), d=st.sampled_from(["red", "blue"]))
def test_noise_map_trace_positivity_and_l1(nbar, g, f, d):
    if d == "red" and nbar == 0:
        return
    th = F.thermal_state(nbar)
    noisy = F.PulseInteraction(0.05, g, f)
    ideal, _ = F.conditional_state(th, IDEAL, d)
    try:
        state, _ = F.conditional_state(th, noisy, d)
    except ValidityError:
        return  # negative populations are reported, never returned
    assert np.all(state.weights >= 0)
    assert state.trace == pytest.approx(1.0, abs=1e-12)
    assert state.trace_defect < 1e-12
    size = max(state.weights.size, ideal.weights.size)
    a = np.pad(state.weights, (0, size - state.weights.size))
    b = np.pad(ideal.weights, (0, size - ideal.weights.size))
    assert np.abs(a - b).sum() <= 2 * (f + (g + 2 * f) * ideal.mean) + 1e-12


def test_truncation_independence(dev, bath, pulse):
    p = pulse.with_(detuning="blue", t_pulse=5e-8, t_per=1e-3)
    inter = F.pulse_interaction(dev, bath, p, 5e-8)
    a, _ = F.conditional_state(F.thermal_state(0.05), inter, "blue")
    b, _ = F.conditional_state(F.thermal_state(0.05, dim=200), inter, "blue")
    target = F.FockState.fock(1)
    assert abs(F.fidelity(a, target) - F.fidelity(b, target)) < 1e-9


def test_fidelity_properties():
    a = F.thermal_state(0.4)
    b = F.thermal_state(0.1)
    assert F.fidelity(a, a) == pytest.approx(1.0)
    assert F.fidelity(a, b) == pytest.approx(F.fidelity(b, a))
    assert 0 <= F.fidelity(a, b) < 1
    assert F.fidelity(F.FockState.fock(1), F.FockState.fock(2)) == 0.0


def test_validity_levels():
    assert F.PulseInteraction(0.05, 0.01, 0.01).validity() == "ok"
    assert F.PulseInteraction(0.2, 0.01, 0.01).validity() == "warn"
    with pytest.raises(ValidityError):
        F.PulseInteraction(0.05, 0.01, 0.5).validity()


def test_fock_cell_limits(dev, bath, det, pulse):
    p = pulse.with_(t_per=1e-3, t_pulse=1e-9, bin_width=1e-9)
    fid, t_fock, defect, flag = F.fock_cell(dev, bath, det, p)
    assert fid > 0.98 and flag == "ok" and defect < 1e-12
    assert t_fock > 0


def test_sweep_marks_errors_and_orders(dev, bath, det, pulse):
    t_pulses = np.array([1e-8, 5e-8, 1e-7, 1e-4])
    t_pers = np.array([1e-3, 2e-3])
    sweep = F.fock_fidelity_sweep(dev, bath, det, pulse, t_pulses, t_pers)
    assert sweep.fidelity.shape == (4, 2)
    assert np.all(sweep.flag[-1] == "error") and np.all(np.isnan(sweep.fidelity[-1]))
    assert np.all(np.diff(sweep.fidelity[:-1], axis=0) <= 0)
    rev = F.fock_fidelity_sweep(dev, bath, det, pulse, t_pulses[::-1], t_pers[::-1])
    assert np.array_equal(rev.fidelity[::-1, ::-1], sweep.fidelity, equal_nan=True)
    cell = F.fock_cell(dev, bath, det, pulse.with_(t_pulse=5e-8, t_per=2e-3))
    assert sweep.fidelity[1, 1] == cell[0] and sweep.t_fock[1, 1] == cell[1]


def test_heralding_time_scales_with_eta(dev, bath, pulse):
    p = pulse.with_(t_pulse=5e-8, t_per=1e-3)
    a = F.fock_cell(dev, bath, make_det(eta=0.055), p)[1]
    b = F.fock_cell(dev, bath, make_det(eta=0.0055), p)[1]
    assert b == pytest.approx(10 * a, rel=1e-12)
