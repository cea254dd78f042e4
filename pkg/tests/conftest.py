import numpy as np
import pytest

from phononcount.params import (TWO_PI, BathParams, DetectionParams, DeviceParams, PulseParams,
                                default_config)


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def dev(cfg):
    return cfg.device


@pytest.fixture(scope="session")
def bath(cfg):
    return cfg.bath


@pytest.fixture(scope="session")
def det(cfg):
    return cfg.detection


@pytest.fixture(scope="session")
def pulse(cfg):
    return cfg.pulse


@pytest.fixture
def toy_dev():
    return DeviceParams.from_hz(710e3, 443e6, 221.5e6, 5.6e9, 328.0)


def make_bath(**kw):
    base = dict(gamma_p=TWO_PI * 211e3, n_p=1.5, n_0=0.0135, delta_b=0.79, gamma_S=TWO_PI * 215e3)
    base.update(kw)
    return BathParams(**base)


def make_pulse(**kw):
    base = dict(detuning="red", n_c_on=45.0, n_c_off=4.5e-5, t_pulse=5e-6, t_per=5e-3)
    base.update(kw)
    return PulseParams(**base)


def make_det(**kw):
    base = dict(eta=0.003, gamma_dark=4.0, pump_attenuation_A=1e-12, s_phiphi=0.0)
    base.update(kw)
    return DetectionParams(**base)


def rel(a, b):
    return np.max(np.abs(np.asarray(a) - np.asarray(b)) / np.maximum(np.abs(b), 1e-300))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
