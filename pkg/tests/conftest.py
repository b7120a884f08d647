import numpy as np
import pytest
from hypothesis import settings

from plasmosense.bem import np_spectrum
from plasmosense.geometry import make_ellipse, make_fourier_shape

settings.register_profile("default", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("default")


@pytest.fixture(scope="session")
def d2_spectrum():
    """The plasmonic particle used throughout: ellipse a=1, b=2, J=20 modes."""
    return np_spectrum(make_ellipse(1.0, 2.0, n=256), J=20)


@pytest.fixture(scope="session")
def shape_b():
    """An asymmetric star-shaped reference particle B (unit scale)."""
    return make_fourier_shape(1.0, [0.1, 0.05, 0.2], [0.03, -0.1], n=128)


def random_fourier(rng, n=128, modes=4, amp=0.08):
    cos = rng.uniform(-amp, amp, modes)
    sin = rng.uniform(-amp, amp, modes)
    cos[0] = sin[0] = 0.0
    return make_fourier_shape(1.0, cos, sin, n=n)


def loglog_slope(deltas, errors):
    return np.polyfit(np.log(deltas), np.log(errors), 1)[0]


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
