import numpy as np
import pytest

from cfmaxmin.channel import PilotAssignment, draw_realizations, estimate_channels, pilot_observations
from cfmaxmin.geometry import local_scattering_correlation


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def frob_rel(A, B):
    return np.linalg.norm(A - B) / np.linalg.norm(B)


def sample_cov(x):
    """Sample covariance E{x x^H} of rows of ``x`` (zero-mean model)."""
    return x.T @ x.conj() / x.shape[0]


class SharedPilotSetup:
    """Two UEs on one pilot, one AP with N = 2 antennas."""

    def __init__(self, n_real=10_000, seed=7):
        self.N, self.K, self.L = 2, 2, 1
        self.sigma2 = 0.3
        self.p = np.array([1.0, 0.6])
        self.assignment = PilotAssignment(1, np.array([0, 0]))
        R = np.empty((2, 1, 2, 2), dtype=complex)
        R[0, 0] = local_scattering_correlation(1.0, 0.4, np.radians(15), 2)
        R[1, 0] = local_scattering_correlation(0.5, -1.0, np.radians(25), 2)
        self.R = R
        self.h, w = draw_realizations(R, n_real, 1, seed, key=(0,))
        self.z = pilot_observations(self.h, w, self.assignment, self.p, self.sigma2)
        self.est = estimate_channels(self.z, self.assignment, self.p, R, self.sigma2)


@pytest.fixture(scope="session")
def shared_pilot():
    return SharedPilotSetup()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
