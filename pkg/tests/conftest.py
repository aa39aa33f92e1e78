import numpy as np
import pytest

from sshmc.core import ConstantPhiMass, HierarchicalTarget
from sshmc.mass import ScalarMass, identity_mass


class FreeTarget(HierarchicalTarget):
    """Flat density: every gradient is zero."""

    def __init__(self, n, m):
        self.n, self.m = n, m

    def log_lik(self, theta):
        return 0.0

    def log_prior_theta(self, theta, phi):
        return 0.0

    def log_hyperprior(self, phi):
        return 0.0

    def grad_theta(self, theta, phi):
        return np.zeros(self.n)

    def grad_phi(self, theta, phi):
        return np.zeros(self.m)


class ConstantMass(ConstantPhiMass):
    def __init__(self, n, m, theta_scale=1.0, phi_scale=1.0):
        super().__init__(ScalarMass(phi_scale, m))
        self._theta = ScalarMass(theta_scale, n)

    def mass_theta(self, phi):
        return self._theta

    def grad_aux_theta(self, phi, r_theta):
        return np.zeros(np.shape(phi))


class IndependentGaussian(HierarchicalTarget):
    """theta ~ N(0, I_n), phi ~ N(0, I_m), no coupling."""

    def __init__(self, n=1, m=1):
        self.n, self.m = n, m

    def log_lik(self, theta):
        return 0.0

    def log_prior_theta(self, theta, phi):
        return float(-0.5 * theta @ theta - 0.5 * self.n * np.log(2 * np.pi))

    def log_hyperprior(self, phi):
        return float(-0.5 * phi @ phi - 0.5 * self.m * np.log(2 * np.pi))

    def grad_theta(self, theta, phi):
        return -np.asarray(theta, float)

    def grad_phi(self, theta, phi):
        return -np.asarray(phi, float)


@pytest.fixture
def free_system():
    return FreeTarget(3, 2), ConstantMass(3, 2)


@pytest.fixture
def gaussian_system():
    return IndependentGaussian(1, 1), ConstantMass(1, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def identity_pair(n, m):
    return identity_mass(n), identity_mass(m)
