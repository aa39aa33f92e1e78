"""Two-level Gaussian model with a closed-form posterior.

    y_i ~ N(theta_i, s^2),  theta_i ~ N(phi, tau^2),  phi ~ N(0, kappa^2)

Used as an exactness check for the samplers.
"""

from __future__ import annotations

import numpy as np

from sshmc.core import ConstantPhiMass, HierarchicalTarget
from sshmc.mass import ScalarMass

LOG_2PI = np.log(2.0 * np.pi)


def _log_normal(x, mean, var):
    x = np.asarray(x, dtype=float)
    return float(np.sum(-0.5 * (LOG_2PI + np.log(var)) - 0.5 * (x - mean) ** 2 / var))


class GaussianToyTarget(HierarchicalTarget):
    def __init__(self, y, s: float = 1.0, tau: float = 1.0, kappa: float = 2.0):
        self.y = np.asarray(y, dtype=float)
        if self.y.ndim != 1 or self.y.size < 1:
            raise ValueError("need at least one observation")
        if not (s > 0 and tau > 0 and kappa > 0):
            raise ValueError("scales must be positive")
        self.s2, self.tau2, self.kappa2 = s * s, tau * tau, kappa * kappa
        self.n = self.y.size
        self.m = 1

    def phi_names(self):
        return ["mu"]

    def log_lik(self, theta):
        return _log_normal(self.y, theta, self.s2)

    def log_prior_theta(self, theta, phi):
        return _log_normal(theta, phi[0], self.tau2)

    def log_hyperprior(self, phi):
        return _log_normal(phi, 0.0, self.kappa2)

    def grad_theta(self, theta, phi):
        return (self.y - theta) / self.s2 - (theta - phi[0]) / self.tau2

    def grad_phi(self, theta, phi):
        return np.array([float(np.sum(theta - phi[0])) / self.tau2 - phi[0] / self.kappa2])

    def posterior_moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Mean and covariance of ``(theta, phi)``."""
        n = self.n
        prec = np.zeros((n + 1, n + 1))
        prec[:n, :n] = np.eye(n) * (1.0 / self.s2 + 1.0 / self.tau2)
        prec[:n, n] = prec[n, :n] = -1.0 / self.tau2
        prec[n, n] = n / self.tau2 + 1.0 / self.kappa2
        rhs = np.concatenate([self.y / self.s2, [0.0]])
        cov = np.linalg.inv(prec)
        return cov @ rhs, cov


class GaussianToyMass(ConstantPhiMass):
    """Constant masses equal to the conditional precisions."""

    def __init__(self, target: GaussianToyTarget):
        super().__init__(ScalarMass(target.n / target.tau2 + 1.0 / target.kappa2, 1))
        self._theta_mass = ScalarMass(1.0 / target.s2 + 1.0 / target.tau2, target.n)

    def mass_theta(self, phi):
        return self._theta_mass

    def grad_aux_theta(self, phi, r_theta):
        return np.zeros(np.shape(phi))


def make_gaussian_toy(y, s: float = 1.0, tau: float = 1.0, kappa: float = 2.0):
    target = GaussianToyTarget(y, s, tau, kappa)
    return target, GaussianToyMass(target)
