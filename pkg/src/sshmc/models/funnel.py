"""Gaussian funnel: x_i ~ N(0, e^{-v}), v ~ N(0, 3^2).

No constants are dropped: the log density is the exact normalized one.
"""

from __future__ import annotations

import numpy as np

from sshmc.core import ConstantPhiMass, HierarchicalTarget
from sshmc.mass import ScalarMass

LOG_2PI = np.log(2.0 * np.pi)
V_SCALE = 3.0


class FunnelTarget(HierarchicalTarget):
    def __init__(self, n: int):
        if n < 1:
            raise ValueError("funnel dimension must be at least 1")
        self.n = int(n)
        self.m = 1

    def theta_names(self):
        return [f"x{i + 1}" for i in range(self.n)]

    def phi_names(self):
        return ["v"]

    def log_lik(self, theta):
        return 0.0

    def initial_theta(self):
        # |x_i| = e^{-v/2} at v = 0 balances the v gradient; x = 0 sends plain
        # HMC trajectories up the neck until they diverge
        return np.where(np.arange(self.n) % 2 == 0, 1.0, -1.0)

    def log_prior_theta(self, theta, phi):
        v = phi[0]
        return -0.5 * self.n * LOG_2PI + 0.5 * self.n * v - 0.5 * np.exp(v) * float(theta @ theta)

    def log_hyperprior(self, phi):
        v = phi[0]
        return -0.5 * LOG_2PI - np.log(V_SCALE) - 0.5 * v * v / V_SCALE**2

    def grad_theta(self, theta, phi):
        return -np.exp(phi[0]) * theta

    def grad_phi(self, theta, phi):
        v = phi[0]
        return np.array([0.5 * self.n - 0.5 * np.exp(v) * float(theta @ theta) - v / V_SCALE**2])


class FunnelMass(ConstantPhiMass):
    """``M_x(v) = e^v I`` and a constant scalar mass for ``v``.

    With this ``M_x`` the ``n v / 2`` from ``0.5 log det M_x`` cancels the
    prior normalizer of ``x``, which the phi-block potential uses directly.
    """

    def __init__(self, n: int, phi_mass: float | None = None):
        self.n = int(n)
        if phi_mass is None:
            phi_mass = 1.0 / (self.n + 1.0 / V_SCALE**2)
        super().__init__(ScalarMass(phi_mass, 1))

    def mass_theta(self, phi):
        return ScalarMass(np.exp(phi[0]), self.n)

    def grad_aux_theta(self, phi, r_theta):
        v = phi[0]
        return np.array([-0.5 * np.exp(-v) * float(r_theta @ r_theta) + 0.5 * self.n])

    def phi_potential(self, target, theta, phi, r_theta):
        v = phi[0]
        return (
            0.5 * np.exp(v) * float(theta @ theta)
            + 0.5 * np.exp(-v) * float(r_theta @ r_theta)
            + 0.5 * self.n * LOG_2PI
            - target.log_hyperprior(phi)
        )

    def phi_potential_grad(self, target, theta, phi, r_theta):
        v = phi[0]
        return np.array(
            [
                0.5 * np.exp(v) * float(theta @ theta)
                - 0.5 * np.exp(-v) * float(r_theta @ r_theta)
                + v / V_SCALE**2
            ]
        )


def make_funnel(n: int, phi_mass: float | None = None):
    """Funnel target and its semi-separable mass.

    ``phi_mass`` defaults to ``1 / (n + 1/9)``.
    """
    return FunnelTarget(n), FunnelMass(n, phi_mass)
