"""Hierarchical Bayesian logistic regression with an exponential variance prior.

    y_ij ~ Bernoulli(sigmoid(y_ij w_i . x_ij)),  w_i ~ N(0, v I),  v ~ Exp(lam)

sampled in ``gamma = log v``. Nothing is dropped from the log density; the
log-Jacobian ``gamma`` of ``v = e^gamma`` is part of the hyperprior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sshmc.core import ConstantPhiMass, HierarchicalTarget
from sshmc.errors import DomainError
from sshmc.mass import BlockDiagonalMass, ScalarMass, SpectralMass

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class HblrData:
    """Per-group feature matrices and +-1 labels."""

    features: tuple[np.ndarray, ...]
    labels: tuple[np.ndarray, ...]
    group_names: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.features) == 0:
            raise DomainError("HBLR needs at least one group")
        if len(self.features) != len(self.labels):
            raise ValueError("features and labels must have one entry per group")
        dims = {np.shape(x)[1] for x in self.features}
        if len(dims) != 1:
            raise ValueError("every group must have the same number of features")
        for x, y in zip(self.features, self.labels):
            if np.shape(x)[0] == 0:
                raise DomainError("HBLR groups must be non-empty")
            if np.shape(x)[0] != np.shape(y)[0]:
                raise ValueError("row count mismatch between features and labels")
            if not np.all(np.isin(y, (-1.0, 1.0))):
                raise ValueError("labels must be -1 or +1")

    @property
    def n_groups(self) -> int:
        return len(self.features)

    @property
    def dim(self) -> int:
        return int(np.shape(self.features[0])[1])

    @property
    def group_sizes(self) -> list[int]:
        return [int(np.shape(x)[0]) for x in self.features]


class HblrTarget(HierarchicalTarget):
    def __init__(self, data: HblrData, lam: float = 1.0):
        if not lam > 0:
            raise ValueError("exponential prior rate must be positive")
        self.data = data
        self.lam = float(lam)
        self.d = data.dim
        self.G = data.n_groups
        self.n = self.G * self.d
        self.m = 1
        # rows pre-multiplied by their label: margin_ij = w_i . (y_ij x_ij)
        self._signed = [np.asarray(y, float)[:, None] * np.asarray(x, float) for x, y in zip(data.features, data.labels)]

    def theta_names(self):
        return [f"w{i}_{k}" for i in range(self.G) for k in range(self.d)]

    def phi_names(self):
        return ["gamma"]

    def _blocks(self, theta):
        return np.reshape(theta, (self.G, self.d))

    def log_lik(self, theta):
        w = self._blocks(theta)
        total = 0.0
        for i, z in enumerate(self._signed):
            total -= float(np.sum(np.logaddexp(0.0, -(z @ w[i]))))
        return total

    def log_prior_theta(self, theta, phi):
        g = phi[0]
        return -0.5 * self.n * (LOG_2PI + g) - 0.5 * np.exp(-g) * float(theta @ theta)

    def log_hyperprior(self, phi):
        g = phi[0]
        return np.log(self.lam) - self.lam * np.exp(g) + g

    def grad_theta(self, theta, phi):
        w = self._blocks(theta)
        out = np.empty_like(w)
        for i, z in enumerate(self._signed):
            # d/dw log sigmoid(z.w) = z * sigmoid(-z.w)
            out[i] = z.T @ _sigmoid(-(z @ w[i]))
        return out.ravel() - np.exp(-phi[0]) * theta

    def grad_phi(self, theta, phi):
        g = phi[0]
        return np.array([-0.5 * self.n + 0.5 * np.exp(-g) * float(theta @ theta) - self.lam * np.exp(g) + 1.0])

    def initial_phi(self):
        # log of the prior mean of v
        return np.array([-np.log(self.lam)])


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class HblrMass(ConstantPhiMass):
    """Per-group ``0.25 X_i^T X_i + e^{-gamma} I`` with a constant scalar gamma-mass.

    ``0.25 X^T X`` bounds the logistic Hessian; the spectral factorization of
    each group's Gram matrix is computed once, so every ``gamma`` costs O(d^2).
    """

    def __init__(self, data: HblrData, phi_mass: float):
        super().__init__(ScalarMass(phi_mass, 1))
        self.d = data.dim
        self._eig = []
        for x in data.features:
            x = np.asarray(x, float)
            vals, vecs = np.linalg.eigh(0.25 * x.T @ x)
            self._eig.append((vecs, np.clip(vals, 0.0, None)))

    def mass_theta(self, phi):
        shift = np.exp(-phi[0])
        return BlockDiagonalMass([SpectralMass(vecs, vals + shift) for vecs, vals in self._eig])

    def grad_aux_theta(self, phi, r_theta):
        shift = np.exp(-phi[0])
        r = np.reshape(r_theta, (len(self._eig), self.d))
        quad = 0.0
        trace = 0.0
        for i, (vecs, vals) in enumerate(self._eig):
            lam = vals + shift
            proj = vecs.T @ r[i]
            # dM/dgamma = -shift I
            quad += shift * float(np.sum((proj / lam) ** 2))
            trace += float(np.sum(1.0 / lam))
        return np.array([0.5 * quad - 0.5 * shift * trace])


def make_hblr(data: HblrData, lam: float = 1.0, phi_mass: float | None = None):
    """HBLR target and mass. ``phi_mass`` defaults to ``n/2``, the expected
    curvature of the gamma-conditional."""
    target = HblrTarget(data, lam)
    if phi_mass is None:
        phi_mass = 0.5 * target.n
    return target, HblrMass(data, phi_mass)
