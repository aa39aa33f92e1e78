"""Targets, semi-separable masses, phase-space states and energy functions.

Conventions
-----------
The mass operator is the momentum *covariance*: ``r ~ N(0, M)``. The kinetic
term of a block is ``A(r | .) = 0.5 r^T M^{-1} r`` and the joint Hamiltonian
carries ``+0.5 log det M`` for each block, so ``exp(-H)`` integrates over the
momenta to a constant and its position marginal is the posterior.

    H = U(theta, phi) + A(r_theta | phi) + A(r_phi | theta)
          + 0.5 log det M_theta(phi) + 0.5 log det M_phi(theta)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sshmc.errors import DomainError
from sshmc.mass import MassOperator

__all__ = [
    "HierarchicalTarget",
    "SemiSeparableMass",
    "BlockState",
    "log_joint",
    "potential",
    "hamiltonian",
    "h1_energy",
    "h2_energy",
    "refresh_momenta",
]


class HierarchicalTarget:
    """Unnormalized log posterior split into likelihood, coupling and hyperprior.

    Subclasses fill in the five density methods. Terms that depend on the
    hyperparameters as well as on ``theta`` belong in ``log_prior_theta``.
    """

    n: int
    m: int

    def theta_names(self) -> list[str]:
        return [f"theta[{i}]" for i in range(self.n)]

    def phi_names(self) -> list[str]:
        return [f"phi[{j}]" for j in range(self.m)]

    def names(self) -> list[str]:
        return self.theta_names() + self.phi_names()

    def log_lik(self, theta: np.ndarray) -> float:
        raise NotImplementedError

    def log_prior_theta(self, theta: np.ndarray, phi: np.ndarray) -> float:
        raise NotImplementedError

    def log_hyperprior(self, phi: np.ndarray) -> float:
        raise NotImplementedError

    def grad_theta(self, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """Gradient in ``theta`` of ``log_lik + log_prior_theta``."""
        raise NotImplementedError

    def grad_phi(self, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """Gradient in ``phi`` of ``log_prior_theta + log_hyperprior``."""
        raise NotImplementedError

    def initial_theta(self) -> np.ndarray:
        return np.zeros(self.n)

    def initial_phi(self) -> np.ndarray:
        return np.zeros(self.m)

    def check_dims(self, theta, phi) -> None:
        if np.shape(theta) != (self.n,) or np.shape(phi) != (self.m,):
            raise ValueError(
                f"expected theta of length {self.n} and phi of length {self.m}, "
                f"got shapes {np.shape(theta)} and {np.shape(phi)}"
            )


class SemiSeparableMass:
    """Block mass whose theta-block depends only on phi and vice versa.

    The ``theta_potential``/``phi_potential`` hooks return the separable
    sub-Hamiltonian potentials. Models whose mass log-determinant cancels a
    prior normalizer override the hooks to skip the cancelled terms.
    """

    def mass_theta(self, phi: np.ndarray) -> MassOperator:
        raise NotImplementedError

    def mass_phi(self, theta: np.ndarray) -> MassOperator:
        raise NotImplementedError

    def grad_aux_theta(self, phi: np.ndarray, r_theta: np.ndarray) -> np.ndarray:
        """Gradient in ``phi`` of ``A(r_theta | phi) + 0.5 log det M_theta(phi)``."""
        raise NotImplementedError

    def grad_aux_phi(self, theta: np.ndarray, r_phi: np.ndarray) -> np.ndarray:
        """Gradient in ``theta`` of ``A(r_phi | theta) + 0.5 log det M_phi(theta)``."""
        raise NotImplementedError

    def aux_theta(self, phi, r_theta) -> float:
        mass = self.mass_theta(phi)
        return mass.quad_inv(r_theta) + 0.5 * mass.logdet()

    def aux_phi(self, theta, r_phi) -> float:
        mass = self.mass_phi(theta)
        return mass.quad_inv(r_phi) + 0.5 * mass.logdet()

    def theta_potential(self, target, theta, phi, r_phi) -> float:
        return (
            -target.log_lik(theta)
            - target.log_prior_theta(theta, phi)
            + self.aux_phi(theta, r_phi)
        )

    def theta_potential_grad(self, target, theta, phi, r_phi) -> np.ndarray:
        return -target.grad_theta(theta, phi) + self.grad_aux_phi(theta, r_phi)

    def phi_potential(self, target, theta, phi, r_theta) -> float:
        return (
            -target.log_prior_theta(theta, phi)
            - target.log_hyperprior(phi)
            + self.aux_theta(phi, r_theta)
        )

    def phi_potential_grad(self, target, theta, phi, r_theta) -> np.ndarray:
        return -target.grad_phi(theta, phi) + self.grad_aux_theta(phi, r_theta)


class ConstantPhiMass(SemiSeparableMass):
    """Helper base for models whose phi-block mass is a fixed operator."""

    def __init__(self, phi_mass: MassOperator):
        self._phi_mass = phi_mass

    def mass_phi(self, theta):
        return self._phi_mass

    def grad_aux_phi(self, theta, r_phi):
        return np.zeros(np.shape(theta))


@dataclass(frozen=True)
class BlockState:
    theta: np.ndarray
    r_theta: np.ndarray
    phi: np.ndarray
    r_phi: np.ndarray

    def __post_init__(self):
        for name in ("theta", "r_theta", "phi", "r_phi"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 1:
                raise ValueError(f"{name} must be one-dimensional")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.theta.shape != self.r_theta.shape or self.phi.shape != self.r_phi.shape:
            raise ValueError("position and momentum blocks must have equal lengths")

    @property
    def n(self) -> int:
        return self.theta.size

    @property
    def m(self) -> int:
        return self.phi.size

    def flip(self) -> "BlockState":
        """Negate both momentum blocks."""
        return BlockState(self.theta, -self.r_theta, self.phi, -self.r_phi)

    def replace(self, **kw) -> "BlockState":
        fields = dict(theta=self.theta, r_theta=self.r_theta, phi=self.phi, r_phi=self.r_phi)
        fields.update(kw)
        return BlockState(**fields)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.theta, self.r_theta, self.phi, self.r_phi])

    @classmethod
    def from_vector(cls, vec, n: int, m: int) -> "BlockState":
        vec = np.asarray(vec, dtype=float)
        return cls(vec[:n], vec[n : 2 * n], vec[2 * n : 2 * n + m], vec[2 * n + m :])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.to_vector())))


def log_joint(target: HierarchicalTarget, theta, phi) -> float:
    """Unnormalized log posterior ``log p(theta, phi | data)``."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    target.check_dims(theta, phi)
    value = target.log_lik(theta) + target.log_prior_theta(theta, phi) + target.log_hyperprior(phi)
    if not np.isfinite(value):
        raise DomainError("log density is not finite at this point")
    return float(value)


def potential(target: HierarchicalTarget, theta, phi) -> float:
    return -log_joint(target, theta, phi)


def h1_energy(target, mass: SemiSeparableMass, s: BlockState) -> tuple[float, float]:
    """Potential and kinetic parts of the theta-block sub-Hamiltonian."""
    u1 = mass.theta_potential(target, s.theta, s.phi, s.r_phi)
    k1 = mass.mass_theta(s.phi).quad_inv(s.r_theta)
    return float(u1), float(k1)


def h2_energy(target, mass: SemiSeparableMass, s: BlockState) -> tuple[float, float]:
    """Potential and kinetic parts of the phi-block sub-Hamiltonian."""
    u2 = mass.phi_potential(target, s.theta, s.phi, s.r_theta)
    k2 = mass.mass_phi(s.theta).quad_inv(s.r_phi)
    return float(u2), float(k2)


def hamiltonian(target, mass: SemiSeparableMass, s: BlockState) -> float:
    """Joint semi-separable Hamiltonian.

    Assembled as ``U2 + K2 - log_lik + 0.5 log det M_phi`` so that model
    overrides of the phi-block potential (and their cancellations) carry over.
    """
    target.check_dims(s.theta, s.phi)
    u2, k2 = h2_energy(target, mass, s)
    value = u2 + k2 - target.log_lik(s.theta) + 0.5 * mass.mass_phi(s.theta).logdet()
    if not np.isfinite(value):
        raise DomainError("Hamiltonian is not finite at this point")
    return float(value)


def refresh_momenta(mass: SemiSeparableMass, theta, phi, rng: np.random.Generator):
    """Draw ``r_theta ~ N(0, M_theta(phi))`` then ``r_phi ~ N(0, M_phi(theta))``."""
    r_theta = mass.mass_theta(phi).draw(rng)
    r_phi = mass.mass_phi(theta).draw(rng)
    return r_theta, r_phi
