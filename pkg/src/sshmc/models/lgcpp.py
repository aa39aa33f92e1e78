"""Log-Gaussian Cox process on a ``d x d`` grid of the unit square.

    y_ij ~ Poisson(m exp(x_ij)),  m = 1/d^2
    x ~ N(mu 1, Sigma),  Sigma[(i,j),(i',j')] = sigma^2 exp(-delta / (beta d))

with ``delta`` the Euclidean distance in grid units. Hyperparameters are
sampled as ``(log sigma, log beta)`` with independent normal priors
(default scale 1.5). ``log_lik`` drops ``-sum log y_ij!``, which depends on
neither block.

The momentum mass of the latent block is ``Sigma^{-1}``, so its half
log-determinant ``-0.5 log det Sigma`` cancels the prior normalizer in the
hyperparameter potential. ``LgcppMass.phi_potential`` is written without
either term; ``LgcppTarget.logdet_evaluations`` counts every log-determinant
of ``Sigma`` so the cancellation can be checked.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from sshmc.core import ConstantPhiMass, HierarchicalTarget
from sshmc.errors import DomainError, NotPositiveDefiniteError
from sshmc.mass import InverseDenseMass, identity_mass

LOG_2PI = np.log(2.0 * np.pi)


def grid_distances(d: int) -> np.ndarray:
    """Pairwise Euclidean distances between cells of a ``d x d`` grid (row-major)."""
    i, j = np.divmod(np.arange(d * d), d)
    return np.hypot(i[:, None] - i[None, :], j[:, None] - j[None, :])


def covariance(d: int, sigma: float, beta: float, dist: np.ndarray | None = None) -> np.ndarray:
    if not (sigma > 0 and beta > 0):
        raise DomainError("sigma and beta must be positive")
    if dist is None:
        dist = grid_distances(d)
    return sigma**2 * np.exp(-dist / (beta * d))


def default_mu(sigma: float, total: float = 126.0) -> float:
    """Prior mean giving ``total`` expected points over the unit square."""
    return float(np.log(total) - 0.5 * sigma**2)


class _Factor:
    """Covariance, its Cholesky factor and the derivative in ``log beta``."""

    __slots__ = ("key", "cov", "chol", "d_beta", "_inv")

    def __init__(self, key, cov, chol, d_beta):
        self.key = key
        self.cov = cov
        self.chol = chol
        self.d_beta = d_beta
        self._inv = None

    def solve(self, v):
        return cho_solve((self.chol, True), v, check_finite=False)

    def inverse(self):
        if self._inv is None:
            self._inv = self.solve(np.eye(self.cov.shape[0]))
        return self._inv


class LgcppTarget(HierarchicalTarget):
    def __init__(self, d: int, y, mu: float, prior_scale: float = 1.5):
        if d < 2:
            raise ValueError("grid side must be at least 2")
        y = np.asarray(y, dtype=float).ravel()
        if y.size != d * d:
            raise ValueError(f"expected {d * d} counts, got {y.size}")
        if np.any(y < 0) or np.any(y != np.round(y)):
            raise ValueError("counts must be nonnegative integers")
        if not prior_scale > 0:
            raise ValueError("prior scale must be positive")
        self.d = int(d)
        self.y = y
        self.mu = float(mu)
        self.prior_scale = float(prior_scale)
        self.n = d * d
        self.m = 2
        self.cell_area = 1.0 / (d * d)
        self.dist = grid_distances(d)
        self._scaled_dist = self.dist / d
        self._cache: _Factor | None = None
        self.logdet_evaluations = 0

    def theta_names(self):
        return [f"x{i}_{j}" for i in range(self.d) for j in range(self.d)]

    def phi_names(self):
        return ["log_sigma", "log_beta"]

    def factor(self, phi) -> _Factor:
        """Factorization of ``Sigma(phi)``, cached on the exact value of ``phi``."""
        phi = np.asarray(phi, dtype=float)
        key = phi.tobytes()
        if self._cache is not None and self._cache.key == key:
            return self._cache
        sigma, beta = np.exp(phi[0]), np.exp(phi[1])
        if not (np.isfinite(sigma) and np.isfinite(beta) and sigma > 0 and beta > 0):
            raise DomainError("covariance hyperparameters out of range")
        cov = sigma**2 * np.exp(-self._scaled_dist / beta)
        try:
            chol = cholesky(cov, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError("covariance is not positive definite") from exc
        if not np.all(np.diag(chol) > 0):
            raise NotPositiveDefiniteError("covariance is not positive definite")
        self._cache = _Factor(key, cov, chol, cov * (self._scaled_dist / beta))
        return self._cache

    def logdet_sigma(self, phi) -> float:
        self.logdet_evaluations += 1
        return 2.0 * float(np.sum(np.log(np.diag(self.factor(phi).chol))))

    def prior_quadratic(self, theta, phi) -> float:
        """``(x - mu)^T Sigma^{-1} (x - mu)``."""
        z = solve_triangular(self.factor(phi).chol, theta - self.mu, lower=True, check_finite=False)
        return float(z @ z)

    def log_lik(self, theta):
        return float(self.y @ theta - self.cell_area * np.sum(np.exp(theta)))

    def log_prior_theta(self, theta, phi):
        return -0.5 * (self.n * LOG_2PI + self.logdet_sigma(phi) + self.prior_quadratic(theta, phi))

    def log_hyperprior(self, phi):
        s = self.prior_scale
        return float(-LOG_2PI - 2.0 * np.log(s) - 0.5 * (phi @ phi) / s**2)

    def grad_theta(self, theta, phi):
        return self.y - self.cell_area * np.exp(theta) - self.factor(phi).solve(theta - self.mu)

    def grad_phi(self, theta, phi):
        f = self.factor(phi)
        a = theta - self.mu
        b = f.solve(a)
        # d Sigma / d log sigma = 2 Sigma, so its trace term is 2N / 2
        g_sigma = float(a @ b) - self.n
        g_beta = 0.5 * float(b @ (f.d_beta @ b)) - 0.5 * float(np.sum(f.inverse() * f.d_beta))
        return np.array([g_sigma, g_beta]) - phi / self.prior_scale**2

    def initial_theta(self):
        # smoothed empirical log intensity; a flat start pulls beta towards
        # smooth fields where Sigma is badly conditioned
        return np.log((self.y + 0.5) / self.cell_area)

    def initial_phi(self):
        # unit scale, correlation length of one cell
        return np.array([0.0, -np.log(self.d)])


class LgcppMass(ConstantPhiMass):
    """``M_x = Sigma(phi)^{-1}`` and the identity for ``(log sigma, log beta)``."""

    def __init__(self, target: LgcppTarget):
        super().__init__(identity_mass(2))
        self.target = target

    def mass_theta(self, phi):
        f = self.target.factor(phi)
        return InverseDenseMass(f.cov, chol=f.chol)

    def grad_aux_theta(self, phi, r_theta):
        # A = 0.5 r^T Sigma r, 0.5 log det M_x = -0.5 log det Sigma
        f = self.target.factor(phi)
        sr = f.cov @ r_theta
        g_sigma = float(r_theta @ sr) - self.target.n
        g_beta = 0.5 * float(r_theta @ (f.d_beta @ r_theta)) - 0.5 * float(np.sum(f.inverse() * f.d_beta))
        return np.array([g_sigma, g_beta])

    def phi_potential(self, target, theta, phi, r_theta):
        f = target.factor(phi)
        return (
            0.5 * target.prior_quadratic(theta, phi)
            + 0.5 * target.n * LOG_2PI
            + 0.5 * float(r_theta @ (f.cov @ r_theta))
            - target.log_hyperprior(phi)
        )

    def phi_potential_grad(self, target, theta, phi, r_theta):
        f = target.factor(phi)
        b = f.solve(theta - target.mu)
        sr = f.cov @ r_theta
        g_sigma = -float(b @ (f.cov @ b)) + float(r_theta @ sr)
        g_beta = -0.5 * float(b @ (f.d_beta @ b)) + 0.5 * float(r_theta @ (f.d_beta @ r_theta))
        return np.array([g_sigma, g_beta]) + phi / target.prior_scale**2


def make_lgcpp(d: int, y, mu: float, prior_scale: float = 1.5):
    target = LgcppTarget(d, y, mu, prior_scale)
    return target, LgcppMass(target)


def gen_lgcpp_data(d: int, sigma: float, beta: float, mu: float, rng: np.random.Generator):
    """Draw ``x ~ N(mu 1, Sigma)`` and Poisson counts; returns ``(y, x)`` as flat arrays."""
    cov = covariance(d, sigma, beta)
    try:
        chol = cholesky(cov, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("covariance is not positive definite") from exc
    x = mu + chol @ rng.standard_normal(d * d)
    y = rng.poisson(np.exp(x) / (d * d)).astype(float)
    return y, x
