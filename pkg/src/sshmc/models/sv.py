"""Stochastic volatility with an AR(1) log-volatility.

    y_t = eps_t * beta * exp(x_t / 2),        eps_t ~ N(0, 1)
    x_1 ~ N(0, sigma^2 / (1 - phi^2)),  x_{t+1} = phi x_t + eta_{t+1},  eta ~ N(0, sigma^2)

Priors: ``p(beta) ∝ 1/beta``, ``sigma^2 ~ scaled-Inv-chi^2(10, 0.05)``,
``(phi + 1)/2 ~ Beta(20, 1.5)``. Hyperparameters are sampled as
``(log beta, log sigma^2, atanh phi)`` and the hyperprior includes each
log-Jacobian. The improper ``1/beta`` prior is flat in ``log beta``, so it
contributes nothing. The observation density depends on ``beta`` and is
therefore carried by ``log_prior_theta``; ``log_lik`` keeps the ``beta``-free
part ``-0.5 log(2 pi) - x_t / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, gammaln

from sshmc.core import ConstantPhiMass, HierarchicalTarget
from sshmc.errors import DomainError
from sshmc.mass import TridiagonalMass, identity_mass

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class SvPriors:
    nu: float = 10.0
    s2: float = 0.05
    beta_a: float = 20.0
    beta_b: float = 1.5


def to_natural(phi) -> tuple[float, float, float]:
    """``(log beta, log sigma^2, atanh phi_ar)`` -> ``(phi_ar, sigma, beta)``."""
    log_beta, log_s2, z = phi
    return float(np.tanh(z)), float(np.exp(0.5 * log_s2)), float(np.exp(log_beta))


def to_transformed(phi_ar: float, sigma: float, beta: float) -> np.ndarray:
    if not (abs(phi_ar) < 1 and sigma > 0 and beta > 0):
        raise DomainError("need |phi| < 1, sigma > 0, beta > 0")
    return np.array([np.log(beta), 2.0 * np.log(sigma), np.arctanh(phi_ar)])


def observation_loglik(y, x, beta) -> float:
    """``sum_t log N(y_t | 0, beta^2 e^{x_t})``."""
    y = np.asarray(y, float)
    x = np.asarray(x, float)
    return float(np.sum(-0.5 * LOG_2PI - np.log(beta) - 0.5 * x - 0.5 * y * y * np.exp(-x) / beta**2))


def ar1_precision(T: int, phi_ar: float, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the stationary AR(1) precision."""
    s2 = sigma * sigma
    diag = np.full(T, (1.0 + phi_ar * phi_ar) / s2)
    diag[0] = diag[-1] = 1.0 / s2
    off = np.full(T - 1, -phi_ar / s2)
    return diag, off


def _ar1_quadratic(x, phi_ar):
    """``x^T Qtilde x`` where ``Q = Qtilde / sigma^2``."""
    resid = x[1:] - phi_ar * x[:-1]
    return float((1.0 - phi_ar**2) * x[0] ** 2 + resid @ resid)


class SvTarget(HierarchicalTarget):
    def __init__(self, y, priors: SvPriors | None = None):
        y = np.asarray(y, dtype=float)
        if y.ndim != 1 or y.size < 2:
            raise ValueError("SV needs at least two observations")
        self.y = y
        self.y2 = y * y
        self.priors = priors or SvPriors()
        self.n = y.size
        self.m = 3
        p = self.priors
        self._log_norm_s2 = 0.5 * p.nu * np.log(0.5 * p.nu * p.s2) - gammaln(0.5 * p.nu)

    def theta_names(self):
        return [f"x{t + 1}" for t in range(self.n)]

    def phi_names(self):
        return ["log_beta", "log_sigma2", "atanh_phi"]

    @staticmethod
    def _natural(phi):
        phi_ar = np.tanh(phi[2])
        if not abs(phi_ar) < 1.0:
            raise DomainError("AR coefficient reached +-1")
        return phi_ar, np.exp(phi[1]), np.exp(phi[0])

    def log_lik(self, theta):
        return float(-0.5 * self.n * LOG_2PI - 0.5 * np.sum(theta))

    def log_prior_theta(self, theta, phi):
        phi_ar, s2, beta = self._natural(phi)
        T = self.n
        obs = -T * phi[0] - 0.5 * float(self.y2 @ np.exp(-theta)) / beta**2
        ar = -0.5 * T * (LOG_2PI + phi[1]) + 0.5 * np.log1p(-phi_ar**2) - 0.5 * _ar1_quadratic(theta, phi_ar) / s2
        return obs + ar

    def log_hyperprior(self, phi):
        p = self.priors
        phi_ar, s2, _ = self._natural(phi)
        # scaled Inv-chi^2 density of sigma^2 plus log-Jacobian log sigma^2
        lp_s2 = self._log_norm_s2 - (0.5 * p.nu + 1.0) * phi[1] - 0.5 * p.nu * p.s2 / s2 + phi[1]
        u = 0.5 * (phi_ar + 1.0)
        # Beta density of u, d u / d phi = 1/2, d phi / dz = 1 - phi^2
        lp_phi = (
            (p.beta_a - 1.0) * np.log(u)
            + (p.beta_b - 1.0) * np.log1p(-u)
            - betaln(p.beta_a, p.beta_b)
            - np.log(2.0)
            + np.log1p(-phi_ar**2)
        )
        return float(lp_s2 + lp_phi)

    def grad_theta(self, theta, phi):
        phi_ar, s2, beta = self._natural(phi)
        g = -0.5 + 0.5 * self.y2 * np.exp(-theta) / beta**2
        diag, off = ar1_precision(self.n, phi_ar, 1.0)
        qx = diag * theta
        qx[:-1] += off * theta[1:]
        qx[1:] += off * theta[:-1]
        return g - qx / s2

    def grad_phi(self, theta, phi):
        p = self.priors
        phi_ar, s2, beta = self._natural(phi)
        T = self.n
        d_logbeta = -T + float(self.y2 @ np.exp(-theta)) / beta**2
        quad = _ar1_quadratic(theta, phi_ar)
        d_logs2 = -0.5 * T + 0.5 * quad / s2 - 0.5 * p.nu + 0.5 * p.nu * p.s2 / s2
        # d quad / d phi_ar
        dquad = -2.0 * phi_ar * theta[0] ** 2 - 2.0 * float((theta[1:] - phi_ar * theta[:-1]) @ theta[:-1])
        d_phi = -phi_ar / (1.0 - phi_ar**2) - 0.5 * dquad / s2
        d_phi += (p.beta_a - 1.0) / (1.0 + phi_ar) - (p.beta_b - 1.0) / (1.0 - phi_ar)
        d_phi += -2.0 * phi_ar / (1.0 - phi_ar**2)
        return np.array([d_logbeta, d_logs2, d_phi * (1.0 - phi_ar**2)])

    def initial_phi(self):
        p = self.priors
        # beta at the sample scale, sigma^2 at the prior scale, phi at the prior mean
        phi_mean = 2.0 * p.beta_a / (p.beta_a + p.beta_b) - 1.0
        return np.array([np.log(np.std(self.y) + 1e-12), np.log(p.s2), np.arctanh(phi_mean)])


class SvMass(ConstantPhiMass):
    """``M_x = 0.5 I + Q(phi, sigma)`` (expected observation curvature plus the
    AR(1) precision) and the identity for the three hyperparameters."""

    def __init__(self, T: int):
        super().__init__(identity_mass(3))
        self.T = int(T)

    def mass_theta(self, phi):
        phi_ar, s2 = np.tanh(phi[2]), np.exp(phi[1])
        if not abs(phi_ar) < 1.0:
            raise DomainError("AR coefficient reached +-1")
        diag, off = ar1_precision(self.T, phi_ar, np.sqrt(s2))
        return TridiagonalMass(0.5 + diag, off)

    def grad_aux_theta(self, phi, r_theta):
        phi_ar, s2 = np.tanh(phi[2]), np.exp(phi[1])
        mass = self.mass_theta(phi)
        u = mass.solve(r_theta)
        inv_diag, inv_off = mass.inverse_bands()
        T = self.T
        # dM/d log sigma^2 = -Q
        q_diag, q_off = ar1_precision(T, phi_ar, np.sqrt(s2))
        # dM/d atanh(phi) = (1 - phi^2) dQ/dphi
        dq_diag = np.full(T, 2.0 * phi_ar / s2)
        dq_diag[0] = dq_diag[-1] = 0.0
        dq_off = np.full(T - 1, -1.0 / s2)
        jac = 1.0 - phi_ar**2
        out = np.zeros(3)
        for k, (dd, do) in enumerate([(-q_diag, -q_off), (jac * dq_diag, jac * dq_off)], start=1):
            quad = float(dd @ (u * u)) + 2.0 * float(do @ (u[:-1] * u[1:]))
            trace = float(dd @ inv_diag) + 2.0 * float(do @ inv_off)
            out[k] = -0.5 * quad + 0.5 * trace
        return out


def make_sv(y, priors: SvPriors | None = None):
    target = SvTarget(y, priors)
    return target, SvMass(target.n)


def gen_sv_data(T: int, phi_ar: float, sigma: float, beta: float, rng: np.random.Generator):
    """Simulate ``(y, x)`` from the generative model with a stationary start."""
    if not (abs(phi_ar) < 1 and sigma >= 0 and beta > 0):
        raise DomainError("need |phi| < 1, sigma >= 0, beta > 0")
    x = np.empty(T)
    x[0] = rng.normal(0.0, sigma / np.sqrt(1.0 - phi_ar**2))
    eta = rng.normal(0.0, 1.0, size=T) * sigma
    for t in range(1, T):
        x[t] = phi_ar * x[t - 1] + eta[t]
    y = rng.standard_normal(T) * beta * np.exp(0.5 * x)
    return y, x
