"""Finite-difference audit of every hand-derived gradient of a model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

REL_STEP = 1e-5
TOLERANCE = 1e-5


def central_gradient(f, x, rel_step: float = REL_STEP) -> np.ndarray:
    """Central differences with step ``rel_step * max(1, |x_i|)``."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.size)
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        up, down = x.copy(), x.copy()
        up[i] += h
        down[i] -= h
        out[i] = (f(up) - f(down)) / (2.0 * h)
    return out


def relative_error(analytic, numeric) -> float:
    """``max |a - n| / max(max |n|, 1)``; absolute for gradients below unit scale."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    return float(np.max(np.abs(analytic - numeric)) / max(float(np.max(np.abs(numeric))), 1.0))


@dataclass(frozen=True)
class GradCheck:
    name: str
    point: int
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.error < self.tolerance


def random_point(target, mass, rng, spread: float = 0.3):
    """An interior point: ``theta`` standard normal, ``phi`` near its initial value,
    momenta drawn from the conditional masses."""
    theta = rng.standard_normal(target.n)
    phi = np.asarray(target.initial_phi(), dtype=float) + spread * rng.standard_normal(target.m)
    r_theta = mass.mass_theta(phi).draw(rng)
    r_phi = mass.mass_phi(theta).draw(rng)
    return theta, r_theta, phi, r_phi


def gradcheck(target, mass, *, points: int = 20, seed: int = 0, tolerance: float = TOLERANCE) -> list[GradCheck]:
    """Compare six gradients against central differences at random points.

    Covers ``grad_theta``, ``grad_phi``, both auxiliary-potential gradients
    and both block-potential gradients (which models may override).
    """
    rng = np.random.default_rng(seed)
    results = []
    for k in range(points):
        th, rt, ph, rp = random_point(target, mass, rng)
        pairs = {
            "grad_theta": (
                target.grad_theta(th, ph),
                central_gradient(lambda t: target.log_lik(t) + target.log_prior_theta(t, ph), th),
            ),
            "grad_phi": (
                target.grad_phi(th, ph),
                central_gradient(lambda p: target.log_prior_theta(th, p) + target.log_hyperprior(p), ph),
            ),
            "grad_aux_theta": (
                mass.grad_aux_theta(ph, rt),
                central_gradient(lambda p: mass.aux_theta(p, rt), ph),
            ),
            "grad_aux_phi": (
                mass.grad_aux_phi(th, rp),
                central_gradient(lambda t: mass.aux_phi(t, rp), th),
            ),
            "theta_potential_grad": (
                mass.theta_potential_grad(target, th, ph, rp),
                central_gradient(lambda t: mass.theta_potential(target, t, ph, rp), th),
            ),
            "phi_potential_grad": (
                mass.phi_potential_grad(target, th, ph, rt),
                central_gradient(lambda p: mass.phi_potential(target, th, p, rt), ph),
            ),
        }
        for name, (analytic, numeric) in pairs.items():
            results.append(GradCheck(name, k, relative_error(analytic, numeric), tolerance))
    return results
