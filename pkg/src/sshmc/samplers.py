"""Metropolis-corrected transitions (HMC, HMC-within-Gibbs, SSHMC) and chains.

Gradient evaluations are counted in block-gradient units: a call that
returns the partials of one block (theta or phi) costs one unit, and a joint
HMC gradient, which returns both, costs two. Without divergences the totals
are

* ``hmc``:        ``n_iter * 2 * (steps + 1)``
* ``hmc-gibbs``:  ``n_iter * ((steps_theta + 1) + (steps_phi + 1))``
* ``sshmc``:      ``n_iter * abla_gradient_cost(spec)``

(a leapfrog run of ``k`` steps reuses gradients between steps and costs
``k + 1``). Diverged trajectories stop early and cost less.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from sshmc.core import BlockState, hamiltonian, refresh_momenta
from sshmc.errors import ConfigError, DivergenceError, DomainError
from sshmc.integrators import (
    DEFAULT_ENERGY_CAP,
    AblaSpec,
    GradientCounter,
    LeapfrogSpec,
    abla_gradient_cost,
    abla_proposal,
    leapfrog,
)
from sshmc.mass import DiagonalMass, MassOperator, identity_mass

__all__ = [
    "SAMPLER_KINDS",
    "SamplerConfig",
    "ChainTrace",
    "mh_accept",
    "sshmc_step",
    "hmc_step",
    "hmc_gibbs_step",
    "run_chain",
    "expected_gradient_evaluations",
]

SAMPLER_KINDS = ("hmc", "hmc-gibbs", "sshmc")


@dataclass(frozen=True)
class SamplerConfig:
    kind: str
    n_iter: int
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    leapfrog: LeapfrogSpec | None = None
    abla: AblaSpec | None = None
    gibbs_theta: LeapfrogSpec | None = None
    gibbs_phi: LeapfrogSpec | None = None
    hmc_mass_diag: tuple[float, ...] | None = None
    energy_cap: float = DEFAULT_ENERGY_CAP

    def __post_init__(self):
        problems = []
        if self.kind not in SAMPLER_KINDS:
            problems.append(f"kind must be one of {SAMPLER_KINDS}, got {self.kind!r}")
        if self.n_iter < 1:
            problems.append("n_iter must be positive")
        if not 0 <= self.burn_in < self.n_iter:
            problems.append("burn_in must satisfy 0 <= burn_in < n_iter")
        if self.thin < 1:
            problems.append("thin must be at least 1")
        if not 0 <= self.seed < 2**64:
            problems.append("seed must be a 64-bit unsigned integer")
        if self.kind == "hmc" and self.leapfrog is None:
            problems.append("hmc needs a leapfrog spec")
        if self.kind == "sshmc" and self.abla is None:
            problems.append("sshmc needs an abla spec")
        if self.kind == "hmc-gibbs" and (self.gibbs_theta is None or self.gibbs_phi is None):
            problems.append("hmc-gibbs needs gibbs_theta and gibbs_phi specs")
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def retained(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin


@dataclass(frozen=True)
class ChainTrace:
    """Retained samples plus per-iteration bookkeeping.

    For ``hmc-gibbs`` an iteration counts as accepted only when both block
    updates were accepted, ``block_accepted`` holds the per-block flags and
    the energies are sums of the two block Hamiltonians.
    """

    names: list[str]
    samples: np.ndarray
    kept_iterations: np.ndarray
    accepted: np.ndarray
    hamiltonian_before: np.ndarray
    hamiltonian_after: np.ndarray
    gradient_evaluations: int
    elapsed: float
    kind: str
    seed: int
    block_accepted: np.ndarray | None = None
    elapsed_total: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def acceptance_rate(self) -> float:
        return float(np.mean(self.accepted))

    def column(self, name: str) -> np.ndarray:
        return self.samples[:, self.names.index(name)]


def mh_accept(delta_H: float, rng: np.random.Generator) -> bool:
    """Accept with probability ``min(1, exp(-delta_H))``.

    One uniform is always consumed so the stream does not depend on the
    outcome. ``+inf`` and NaN are rejected.
    """
    u = rng.uniform()
    if np.isnan(delta_H):
        return False
    with np.errstate(divide="ignore"):
        return bool(np.log(u) < -delta_H)


def sshmc_step(
    target,
    mass,
    s: BlockState,
    spec: AblaSpec,
    rng: np.random.Generator,
    *,
    energy_cap: float = DEFAULT_ENERGY_CAP,
    counter: GradientCounter | None = None,
):
    """One SSHMC transition.

    Returns ``(state, accepted, delta_H, H_before, H_after)``; on rejection
    the positions are unchanged and the refreshed momenta are returned.
    """
    r_theta, r_phi = refresh_momenta(mass, s.theta, s.phi, rng)
    start = BlockState(s.theta, r_theta, s.phi, r_phi)
    h_before = hamiltonian(target, mass, start)
    try:
        proposal = abla_proposal(target, mass, start, spec, energy_cap=energy_cap, counter=counter)
        h_after = hamiltonian(target, mass, proposal)
    except (DivergenceError, DomainError):
        proposal, h_after = None, np.inf
    delta = h_after - h_before
    if proposal is not None and mh_accept(delta, rng):
        return proposal, True, delta, h_before, h_after
    if proposal is None:
        rng.uniform()
    return start, False, delta, h_before, h_after


def _joint_functions(target):
    n = target.n

    def U(z):
        theta, phi = z[:n], z[n:]
        value = -(target.log_lik(theta) + target.log_prior_theta(theta, phi) + target.log_hyperprior(phi))
        if not np.isfinite(value):
            raise DomainError("potential is not finite")
        return value

    def grad(z):
        theta, phi = z[:n], z[n:]
        return -np.concatenate([target.grad_theta(theta, phi), target.grad_phi(theta, phi)])

    return U, grad


def hmc_step(
    target,
    fixed_mass: MassOperator | None,
    s: BlockState,
    spec: LeapfrogSpec,
    rng: np.random.Generator,
    *,
    energy_cap: float = DEFAULT_ENERGY_CAP,
    counter: GradientCounter | None = None,
):
    """One standard HMC transition on the joint ``(theta, phi)`` space.

    ``fixed_mass`` defaults to the identity. Returns
    ``(state, accepted, delta_H, H_before, H_after)``.
    """
    n, m = target.n, target.m
    if fixed_mass is None:
        fixed_mass = identity_mass(n + m)
    U, grad = _joint_functions(target)
    if counter is not None:
        grad = counter.wrap(grad, weight=2)
    z0 = np.concatenate([s.theta, s.phi])
    r0 = fixed_mass.draw(rng)
    h_before = U(z0) + fixed_mass.quad_inv(r0)
    try:
        z1, r1 = leapfrog(grad, fixed_mass, z0, r0, spec, potential=U, energy_cap=energy_cap)
        h_after = U(z1) + fixed_mass.quad_inv(r1)
    except (DivergenceError, DomainError):
        z1 = None
        h_after = np.inf
    delta = h_after - h_before
    accept = mh_accept(delta, rng)
    if z1 is not None and accept:
        return BlockState(z1[:n], r1[:n], z1[n:], r1[n:]), True, delta, h_before, h_after
    return BlockState(s.theta, r0[:n], s.phi, r0[n:]), False, delta, h_before, h_after


def _block_hmc(U, grad, mass_op, z0, spec, rng, energy_cap, counter):
    if counter is not None:
        grad = counter.wrap(grad)
    r0 = mass_op.draw(rng)
    h_before = U(z0) + mass_op.quad_inv(r0)
    try:
        z1, r1 = leapfrog(grad, mass_op, z0, r0, spec, potential=U, energy_cap=energy_cap)
        h_after = U(z1) + mass_op.quad_inv(r1)
    except (DivergenceError, DomainError):
        z1, h_after = None, np.inf
    delta = h_after - h_before
    accept = mh_accept(delta, rng)
    if z1 is not None and accept:
        return z1, True, delta, h_before, h_after
    return z0, False, delta, h_before, h_after


def hmc_gibbs_step(
    target,
    mass,
    s: BlockState,
    theta_spec: LeapfrogSpec,
    phi_spec: LeapfrogSpec,
    rng: np.random.Generator,
    *,
    energy_cap: float = DEFAULT_ENERGY_CAP,
    counter: GradientCounter | None = None,
):
    """HMC within Gibbs: an HMC update of theta given phi, then of phi given theta.

    Each block uses only its conditional log density; the auxiliary-potential
    and log-determinant coupling terms of SSHMC are deliberately absent.
    Returns ``(state, (acc_theta, acc_phi), (dH_theta, dH_phi), H_before, H_after)``
    with energies summed over the two blocks.
    """
    phi = s.phi

    def U_theta(th):
        value = -(target.log_lik(th) + target.log_prior_theta(th, phi))
        if not np.isfinite(value):
            raise DomainError("conditional potential is not finite")
        return value

    def grad_theta(th):
        return -target.grad_theta(th, phi)

    theta, acc_t, d_t, hb_t, ha_t = _block_hmc(
        U_theta, grad_theta, mass.mass_theta(phi), s.theta, theta_spec, rng, energy_cap, counter
    )

    def U_phi(ph):
        value = -(target.log_prior_theta(theta, ph) + target.log_hyperprior(ph))
        if not np.isfinite(value):
            raise DomainError("conditional potential is not finite")
        return value

    def grad_phi(ph):
        return -target.grad_phi(theta, ph)

    phi, acc_p, d_p, hb_p, ha_p = _block_hmc(
        U_phi, grad_phi, mass.mass_phi(theta), s.phi, phi_spec, rng, energy_cap, counter
    )
    state = BlockState(theta, np.zeros_like(theta), phi, np.zeros_like(phi))
    return state, (acc_t, acc_p), (d_t, d_p), hb_t + hb_p, ha_t + ha_p


def expected_gradient_evaluations(config: SamplerConfig) -> int:
    """Closed-form gradient count for a run with no divergences."""
    if config.kind == "hmc":
        per_iter = 2 * (config.leapfrog.steps + 1)
    elif config.kind == "sshmc":
        per_iter = abla_gradient_cost(config.abla)
    else:
        per_iter = config.gibbs_theta.steps + 1 + config.gibbs_phi.steps + 1
    return config.n_iter * per_iter


def _initial_state(target, init) -> BlockState:
    if init is None:
        theta = np.asarray(target.initial_theta(), dtype=float)
        phi = np.asarray(target.initial_phi(), dtype=float)
    elif isinstance(init, BlockState):
        theta, phi = init.theta, init.phi
    else:
        theta, phi = (np.asarray(a, dtype=float) for a in init)
    if np.shape(theta) != (target.n,) or np.shape(phi) != (target.m,):
        raise ConfigError(
            f"initial state has shapes {np.shape(theta)}, {np.shape(phi)}; "
            f"target expects ({target.n},), ({target.m},)"
        )
    return BlockState(theta, np.zeros(target.n), phi, np.zeros(target.m))


def run_chain(target, mass, sampler: SamplerConfig, init=None) -> ChainTrace:
    """Run ``sampler.n_iter`` transitions from ``init`` and collect a trace.

    ``init`` may be a ``BlockState``, a ``(theta, phi)`` pair or ``None`` for
    the target's ``initial_theta()`` and ``initial_phi()``.
    """
    state = _initial_state(target, init)
    rng = np.random.default_rng(sampler.seed)
    counter = GradientCounter()
    hmc_mass = None
    if sampler.kind == "hmc" and sampler.hmc_mass_diag is not None:
        if len(sampler.hmc_mass_diag) != target.n + target.m:
            raise ConfigError("hmc_mass_diag length must equal n + m")
        hmc_mass = DiagonalMass(sampler.hmc_mass_diag)

    n_iter = sampler.n_iter
    dim = target.n + target.m
    retained = sampler.retained
    kept = sampler.burn_in + np.arange(retained) * sampler.thin + (sampler.thin - 1)
    samples = np.empty((retained, dim))
    accepted = np.zeros(n_iter, dtype=bool)
    block_acc = np.zeros((n_iter, 2), dtype=bool) if sampler.kind == "hmc-gibbs" else None
    h_before = np.empty(n_iter)
    h_after = np.empty(n_iter)

    row = 0
    t_start = time.perf_counter()
    t_burn = t_start
    for i in range(n_iter):
        if i == sampler.burn_in:
            t_burn = time.perf_counter()
        if sampler.kind == "sshmc":
            state, acc, _, hb, ha = sshmc_step(
                target, mass, state, sampler.abla, rng, energy_cap=sampler.energy_cap, counter=counter
            )
        elif sampler.kind == "hmc":
            state, acc, _, hb, ha = hmc_step(
                target, hmc_mass, state, sampler.leapfrog, rng, energy_cap=sampler.energy_cap, counter=counter
            )
        else:
            state, accs, _, hb, ha = hmc_gibbs_step(
                target,
                mass,
                state,
                sampler.gibbs_theta,
                sampler.gibbs_phi,
                rng,
                energy_cap=sampler.energy_cap,
                counter=counter,
            )
            block_acc[i] = accs
            acc = all(accs)
        accepted[i] = acc
        h_before[i] = hb
        h_after[i] = ha
        if row < retained and i == kept[row]:
            samples[row, : target.n] = state.theta
            samples[row, target.n :] = state.phi
            row += 1
    t_end = time.perf_counter()

    return ChainTrace(
        names=target.names(),
        samples=samples,
        kept_iterations=kept,
        accepted=accepted,
        hamiltonian_before=h_before,
        hamiltonian_after=h_after,
        gradient_evaluations=counter.count,
        elapsed=t_end - t_burn,
        kind=sampler.kind,
        seed=sampler.seed,
        block_accepted=block_acc,
        elapsed_total=t_end - t_start,
    )
