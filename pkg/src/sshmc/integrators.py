"""Explicit leapfrog and the alternating blockwise leapfrog algorithm (ABLA)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from sshmc.core import BlockState, hamiltonian
from sshmc.errors import DivergenceError, DomainError
from sshmc.mass import MassOperator

__all__ = [
    "LeapfrogSpec",
    "AblaSpec",
    "GradientCounter",
    "leapfrog",
    "abla_schedule",
    "abla_gradient_cost",
    "abla_proposal",
    "jacobian_probe",
    "DEFAULT_ENERGY_CAP",
]

DEFAULT_ENERGY_CAP = 1000.0

THETA = "theta"
PHI = "phi"


@dataclass(frozen=True)
class LeapfrogSpec:
    epsilon: float
    steps: int

    def __post_init__(self):
        if not (self.epsilon > 0 and np.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")


@dataclass(frozen=True)
class AblaSpec:
    """Step sizes and counts for one ABLA trajectory.

    ``steps_theta``/``steps_phi`` are leapfrog steps per ALBA step and
    ``alba_steps`` is the number of ALBA steps per trajectory.
    """

    eps_theta: float
    steps_theta: int
    eps_phi: float
    steps_phi: int
    alba_steps: int

    def __post_init__(self):
        for name in ("eps_theta", "eps_phi"):
            value = getattr(self, name)
            if not (value > 0 and np.isfinite(value)):
                raise ValueError(f"{name} must be positive, got {value}")
        for name in ("steps_theta", "steps_phi", "alba_steps"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value}")
        if self.steps_theta % 2 and self.steps_phi % 2 and self.alba_steps % 2:
            raise ValueError(
                "with odd steps_theta and odd steps_phi the trajectory is only "
                "palindromic for an even number of alba_steps"
            )


class GradientCounter:
    """Wraps a gradient callable and counts calls, ``weight`` units per call."""

    def __init__(self, count: int = 0):
        self.count = count

    def wrap(self, fn: Callable, weight: int = 1) -> Callable:
        def counted(*args, **kwargs):
            self.count += weight
            return fn(*args, **kwargs)

        return counted


def _checked_grad(grad_U, z):
    try:
        g = np.asarray(grad_U(z), dtype=float)
    except DomainError as exc:
        raise DivergenceError(f"trajectory left the support: {exc}") from exc
    if not np.all(np.isfinite(g)):
        raise DivergenceError("non-finite gradient along trajectory")
    return g


def leapfrog(
    grad_U: Callable[[np.ndarray], np.ndarray],
    mass: MassOperator,
    z,
    r,
    spec: LeapfrogSpec,
    *,
    potential: Callable[[np.ndarray], float] | None = None,
    energy_cap: float = DEFAULT_ENERGY_CAP,
    observer: Callable[[np.ndarray, np.ndarray], None] | None = None,
):
    """Run ``spec.steps`` leapfrog steps of half-kick, drift, half-kick.

    The gradient at the current position is reused by the next step's first
    half-kick, so one call costs ``steps + 1`` gradient evaluations. When
    ``potential`` is given the energy error is checked after every step.
    """
    z = np.array(z, dtype=float)
    r = np.array(r, dtype=float)
    eps = spec.epsilon
    g = _checked_grad(grad_U, z)
    h0 = potential(z) + mass.quad_inv(r) if potential is not None else None
    for _ in range(spec.steps):
        r = r - 0.5 * eps * g
        z = z + eps * mass.solve(r)
        if not np.all(np.isfinite(z)):
            raise DivergenceError("non-finite position along trajectory")
        g = _checked_grad(grad_U, z)
        r = r - 0.5 * eps * g
        if h0 is not None:
            try:
                h = potential(z) + mass.quad_inv(r)
            except DomainError as exc:
                raise DivergenceError(str(exc)) from exc
            if not abs(h - h0) <= energy_cap:
                raise DivergenceError(f"energy error {h - h0:.3g} exceeds cap {energy_cap}")
        if observer is not None:
            observer(z, r)
    return z, r


def abla_schedule(spec: AblaSpec) -> list[tuple[str, int]]:
    """Block runs ``(block, n_leapfrog_steps)`` for a whole trajectory.

    Each ALBA step is split symmetrically around the other block so the
    full sequence reads the same forwards and backwards. Adjacent runs on the
    same block are merged.
    """
    l1, l2 = spec.steps_theta, spec.steps_phi
    raw: list[tuple[str, int]] = []
    for k in range(spec.alba_steps):
        if l1 % 2 == 0:
            raw += [(THETA, l1 // 2), (PHI, l2), (THETA, l1 // 2)]
        elif l2 % 2 == 0:
            raw += [(PHI, l2 // 2), (THETA, l1), (PHI, l2 // 2)]
        else:
            first = (l1 + 1) // 2 if k % 2 == 0 else l1 // 2
            raw += [(THETA, first), (PHI, l2), (THETA, l1 - first)]
    runs: list[tuple[str, int]] = []
    for block, count in raw:
        if count == 0:
            continue
        if runs and runs[-1][0] == block:
            runs[-1] = (block, runs[-1][1] + count)
        else:
            runs.append((block, count))
    if runs != runs[::-1]:
        raise AssertionError(f"ABLA schedule is not palindromic: {runs}")
    return runs


def abla_gradient_cost(spec: AblaSpec) -> int:
    """Block-gradient evaluations used by one full trajectory."""
    return sum(count + 1 for _, count in abla_schedule(spec))


def abla_proposal(
    target,
    mass,
    s: BlockState,
    spec: AblaSpec,
    *,
    energy_cap: float = DEFAULT_ENERGY_CAP,
    counter: GradientCounter | None = None,
    observer: Callable[[BlockState], None] | None = None,
) -> BlockState:
    """Deterministic ABLA map from ``s`` to the proposed state.

    The theta-block moves under ``H1`` (potential ``U1`` includes the auxiliary
    potential of ``r_phi``) and the phi-block under ``H2`` (``U2`` includes the
    auxiliary potential of ``r_theta``). Raises ``DivergenceError`` if the
    trajectory leaves the support or the joint energy error exceeds the cap.
    """
    theta, r_theta, phi, r_phi = s.theta, s.r_theta, s.phi, s.r_phi
    try:
        h0 = hamiltonian(target, mass, s)
    except DomainError as exc:
        raise DivergenceError(str(exc)) from exc

    for block, count in abla_schedule(spec):
        if block == THETA:
            phi_fixed, r_phi_fixed = phi, r_phi

            def grad(th):
                return mass.theta_potential_grad(target, th, phi_fixed, r_phi_fixed)

            if counter is not None:
                grad = counter.wrap(grad)
            inner = None
            if observer is not None:

                def inner(z, r):
                    observer(BlockState(z, r, phi_fixed, r_phi_fixed))

            step = LeapfrogSpec(spec.eps_theta, count)
            theta, r_theta = leapfrog(
                grad, _mass_or_divergence(mass.mass_theta, phi), theta, r_theta, step, observer=inner
            )
        else:
            theta_fixed, r_theta_fixed = theta, r_theta

            def grad(ph):
                return mass.phi_potential_grad(target, theta_fixed, ph, r_theta_fixed)

            if counter is not None:
                grad = counter.wrap(grad)
            inner = None
            if observer is not None:

                def inner(z, r):
                    observer(BlockState(theta_fixed, r_theta_fixed, z, r))

            step = LeapfrogSpec(spec.eps_phi, count)
            phi, r_phi = leapfrog(
                grad, _mass_or_divergence(mass.mass_phi, theta), phi, r_phi, step, observer=inner
            )
        current = BlockState(theta, r_theta, phi, r_phi)
        try:
            h = hamiltonian(target, mass, current)
        except DomainError as exc:
            raise DivergenceError(str(exc)) from exc
        if not abs(h - h0) <= energy_cap:
            raise DivergenceError(f"energy error {h - h0:.3g} exceeds cap {energy_cap}")
    return BlockState(theta, r_theta, phi, r_phi)


def _mass_or_divergence(factory, arg):
    try:
        return factory(arg)
    except DomainError as exc:
        raise DivergenceError(str(exc)) from exc


def jacobian_probe(map_fn: Callable, x, h: float = 1e-5) -> float:
    """Determinant of the central finite-difference Jacobian of ``map_fn`` at ``x``.

    ``x`` is either a ``BlockState`` (and ``map_fn`` maps states to states)
    or a flat array.
    """
    if not 1e-6 <= h <= 1e-4:
        raise ValueError("h must lie in [1e-6, 1e-4]")
    if isinstance(x, BlockState):
        n, m = x.n, x.m
        if n + m > 8:
            raise ValueError("jacobian_probe is limited to n + m <= 8")
        x0 = x.to_vector()

        def f(v):
            return map_fn(BlockState.from_vector(v, n, m)).to_vector()

    else:
        x0 = np.asarray(x, dtype=float)
        if x0.size > 16:
            raise ValueError("jacobian_probe is limited to 16 phase-space coordinates")

        def f(v):
            return np.asarray(map_fn(v), dtype=float)

    dim = x0.size
    jac = np.empty((dim, dim))
    for i in range(dim):
        step = np.zeros(dim)
        step[i] = h
        try:
            plus = f(x0 + step)
            minus = f(x0 - step)
        except (DivergenceError, DomainError) as exc:
            raise DivergenceError(f"perturbed evaluation diverged: {exc}") from exc
        if not (np.all(np.isfinite(plus)) and np.all(np.isfinite(minus))):
            raise DivergenceError("perturbed evaluation is not finite")
        jac[:, i] = (plus - minus) / (2.0 * h)
    return float(np.linalg.det(jac))
