import numpy as np
import pytest
from scipy.special import expit
from scipy.stats import expon, norm

from sshmc.core import (
    BlockState,
    h1_energy,
    h2_energy,
    hamiltonian,
    log_joint,
    potential,
    refresh_momenta,
)
from sshmc.errors import DomainError
from sshmc.models.funnel import make_funnel
from sshmc.models.hblr import HblrData, make_hblr


def _funnel_oracle(x, v):
    return norm.logpdf(x, 0.0, np.exp(-v / 2)).sum() + norm.logpdf(v, 0.0, 3.0)


def test_funnel_log_joint_example():
    target, _ = make_funnel(1)
    expected = norm.logpdf(0.0) + norm.logpdf(0.0, 0.0, 3.0)
    assert expected == pytest.approx(-2.936490, abs=1e-6)
    assert log_joint(target, [0.0], [0.0]) == pytest.approx(expected, abs=1e-12)


def test_funnel_log_joint_matches_normal_densities(rng):
    target, _ = make_funnel(5)
    for _ in range(10):
        x, v = rng.normal(size=5), rng.normal(size=1)
        assert log_joint(target, x, v) == pytest.approx(_funnel_oracle(x, v[0]), rel=1e-12)


def test_hblr_single_datum_log_joint():
    data = HblrData(features=(np.array([[1.0]]),), labels=(np.array([1.0]),))
    target, _ = make_hblr(data, lam=1.0)
    # gamma = log v = 0 has zero log-Jacobian
    expected = np.log(expit(0.0)) + norm.logpdf(0.0) + expon.logpdf(1.0)
    assert expected == pytest.approx(-2.612086, abs=1e-6)
    assert log_joint(target, [0.0], [0.0]) == pytest.approx(expected, abs=1e-12)


def test_potential_is_negated_log_joint(rng):
    target, _ = make_funnel(3)
    x, v = rng.normal(size=3), rng.normal(size=1)
    assert potential(target, x, v) == -log_joint(target, x, v)
    assert potential(make_funnel(1)[0], [0.0], [0.0]) == pytest.approx(2.936490, abs=1e-6)


def test_funnel_potential_gradient_in_v_vanishes_at_example():
    target, _ = make_funnel(1)
    assert -target.grad_phi(np.array([1.0]), np.array([0.0]))[0] == pytest.approx(0.0, abs=1e-15)


def test_log_joint_checks_dimensions():
    target, _ = make_funnel(3)
    with pytest.raises(ValueError):
        log_joint(target, np.zeros(2), np.zeros(1))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_log_joint_signals_domain_error():
    target, _ = make_funnel(1)
    with pytest.raises(DomainError):
        log_joint(target, [1e200], [800.0])


def test_hamiltonian_funnel_example():
    target, mass = make_funnel(1)
    s = BlockState([0.0], [1.0], [0.0], [0.0])
    assert mass.mass_phi(s.theta).scale == pytest.approx(1.0 / (1.0 + 1.0 / 9.0))
    assert 0.5 * np.log(0.9) == pytest.approx(-0.052680, abs=1e-6)
    # 2.936490 + 0.5 - 0.052680 = 3.383810; the quoted 3.383799 drops 1e-5 in rounding
    expected = 2.936490 + 0.5 + 0.5 * np.log(0.9)
    assert hamiltonian(target, mass, s) == pytest.approx(expected, abs=1e-6)
    assert hamiltonian(target, mass, s) == pytest.approx(3.383799, abs=2e-5)


def test_hamiltonian_at_zero_momenta_is_potential_plus_logdets(rng):
    target, mass = make_funnel(4)
    x, v = rng.normal(size=4), rng.normal(size=1)
    s = BlockState(x, np.zeros(4), v, np.zeros(1))
    expected = potential(target, x, v) + 0.5 * mass.mass_theta(v).logdet() + 0.5 * mass.mass_phi(x).logdet()
    assert hamiltonian(target, mass, s) == pytest.approx(expected, rel=1e-12)


def test_h1_example():
    target, mass = make_funnel(1)
    s1 = BlockState([1.0], [0.3], [0.0], [0.2])
    s0 = s1.replace(theta=[0.0])
    assert h1_energy(target, mass, s1)[0] - h1_energy(target, mass, s0)[0] == pytest.approx(0.5)
    assert h1_energy(target, mass, s1.replace(r_theta=[0.0]))[1] == 0.0


def test_h2_cancellation_example():
    target, mass = make_funnel(1)
    grad = mass.phi_potential_grad(target, np.zeros(1), np.zeros(1), np.ones(1))
    assert grad[0] == pytest.approx(-0.5)
    grad = mass.phi_potential_grad(target, np.zeros(1), np.zeros(1), np.zeros(1))
    assert grad[0] == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("n", [1, 5, 20])
def test_shared_constant_property(n):
    target, mass = make_funnel(n)
    rng = np.random.default_rng(n)
    phi, r_phi = rng.normal(size=1), rng.normal(size=1)
    diffs1, diffs2 = [], []
    theta_fixed, r_theta_fixed = rng.normal(size=n), rng.normal(size=n)
    for _ in range(100):
        s = BlockState(rng.normal(size=n), rng.normal(size=n), phi, r_phi)
        diffs1.append(hamiltonian(target, mass, s) - sum(h1_energy(target, mass, s)))
        s = BlockState(theta_fixed, r_theta_fixed, rng.normal(size=1), rng.normal(size=1))
        diffs2.append(hamiltonian(target, mass, s) - sum(h2_energy(target, mass, s)))
    assert np.ptp(diffs1) < 1e-10
    assert np.ptp(diffs2) < 1e-10


def test_refresh_momenta_statistics():
    target, mass = make_funnel(4)
    rng = np.random.default_rng(0)
    draws = np.array([refresh_momenta(mass, np.zeros(4), np.array([2.0]), rng)[0] for _ in range(10_000)])
    assert np.all(np.abs(draws.var(axis=0) / np.exp(2.0) - 1.0) < 0.06)


def test_refresh_momenta_deterministic():
    _, mass = make_funnel(3)
    a = refresh_momenta(mass, np.zeros(3), np.zeros(1), np.random.default_rng(9))
    b = refresh_momenta(mass, np.zeros(3), np.zeros(1), np.random.default_rng(9))
    for u, w in zip(a, b):
        np.testing.assert_array_equal(u, w)


def test_block_state_is_immutable_and_validated():
    s = BlockState([1.0, 2.0], [0.0, 0.0], [3.0], [0.0])
    with pytest.raises(ValueError):
        s.theta[0] = 5.0
    with pytest.raises(ValueError):
        BlockState([1.0, 2.0], [0.0], [3.0], [0.0])
    assert s.flip().r_theta.tolist() == [-0.0, -0.0]
    np.testing.assert_array_equal(BlockState.from_vector(s.to_vector(), 2, 1).to_vector(), s.to_vector())
    assert not BlockState([np.nan], [0.0], [0.0], [0.0]).is_finite()
