import numpy as np
import pytest
from scipy.stats import multivariate_normal

from sshmc.errors import NotPositiveDefiniteError
from sshmc.mass import (
    BlockDiagonalMass,
    DenseMass,
    DiagonalMass,
    InverseDenseMass,
    ScalarMass,
    SpectralMass,
    TridiagonalMass,
    identity_mass,
)


def _spd(dim, seed):
    a = np.random.default_rng(seed).normal(size=(dim, dim))
    return a @ a.T + dim * np.eye(dim)


def _operators():
    spd = _spd(4, 0)
    vals, vecs = np.linalg.eigh(spd)
    return [
        ScalarMass(2.5, 4),
        DiagonalMass([0.5, 1.0, 2.0, 4.0]),
        TridiagonalMass([2.0, 3.0, 3.0, 2.0], [-0.9, 0.4, -0.7]),
        DenseMass(spd),
        InverseDenseMass(spd),
        SpectralMass(vecs, vals),
        BlockDiagonalMass([ScalarMass(3.0, 2), DiagonalMass([1.0, 2.0])]),
    ]


@pytest.mark.parametrize("op", _operators(), ids=lambda o: type(o).__name__)
def test_operations_agree_with_dense_matrix(op):
    dense = op.to_dense()
    r = np.random.default_rng(1).normal(size=op.dim)
    np.testing.assert_allclose(op.solve(r), np.linalg.solve(dense, r), rtol=1e-10)
    assert op.quad_inv(r) == pytest.approx(0.5 * r @ np.linalg.solve(dense, r), rel=1e-10)
    assert op.logdet() == pytest.approx(np.linalg.slogdet(dense)[1], rel=1e-10)


@pytest.mark.parametrize("op", _operators(), ids=lambda o: type(o).__name__)
def test_quad_inv_nonnegative_and_zero_only_at_origin(op):
    assert op.quad_inv(np.zeros(op.dim)) == 0.0
    rng = np.random.default_rng(2)
    assert all(op.quad_inv(rng.normal(size=op.dim)) > 0 for _ in range(50))


@pytest.mark.parametrize("op", _operators(), ids=lambda o: type(o).__name__)
def test_draws_are_chi_square_over_two(op):
    # quad_inv of a draw from N(0, M) is chi^2_dim / 2: mean dim/2, variance dim/2
    rng = np.random.default_rng(3)
    values = np.array([op.quad_inv(op.draw(rng)) for _ in range(10_000)])
    se = np.sqrt(op.dim / 2 / values.size)
    assert abs(values.mean() - op.dim / 2) < 5 * se


@pytest.mark.parametrize("op", _operators(), ids=lambda o: type(o).__name__)
def test_kinetic_energy_is_exact_negative_log_density(op):
    # K(r) + 0.5 log det M + 0.5 dim log(2 pi) = -log N(r | 0, M)
    r = np.random.default_rng(4).normal(size=op.dim)
    expected = -multivariate_normal(np.zeros(op.dim), op.to_dense()).logpdf(r)
    got = op.quad_inv(r) + 0.5 * op.logdet() + 0.5 * op.dim * np.log(2 * np.pi)
    assert got == pytest.approx(expected, rel=1e-10)


def test_draw_covariance_matches_tridiagonal_matrix():
    op = TridiagonalMass([2.0, 3.0, 2.5], [0.8, -1.1])
    rng = np.random.default_rng(5)
    draws = np.array([op.draw(rng) for _ in range(20_000)])
    np.testing.assert_allclose(np.cov(draws.T), op.to_dense(), atol=0.12)


def test_identity_draw_variance_band(rng):
    draws = np.array([identity_mass(3).draw(rng) for _ in range(10_000)])
    assert np.all((draws.var(axis=0) > 0.94) & (draws.var(axis=0) < 1.06))


def test_tridiagonal_inverse_bands_match_dense_inverse():
    op = TridiagonalMass([4.0, 5.0, 3.0, 6.0, 2.0], [1.0, -2.0, 0.5, 1.2])
    inv = np.linalg.inv(op.to_dense())
    diag, off = op.inverse_bands()
    np.testing.assert_allclose(diag, np.diag(inv), rtol=1e-12)
    np.testing.assert_allclose(off, np.diag(inv, 1), rtol=1e-12)


def test_tridiagonal_matvec():
    op = TridiagonalMass([4.0, 5.0, 3.0], [1.0, -2.0])
    x = np.array([1.0, -2.0, 3.0])
    np.testing.assert_allclose(op.matvec(x), op.to_dense() @ x)


@pytest.mark.parametrize(
    "build",
    [
        lambda: ScalarMass(0.0, 2),
        lambda: ScalarMass(-1.0, 2),
        lambda: DiagonalMass([1.0, 0.0]),
        lambda: TridiagonalMass([1.0, 1.0], [2.0]),
        lambda: DenseMass([[1.0, 2.0], [2.0, 1.0]]),
        lambda: InverseDenseMass([[1.0, 2.0], [2.0, 1.0]]),
        lambda: SpectralMass(np.eye(2), [1.0, -1.0]),
    ],
)
def test_non_positive_definite_rejected(build):
    with pytest.raises(NotPositiveDefiniteError):
        build()


def test_representation_labels():
    assert ScalarMass(1.0, 2).representation == "scalar"
    assert DiagonalMass([1.0]).representation == "diagonal"
    assert TridiagonalMass([1.0, 1.0], [0.1]).representation == "tridiagonal"
    assert DenseMass(np.eye(2)).representation == "dense"
