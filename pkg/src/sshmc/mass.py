"""Structured symmetric positive definite mass operators.

A mass operator ``M`` is the covariance of the momentum. Every representation
exposes the same small surface:

* ``solve(r)``     -> ``M^{-1} r`` (the velocity)
* ``quad_inv(r)``  -> ``0.5 * r^T M^{-1} r``
* ``logdet()``     -> ``log det M``
* ``draw(rng)``    -> a sample from ``N(0, M)``
* ``to_dense()``   -> the matrix itself
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from sshmc.errors import NotPositiveDefiniteError

__all__ = [
    "MassOperator",
    "ScalarMass",
    "DiagonalMass",
    "TridiagonalMass",
    "DenseMass",
    "InverseDenseMass",
    "SpectralMass",
    "BlockDiagonalMass",
    "identity_mass",
]


class MassOperator:
    """Base class. Subclasses are immutable once constructed."""

    representation: str = "abstract"
    dim: int

    def solve(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def quad_inv(self, r: np.ndarray) -> float:
        r = np.asarray(r, dtype=float)
        return 0.5 * float(r @ self.solve(r))

    def logdet(self) -> float:
        raise NotImplementedError

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def to_dense(self) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim})"


class ScalarMass(MassOperator):
    """``scale * I``."""

    representation = "scalar"

    def __init__(self, scale: float, dim: int):
        scale = float(scale)
        if not np.isfinite(scale) or scale <= 0.0:
            raise NotPositiveDefiniteError(f"scalar mass must be positive, got {scale}")
        self.scale = scale
        self.dim = int(dim)

    def solve(self, r):
        return np.asarray(r, dtype=float) / self.scale

    def quad_inv(self, r):
        r = np.asarray(r, dtype=float)
        return 0.5 * float(r @ r) / self.scale

    def logdet(self):
        return self.dim * np.log(self.scale)

    def draw(self, rng):
        return np.sqrt(self.scale) * rng.standard_normal(self.dim)

    def to_dense(self):
        return self.scale * np.eye(self.dim)


def identity_mass(dim: int) -> ScalarMass:
    return ScalarMass(1.0, dim)


class DiagonalMass(MassOperator):
    representation = "diagonal"

    def __init__(self, diag):
        diag = np.array(diag, dtype=float)
        if diag.ndim != 1 or not np.all(np.isfinite(diag)) or np.any(diag <= 0.0):
            raise NotPositiveDefiniteError("diagonal mass needs finite positive entries")
        diag.setflags(write=False)
        self.diag = diag
        self.dim = diag.size

    def solve(self, r):
        return np.asarray(r, dtype=float) / self.diag

    def logdet(self):
        return float(np.sum(np.log(self.diag)))

    def draw(self, rng):
        return np.sqrt(self.diag) * rng.standard_normal(self.dim)

    def to_dense(self):
        return np.diag(self.diag)


class TridiagonalMass(MassOperator):
    """Symmetric tridiagonal mass with a banded Cholesky factor."""

    representation = "tridiagonal"

    def __init__(self, diag, offdiag):
        diag = np.array(diag, dtype=float)
        offdiag = np.array(offdiag, dtype=float)
        if offdiag.size != max(diag.size - 1, 0):
            raise ValueError("offdiag must have length len(diag) - 1")
        self.dim = diag.size
        self.diag = diag
        self.offdiag = offdiag
        ab = np.zeros((2, self.dim))
        ab[0] = diag
        ab[1, :-1] = offdiag
        try:
            # lower banded form: row 0 = L_ii, row 1 = L_{i+1,i}
            self._chol = sla.cholesky_banded(ab, lower=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NotPositiveDefiniteError(str(exc)) from exc
        if not np.all(np.isfinite(self._chol)):
            raise NotPositiveDefiniteError("non-finite banded Cholesky factor")

    def solve(self, r):
        return sla.cho_solve_banded((self._chol, True), np.asarray(r, dtype=float))

    def logdet(self):
        return 2.0 * float(np.sum(np.log(self._chol[0])))

    def draw(self, rng):
        z = rng.standard_normal(self.dim)
        out = self._chol[0] * z
        out[1:] += self._chol[1, :-1] * z[:-1]
        return out

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        out = self.diag * x
        out[:-1] += self.offdiag * x[1:]
        out[1:] += self.offdiag * x[:-1]
        return out

    def inverse_bands(self) -> tuple[np.ndarray, np.ndarray]:
        """Diagonal and first off-diagonal of ``M^{-1}`` in O(dim).

        Uses the Takahashi recursion on the unit-lower LDL^T form of the
        banded Cholesky factor.
        """
        a = self._chol[0]
        d = a * a
        ell = self._chol[1, :-1] / a[:-1]
        n = self.dim
        inv_diag = np.empty(n)
        inv_off = np.empty(n - 1)
        inv_diag[-1] = 1.0 / d[-1]
        for i in range(n - 2, -1, -1):
            inv_off[i] = -ell[i] * inv_diag[i + 1]
            inv_diag[i] = 1.0 / d[i] - ell[i] * inv_off[i]
        return inv_diag, inv_off

    def to_dense(self):
        out = np.diag(self.diag)
        if self.dim > 1:
            out += np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)
        return out


class DenseMass(MassOperator):
    representation = "dense"

    def __init__(self, matrix):
        matrix = np.array(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError("dense mass must be a square matrix")
        self.matrix = matrix
        self.dim = matrix.shape[0]
        try:
            self._chol = sla.cholesky(matrix, lower=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NotPositiveDefiniteError(str(exc)) from exc

    def solve(self, r):
        return sla.cho_solve((self._chol, True), np.asarray(r, dtype=float))

    def logdet(self):
        return 2.0 * float(np.sum(np.log(np.diag(self._chol))))

    def draw(self, rng):
        return self._chol @ rng.standard_normal(self.dim)

    def to_dense(self):
        return self.matrix.copy()


class InverseDenseMass(MassOperator):
    """Mass given through its inverse: ``M = C^{-1}`` for a p.d. matrix ``C``.

    Velocities are plain products ``C r``; only sampling needs the factor.
    """

    representation = "dense"

    def __init__(self, inverse, chol=None):
        inverse = np.asarray(inverse, dtype=float)
        self.inverse = inverse
        self.dim = inverse.shape[0]
        if chol is None:
            try:
                chol = sla.cholesky(inverse, lower=True)
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise NotPositiveDefiniteError(str(exc)) from exc
        self._chol = chol

    def solve(self, r):
        return self.inverse @ np.asarray(r, dtype=float)

    def logdet(self):
        return -2.0 * float(np.sum(np.log(np.diag(self._chol))))

    def draw(self, rng):
        z = rng.standard_normal(self.dim)
        return sla.solve_triangular(self._chol, z, lower=True, trans="T")

    def to_dense(self):
        return np.linalg.inv(self.inverse)


class SpectralMass(MassOperator):
    """``M = V diag(w) V^T`` with orthonormal ``V``."""

    representation = "dense"

    def __init__(self, eigvecs, eigvals):
        eigvals = np.asarray(eigvals, dtype=float)
        if not np.all(np.isfinite(eigvals)) or np.any(eigvals <= 0.0):
            raise NotPositiveDefiniteError("spectral mass needs positive eigenvalues")
        self.eigvecs = np.asarray(eigvecs, dtype=float)
        self.eigvals = eigvals
        self.dim = eigvals.size

    def solve(self, r):
        return self.eigvecs @ ((self.eigvecs.T @ r) / self.eigvals)

    def logdet(self):
        return float(np.sum(np.log(self.eigvals)))

    def draw(self, rng):
        return self.eigvecs @ (np.sqrt(self.eigvals) * rng.standard_normal(self.dim))

    def to_dense(self):
        return (self.eigvecs * self.eigvals) @ self.eigvecs.T


class BlockDiagonalMass(MassOperator):
    representation = "block-diagonal"

    def __init__(self, blocks):
        self.blocks = tuple(blocks)
        sizes = [b.dim for b in self.blocks]
        self._splits = np.cumsum(sizes)[:-1]
        self.dim = int(sum(sizes))

    def _parts(self, r):
        return np.split(np.asarray(r, dtype=float), self._splits)

    def solve(self, r):
        return np.concatenate([b.solve(p) for b, p in zip(self.blocks, self._parts(r))])

    def quad_inv(self, r):
        return sum(b.quad_inv(p) for b, p in zip(self.blocks, self._parts(r)))

    def logdet(self):
        return sum(b.logdet() for b in self.blocks)

    def draw(self, rng):
        return np.concatenate([b.draw(rng) for b in self.blocks])

    def to_dense(self):
        return sla.block_diag(*[b.to_dense() for b in self.blocks])
