"""
Linear Algebra Module for L^p Estimation

Small dense symmetric matrices, multivariate Gaussian densities and the
probabilist's Hermite polynomials. Everything else in the package is
built on these pieces.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Tuple, Union

import numpy as np
from numpy.polynomial import hermite_e

from .exceptions import (
    DegreeTooLarge,
    InvalidInputError,
    NotPSD,
    NotSymmetric,
    SingularCovariance,
)

SYMMETRY_RTOL = 1e-12
PSD_TOL = 1e-12
MAX_HERMITE_DEGREE = 64

ArrayLike = Union[float, Iterable[float], np.ndarray]


class LinearMap:
    """
    A real n x n matrix, usually symmetric, with its spectrum cached.

    Symmetric maps are checked on construction and then symmetrized
    exactly, so downstream eigen-decompositions see a truly symmetric
    array.
    """

    def __init__(self, entries: ArrayLike, symmetric: bool = True):
        """
        Args:
            entries: Square matrix (a scalar is read as a 1 x 1 matrix)
            symmetric: Whether symmetry is asserted and enforced
        """
        arr = np.atleast_2d(np.asarray(entries, dtype=float))
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise InvalidInputError(f"LinearMap needs a square matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("LinearMap entries must be finite")

        if symmetric:
            scale = max(1.0, float(np.max(np.abs(arr))))
            if np.max(np.abs(arr - arr.T)) > SYMMETRY_RTOL * scale:
                raise NotSymmetric(f"Matrix is not symmetric within {SYMMETRY_RTOL:g}: {arr.tolist()}")
            arr = 0.5 * (arr + arr.T)

        arr = arr.copy()
        arr.setflags(write=False)
        self._entries = arr
        self.symmetric = symmetric

    @classmethod
    def identity(cls, n: int) -> 'LinearMap':
        return cls(np.eye(n))

    @classmethod
    def diag(cls, values: Iterable[float]) -> 'LinearMap':
        return cls(np.diag(np.asarray(list(values), dtype=float)))

    @property
    def n(self) -> int:
        return self._entries.shape[0]

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @cached_property
    def _eigh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.linalg.eigh(self._entries)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues in ascending order (real parts for non-symmetric maps)."""
        if self.symmetric:
            return self._eigh[0]
        return np.sort(np.linalg.eigvals(self._entries).real)

    @property
    def eigen_floor(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def is_psd(self) -> bool:
        return self.symmetric and self.eigen_floor >= -PSD_TOL

    @property
    def is_pd(self) -> bool:
        return self.symmetric and self.eigen_floor > 0

    @cached_property
    def sqrt(self) -> 'LinearMap':
        return matrix_sqrt(self)

    @cached_property
    def inverse_sqrt(self) -> 'LinearMap':
        if not self.is_pd:
            raise SingularCovariance("Inverse square root needs a positive definite matrix")
        vals, vecs = self._eigh
        return LinearMap((vecs / np.sqrt(vals)) @ vecs.T)

    def apply(self, x: ArrayLike) -> np.ndarray:
        """
        Apply the map to one vector or to a batch of row vectors.

        Args:
            x: Array of shape (n,) or (m, n)

        Returns:
            Array with the same shape as x
        """
        x = np.asarray(x, dtype=float)
        return x @ self._entries.T

    def __repr__(self) -> str:
        return f"LinearMap(n={self.n}, entries={self._entries.tolist()})"


def matrix_sqrt(A: LinearMap) -> LinearMap:
    """
    Principal square root of a symmetric positive semidefinite matrix.

    Args:
        A: Symmetric PSD map

    Returns:
        The unique symmetric PSD S with S @ S == A
    """
    if not A.symmetric:
        raise NotSymmetric("Square root is only defined here for symmetric maps")
    if A.eigen_floor < -PSD_TOL:
        raise NotPSD(f"Matrix has negative eigenvalue {A.eigen_floor:.3e}")

    vals, vecs = np.linalg.eigh(A.entries)
    root = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T
    return LinearMap(0.5 * (root + root.T))


def _as_points(x: ArrayLike, n: int) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim <= 1 and arr.size == n
    return arr.reshape(-1, n), single


def log_gaussian_pdf(x: ArrayLike, mean: ArrayLike, cov: LinearMap) -> Union[float, np.ndarray]:
    """
    Log density of N(mean, cov) at one point or a batch of points.

    Args:
        x: Point of shape (n,) or batch of shape (m, n)
        mean: Mean vector of length n
        cov: Symmetric positive definite covariance

    Returns:
        Scalar for a single point, array of length m for a batch
    """
    if not cov.symmetric or cov.eigen_floor <= 0:
        raise SingularCovariance(f"Covariance is not positive definite (eigen floor {cov.eigen_floor:.3e})")

    n = cov.n
    pts, single = _as_points(x, n)
    vals, vecs = cov._eigh
    proj = (pts - np.asarray(mean, dtype=float).reshape(1, n)) @ vecs
    maha = np.sum(proj ** 2 / vals, axis=1)
    out = -0.5 * (maha + np.sum(np.log(vals)) + n * np.log(2.0 * np.pi))
    return float(out[0]) if single else out


def gaussian_pdf(x: ArrayLike, mean: ArrayLike, cov: LinearMap) -> Union[float, np.ndarray]:
    """Multivariate normal density; see log_gaussian_pdf for shapes."""
    out = log_gaussian_pdf(x, mean, cov)
    return float(np.exp(out)) if np.isscalar(out) else np.exp(out)


def standard_normal_pdf(x: ArrayLike) -> np.ndarray:
    """Elementwise phi_0."""
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x ** 2) / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class HermitePoly:
    """Probabilist's Hermite polynomial He_m with power-basis coefficients."""
    degree: int
    coefficients: Tuple[float, ...]

    @property
    def _basis(self) -> np.ndarray:
        basis = np.zeros(self.degree + 1)
        basis[-1] = 1.0
        return basis

    def __call__(self, x: ArrayLike) -> np.ndarray:
        return hermite_e.hermeval(np.asarray(x, dtype=float), self._basis)

    def derivative_at(self, x: ArrayLike) -> np.ndarray:
        """He_m'(x) = m He_{m-1}(x)."""
        if self.degree == 0:
            return np.zeros_like(np.asarray(x, dtype=float))
        lower = np.zeros(self.degree)
        lower[-1] = 1.0
        return self.degree * hermite_e.hermeval(np.asarray(x, dtype=float), lower)


def _check_degree(m: int, minimum: int) -> None:
    if int(m) != m or m < minimum:
        raise InvalidInputError(f"Hermite degree must be an integer >= {minimum}, got {m}")
    if m > MAX_HERMITE_DEGREE:
        raise DegreeTooLarge(f"Hermite degree {m} exceeds {MAX_HERMITE_DEGREE}")


def hermite_poly(m: int) -> HermitePoly:
    """
    Build He_m.

    Args:
        m: Degree, 0 <= m <= 64

    Returns:
        HermitePoly with coefficients in increasing-power order
    """
    _check_degree(m, 0)
    m = int(m)
    basis = np.zeros(m + 1)
    basis[-1] = 1.0
    coeffs = hermite_e.herme2poly(basis)
    return HermitePoly(degree=m, coefficients=tuple(float(c) for c in coeffs))


def hermite_zeros(m: int) -> np.ndarray:
    """
    Zeros of He_m from the symmetric tridiagonal Jacobi matrix.

    The eigenvalues are polished with one Newton step and then paired
    exactly under negation.

    Args:
        m: Degree, 1 <= m <= 64

    Returns:
        Sorted array of the m real zeros
    """
    _check_degree(m, 1)
    m = int(m)
    off = np.sqrt(np.arange(1, m, dtype=float))
    jacobi = np.diag(off, 1) + np.diag(off, -1)
    zeros = np.linalg.eigvalsh(jacobi)

    poly = hermite_poly(m)
    slope = poly.derivative_at(zeros)
    zeros = zeros - poly(zeros) / slope

    zeros = 0.5 * (zeros - zeros[::-1])
    if m % 2 == 1:
        zeros[m // 2] = 0.0
    return zeros
