"""
Unit tests for the linear algebra module.
"""

import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

import pytest
import numpy as np
from scipy.integrate import trapezoid
from src.estimation.exceptions import (
    DegreeTooLarge,
    NotPSD,
    NotSymmetric,
    SingularCovariance,
)
from src.estimation.linalg import (
    LinearMap,
    gaussian_pdf,
    hermite_poly,
    hermite_zeros,
    log_gaussian_pdf,
    matrix_sqrt,
    standard_normal_pdf,
)


@pytest.fixture
def coupled_map():
    """The 2x2 map used throughout the vector-case checks."""
    return LinearMap([[0.5, 0.2], [0.2, 0.4]])


def test_matrix_sqrt_identity():
    """Test the square root of the identity."""
    S = matrix_sqrt(LinearMap.identity(2))
    np.testing.assert_allclose(S.entries, np.eye(2), atol=1e-14)


def test_matrix_sqrt_diagonal():
    """Test the square root of a diagonal matrix."""
    S = matrix_sqrt(LinearMap.diag([4.0, 9.0]))
    np.testing.assert_allclose(S.entries, np.diag([2.0, 3.0]), atol=1e-12)


def test_matrix_sqrt_squares_back(coupled_map):
    """Test S @ S reproduces A."""
    S = coupled_map.sqrt
    assert np.max(np.abs(S.entries @ S.entries - coupled_map.entries)) <= 1e-10
    assert np.allclose(S.entries, S.entries.T)
    assert S.eigen_floor >= 0


def test_matrix_sqrt_random_spd():
    """Test the square root on random SPD matrices."""
    rng = np.random.default_rng(3)
    for n in (1, 2, 3, 4):
        M = rng.standard_normal((n, n))
        A = LinearMap(M @ M.T + 0.1 * np.eye(n))
        S = matrix_sqrt(A)
        assert np.max(np.abs(S.entries @ S.entries - A.entries)) <= 1e-10


def test_matrix_sqrt_rejects_indefinite():
    """Test NotPSD for a negative eigenvalue."""
    with pytest.raises(NotPSD):
        matrix_sqrt(LinearMap.diag([1.0, -1.0]))


def test_linear_map_rejects_asymmetric():
    """Test NotSymmetric on construction."""
    with pytest.raises(NotSymmetric):
        LinearMap([[1.0, 0.5], [0.0, 1.0]])


def test_eigen_floor_matches_characteristic_roots(coupled_map):
    """Test the smallest eigenvalue against the 2x2 characteristic polynomial."""
    a, b, d = 0.5, 0.2, 0.4
    trace, det = a + d, a * d - b * b
    smallest = 0.5 * (trace - np.sqrt(trace ** 2 - 4 * det))
    assert abs(coupled_map.eigen_floor - smallest) < 1e-14
    assert coupled_map.is_pd


def test_gaussian_pdf_standard_values():
    """Test the standard normal density at the origin."""
    assert abs(gaussian_pdf([0.0], [0.0], LinearMap.identity(1)) - 0.3989422804014327) < 1e-12
    assert abs(gaussian_pdf([0.0, 0.0], [0.0, 0.0], LinearMap.identity(2)) - 1 / (2 * np.pi)) < 1e-14


def test_gaussian_pdf_scaled_variance():
    """Test N(0, 2) at x = 1 against the direct formula."""
    expected = np.exp(-0.25) / np.sqrt(4 * np.pi)
    assert abs(gaussian_pdf([1.0], [0.0], LinearMap([[2.0]])) - expected) < 1e-14


def test_gaussian_pdf_is_product_of_marginals():
    """Test the standard case factorizes into phi_0 terms."""
    x = np.array([0.3, -1.1])
    assert abs(gaussian_pdf(x, np.zeros(2), LinearMap.identity(2)) - np.prod(standard_normal_pdf(x))) < 1e-15


def test_gaussian_pdf_batch(coupled_map):
    """Test batched evaluation matches pointwise evaluation."""
    pts = np.array([[0.0, 0.0], [1.0, -0.5], [2.0, 1.0]])
    batch = log_gaussian_pdf(pts, [0.1, 0.2], coupled_map)
    single = [log_gaussian_pdf(p, [0.1, 0.2], coupled_map) for p in pts]
    np.testing.assert_allclose(batch, single, rtol=1e-14)


def test_gaussian_pdf_singular_covariance():
    """Test SingularCovariance for a degenerate covariance."""
    with pytest.raises(SingularCovariance):
        gaussian_pdf([0.0, 0.0], [0.0, 0.0], LinearMap.diag([1.0, 0.0]))


@pytest.mark.parametrize("variance", [0.1, 1.0, 10.0])
def test_gaussian_pdf_integrates_to_one(variance):
    """Test the density integrates to 1 over an 8-sigma window."""
    sd = np.sqrt(variance)
    x = np.linspace(-8 * sd, 8 * sd, 1601)
    total = trapezoid(gaussian_pdf(x.reshape(-1, 1), [0.0], LinearMap([[variance]])), x)
    assert 1 - 1e-8 <= total <= 1 + 1e-12


def test_hermite_poly_low_degrees():
    """Test He_0, He_1 and He_3."""
    assert hermite_poly(0).coefficients == (1.0,)
    assert hermite_poly(1).coefficients == (0.0, 1.0)
    np.testing.assert_allclose(hermite_poly(3).coefficients, [0.0, -3.0, 0.0, 1.0])


def test_hermite_poly_recurrence():
    """Test He_{m+1} = x He_m - m He_{m-1} and the unit leading coefficient."""
    x = np.linspace(-3, 3, 13)
    for m in range(1, 12):
        lhs = hermite_poly(m + 1)(x)
        rhs = x * hermite_poly(m)(x) - m * hermite_poly(m - 1)(x)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-9)
        assert hermite_poly(m).coefficients[-1] == 1.0


def test_hermite_poly_degree_guard():
    """Test DegreeTooLarge above degree 64."""
    with pytest.raises(DegreeTooLarge):
        hermite_poly(65)


def test_hermite_orthogonality():
    """Test int He_a He_b phi_0 = 0 for a != b."""
    x = np.linspace(-14, 14, 8001)
    weight = standard_normal_pdf(x)
    for a in range(7):
        for b in range(a + 1, 7):
            value = trapezoid(hermite_poly(a)(x) * hermite_poly(b)(x) * weight, x)
            assert abs(value) < 1e-8


def test_hermite_zeros_degree_three():
    """Test zeros of He_3 are -sqrt(3), 0, sqrt(3)."""
    np.testing.assert_allclose(hermite_zeros(3), [-np.sqrt(3), 0.0, np.sqrt(3)], atol=1e-13)


def test_hermite_zeros_degree_one():
    """Test the single zero of He_1."""
    assert hermite_zeros(1).tolist() == [0.0]


def test_hermite_zeros_degree_five():
    """Test zeros of He_5 against sign changes on a fine grid."""
    zeros = hermite_zeros(5)
    assert len(zeros) == 5
    assert np.all(np.diff(zeros) > 0)
    assert np.max(np.abs(hermite_poly(5)(zeros))) <= 1e-9

    grid = np.linspace(-4, 4, 80000)
    values = hermite_poly(5)(grid)
    crossings = grid[:-1][np.sign(values[:-1]) != np.sign(values[1:])]
    assert len(crossings) == 5
    np.testing.assert_allclose(zeros, crossings, atol=2e-4)


def test_hermite_zeros_symmetric():
    """Test zeros are paired under negation."""
    for m in range(1, 21):
        zeros = hermite_zeros(m)
        np.testing.assert_allclose(zeros, -zeros[::-1], atol=1e-12)
        poly = hermite_poly(m)
        scale = np.maximum(1.0, np.abs(poly.derivative_at(zeros)))
        assert np.all(np.abs(poly(zeros)) <= 1e-9 * scale)
