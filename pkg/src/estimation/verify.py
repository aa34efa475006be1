"""
Verification Module for L^p Estimation

Numerical checks behind the linearity results:

- orthogonality_residual: E[l'(X - A y) phi(y - X)] over a y-grid
- MuMeasure / convolution_residual: the same condition after the change of
  variable x -> A^{-1/2} x with the exponentially reweighted measure mu
- ft_odd_kernel / ft_zero_scan: the sine transform g of sign(x)|x|^s phi_0(x)
- poly_moment_functional: E[|Z_i|^(k-1) sign(Z_i) q(Z - y)] for polynomials q
"""

import logging
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from numpy.polynomial import hermite_e, legendre
from scipy.optimize import brentq
from scipy.special import gamma, hyp1f1, roots_genlaguerre

from .exceptions import (
    DegreeTooLarge,
    DimensionTooLarge,
    InvalidInputError,
    NotPD,
    NotPSD,
    QuadratureUnderflow,
)
from .linalg import LinearMap
from .loss import LossSpec, loss_gradient
from .priors import Prior
from .quadrature import (
    QuadratureConfig,
    aligned_grid,
    as_vector,
    check_map,
    log_noise_density,
    prior_quadrature,
)

logger = logging.getLogger(__name__)

PASS_TOL = 1e-6
LOG_TINY = np.log(np.finfo(float).tiny)
MAX_POLY_DEGREE = 6
MAX_POLY_DIM = 2

# Panel design for the sine transform
KERNEL_CUTOFF = 10.0
KERNEL_PANEL = 0.5
KERNEL_GL_NODES = 20
KERNEL_GRADING_LEVELS = 40
KERNEL_CHUNK = 2048


@dataclass
class ResidualReport:
    """Residual vectors of a linearity condition over a y-grid."""
    y_values: np.ndarray
    residuals: np.ndarray
    max_norm: float
    cfg: QuadratureConfig

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.residuals, axis=1)

    def passed(self, tol: float = PASS_TOL) -> bool:
        return self.max_norm <= tol

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.y_values, columns=[f"y_{i + 1}" for i in range(self.y_values.shape[1])])
        df['residual_norm'] = self.norms
        return df


def _make_report(ys: np.ndarray, residuals: List[np.ndarray], cfg: QuadratureConfig) -> ResidualReport:
    residuals = np.asarray(residuals, dtype=float).reshape(ys.shape)
    norms = np.linalg.norm(residuals, axis=1)
    return ResidualReport(y_values=ys, residuals=residuals, max_norm=float(norms.max()), cfg=cfg)


def _weighted_gradient_sum(log_terms: np.ndarray, kinks: np.ndarray, spec: LossSpec,
                           y: np.ndarray) -> np.ndarray:
    if log_terms.size == 0 or log_terms.max() < LOG_TINY:
        raise QuadratureUnderflow(f"Every quadrature term underflows at y={y.tolist()}")
    return np.exp(log_terms) @ loss_gradient(kinks, spec)


def _check_psd(A: LinearMap) -> None:
    if not A.is_psd:
        raise NotPSD(f"A must be symmetric positive semidefinite, eigen floor {A.eigen_floor:.3e}")


def orthogonality_residual(prior: Prior, A: LinearMap, spec: LossSpec, y_grid,
                           cfg: Optional[QuadratureConfig] = None) -> ResidualReport:
    """
    Evaluate E[l'_{p,k}(X - A y) phi(y - X)] at every y in the grid.

    The linear estimator y -> A y is optimal exactly when this vanishes
    for all y.

    Args:
        prior: Any prior variant
        A: Symmetric PSD map
        spec: Loss exponents
        y_grid: Observation points, shape (m, n)
        cfg: Quadrature settings

    Returns:
        ResidualReport over the grid
    """
    cfg = cfg or QuadratureConfig()
    _check_psd(A)
    check_map(A, prior.dim)
    ys = np.asarray(y_grid, dtype=float).reshape(-1, prior.dim)

    residuals = []
    for y in ys:
        center = A.apply(y)
        nodes, log_mass = prior_quadrature(prior, y, center, cfg)
        log_terms = log_mass + log_noise_density(y, nodes)
        residuals.append(_weighted_gradient_sum(log_terms, nodes - center, spec, y))

    report = _make_report(ys, residuals, cfg)
    logger.info(f"Orthogonality residual over {len(ys)} points: max_norm={report.max_norm:.3e}")
    return report


class MuMeasure:
    """
    The measure d mu(x') = exp(x'^T (I - A) x' / 2) dP_{A^{-1/2} X}(x').

    Not a probability measure; its total mass usually exceeds 1.
    """

    def __init__(self, prior: Prior, A: LinearMap):
        self.prior = prior
        self.A = A

    @property
    def dim(self) -> int:
        return self.prior.dim

    def _log_weight(self, x_prime: np.ndarray) -> np.ndarray:
        quad = x_prime @ (np.eye(self.dim) - self.A.entries)
        return 0.5 * np.sum(quad * x_prime, axis=1)

    def log_density(self, x_prime) -> np.ndarray:
        """Log density of mu at points x' (density priors only)."""
        if self.prior.is_discrete:
            raise InvalidInputError("Discrete priors induce an atomic mu; use atoms()")
        x_prime = np.asarray(x_prime, dtype=float).reshape(-1, self.dim)
        x = self.A.sqrt.apply(x_prime)
        log_jacobian = 0.5 * float(np.sum(np.log(self.A.eigenvalues)))
        return self.prior.log_density(x) + log_jacobian + self._log_weight(x_prime)

    def atoms(self) -> Tuple[np.ndarray, np.ndarray]:
        """Atom locations A^{-1/2} x_j and reweighted masses (discrete priors only)."""
        if not self.prior.is_discrete:
            raise InvalidInputError("Density priors induce a continuous mu; use log_density()")
        points, probs = self.prior.support()
        x_prime = self.A.inverse_sqrt.apply(points)
        return x_prime, probs * np.exp(self._log_weight(x_prime))

    def grid(self, cfg: Optional[QuadratureConfig] = None) -> Tuple[np.ndarray, np.ndarray]:
        """
        Materialize mu as point masses.

        Density priors are discretized on a uniform grid centered at 0
        (n <= 2); discrete priors return their atoms.
        """
        if self.prior.is_discrete:
            return self.atoms()
        cfg = cfg or QuadratureConfig()
        if self.dim > 2:
            raise DimensionTooLarge(f"Density grids for mu support n <= 2, got {self.dim}")
        axis = aligned_grid(0.0, [0.0], cfg)
        mesh = np.meshgrid(*([axis] * self.dim), indexing='ij')
        points = np.stack([m.ravel() for m in mesh], axis=1)
        masses = np.exp(self.log_density(points)) * cfg.spacing ** self.dim
        return points, masses

    def total_mass(self, cfg: Optional[QuadratureConfig] = None) -> float:
        return float(self.grid(cfg)[1].sum())


def mu_transform(prior: Prior, A: LinearMap) -> MuMeasure:
    """
    Build mu from a prior and a positive definite A.

    Raises:
        NotPD: If A is not positive definite
    """
    if not A.is_pd:
        raise NotPD(f"mu needs a positive definite A, eigen floor {A.eigen_floor:.3e}")
    check_map(A, prior.dim)
    return MuMeasure(prior, A)


def convolution_residual(mu: MuMeasure, spec: LossSpec, y_grid,
                         cfg: Optional[QuadratureConfig] = None) -> ResidualReport:
    """
    Evaluate int l'(A^{1/2}(x' - y')) phi(y' - x') d mu(x') at every y' in the grid.

    The prior's quadrature is pulled back through x' = A^{-1/2} x and
    centered so that the kink x' = y' is a node.

    Args:
        mu: Output of mu_transform
        spec: Loss exponents
        y_grid: Transformed observation points y', shape (m, n)
        cfg: Quadrature settings

    Returns:
        ResidualReport indexed by y'
    """
    cfg = cfg or QuadratureConfig()
    A = mu.A
    ys = np.asarray(y_grid, dtype=float).reshape(-1, mu.dim)

    residuals = []
    for y_prime in ys:
        y = A.inverse_sqrt.apply(y_prime)
        center = A.sqrt.apply(y_prime)
        nodes, log_mass = prior_quadrature(mu.prior, y, center, cfg)
        x_prime = A.inverse_sqrt.apply(nodes)
        log_terms = log_mass + mu._log_weight(x_prime) + log_noise_density(y_prime, x_prime)
        # A^{1/2}(x' - y') taken in x coordinates so the kink node is exactly 0
        kinks = nodes - center
        residuals.append(_weighted_gradient_sum(log_terms, kinks, spec, y_prime))

    report = _make_report(ys, residuals, cfg)
    logger.info(f"Convolution residual over {len(ys)} points: max_norm={report.max_norm:.3e}")
    return report


def residuals_agree(prior: Prior, A: LinearMap, spec: LossSpec, y_grid,
                    cfg: Optional[QuadratureConfig] = None,
                    tol: float = PASS_TOL) -> Tuple[bool, ResidualReport, ResidualReport]:
    """
    Run both forms of the linearity condition and compare their verdicts.

    The convolution form is evaluated at y' = A^{1/2} y for each y.

    Returns:
        Tuple of (verdicts agree, orthogonality report, convolution report)
    """
    cfg = cfg or QuadratureConfig()
    orth = orthogonality_residual(prior, A, spec, y_grid, cfg)
    conv = convolution_residual(mu_transform(prior, A), spec, A.sqrt.apply(orth.y_values), cfg)
    agree = orth.passed(tol) == conv.passed(tol)
    if not agree:
        logger.warning(f"Residual verdicts disagree: orth={orth.max_norm:.3e} conv={conv.max_norm:.3e}")
    return agree, orth, conv


def _kernel_rule(exponent: float, omega_max: float) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre panels on [0, KERNEL_CUTOFF] with weights folding in x^s phi_0(x)."""
    panel = min(np.pi / omega_max, KERNEL_PANEL) if omega_max > 0 else KERNEL_PANEL
    count = int(np.ceil((KERNEL_CUTOFF - panel) / panel))
    outer = np.linspace(panel, KERNEL_CUTOFF, count + 1)
    graded = panel * 0.5 ** np.arange(KERNEL_GRADING_LEVELS, 0, -1)
    edges = np.concatenate([[0.0], graded, outer])

    t, w = legendre.leggauss(KERNEL_GL_NODES)
    left, right = edges[:-1, None], edges[1:, None]
    half = 0.5 * (right - left)
    x = (left + half * (t + 1.0)).ravel()
    weights = (half * w).ravel()

    s = exponent - 1.0
    kernel = x ** s * np.exp(-0.5 * x ** 2) / np.sqrt(2.0 * np.pi)
    return x, 2.0 * weights * kernel


def ft_odd_kernel(exponent: float, omega):
    """
    g(omega) = 2 int_0^inf x^(exponent-1) phi_0(x) sin(omega x) dx.

    The Fourier transform int h(x) e^{-i omega x} dx of
    h(x) = sign(x)|x|^(exponent-1) phi_0(x) equals -i g(omega).

    Args:
        exponent: Exponent parameter (k or p), at least 1
        omega: Scalar or array of frequencies

    Returns:
        Float for scalar omega, array otherwise
    """
    if exponent < 1:
        raise InvalidInputError(f"exponent must be >= 1, got {exponent}")
    omegas = np.asarray(omega, dtype=float)
    flat = omegas.ravel()
    x, weights = _kernel_rule(exponent, float(np.max(np.abs(flat))) if flat.size else 0.0)

    out = np.empty_like(flat)
    for start in range(0, flat.size, KERNEL_CHUNK):
        chunk = flat[start:start + KERNEL_CHUNK]
        out[start:start + KERNEL_CHUNK] = np.sin(np.outer(chunk, x)) @ weights
    out = out.reshape(omegas.shape)
    return float(out) if out.ndim == 0 else out


def ft_odd_kernel_closed_form(exponent: float, omega):
    """Same transform via the confluent hypergeometric function 1F1."""
    s = exponent - 1.0
    omega = np.asarray(omega, dtype=float)
    scale = gamma(1.0 + s / 2.0) * 2.0 ** (s / 2.0 + 1.0) / np.sqrt(2.0 * np.pi)
    out = omega * scale * hyp1f1(1.0 + s / 2.0, 1.5, -0.5 * omega ** 2)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class ZeroScanResult:
    """
    Outcome of scanning g on (0, omega_max].

    min_scaled_abs divides out the Gaussian envelope exp(-omega^2 / 2),
    which otherwise drives |g| toward zero without a sign change.
    """
    min_abs: float
    min_scaled_abs: float
    zero_locations: List[float] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{
            'min_abs': self.min_abs,
            'min_scaled_abs': self.min_scaled_abs,
            'zeros': ' '.join(repr(z) for z in self.zero_locations),
        }])


def ft_zero_scan(exponent: float, omega_max: float = 8.0, step: float = 1e-3) -> ZeroScanResult:
    """
    Locate sign changes of g on the grid step, 2 step, ..., omega_max.

    Args:
        exponent: Exponent parameter, at least 1
        omega_max: Right end of the scan
        step: Grid spacing

    Returns:
        ZeroScanResult with brentq-polished zero locations
    """
    if step <= 0 or omega_max <= step:
        raise InvalidInputError(f"Need 0 < step < omega_max, got step={step}, omega_max={omega_max}")
    grid = step * np.arange(1, int(round(omega_max / step)) + 1)
    values = ft_odd_kernel(exponent, grid)
    magnitude = np.abs(values)
    scaled = magnitude * np.exp(0.5 * grid ** 2)

    zeros = []
    signs = np.sign(values)
    for i in np.flatnonzero(signs == 0):
        zeros.append(float(grid[i]))
    for i in np.flatnonzero(signs[:-1] * signs[1:] < 0):
        root = brentq(lambda w: ft_odd_kernel(exponent, w), grid[i], grid[i + 1], xtol=1e-14, rtol=1e-14)
        zeros.append(float(root))
    zeros.sort()

    logger.info(f"Scan of g for exponent {exponent:g} on (0, {omega_max:g}]: {len(zeros)} zero(s)")
    return ZeroScanResult(min_abs=float(magnitude.min()), min_scaled_abs=float(scaled.min()),
                          zero_locations=zeros)


class Polynomial:
    """
    Multivariate polynomial sum_alpha c_alpha x^alpha.

    Coefficients are keyed by exponent tuples; missing keys are 0.
    """

    def __init__(self, coefficients: Dict[Tuple[int, ...], float], dim: Optional[int] = None):
        if not coefficients and dim is None:
            raise InvalidInputError("An empty polynomial needs an explicit dim")
        self.dim = dim if dim is not None else len(next(iter(coefficients)))
        self.coefficients = {}
        for alpha, c in coefficients.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.dim or min(alpha) < 0:
                raise InvalidInputError(f"Invalid multi-index {alpha} for dimension {self.dim}")
            self.coefficients[alpha] = float(c)

    @classmethod
    def constant(cls, value: float, dim: int) -> 'Polynomial':
        return cls({(0,) * dim: value}, dim)

    @classmethod
    def random(cls, dim: int, degree: int, rng: np.random.Generator) -> 'Polynomial':
        """Standard-normal coefficients on every monomial of total degree <= degree."""
        coeffs = {alpha: float(rng.standard_normal())
                  for alpha in product(range(degree + 1), repeat=dim) if sum(alpha) <= degree}
        return cls(coeffs, dim)

    @property
    def degree(self) -> int:
        active = [sum(a) for a, c in self.coefficients.items() if c != 0.0]
        return max(active) if active else 0

    @property
    def is_constant(self) -> bool:
        return self.degree == 0

    def __call__(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, self.dim)
        out = np.zeros(len(points))
        for alpha, c in self.coefficients.items():
            out += c * np.prod(points ** np.asarray(alpha), axis=1)
        return out


def poly_moment_functional(poly: Polynomial, k: float, i: int, y,
                           cfg: Optional[QuadratureConfig] = None) -> float:
    """
    E[|Z_i|^(k-1) sign(Z_i) poly(Z - y)] for Z ~ N(0, I_n).

    Coordinate i is folded onto the half line, leaving the weight
    z^k phi_0(z) times the odd part of the polynomial divided by z; a
    generalized Gauss-Laguerre rule integrates that exactly. The other
    coordinates use Gauss-Hermite.

    Args:
        poly: Polynomial of degree <= 6 in n <= 2 variables
        k: Loss exponent, at least 1
        i: Coordinate carrying the odd factor
        y: Shift vector
        cfg: Quadrature settings (node counts)

    Returns:
        The moment value
    """
    cfg = cfg or QuadratureConfig()
    if poly.degree > MAX_POLY_DEGREE:
        raise DegreeTooLarge(f"Polynomial degree {poly.degree} exceeds {MAX_POLY_DEGREE}")
    if poly.dim > MAX_POLY_DIM:
        raise DimensionTooLarge(f"Moment functional supports n <= {MAX_POLY_DIM}, got {poly.dim}")
    if not 0 <= i < poly.dim:
        raise InvalidInputError(f"Coordinate {i} out of range for dimension {poly.dim}")
    y = as_vector(y, poly.dim)

    nodes = max(cfg.gauss_hermite_nodes, poly.degree // 2 + 2)
    t, w = roots_genlaguerre(nodes, 0.5 * (k - 1.0))
    z = np.sqrt(2.0 * t)
    half_scale = 2.0 ** (0.5 * (k - 1.0)) / np.sqrt(2.0 * np.pi)

    axes = []
    axis_weights = []
    for j in range(poly.dim):
        if j == i:
            axes.append(z)
            axis_weights.append(w * half_scale)
        else:
            h, hw = hermite_e.hermegauss(nodes)
            axes.append(h)
            axis_weights.append(hw / np.sqrt(2.0 * np.pi))

    mesh = np.meshgrid(*axes, indexing='ij')
    points = np.stack([m.ravel() for m in mesh], axis=1)
    wmesh = np.meshgrid(*axis_weights, indexing='ij')
    weights = np.prod(np.stack([m.ravel() for m in wmesh], axis=1), axis=1)

    mirrored = points.copy()
    mirrored[:, i] = -mirrored[:, i]
    odd_ratio = (poly(points - y) - poly(mirrored - y)) / points[:, i]
    return float(weights @ odd_ratio)
