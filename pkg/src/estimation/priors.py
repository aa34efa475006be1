"""
Prior Distribution Module for L^p Estimation

Representations of the signal prior P_X:

- GaussianPrior: N(mean, cov), any dimension up to 4
- GridDensityPrior: masses on a tensor grid (n <= 2)
- AtomicPrior: finitely many atoms
- CosineGaussianPrior: scalar Gaussian envelope times 1 + rho cos(omega x / sqrt(a) + theta)

The models double as the prior file format (see docs/PRIOR_FORMAT.md):
each serializes to a JSON object tagged by its "type" field.
"""

import logging
from functools import cached_property
from typing import Annotated, Callable, List, Literal, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, model_validator
from scipy.integrate import trapezoid

from .exceptions import (
    DimensionTooLarge,
    ImproperPrior,
    InvalidInputError,
    NoZeroFound,
    NormalizationMismatch,
    NotPD,
    NotSymmetric,
)
from .linalg import LinearMap, hermite_zeros, log_gaussian_pdf

logger = logging.getLogger(__name__)

WEIGHT_SUM_TOL = 1e-10
NORMALIZATION_TOL = 1e-8
NEGLIGIBLE_MODULATION = 1e-12
IMPROPER_MARGIN = 1e-12
MAX_DIM = 4
MAX_GRID_DIM = 2

# Frequencies beyond 8 sit under a Gaussian factor below 1e-14.
OMEGA_WINDOW = 8.0
OMEGA_SCAN_STEP = 1e-3


def _check_weights(weights: Sequence[float], label: str) -> None:
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        raise ValueError(f"{label} must not be empty")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError(f"{label} must be finite and nonnegative")
    if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
        raise ValueError(f"{label} must sum to 1 within {WEIGHT_SUM_TOL:g}, got {w.sum():.15g}")


class GaussianPrior(BaseModel):
    """Multivariate normal prior N(mean, cov) with SPD covariance."""
    model_config = ConfigDict(frozen=True)

    type: Literal['gaussian'] = 'gaussian'
    mean: List[float] = Field(..., min_length=1, max_length=MAX_DIM, description="Mean vector")
    cov: List[List[float]] = Field(..., description="Symmetric positive definite covariance")

    @model_validator(mode='after')
    def _check_covariance(self) -> 'GaussianPrior':
        cov = np.asarray(self.cov, dtype=float)
        n = len(self.mean)
        if cov.shape != (n, n):
            raise ValueError(f"cov must be {n}x{n}, got shape {cov.shape}")
        if LinearMap(cov).eigen_floor <= 0:
            raise ValueError("cov must be positive definite")
        return self

    @property
    def dim(self) -> int:
        return len(self.mean)

    @property
    def is_discrete(self) -> bool:
        return False

    @cached_property
    def mean_vector(self) -> np.ndarray:
        return np.asarray(self.mean, dtype=float)

    @cached_property
    def cov_map(self) -> LinearMap:
        return LinearMap(self.cov)

    @property
    def center(self) -> np.ndarray:
        return self.mean_vector

    def log_density(self, x) -> np.ndarray:
        return np.atleast_1d(log_gaussian_pdf(x, self.mean_vector, self.cov_map))

    def density(self, x) -> np.ndarray:
        return np.exp(self.log_density(x))

    def posterior_moments(self, y) -> Tuple[np.ndarray, LinearMap]:
        """
        Closed-form posterior of X given Y = y under unit Gaussian noise.

        Returns:
            Tuple of (posterior mean, posterior covariance)
        """
        y = np.asarray(y, dtype=float).reshape(self.dim)
        cov = self.cov_map.entries
        gain = np.linalg.solve(cov + np.eye(self.dim), cov)
        mean = self.mean_vector + gain.T @ (y - self.mean_vector)
        return mean, LinearMap(0.5 * (gain + gain.T))

    def log_evidence(self, y) -> float:
        """log of the marginal density of Y at y."""
        marginal = LinearMap(self.cov_map.entries + np.eye(self.dim))
        return float(log_gaussian_pdf(np.asarray(y, dtype=float), self.mean_vector, marginal))


class GridDensityPrior(BaseModel):
    """
    Probability masses on a tensor-product grid.

    weights are flattened in C order over the axes, so for two axes
    weights[i * len(axes[1]) + j] sits at (axes[0][i], axes[1][j]).
    """
    model_config = ConfigDict(frozen=True)

    type: Literal['grid'] = 'grid'
    axes: List[List[float]] = Field(..., min_length=1, description="One increasing node list per dimension")
    weights: List[float] = Field(..., description="Nonnegative masses summing to 1")

    @model_validator(mode='after')
    def _check_grid(self) -> 'GridDensityPrior':
        if len(self.axes) > MAX_GRID_DIM:
            raise DimensionTooLarge(f"Grid priors support n <= {MAX_GRID_DIM}, got {len(self.axes)}")
        for axis in self.axes:
            if len(axis) == 0 or np.any(np.diff(axis) <= 0):
                raise ValueError("Grid axes must be nonempty and strictly increasing")
        expected = int(np.prod([len(a) for a in self.axes]))
        if len(self.weights) != expected:
            raise ValueError(f"Expected {expected} weights for the grid, got {len(self.weights)}")
        _check_weights(self.weights, "Grid weights")
        return self

    @classmethod
    def from_density(cls, density: Callable[[np.ndarray], np.ndarray],
                     axes: Sequence[Sequence[float]]) -> 'GridDensityPrior':
        """
        Discretize a density on a tensor grid.

        Args:
            density: Callable mapping an (m, n) array of points to m values
            axes: Node list per dimension

        Returns:
            GridDensityPrior with masses proportional to the density values
        """
        axes = [list(map(float, a)) for a in axes]
        mesh = np.meshgrid(*[np.asarray(a) for a in axes], indexing='ij')
        points = np.stack([m.ravel() for m in mesh], axis=1)
        values = np.asarray(density(points), dtype=float).ravel()
        total = values.sum()
        if not np.isfinite(total) or total <= 0:
            raise ImproperPrior("Density has no mass on the requested grid")
        return cls(axes=axes, weights=(values / total).tolist())

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def is_discrete(self) -> bool:
        return True

    @property
    def center(self) -> np.ndarray:
        points, probs = self.support()
        return probs @ points

    @cached_property
    def support_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        mesh = np.meshgrid(*[np.asarray(a, dtype=float) for a in self.axes], indexing='ij')
        points = np.stack([m.ravel() for m in mesh], axis=1)
        return points, np.asarray(self.weights, dtype=float)

    def support(self) -> Tuple[np.ndarray, np.ndarray]:
        """Grid points of shape (m, n) and their masses."""
        return self.support_arrays


class AtomicPrior(BaseModel):
    """Finitely supported prior: atoms[i] carries probability probs[i]."""
    model_config = ConfigDict(frozen=True)

    type: Literal['atomic'] = 'atomic'
    atoms: List[List[float]] = Field(..., min_length=1, description="Support points")
    probs: List[float] = Field(..., min_length=1, description="Probabilities summing to 1")

    @model_validator(mode='after')
    def _check_atoms(self) -> 'AtomicPrior':
        dims = {len(a) for a in self.atoms}
        if len(dims) != 1:
            raise ValueError("All atoms must have the same dimension")
        n = dims.pop()
        if n < 1:
            raise ValueError("Atoms must be nonempty vectors")
        if n > MAX_DIM:
            raise DimensionTooLarge(f"Atomic priors support n <= {MAX_DIM}, got {n}")
        if len(self.probs) != len(self.atoms):
            raise ValueError("atoms and probs must have the same length")
        _check_weights(self.probs, "Atom probabilities")
        return self

    @property
    def dim(self) -> int:
        return len(self.atoms[0])

    @property
    def is_discrete(self) -> bool:
        return True

    @property
    def center(self) -> np.ndarray:
        points, probs = self.support()
        return probs @ points

    @cached_property
    def support_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.atoms, dtype=float), np.asarray(self.probs, dtype=float)

    def support(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.support_arrays


class CosineGaussianPrior(BaseModel):
    """
    Scalar prior with density proportional to

        exp(-(1-a)/a * x^2 / 2) * (1 + rho * cos(omega * x / sqrt(a) + theta))

    For omega at a zero of the odd-kernel transform g_p this prior makes
    the minimum L^p estimator equal to a * y.
    """
    model_config = ConfigDict(frozen=True)

    type: Literal['cosine'] = 'cosine'
    a: float = Field(..., gt=0, lt=1, description="Slope of the induced linear estimator")
    rho: float = Field(..., ge=-1, le=1, description="Modulation depth")
    theta: float = Field(0.0, description="Modulation phase")
    omega: float = Field(..., description="Modulation frequency")

    @model_validator(mode='after')
    def _check_normalization(self) -> 'CosineGaussianPrior':
        if self.normalization <= 0:
            raise ImproperPrior("rho * cos(theta) = -1 with omega = 0 leaves no probability mass")
        numeric = self._quadrature_normalization()
        if abs(numeric - self.normalization) > NORMALIZATION_TOL * self.normalization:
            raise NormalizationMismatch(
                f"Closed-form normalization {self.normalization:.15g} disagrees with quadrature {numeric:.15g}"
            )
        return self

    @property
    def dim(self) -> int:
        return 1

    @property
    def is_discrete(self) -> bool:
        return False

    @property
    def center(self) -> np.ndarray:
        return np.zeros(1)

    @property
    def curvature(self) -> float:
        return (1.0 - self.a) / self.a

    @property
    def envelope_variance(self) -> float:
        return self.a / (1.0 - self.a)

    @property
    def damping(self) -> float:
        """Gaussian factor multiplying the modulation's contribution to the mass."""
        return float(np.exp(-self.omega ** 2 / (2.0 * self.curvature * self.a)))

    @property
    def normalization(self) -> float:
        """Integral of the unnormalized density, in closed form."""
        c = self.curvature
        return float(np.sqrt(2.0 * np.pi / c) * (1.0 + self.rho * self.damping * np.cos(self.theta)))

    def _unnormalized(self, x: np.ndarray) -> np.ndarray:
        envelope = np.exp(-0.5 * self.curvature * x ** 2)
        return envelope * (1.0 + self.rho * np.cos(self.omega * x / np.sqrt(self.a) + self.theta))

    def _quadrature_normalization(self) -> float:
        sigma = np.sqrt(self.envelope_variance)
        step = sigma / 40.0
        # the modulation integrates to zero here, so only the envelope is checked
        envelope_only = abs(self.rho) * self.damping < NEGLIGIBLE_MODULATION
        if self.omega != 0 and not envelope_only:
            step = min(step, 2.0 * np.pi * np.sqrt(self.a) / abs(self.omega) / 40.0)
        count = 2 * int(np.ceil(12.0 * sigma / step)) + 1
        x = np.linspace(-12.0 * sigma, 12.0 * sigma, count)
        if envelope_only:
            return float(trapezoid(np.exp(-0.5 * self.curvature * x ** 2), x))
        return float(trapezoid(self._unnormalized(x), x))

    def log_density(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        with np.errstate(divide='ignore'):
            modulation = np.log1p(self.rho * np.cos(self.omega * x / np.sqrt(self.a) + self.theta))
        return -0.5 * self.curvature * x ** 2 + modulation - np.log(self.normalization)

    def density(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        return self._unnormalized(x) / self.normalization


Prior = Annotated[
    Union[GaussianPrior, GridDensityPrior, AtomicPrior, CosineGaussianPrior],
    Field(discriminator='type'),
]

_PRIOR_ADAPTER = TypeAdapter(Prior)


def parse_prior(data: dict) -> Prior:
    """Validate a decoded prior object (raises pydantic.ValidationError)."""
    return _PRIOR_ADAPTER.validate_python(data)


def load_prior(path: str) -> Prior:
    """Read a prior file in the documented JSON format."""
    with open(path, 'r') as f:
        return _PRIOR_ADAPTER.validate_json(f.read())


def dump_prior(prior: Prior) -> str:
    """Serialize a prior to its JSON file format."""
    return prior.model_dump_json(indent=2)


def gaussian_prior_for_A(A: LinearMap) -> GaussianPrior:
    """
    The Gaussian prior whose optimal estimator is y -> A y for every loss.

    Args:
        A: Symmetric map with eigenvalues in (0, 1)

    Returns:
        GaussianPrior with mean 0 and covariance (I - A)^{-1} A
    """
    if not A.symmetric:
        raise NotSymmetric("A must be symmetric")
    if A.eigen_floor <= 0:
        raise NotPD(f"A must be positive definite, smallest eigenvalue is {A.eigen_floor:.3e}")
    top = float(A.eigenvalues[-1])
    if top >= 1.0 - IMPROPER_MARGIN:
        raise ImproperPrior(f"A has eigenvalue {top:.6g} >= 1; the prior would not be a proper distribution")

    eye = np.eye(A.n)
    cov = np.linalg.solve(eye - A.entries, A.entries)
    cov = 0.5 * (cov + cov.T)
    logger.debug(f"Linearity-inducing Gaussian prior for A={A.entries.tolist()}: cov={cov.tolist()}")
    return GaussianPrior(mean=[0.0] * A.n, cov=cov.tolist())


def gaussian_mixture_prior(means: Sequence[float], variances: Sequence[float],
                           weights: Sequence[float], half_width: float = 8.0,
                           nodes: int = 1601) -> GridDensityPrior:
    """
    Scalar Gaussian mixture discretized on a uniform grid.

    Args:
        means: Component means
        variances: Component variances
        weights: Mixing weights (renormalized)
        half_width: Grid reaches half_width standard deviations past the outer components
        nodes: Number of grid nodes

    Returns:
        GridDensityPrior approximating the mixture
    """
    means = np.asarray(means, dtype=float)
    sds = np.sqrt(np.asarray(variances, dtype=float))
    mix = np.asarray(weights, dtype=float)
    if not (means.shape == sds.shape == mix.shape) or np.any(sds <= 0) or np.any(mix < 0):
        raise InvalidInputError("Mixture components need matching shapes, positive variances, nonnegative weights")
    mix = mix / mix.sum()
    axis = np.linspace(np.min(means - half_width * sds), np.max(means + half_width * sds), nodes)

    def density(points: np.ndarray) -> np.ndarray:
        x = points[:, :1]
        comps = np.exp(-0.5 * ((x - means) / sds) ** 2) / (sds * np.sqrt(2.0 * np.pi))
        return comps @ mix

    return GridDensityPrior.from_density(density, [axis])


def cosine_prior_density(prior: CosineGaussianPrior, x) -> np.ndarray:
    """Normalized density of a cosine-modulated Gaussian prior."""
    return prior.density(x)


def omega_for_p(p: float, omega_max: float = OMEGA_WINDOW,
                step: float = OMEGA_SCAN_STEP) -> np.ndarray:
    """
    Admissible modulation frequencies for the cosine prior at loss exponent p.

    Even integer p uses the zeros of He_{p-1}; any other p > 2 scans the
    odd-kernel transform g_p for sign changes on (0, omega_max].

    Args:
        p: Loss exponent, p > 2
        omega_max: Right end of the scan window
        step: Scan step

    Returns:
        Sorted array of frequencies, symmetric about 0 and containing 0
    """
    if p <= 2:
        raise NoZeroFound(f"Cosine priors need p > 2, got p={p}")
    if float(p).is_integer() and int(p) % 2 == 0:
        return hermite_zeros(int(p) - 1)

    from .verify import ft_zero_scan

    scan = ft_zero_scan(p, omega_max, step)
    if not scan.zero_locations:
        raise NoZeroFound(f"No sign change of g_{p:g} on (0, {omega_max:g}]")
    positive = np.asarray(scan.zero_locations, dtype=float)
    logger.info(f"Found {positive.size} admissible omega(s) for p={p:g}: {positive.tolist()}")
    return np.concatenate([-positive[::-1], [0.0], positive])


def sample_prior(prior: Prior, count: int, seed: int = 0) -> np.ndarray:
    """
    Draw independent samples from a prior.

    Args:
        prior: Any prior variant
        count: Number of samples (>= 1)
        seed: Seed for numpy's default generator

    Returns:
        Array of shape (count, n)
    """
    if count < 1:
        raise InvalidInputError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)

    if isinstance(prior, GaussianPrior):
        noise = rng.standard_normal((count, prior.dim))
        return prior.mean_vector + prior.cov_map.sqrt.apply(noise)

    if isinstance(prior, (AtomicPrior, GridDensityPrior)):
        points, probs = prior.support()
        cumulative = np.cumsum(probs)
        idx = np.searchsorted(cumulative, rng.random(count) * cumulative[-1], side='right')
        return points[np.minimum(idx, len(points) - 1)]

    if isinstance(prior, CosineGaussianPrior):
        sigma = np.sqrt(prior.envelope_variance)
        accepted = []
        total = 0
        batch = max(2 * count, 1024)
        while total < count:
            x = sigma * rng.standard_normal(batch)
            ratio = 0.5 * (1.0 + prior.rho * np.cos(prior.omega * x / np.sqrt(prior.a) + prior.theta))
            keep = x[rng.random(batch) < ratio]
            accepted.append(keep)
            total += keep.size
        return np.concatenate(accepted)[:count].reshape(count, 1)

    raise InvalidInputError(f"Unknown prior type: {type(prior).__name__}")
