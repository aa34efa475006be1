"""
Quadrature Module for L^p Estimation

Turns a prior into a finite set of nodes with log prior masses, so that

    sum_j exp(log_mass_j) * h(x_j) * phi(y - x_j)  ~=  E[h(X) phi(y - X)]

for the integrands used by the estimator and the verification routines.
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import hermite_e
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .exceptions import DimensionTooLarge, InvalidInputError
from .linalg import LinearMap, log_gaussian_pdf
from .priors import (
    AtomicPrior,
    CosineGaussianPrior,
    GaussianPrior,
    GridDensityPrior,
    MAX_DIM,
    Prior,
)

logger = logging.getLogger(__name__)

MAX_TENSOR_NODES = 200_000
LOG_2PI = np.log(2.0 * np.pi)


class QuadratureConfig(BaseModel):
    """Truncation, resolution and tolerance shared by every integral."""
    model_config = ConfigDict(frozen=True)

    half_width: float = Field(8.0, ge=6.0, description="Truncation radius around each anchor point")
    nodes_per_dim: int = Field(801, ge=3, description="Uniform grid nodes per half_width diameter")
    tol: float = Field(1e-10, gt=0, description="Gradient tolerance for the estimator solvers")
    gauss_hermite_nodes: int = Field(41, ge=3, le=201, description="Nodes per axis of Gauss-Hermite rules")

    @field_validator('nodes_per_dim', 'gauss_hermite_nodes')
    @classmethod
    def _must_be_odd(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError(f"node counts must be odd so the center is a node, got {v}")
        return v

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.nodes_per_dim - 1)


def aligned_grid(center: float, anchors: Sequence[float], cfg: QuadratureConfig) -> np.ndarray:
    """
    Uniform 1-D grid containing `center` exactly and covering every anchor +- half_width.

    Args:
        center: Point that must be a node (typically a loss kink)
        anchors: Points whose neighbourhoods must be covered
        cfg: Quadrature settings

    Returns:
        Increasing array of nodes center + h * j
    """
    h = cfg.spacing
    lo = min(min(anchors), center) - cfg.half_width
    hi = max(max(anchors), center) + cfg.half_width
    first = int(np.floor((lo - center) / h))
    last = int(np.ceil((hi - center) / h))
    return center + h * np.arange(first, last + 1, dtype=float)


def gauss_hermite_rule(n: int, cfg: QuadratureConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Tensor-product probabilists' Gauss-Hermite rule for E[h(T)], T ~ N(0, I_n).

    Returns:
        Tuple of (nodes of shape (m, n), weights of length m summing to 1)
    """
    per_axis = cfg.gauss_hermite_nodes
    cap = int(np.floor(MAX_TENSOR_NODES ** (1.0 / n)))
    if cap < per_axis:
        per_axis = cap if cap % 2 == 1 else cap - 1
    t, w = hermite_e.hermegauss(per_axis)
    w = w / np.sqrt(2.0 * np.pi)

    mesh = np.meshgrid(*([t] * n), indexing='ij')
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    wmesh = np.meshgrid(*([w] * n), indexing='ij')
    weights = np.prod(np.stack([m.ravel() for m in wmesh], axis=1), axis=1)
    return nodes, weights


def log_noise_density(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """log phi(y - x_j) for the standard n-dimensional Gaussian, one value per row of x."""
    diff = np.asarray(y, dtype=float).reshape(1, -1) - x
    return -0.5 * np.sum(diff ** 2, axis=1) - 0.5 * x.shape[1] * LOG_2PI


def as_vector(y, n: int) -> np.ndarray:
    y = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
    if y.size != n:
        raise InvalidInputError(f"Expected a vector of length {n}, got {y.size}")
    return y


def prior_quadrature(prior: Prior, y, center: Optional[Sequence[float]],
                     cfg: QuadratureConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nodes and log prior masses representing `prior` for integrands weighted by phi(y - x).

    When `center` is given it is placed on a node, so a loss kink at that
    point is hit exactly. Gaussian priors use a Gauss-Hermite rule with the
    posterior covariance at y, centered on the posterior mean or on
    `center` (reweighted by the ratio of the two Gaussians). The cosine
    prior uses a uniform grid through `center` (or y). Discrete priors
    ignore both.

    Args:
        prior: Any prior variant
        y: Observation the integrand is weighted around
        center: Point to place on a node, or None
        cfg: Quadrature settings

    Returns:
        Tuple of (nodes of shape (m, n), log masses of length m)
    """
    n = prior.dim
    if n > MAX_DIM:
        raise DimensionTooLarge(f"Quadrature supports n <= {MAX_DIM}, got {n}")
    y = as_vector(y, n)

    if isinstance(prior, GaussianPrior):
        post_mean, post_cov = prior.posterior_moments(y)
        shift = post_mean if center is None else as_vector(center, n)
        t, w = gauss_hermite_rule(n, cfg)
        nodes = shift + post_cov.sqrt.apply(t)
        log_mass = prior.log_evidence(y) + np.log(w) - log_noise_density(y, nodes)
        if center is not None:
            log_mass += log_gaussian_pdf(nodes, post_mean, post_cov) - log_gaussian_pdf(nodes, shift, post_cov)
        return nodes, log_mass

    if isinstance(prior, (AtomicPrior, GridDensityPrior)):
        points, probs = prior.support()
        keep = probs > 0
        return points[keep], np.log(probs[keep])

    if isinstance(prior, CosineGaussianPrior):
        c = float(y[0]) if center is None else float(as_vector(center, 1)[0])
        x = aligned_grid(c, [c, float(y[0]), 0.0], cfg)
        log_mass = np.log(cfg.spacing) + prior.log_density(x)
        keep = np.isfinite(log_mass)
        return x[keep].reshape(-1, 1), log_mass[keep]

    raise InvalidInputError(f"Unknown prior type: {type(prior).__name__}")


def check_map(A: LinearMap, n: int) -> None:
    if A.n != n:
        raise InvalidInputError(f"A is {A.n}x{A.n} but the prior has dimension {n}")
