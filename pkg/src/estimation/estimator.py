"""
Estimator Module for L^p Estimation

Optimal Bayesian estimators under the loss l_{p,k}: posterior quadrature,
convex minimization of the posterior expected loss, best-linear fits of
the resulting estimator and Monte Carlo Bayes risk.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import pandas as pd
from scipy.interpolate import RegularGridInterpolator
from scipy.special import logsumexp
from sklearn.linear_model import LinearRegression

from .exceptions import (
    DimensionTooLarge,
    EmptyPosterior,
    InvalidInputError,
    NoConvergence,
    RankDeficientGrid,
)
from .linalg import LinearMap
from .loss import LossSpec, loss_gradient, loss_hessian_diag, loss_value
from .priors import Prior, sample_prior
from .quadrature import QuadratureConfig, as_vector, check_map, log_noise_density, prior_quadrature

logger = logging.getLogger(__name__)

PRUNE_RATIO = 1e-30
MIN_EVIDENCE = 1e-300
MEDIAN_SLACK = 1e-12
HESSIAN_FLOOR = 1e-12
STALL_RTOL = 1e-14
SWEEP_RTOL = 1e-12
SNAP_RTOL = 1e-12
MAX_ITERATIONS = 10_000
WEISZFELD_EPS = 1e-15
LINEARITY_THRESHOLD = 1e-5
MIN_RISK_SAMPLES = 1000
TABLE_NODES_1D = 161
TABLE_NODES_2D = 41


@dataclass
class PosteriorGrid:
    """Discrete posterior: points of shape (m, n) and weights summing to 1."""
    points: np.ndarray
    weights: np.ndarray

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def cov(self) -> LinearMap:
        centered = self.points - self.mean()
        cov = (centered * self.weights[:, None]).T @ centered
        return LinearMap(0.5 * (cov + cov.T))


def posterior(prior: Prior, y, cfg: Optional[QuadratureConfig] = None) -> PosteriorGrid:
    """
    Posterior of X given Y = y on the prior's quadrature nodes.

    Args:
        prior: Any prior variant
        y: Observation vector
        cfg: Quadrature settings (defaults if None)

    Returns:
        PosteriorGrid with weights proportional to prior mass times phi(y - x)
    """
    cfg = cfg or QuadratureConfig()
    y = as_vector(y, prior.dim)
    nodes, log_mass = prior_quadrature(prior, y, None, cfg)
    log_w = log_mass + log_noise_density(y, nodes)

    total = logsumexp(log_w)
    if not np.isfinite(total) or total < np.log(MIN_EVIDENCE):
        raise EmptyPosterior(f"Posterior mass at y={y.tolist()} is below {MIN_EVIDENCE:g}")

    weights = np.exp(log_w - total)
    keep = weights >= PRUNE_RATIO * weights.max()
    weights = weights[keep]
    return PosteriorGrid(points=nodes[keep], weights=weights / weights.sum())


def _weighted_lower_median(values: np.ndarray, weights: np.ndarray) -> float:
    order = np.argsort(values, kind='stable')
    cumulative = np.cumsum(weights[order])
    idx = int(np.searchsorted(cumulative, 0.5 * (1.0 - MEDIAN_SLACK) * cumulative[-1], side='left'))
    return float(values[order][min(idx, len(values) - 1)])


def _coordinate_median(post: PosteriorGrid) -> np.ndarray:
    return np.array([_weighted_lower_median(post.points[:, i], post.weights) for i in range(post.dim)])


def _starting_point(post: PosteriorGrid) -> np.ndarray:
    """Posterior mean, snapped onto a node when it lies within rounding of one."""
    v = post.mean()
    dist = np.sqrt(np.sum((post.points - v) ** 2, axis=1))
    nearest = int(np.argmin(dist))
    # the loss is not twice differentiable at a node
    if dist[nearest] <= SNAP_RTOL * max(1.0, float(np.linalg.norm(v))):
        return post.points[nearest].copy()
    return v


def _weiszfeld(post: PosteriorGrid, cfg: QuadratureConfig) -> np.ndarray:
    """Weighted spatial median with the modified Weiszfeld step."""
    points, weights = post.points, post.weights
    v = _starting_point(post)
    for it in range(MAX_ITERATIONS):
        diff = points - v
        dist = np.sqrt(np.sum(diff ** 2, axis=1))
        away = dist >= WEISZFELD_EPS
        # mass sitting at the current iterate
        resting = float(weights[~away].sum())

        inv = weights[away] / dist[away]
        pull = np.linalg.norm(inv @ diff[away])
        if pull <= resting or inv.size == 0:
            logger.debug(f"Weiszfeld stopped on a posterior node after {it} steps")
            return v

        target = inv @ points[away] / inv.sum()
        blend = min(1.0, resting / pull)
        v_new = (1.0 - blend) * target + blend * v
        if np.linalg.norm(v_new - v) <= cfg.tol:
            return v_new
        v = v_new

    raise NoConvergence("Weiszfeld iteration did not converge", last_iterate=v)


def _objective_gradient(post: PosteriorGrid, v: np.ndarray, spec: LossSpec) -> np.ndarray:
    return -(post.weights @ loss_gradient(post.points - v, spec))


def _newton_bisection(post: PosteriorGrid, spec: LossSpec, cfg: QuadratureConfig) -> np.ndarray:
    """
    Coordinate-wise safeguarded Newton-bisection on the posterior expected loss.

    Each coordinate solves d/dv_i E[l(X - v)] = 0 inside the bracket given
    by the support's range on that axis. The objective is convex so the
    partial derivative is nondecreasing in v_i. For p == k the loss is
    separable and a single sweep is exact; another sweep only runs when
    the gradient is still above tolerance and the last sweep moved v.
    """
    points, weights = post.points, post.weights
    lows = points.min(axis=0)
    highs = points.max(axis=0)
    v = np.clip(_starting_point(post), lows, highs)
    iterations = 0

    while True:
        grad = _objective_gradient(post, v, spec)
        if np.linalg.norm(grad) <= cfg.tol:
            return v

        previous = v.copy()
        for i in range(post.dim):
            lo, hi = lows[i], highs[i]
            while True:
                iterations += 1
                if iterations > MAX_ITERATIONS:
                    grad = _objective_gradient(post, v, spec)
                    raise NoConvergence(
                        f"Newton-bisection exceeded {MAX_ITERATIONS} iterations",
                        last_iterate=v.copy(), grad_norm=float(np.linalg.norm(grad)),
                    )
                residual = post.points - v
                g = -float(weights @ loss_gradient(residual, spec)[:, i])
                if abs(g) <= cfg.tol:
                    break
                if g > 0:
                    hi = v[i]
                else:
                    lo = v[i]
                h = float(weights @ loss_hessian_diag(residual, spec)[:, i])

                step = v[i] - g / h if h > HESSIAN_FLOOR else np.nan
                x_new = step if lo < step < hi else 0.5 * (lo + hi)
                moved = abs(x_new - v[i])
                v[i] = x_new
                if moved <= STALL_RTOL * max(1.0, abs(x_new)):
                    break

        if spec.p == spec.k:
            grad_norm = float(np.linalg.norm(_objective_gradient(post, v, spec)))
            logger.debug(f"Newton-bisection sweep ended with gradient norm {grad_norm:.3e}")
            if grad_norm <= cfg.tol:
                return v
        if np.linalg.norm(v - previous) <= SWEEP_RTOL * max(1.0, np.linalg.norm(v)):
            logger.debug(f"Newton-bisection stalled after {iterations} iterations")
            return v


def estimate_from_posterior(post: PosteriorGrid, spec: LossSpec,
                            cfg: Optional[QuadratureConfig] = None) -> np.ndarray:
    """Minimizer of sum_j w_j l_{p,k}(x_j - v) over v."""
    cfg = cfg or QuadratureConfig()
    if len(post.weights) == 1:
        return post.points[0].copy()
    if spec.p == 2 and spec.k == 2:
        return post.mean()
    if spec.p == 1 and spec.k == 1:
        return _coordinate_median(post)
    if spec.p == 1 and spec.k == 2:
        return _coordinate_median(post) if post.dim == 1 else _weiszfeld(post, cfg)
    return _newton_bisection(post, spec, cfg)


def optimal_estimate(prior: Prior, y, spec: LossSpec,
                     cfg: Optional[QuadratureConfig] = None) -> np.ndarray:
    """
    Optimal Bayesian estimate f_{p,k}(y).

    Args:
        prior: Any prior variant
        y: Observation vector
        spec: Loss exponents
        cfg: Quadrature settings

    Returns:
        Estimate vector of length n
    """
    cfg = cfg or QuadratureConfig()
    return estimate_from_posterior(posterior(prior, y, cfg), spec, cfg)


def estimate_on_grid(prior: Prior, spec: LossSpec, y_grid,
                     cfg: Optional[QuadratureConfig] = None) -> np.ndarray:
    """
    Optimal estimates for every row of a y-grid.

    Returns:
        Array of shape (m, n), row order matching y_grid
    """
    cfg = cfg or QuadratureConfig()
    ys = np.asarray(y_grid, dtype=float).reshape(-1, prior.dim)
    return np.array([optimal_estimate(prior, y, spec, cfg) for y in ys]).reshape(ys.shape)


@dataclass
class LinearFit:
    """Least-squares linear approximation y -> A y of an estimator on a grid."""
    A: LinearMap
    max_deviation: float
    estimates: np.ndarray
    y_grid: np.ndarray

    def is_linear(self, threshold: float = LINEARITY_THRESHOLD) -> bool:
        return self.max_deviation <= threshold

    @property
    def verdict(self) -> str:
        return 'linear' if self.is_linear() else 'nonlinear'


def fit_best_linear(prior: Prior, spec: LossSpec, y_grid,
                    cfg: Optional[QuadratureConfig] = None) -> LinearFit:
    """
    Fit A* minimizing sum_j ||f(y_j) - A y_j||^2 over the grid.

    Args:
        prior: Any prior variant
        spec: Loss exponents
        y_grid: Observation points, shape (m, n)
        cfg: Quadrature settings

    Returns:
        LinearFit with symmetrized A* and the maximum Euclidean deviation
    """
    cfg = cfg or QuadratureConfig()
    ys = np.asarray(y_grid, dtype=float).reshape(-1, prior.dim)
    if np.linalg.matrix_rank(ys) < prior.dim:
        raise RankDeficientGrid(f"y-grid of {len(ys)} points does not span R^{prior.dim}")

    estimates = estimate_on_grid(prior, spec, ys, cfg)
    model = LinearRegression(fit_intercept=False)
    model.fit(ys, estimates)
    coef = np.atleast_2d(model.coef_)
    A_star = LinearMap(0.5 * (coef + coef.T))

    deviation = np.linalg.norm(estimates - A_star.apply(ys), axis=1)
    max_dev = float(deviation.max())
    logger.info(f"Best linear fit A*={A_star.entries.tolist()} max_deviation={max_dev:.3e}")
    return LinearFit(A=A_star, max_deviation=max_dev, estimates=estimates, y_grid=ys)


@dataclass
class RiskEstimate:
    """Monte Carlo Bayes risk with its standard error."""
    mean: float
    std_error: float
    samples: int

    def to_frame(self, estimator: str) -> pd.DataFrame:
        return pd.DataFrame([{
            'estimator': estimator,
            'mean': self.mean,
            'std_error': self.std_error,
            'samples': self.samples,
        }])


def _tabulated_optimal(prior: Prior, spec: LossSpec, Y: np.ndarray,
                       cfg: QuadratureConfig, table_nodes: Optional[int]) -> np.ndarray:
    n = prior.dim
    if n == 1:
        nodes = table_nodes or TABLE_NODES_1D
        axis = np.linspace(Y[:, 0].min(), Y[:, 0].max(), nodes)
        values = estimate_on_grid(prior, spec, axis.reshape(-1, 1), cfg)[:, 0]
        return np.interp(Y[:, 0], axis, values).reshape(-1, 1)

    if n == 2:
        nodes = table_nodes or TABLE_NODES_2D
        axes = [np.linspace(Y[:, i].min(), Y[:, i].max(), nodes) for i in range(2)]
        mesh = np.meshgrid(*axes, indexing='ij')
        grid = np.stack([m.ravel() for m in mesh], axis=1)
        values = estimate_on_grid(prior, spec, grid, cfg).reshape(nodes, nodes, 2)
        interpolator = RegularGridInterpolator(axes, values)
        return interpolator(Y)

    raise DimensionTooLarge(f"Tabulated optimal estimator supports n <= 2, got {n}")


def bayes_risk(prior: Prior, estimator: Union[LinearMap, str], spec: LossSpec,
               samples: int = 100_000, seed: int = 0,
               cfg: Optional[QuadratureConfig] = None,
               table_nodes: Optional[int] = None) -> RiskEstimate:
    """
    Monte Carlo estimate of E[l_{p,k}(X - f(Y))].

    X is drawn from the prior with `seed` and the noise from a stream derived
    from the same seed, so risks of different estimators share their draws.

    Args:
        prior: Any prior variant
        estimator: A LinearMap for f(y) = A y, or 'optimal'
        spec: Loss exponents
        samples: Number of (X, Z) pairs, at least 1000
        seed: Random seed
        cfg: Quadrature settings for the optimal estimator
        table_nodes: Interpolation nodes per axis for the optimal estimator

    Returns:
        RiskEstimate
    """
    if samples < MIN_RISK_SAMPLES:
        raise InvalidInputError(f"samples must be >= {MIN_RISK_SAMPLES}, got {samples}")
    cfg = cfg or QuadratureConfig()
    n = prior.dim

    X = sample_prior(prior, samples, seed)
    Z = np.random.default_rng([seed, 1]).standard_normal((samples, n))
    Y = X + Z

    if isinstance(estimator, LinearMap):
        check_map(estimator, n)
        F = estimator.apply(Y)
    elif estimator == 'optimal':
        F = _tabulated_optimal(prior, spec, Y, cfg, table_nodes)
    else:
        raise InvalidInputError(f"estimator must be a LinearMap or 'optimal', got {estimator!r}")

    losses = np.atleast_1d(loss_value(X - F, spec))
    mean = float(losses.mean())
    std_error = float(losses.std(ddof=1) / np.sqrt(samples))
    logger.info(f"Bayes risk over {samples} samples: {mean:.6f} +- {std_error:.6f}")
    return RiskEstimate(mean=mean, std_error=std_error, samples=samples)
