"""
Unit tests for the estimator module.
"""

import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

import logging

import pytest
import numpy as np
import src.estimation.estimator as estimator_module
from src.estimation.estimator import (
    bayes_risk,
    estimate_on_grid,
    fit_best_linear,
    optimal_estimate,
    posterior,
)
from src.estimation.exceptions import (
    EmptyPosterior,
    InvalidInputError,
    NoConvergence,
    RankDeficientGrid,
)
from src.estimation.linalg import LinearMap
from src.estimation.loss import LossSpec, loss_gradient, loss_value
from src.estimation.priors import (
    AtomicPrior,
    CosineGaussianPrior,
    GaussianPrior,
    GridDensityPrior,
    gaussian_mixture_prior,
    gaussian_prior_for_A,
)
from src.estimation.quadrature import QuadratureConfig


@pytest.fixture
def standard_prior():
    """N(0, 1), whose optimal estimator is y -> y / 2."""
    return GaussianPrior(mean=[0.0], cov=[[1.0]])


@pytest.fixture
def coupled_map():
    return LinearMap([[0.5, 0.2], [0.2, 0.4]])


@pytest.fixture
def cosine_prior():
    return CosineGaussianPrior(a=0.5, rho=1.0, theta=0.0, omega=float(np.sqrt(3.0)))


@pytest.fixture
def mixture_prior():
    return gaussian_mixture_prior([-2.0, 2.0], [0.5, 0.5], [0.5, 0.5])


@pytest.fixture
def narrow_mixture_prior():
    """Equal mixture of N(-1, 0.25) and N(1, 0.25)."""
    return gaussian_mixture_prior([-1.0, 1.0], [0.25, 0.25], [0.5, 0.5])


@pytest.fixture
def grid_standard_prior():
    """N(0, 1) discretized on a 0.01 grid over [-10, 10]."""
    axis = np.linspace(-10.0, 10.0, 2001)
    return GridDensityPrior.from_density(lambda x: np.exp(-0.5 * x[:, 0] ** 2), [axis])


@pytest.fixture
def y_line():
    return np.linspace(-3, 3, 13).reshape(-1, 1)


def test_posterior_of_standard_prior(standard_prior):
    """Test the posterior at y = 1 is N(1/2, 1/2)."""
    post = posterior(standard_prior, [1.0])
    assert post.weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert post.mean()[0] == pytest.approx(0.5, abs=1e-12)
    assert post.cov().entries[0, 0] == pytest.approx(0.5, abs=1e-12)


def test_posterior_of_atoms():
    """Test Bayes' rule on two atoms."""
    prior = AtomicPrior(atoms=[[-1.0], [1.0]], probs=[0.5, 0.5])
    post = posterior(prior, [0.5])
    # phi(0.5 - 1) / phi(0.5 + 1) = e^1
    assert post.weights[1] / post.weights[0] == pytest.approx(np.e, rel=1e-12)


def test_posterior_empty():
    """Test an observation far from every atom."""
    prior = AtomicPrior(atoms=[[0.0]], probs=[1.0])
    with pytest.raises(EmptyPosterior):
        posterior(prior, [1000.0])


@pytest.mark.parametrize("p", [1.0, 1.25, 1.5, 2.0])
def test_gaussian_prior_estimate_is_linear(standard_prior, p):
    """Test f_p(y) = y / 2 for the standard normal prior."""
    spec = LossSpec(p=p, k=p)
    for y in np.linspace(-4, 4, 9):
        assert optimal_estimate(standard_prior, [y], spec)[0] == pytest.approx(0.5 * y, abs=1e-9)


def test_vector_gaussian_posterior(coupled_map):
    """Test the linearity-inducing prior has posterior N(A y, A)."""
    prior = gaussian_prior_for_A(coupled_map)
    y = np.array([1.0, -2.0])
    post = posterior(prior, y)
    np.testing.assert_allclose(post.mean(), coupled_map.apply(y), atol=1e-12)
    np.testing.assert_allclose(post.cov().entries, coupled_map.entries, atol=1e-10)


@pytest.mark.parametrize("p, k", [(1.5, 1.5), (1.0, 2.0), (1.0, 1.0), (3.0, 2.0)])
def test_vector_gaussian_estimate(coupled_map, p, k):
    """Test f(y) = A y in two dimensions across solvers."""
    prior = gaussian_prior_for_A(coupled_map)
    spec = LossSpec(p=p, k=k)
    for y in [np.array([1.0, -2.0]), np.array([0.3, 0.7]), np.zeros(2)]:
        np.testing.assert_allclose(optimal_estimate(prior, y, spec), coupled_map.apply(y), atol=1e-9)


def test_squared_loss_is_posterior_mean(standard_prior, cosine_prior, mixture_prior):
    """Test p = k = 2 returns the posterior mean for every prior variant."""
    atomic = AtomicPrior(atoms=[[-1.0], [0.5], [2.0]], probs=[0.3, 0.3, 0.4])
    spec = LossSpec(p=2, k=2)
    for prior in [standard_prior, cosine_prior, mixture_prior, atomic]:
        for y in [-1.5, 0.0, 2.5]:
            np.testing.assert_array_equal(optimal_estimate(prior, [y], spec), posterior(prior, [y]).mean())


def test_absolute_loss_is_weighted_median():
    """Test p = 1 picks the atom holding the posterior median."""
    prior = AtomicPrior(atoms=[[-1.0], [1.0]], probs=[0.5, 0.5])
    assert optimal_estimate(prior, [0.3], LossSpec(p=1, k=1))[0] == 1.0
    assert optimal_estimate(prior, [-0.3], LossSpec(p=1, k=1))[0] == -1.0


def test_point_mass_estimate():
    """Test a single atom is returned whatever the loss."""
    prior = AtomicPrior(atoms=[[0.7, -0.2]], probs=[1.0])
    for spec in [LossSpec(p=1, k=2), LossSpec(p=3, k=1.5)]:
        np.testing.assert_array_equal(optimal_estimate(prior, [1.0, 1.0], spec), [0.7, -0.2])


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_estimate_minimizes_expected_loss(p):
    """Test the estimate beats small perturbations of itself."""
    rng = np.random.default_rng(11)
    atoms = rng.uniform(-3, 3, (6, 2))
    prior = AtomicPrior(atoms=atoms.tolist(), probs=[1 / 6] * 6)
    spec = LossSpec(p=p, k=p)
    y = np.array([0.4, -0.9])
    post = posterior(prior, y)
    v = optimal_estimate(prior, y, spec)

    def risk(point):
        return float(post.weights @ loss_value(post.points - point, spec))

    best = risk(v)
    for direction in [np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([1.0, 1.0])]:
        assert best <= risk(v + 1e-3 * direction) + 1e-12
        assert best <= risk(v - 1e-3 * direction) + 1e-12


def test_translation_covariance():
    """Test shifting the prior by c shifts the estimator by c."""
    base = GaussianPrior(mean=[0.0], cov=[[2.0]])
    shifted = GaussianPrior(mean=[3.0], cov=[[2.0]])
    spec = LossSpec(p=1.5, k=1.5)
    for y in [-1.0, 0.5, 2.0]:
        assert optimal_estimate(shifted, [y + 3.0], spec)[0] == pytest.approx(
            3.0 + optimal_estimate(base, [y], spec)[0], abs=1e-9)


def test_estimate_on_grid_row_order(standard_prior, y_line):
    """Test one estimate per grid row in the same order."""
    estimates = estimate_on_grid(standard_prior, LossSpec(p=2, k=2), y_line)
    assert estimates.shape == (13, 1)
    np.testing.assert_allclose(estimates, 0.5 * y_line, atol=1e-12)


def test_fit_gaussian_is_linear(standard_prior, y_line):
    """Test the Gaussian prior fits A* = 1/2 exactly."""
    fit = fit_best_linear(standard_prior, LossSpec(p=1.5, k=1.5), y_line)
    assert fit.A.entries[0, 0] == pytest.approx(0.5, abs=1e-9)
    assert fit.max_deviation <= 1e-8
    assert fit.verdict == 'linear'


def test_fit_vector_gaussian_is_linear(coupled_map):
    """Test a 2-D grid recovers the coupled map."""
    prior = gaussian_prior_for_A(coupled_map)
    axis = np.linspace(-2, 2, 5)
    ys = np.stack([m.ravel() for m in np.meshgrid(axis, axis, indexing='ij')], axis=1)
    fit = fit_best_linear(prior, LossSpec(p=1.5, k=1.5), ys)
    np.testing.assert_allclose(fit.A.entries, coupled_map.entries, atol=1e-9)
    assert fit.is_linear()


def test_fit_cosine_prior_at_p4_is_linear(cosine_prior, y_line):
    """Test the cosine prior at omega = sqrt(3) makes the p = 4 estimator linear."""
    fit = fit_best_linear(cosine_prior, LossSpec(p=4, k=4), y_line)
    assert fit.A.entries[0, 0] == pytest.approx(0.5, abs=1e-4)
    assert fit.verdict == 'linear'


def test_fit_cosine_prior_at_p15_is_nonlinear(cosine_prior, y_line):
    """Test the same prior is not linearity-inducing for p = 1.5."""
    fit = fit_best_linear(cosine_prior, LossSpec(p=1.5, k=1.5), y_line)
    assert fit.verdict == 'nonlinear'


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
def test_fit_mixture_is_nonlinear(mixture_prior, y_line, p):
    """Test a bimodal mixture gives a nonlinear estimator."""
    fit = fit_best_linear(mixture_prior, LossSpec(p=p, k=p), y_line)
    assert fit.max_deviation > 1e-3
    assert not fit.is_linear()


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
def test_fit_narrow_mixture_is_nonlinear(narrow_mixture_prior, y_line, p):
    """Test the +-1 mixture with variance 0.25 is flagged nonlinear."""
    fit = fit_best_linear(narrow_mixture_prior, LossSpec(p=p, k=p), y_line)
    assert fit.verdict == 'nonlinear'


def test_grid_prior_matches_gaussian_posterior(grid_standard_prior):
    """Test a fine grid N(0, 1) gives the posterior mean y / 2 at y = 1."""
    post = posterior(grid_standard_prior, [1.0])
    assert post.mean()[0] == pytest.approx(0.5, abs=1e-6)
    assert optimal_estimate(grid_standard_prior, [1.0], LossSpec(p=1.5, k=1.5))[0] == pytest.approx(0.5, abs=1e-6)


def _expected_loss(post, v, spec):
    return float(post.weights @ loss_value(post.points - v, spec))


@pytest.mark.parametrize("p, k", [(1.5, 1.5), (3.0, 2.0), (1.5, 3.0), (2.0, 1.25)])
def test_expected_loss_is_midpoint_convex(mixture_prior, p, k):
    """Test midpoint convexity of the expected loss on random segments."""
    rng = np.random.default_rng(17)
    atoms = rng.uniform(-3, 3, (8, 2))
    atomic = AtomicPrior(atoms=atoms.tolist(), probs=[0.125] * 8)
    spec = LossSpec(p=p, k=k)
    for post in [posterior(mixture_prior, [0.7]), posterior(atomic, [0.4, -0.9])]:
        for _ in range(1000):
            u = rng.uniform(-4, 4, post.dim)
            w = rng.uniform(-4, 4, post.dim)
            chord = 0.5 * (_expected_loss(post, u, spec) + _expected_loss(post, w, spec))
            assert _expected_loss(post, 0.5 * (u + w), spec) <= chord + 1e-12 * max(1.0, chord)


def test_separable_solver_reports_iteration_cap(mixture_prior, monkeypatch):
    """Test p == k raises NoConvergence when the iteration budget runs out."""
    monkeypatch.setattr(estimator_module, 'MAX_ITERATIONS', 1)
    with pytest.raises(NoConvergence) as info:
        optimal_estimate(mixture_prior, [0.7], LossSpec(p=3, k=3))
    assert info.value.grad_norm > 0
    assert info.value.last_iterate.shape == (1,)


def test_separable_solver_logs_final_gradient(mixture_prior, caplog):
    """Test the p == k sweep logs its gradient norm and ends at a stationary point."""
    spec = LossSpec(p=3, k=3)
    with caplog.at_level(logging.DEBUG, logger=estimator_module.logger.name):
        v = optimal_estimate(mixture_prior, [0.7], spec)
    assert any('gradient norm' in record.getMessage() for record in caplog.records)
    post = posterior(mixture_prior, [0.7])
    grad = post.weights @ loss_gradient(post.points - v, spec)
    assert np.abs(grad).max() <= 1e-8


def test_fit_rank_deficient_grid(coupled_map):
    """Test collinear observations cannot identify A."""
    prior = gaussian_prior_for_A(coupled_map)
    with pytest.raises(RankDeficientGrid):
        fit_best_linear(prior, LossSpec(p=2, k=2), [[1.0, 1.0], [2.0, 2.0], [-1.0, -1.0]])


def test_bayes_risk_linear_estimator(standard_prior):
    """Test E(X - Y/2)^2 = 1/2 for X, Z standard normal."""
    risk = bayes_risk(standard_prior, LinearMap([[0.5]]), LossSpec(p=2, k=2), samples=1_000_000, seed=0)
    assert abs(risk.mean - 0.5) <= 3 * risk.std_error
    assert risk.samples == 1_000_000


def test_bayes_risk_optimal_matches_linear(standard_prior):
    """Test the tabulated optimal estimator reproduces y / 2 on shared draws."""
    spec = LossSpec(p=2, k=2)
    linear = bayes_risk(standard_prior, LinearMap([[0.5]]), spec, samples=100_000, seed=5)
    optimal = bayes_risk(standard_prior, 'optimal', spec, samples=100_000, seed=5)
    assert optimal.mean == pytest.approx(linear.mean, abs=1e-9)


def test_bayes_risk_point_mass():
    """Test a point-mass prior has zero risk under the optimal estimator."""
    prior = AtomicPrior(atoms=[[1.5]], probs=[1.0])
    risk = bayes_risk(prior, 'optimal', LossSpec(p=1.5, k=1.5), samples=2000)
    assert risk.mean == 0.0
    assert risk.std_error == 0.0


def test_bayes_risk_optimal_beats_linear_on_mixture(mixture_prior):
    """Test the optimal estimator has lower risk than a linear one on a bimodal prior."""
    spec = LossSpec(p=2, k=2)
    optimal = bayes_risk(mixture_prior, 'optimal', spec, samples=20_000, seed=2)
    linear = bayes_risk(mixture_prior, LinearMap([[4.5 / 5.5]]), spec, samples=20_000, seed=2)
    assert optimal.mean < linear.mean


def test_bayes_risk_deterministic(cosine_prior):
    """Test a fixed seed reproduces the estimate exactly."""
    spec = LossSpec(p=4, k=4)
    first = bayes_risk(cosine_prior, LinearMap([[0.5]]), spec, samples=5000, seed=4)
    second = bayes_risk(cosine_prior, LinearMap([[0.5]]), spec, samples=5000, seed=4)
    assert first == second


def test_bayes_risk_rejects_small_samples(standard_prior):
    """Test fewer than 1000 samples is refused."""
    with pytest.raises(InvalidInputError):
        bayes_risk(standard_prior, 'optimal', LossSpec(p=2, k=2), samples=999)


def test_bayes_risk_rejects_wrong_map(standard_prior):
    """Test a map of the wrong dimension."""
    with pytest.raises(InvalidInputError):
        bayes_risk(standard_prior, LinearMap.identity(2), LossSpec(p=2, k=2), samples=1000)


def test_risk_frame_columns(standard_prior):
    """Test the risk table layout."""
    risk = bayes_risk(standard_prior, LinearMap([[0.5]]), LossSpec(p=2, k=2), samples=1000)
    df = risk.to_frame('linear')
    assert list(df.columns) == ['estimator', 'mean', 'std_error', 'samples']
    assert df.loc[0, 'estimator'] == 'linear'


def test_custom_quadrature_config(cosine_prior):
    """Test a coarser grid still gives the linear estimate at p = 4."""
    cfg = QuadratureConfig(half_width=8.0, nodes_per_dim=401)
    assert optimal_estimate(cosine_prior, [1.0], LossSpec(p=4, k=4), cfg)[0] == pytest.approx(0.5, abs=1e-4)
