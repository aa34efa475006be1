"""Validation script running the headline linearity checks end to end."""

import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np

from src.estimation.estimator import fit_best_linear
from src.estimation.linalg import LinearMap
from src.estimation.loss import LossSpec
from src.estimation.priors import (
    CosineGaussianPrior,
    gaussian_mixture_prior,
    gaussian_prior_for_A,
    omega_for_p,
)
from src.estimation.verify import (
    Polynomial,
    ft_zero_scan,
    orthogonality_residual,
    poly_moment_functional,
    residuals_agree,
)

PASS_TOL = 1e-6


def _mark(ok: bool, good: str, bad: str) -> bool:
    print(f"   ✓ {good}" if ok else f"   ⚠️  WARNING: {bad}")
    return ok


def validate_linearity() -> bool:
    """
    Run the linearity checks and print a short report.

    Returns:
        True when every check behaves as expected
    """
    print("Validating L^p Linearity Results")
    print("=" * 50)
    results = []
    y_line = np.arange(-3.0, 3.01, 0.25).reshape(-1, 1)

    # Gaussian priors make y -> A y optimal for every loss
    print("\n1. Gaussian priors (A = 0.5):")
    A = LinearMap([[0.5]])
    prior = gaussian_prior_for_A(A)
    worst = 0.0
    for p in [1.0, 1.25, 1.5, 2.0, 3.0, 4.0]:
        report = orthogonality_residual(prior, A, LossSpec(p=p, k=p), y_line)
        worst = max(worst, report.max_norm)
        print(f"   - p={p:g}: max residual {report.max_norm:.3e}")
    results.append(_mark(worst <= PASS_TOL, "All residuals below tolerance", f"max residual {worst:.3e}"))

    print("\n2. Coupled 2x2 map:")
    A2 = LinearMap([[0.5, 0.2], [0.2, 0.4]])
    axis = np.linspace(-2, 2, 5)
    y_plane = np.stack([m.ravel() for m in np.meshgrid(axis, axis, indexing='ij')], axis=1)
    agree, orth, conv = residuals_agree(gaussian_prior_for_A(A2), A2, LossSpec(p=1.5, k=1.5), y_plane)
    print(f"   - Orthogonality: {orth.max_norm:.3e}")
    print(f"   - Convolution:   {conv.max_norm:.3e}")
    results.append(_mark(agree and orth.passed(PASS_TOL), "Both forms pass", "Forms disagree or fail"))

    # No sign change of g for k in [1, 2]
    print("\n3. Odd-kernel transform for k in [1, 2]:")
    found = []
    for k in np.linspace(1.0, 2.0, 5):
        scan = ft_zero_scan(float(k), 8.0, 1e-2)
        found.extend(scan.zero_locations)
        print(f"   - k={k:.2f}: zeros={len(scan.zero_locations)}, min scaled |g|={scan.min_scaled_abs:.3e}")
    results.append(_mark(not found, "No zeros found", f"{len(found)} unexpected zero(s)"))

    # Cosine priors induce linearity for p = 4 only at the admissible omegas
    print("\n4. Cosine prior for p = 4:")
    omega = float(omega_for_p(4)[-1])
    spec4 = LossSpec(p=4, k=4)
    at_zero = orthogonality_residual(CosineGaussianPrior(a=0.5, rho=1.0, omega=omega), A, spec4, y_line)
    off_zero = orthogonality_residual(CosineGaussianPrior(a=0.5, rho=1.0, omega=1.0), A, spec4, y_line)
    print(f"   - omega={omega:.6f}: max residual {at_zero.max_norm:.3e}")
    print(f"   - omega=1: max residual {off_zero.max_norm:.3e}")
    results.append(_mark(at_zero.passed(PASS_TOL) and not off_zero.passed(PASS_TOL),
                         "Linear exactly at the Hermite zero", "Unexpected verdicts"))

    print("\n5. Cosine prior for p = 1.5 (same omega):")
    fit = fit_best_linear(CosineGaussianPrior(a=0.5, rho=1.0, omega=omega), LossSpec(p=1.5, k=1.5), y_line)
    print(f"   - Best slope {fit.A.entries[0, 0]:.6f}, max deviation {fit.max_deviation:.3e}")
    results.append(_mark(fit.verdict == 'nonlinear', "Estimator is nonlinear", "Estimator looks linear"))

    print("\n6. Bimodal mixture:")
    mixture = gaussian_mixture_prior([-2.0, 2.0], [0.5, 0.5], [0.5, 0.5])
    verdicts = []
    for p in [1.0, 1.5, 2.0]:
        fit = fit_best_linear(mixture, LossSpec(p=p, k=p), y_line)
        verdicts.append(fit.verdict)
        print(f"   - p={p:g}: max deviation {fit.max_deviation:.3e} ({fit.verdict})")
    results.append(_mark(all(v == 'nonlinear' for v in verdicts), "Nonlinear for every p", "A linear verdict"))

    # Nonconstant polynomials never integrate to zero against the odd weight
    print("\n7. Polynomial moment functional:")
    rng = np.random.default_rng(0)
    smallest = np.inf
    for _ in range(200):
        poly = Polynomial.random(2, int(rng.integers(1, 7)), rng)
        value = poly_moment_functional(poly, 1.5, 0, rng.uniform(-1, 1, 2))
        smallest = min(smallest, abs(value))
    print(f"   - Smallest |value| over 200 random polynomials: {smallest:.3e}")
    results.append(_mark(smallest > 0, "All values nonzero", "A vanishing value"))

    print("\n" + "=" * 50)
    print(f"Validation complete! {sum(results)}/{len(results)} checks passed")

    return all(results)


if __name__ == '__main__':
    sys.exit(0 if validate_linearity() else 1)
