"""
Subcommand Implementations

Each cmd_* function takes a validated RunConfig, writes its output and
returns the process exit code. Library errors propagate to main(), which
maps them onto exit codes.
"""

import logging
import os
from typing import List

import numpy as np
import pandas as pd

from src.estimation.estimator import bayes_risk, estimate_on_grid, fit_best_linear
from src.estimation.exceptions import InvalidInputError
from src.estimation.linalg import LinearMap
from src.estimation.priors import (
    CosineGaussianPrior,
    dump_prior,
    gaussian_prior_for_A,
    load_prior,
    omega_for_p,
)
from src.estimation.verify import ft_zero_scan, orthogonality_residual

from .models import RunConfig
from .writer import format_value, write_table, write_text

logger = logging.getLogger(__name__)

DENSITY_SIGMAS = 6.0
DENSITY_POINTS = 1201


def _require_prior(cfg: RunConfig):
    if cfg.prior_path is None:
        raise InvalidInputError(f"{cfg.command} needs --prior")
    prior = load_prior(cfg.prior_path)
    logger.info(f"Loaded {prior.type} prior (n={prior.dim}) from {cfg.prior_path}")
    return prior


def _coordinate_columns(prefix: str, n: int) -> List[str]:
    return [f"{prefix}_{i + 1}" for i in range(n)]


def cmd_estimate(cfg: RunConfig) -> int:
    """Tabulate the optimal estimator over the y-grid."""
    prior = _require_prior(cfg)
    spec = cfg.loss_spec()
    ys = cfg.y_grid(prior.dim)

    estimates = estimate_on_grid(prior, spec, ys, cfg.quadrature_config())
    df = pd.concat([
        pd.DataFrame(ys, columns=_coordinate_columns('y', prior.dim)),
        pd.DataFrame(estimates, columns=_coordinate_columns('f', prior.dim)),
    ], axis=1)
    write_table(df, cfg.out, cfg.format)
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    """
    Orthogonality residual of y -> A y over the y-grid.

    Exit 0 when max_norm <= pass_tol, 1 otherwise.
    """
    prior = _require_prior(cfg)
    A = cfg.linear_map()
    report = orthogonality_residual(prior, A, cfg.loss_spec(), cfg.y_grid(prior.dim), cfg.quadrature_config())

    passed = report.passed(cfg.pass_tol)
    summary = {'max_norm': report.max_norm, 'pass': passed}
    write_table(report.to_frame(), cfg.out, cfg.format, summary=summary)
    if cfg.out is not None:
        print(' '.join(f"{key}={format_value(v)}" for key, v in summary.items()))
    return 0 if passed else 1


def _density_frame(prior, half_range: float) -> pd.DataFrame:
    x = np.linspace(-half_range, half_range, DENSITY_POINTS)
    return pd.DataFrame({'x': x, 'density': prior.density(x)})


def _default_omega_index(omegas: np.ndarray) -> int:
    positive = np.flatnonzero(omegas > 0)
    return int(positive[0]) if positive.size else int(np.argmin(np.abs(omegas)))


def cmd_construct_prior(cfg: RunConfig) -> int:
    """
    Build a linearity-inducing prior and write it with its density table.

    The cosine family lists every admissible omega for --p and marks the
    one selected by --omega-index (the smallest positive one by default).
    """
    if cfg.out is None:
        raise InvalidInputError("construct-prior needs --out for the prior file")
    stem = os.path.splitext(cfg.out)[0]
    density_out = cfg.density_out or f"{stem}_density.csv"

    if cfg.family == 'gaussian':
        A = cfg.linear_map() if cfg.A is not None else LinearMap([[cfg.a]])
        prior = gaussian_prior_for_A(A)
        write_text(dump_prior(prior) + '\n', cfg.out)
        if prior.dim == 1:
            sigma = float(np.sqrt(prior.cov[0][0]))
            write_table(_density_frame(prior, DENSITY_SIGMAS * sigma), density_out)
        else:
            logger.info("Density table skipped for n > 1")
        return 0

    if cfg.p is None:
        raise InvalidInputError("construct-prior --family cosine needs --p")
    omegas = omega_for_p(cfg.p)
    index = _default_omega_index(omegas) if cfg.omega_index is None else cfg.omega_index
    if not 0 <= index < len(omegas):
        raise InvalidInputError(f"--omega-index {index} out of range for {len(omegas)} admissible values")

    prior = CosineGaussianPrior(a=cfg.a, rho=cfg.rho, theta=cfg.theta, omega=float(omegas[index]))
    logger.info(f"Selected omega={prior.omega!r} for p={cfg.p:g}")

    write_text(dump_prior(prior) + '\n', cfg.out)
    sigma = float(np.sqrt(prior.envelope_variance))
    write_table(_density_frame(prior, DENSITY_SIGMAS * sigma), density_out)
    selected = np.zeros(len(omegas), dtype=bool)
    selected[index] = True
    write_table(pd.DataFrame({'omega': omegas, 'selected': selected}), f"{stem}_omegas.csv")
    return 0


def cmd_fig1(cfg: RunConfig) -> int:
    """Densities of the cosine family for every nonnegative admissible omega."""
    p = cfg.p if cfg.p is not None else 4.0
    omegas = omega_for_p(p)
    omegas = omegas[omegas >= 0]
    if cfg.rho == 0:
        omegas = omegas[:1]

    sigma = np.sqrt(cfg.a / (1.0 - cfg.a))
    x = np.linspace(-DENSITY_SIGMAS * sigma, DENSITY_SIGMAS * sigma, DENSITY_POINTS)
    columns = {'x': x}
    for omega in omegas:
        prior = CosineGaussianPrior(a=cfg.a, rho=cfg.rho, theta=cfg.theta, omega=float(omega))
        columns[f"omega_{format_value(float(omega))}"] = prior.density(x)
    write_table(pd.DataFrame(columns), cfg.out, cfg.format)
    return 0


def cmd_scan_linearity(cfg: RunConfig) -> int:
    """Best linear fit of the optimal estimator and its linear/nonlinear verdict."""
    prior = _require_prior(cfg)
    fit = fit_best_linear(prior, cfg.loss_spec(), cfg.y_grid(prior.dim), cfg.quadrature_config())

    row = {}
    for i in range(prior.dim):
        for j in range(prior.dim):
            row[f"A_{i + 1}{j + 1}"] = fit.A.entries[i, j]
    row['max_deviation'] = fit.max_deviation
    row['verdict'] = fit.verdict
    write_table(pd.DataFrame([row]), cfg.out, cfg.format)
    return 0


def cmd_risk(cfg: RunConfig) -> int:
    """Monte Carlo Bayes risk of the optimal or a linear estimator."""
    prior = _require_prior(cfg)
    estimator = cfg.linear_map() if cfg.estimator == 'linear' else 'optimal'
    risk = bayes_risk(prior, estimator, cfg.loss_spec(), samples=cfg.samples, seed=cfg.seed,
                      cfg=cfg.quadrature_config())
    write_table(risk.to_frame(cfg.estimator), cfg.out, cfg.format)
    return 0


def cmd_zero_scan(cfg: RunConfig) -> int:
    """Scan the odd-kernel sine transform for sign changes."""
    if cfg.exponent is None:
        raise InvalidInputError("zero-scan needs --exponent")
    result = ft_zero_scan(cfg.exponent, cfg.omega_max, cfg.step)
    write_table(result.to_frame(), cfg.out, cfg.format)
    return 0


COMMANDS = {
    'estimate': cmd_estimate,
    'verify': cmd_verify,
    'construct-prior': cmd_construct_prior,
    'fig1': cmd_fig1,
    'scan-linearity': cmd_scan_linearity,
    'risk': cmd_risk,
    'zero-scan': cmd_zero_scan,
}
