"""
Command-Line Entry Point

    python -m src.cli.main <subcommand> [flags]

Exit codes: 0 success, 1 scientific fail (verify), 2 usage or invalid
input, 3 numerical failure, 4 construction impossible.
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

from pydantic import ValidationError

from src.estimation.exceptions import ConstructionError, InvalidInputError, NumericalError

from .commands import COMMANDS
from .models import RunConfig, parse_matrix, parse_range

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_CONSTRUCTION = 4


def configure_logging() -> None:
    """Log to standard error at the level named by LPEST_LOG_LEVEL (default INFO)."""
    level = os.getenv('LPEST_LOG_LEVEL', 'INFO').upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--out', help='Output path (standard output if omitted)')
    parser.add_argument('--format', choices=['csv', 'json'], default='csv')
    parser.add_argument('--seed', type=int, default=0)


def _add_estimation(parser: argparse.ArgumentParser, needs_prior: bool = True) -> None:
    if needs_prior:
        parser.add_argument('--prior', dest='prior_path', help='Prior file (JSON)')
    parser.add_argument('--p', type=float, help='Outer loss exponent')
    parser.add_argument('--k', type=float, help='Inner norm exponent (defaults to --p)')
    parser.add_argument('--A', help='Matrix: "0.5" or rows "a,b;c,d"')
    parser.add_argument('--y-range', dest='y_ranges', action='append', default=[],
                        help='min:max:step, once per dimension (use --y-range=-2:2:1 for negative bounds)')
    parser.add_argument('--half-width', type=float)
    parser.add_argument('--nodes', type=int)
    parser.add_argument('--tol', type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='lpest',
        description='Optimal L^p Bayesian estimators under Gaussian noise and linearity checks',
    )
    sub = parser.add_subparsers(dest='command', required=True)

    estimate = sub.add_parser('estimate', help='Optimal estimator over a y-grid')
    _add_estimation(estimate)
    _add_common(estimate)

    verify = sub.add_parser('verify', help='Orthogonality residual of y -> A y')
    _add_estimation(verify)
    verify.add_argument('--pass-tol', type=float, default=1e-6)
    _add_common(verify)

    construct = sub.add_parser('construct-prior', help='Build a linearity-inducing prior')
    construct.add_argument('--family', choices=['cosine', 'gaussian'], default='cosine')
    construct.add_argument('--p', type=float)
    construct.add_argument('--A')
    construct.add_argument('--a', type=float, default=0.5)
    construct.add_argument('--rho', type=float, default=1.0)
    construct.add_argument('--theta', type=float, default=0.0)
    construct.add_argument('--omega-index', type=int)
    construct.add_argument('--density-out')
    _add_common(construct)

    fig1 = sub.add_parser('fig1', help='Cosine-family densities for plotting')
    fig1.add_argument('--p', type=float, default=4.0)
    fig1.add_argument('--a', type=float, default=0.5)
    fig1.add_argument('--rho', type=float, default=1.0)
    fig1.add_argument('--theta', type=float, default=0.0)
    _add_common(fig1)

    scan = sub.add_parser('scan-linearity', help='Best linear fit of the optimal estimator')
    _add_estimation(scan)
    _add_common(scan)

    risk = sub.add_parser('risk', help='Monte Carlo Bayes risk')
    _add_estimation(risk)
    risk.add_argument('--estimator', choices=['optimal', 'linear'], default='optimal')
    risk.add_argument('--samples', type=int, default=100_000)
    _add_common(risk)

    zero_scan = sub.add_parser('zero-scan', help='Sign changes of the odd-kernel sine transform')
    zero_scan.add_argument('--exponent', type=float, required=True)
    zero_scan.add_argument('--omega-max', type=float, default=8.0)
    zero_scan.add_argument('--step', type=float, default=1e-3)
    _add_common(zero_scan)

    return parser


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """Convert parsed flags into a validated RunConfig."""
    values = {key: v for key, v in vars(args).items() if v is not None}
    if 'A' in values:
        values['A'] = parse_matrix(values['A'])
    values['y_ranges'] = [parse_range(r) for r in values.get('y_ranges', [])]
    return RunConfig(**values)


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        cfg = build_run_config(args)
        logger.info(f"Running {cfg.command}")
        return COMMANDS[cfg.command](cfg)
    except (ValidationError, InvalidInputError, OSError) as e:
        logger.error(f"Invalid input: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ConstructionError as e:
        logger.error(f"Construction failed: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except Exception as e:
        logger.error(f"Unexpected failure: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == '__main__':
    sys.exit(main())
