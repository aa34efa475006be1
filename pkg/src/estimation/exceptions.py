"""
Error taxonomy for the estimation library.

Three families map onto the CLI exit codes: invalid inputs (usage),
numerical failures, and constructions that are impossible for the
requested parameters.
"""

from typing import Optional

import numpy as np


class EstimationError(Exception):
    """Base class for every error raised by the library."""


class InvalidInputError(EstimationError, ValueError):
    """The caller passed something outside an operation's domain."""


class NumericalError(EstimationError, ArithmeticError):
    """A computation failed or lost its accuracy guarantee."""


class ConstructionError(EstimationError):
    """The requested object cannot exist for these parameters."""


class NotSymmetric(InvalidInputError):
    pass


class NotPSD(InvalidInputError):
    pass


class NotPD(InvalidInputError):
    pass


class DegreeTooLarge(InvalidInputError):
    pass


class DimensionTooLarge(InvalidInputError):
    pass


class RankDeficientGrid(InvalidInputError):
    pass


class SingularCovariance(NumericalError):
    pass


class EmptyPosterior(NumericalError):
    pass


class QuadratureUnderflow(NumericalError):
    pass


class NormalizationMismatch(NumericalError):
    pass


class NoConvergence(NumericalError):
    """
    Iterative minimization ran out of iterations.

    Carries the last iterate and its gradient norm so callers can decide
    whether the point is still usable.
    """

    def __init__(self, message: str, last_iterate: Optional[np.ndarray] = None,
                 grad_norm: float = float('nan')):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.grad_norm = grad_norm


class ImproperPrior(ConstructionError):
    pass


class NoZeroFound(ConstructionError):
    pass
