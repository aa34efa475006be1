"""
Pydantic Models for Command-Line Runs

RunConfig gathers every flag of a subcommand after argparse has split
them; validation here is what turns a malformed flag into exit code 2.
"""

from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator

from src.estimation.exceptions import InvalidInputError
from src.estimation.linalg import LinearMap
from src.estimation.loss import LossSpec
from src.estimation.quadrature import QuadratureConfig


def parse_matrix(text: str) -> List[List[float]]:
    """
    Parse "0.5" or "0.5,0.2;0.2,0.4" into a list of rows.

    Raises:
        InvalidInputError: On a non-numeric entry or ragged rows
    """
    try:
        rows = [[float(v) for v in row.split(',')] for row in text.strip().split(';')]
    except ValueError:
        raise InvalidInputError(f"Cannot parse matrix {text!r}; use rows separated by ';' and entries by ','")
    if any(len(r) != len(rows) for r in rows):
        raise InvalidInputError(f"Matrix {text!r} is not square")
    return rows


def parse_range(text: str) -> Tuple[float, float, float]:
    """Parse "min:max:step"."""
    parts = text.split(':')
    if len(parts) != 3:
        raise InvalidInputError(f"y-range {text!r} must look like min:max:step")
    try:
        lo, hi, step = (float(v) for v in parts)
    except ValueError:
        raise InvalidInputError(f"y-range {text!r} has a non-numeric field")
    return lo, hi, step


class RunConfig(BaseModel):
    """All settings of one command-line invocation."""
    command: str = Field(..., description="Subcommand name")
    prior_path: Optional[str] = Field(None, description="Prior file in the documented JSON format")
    p: Optional[float] = Field(None, ge=1, description="Outer loss exponent")
    k: Optional[float] = Field(None, ge=1, description="Inner norm exponent (defaults to p)")
    A: Optional[List[List[float]]] = Field(None, description="Linear map rows")
    y_ranges: List[Tuple[float, float, float]] = Field(default_factory=list, description="(min, max, step) per dimension")
    seed: int = Field(0, ge=0, description="Random seed")
    out: Optional[str] = Field(None, description="Output path (standard output if omitted)")
    format: Literal['csv', 'json'] = 'csv'
    half_width: Optional[float] = None
    nodes: Optional[int] = None
    tol: Optional[float] = None
    pass_tol: float = Field(1e-6, gt=0)

    # construct-prior / fig1
    family: Literal['cosine', 'gaussian'] = 'cosine'
    a: float = Field(0.5, gt=0, lt=1)
    rho: float = Field(1.0, ge=-1, le=1)
    theta: float = 0.0
    omega_index: Optional[int] = None
    density_out: Optional[str] = None

    # risk
    estimator: Literal['optimal', 'linear'] = 'optimal'
    samples: int = Field(100_000, ge=1000)

    # zero-scan
    exponent: Optional[float] = Field(None, ge=1)
    omega_max: float = Field(8.0, ge=4)
    step: float = Field(1e-3, gt=0, le=1e-2)

    @field_validator('y_ranges')
    @classmethod
    def _check_ranges(cls, ranges):
        for lo, hi, step in ranges:
            if step <= 0:
                raise ValueError(f"grid step must be > 0, got {step}")
            if hi < lo:
                raise ValueError(f"grid max {hi} is below min {lo}")
        return ranges

    def quadrature_config(self) -> QuadratureConfig:
        overrides = {'half_width': self.half_width, 'nodes_per_dim': self.nodes, 'tol': self.tol}
        return QuadratureConfig(**{key: v for key, v in overrides.items() if v is not None})

    def loss_spec(self) -> LossSpec:
        if self.p is None:
            raise InvalidInputError(f"{self.command} needs --p")
        return LossSpec(p=self.p, k=self.k if self.k is not None else self.p)

    def linear_map(self) -> LinearMap:
        if self.A is None:
            raise InvalidInputError(f"{self.command} needs --A")
        return LinearMap(self.A)

    def y_grid(self, dim: int) -> np.ndarray:
        """
        Tensor grid of observation points, last axis varying fastest.

        A single --y-range is reused for every dimension.
        """
        if not self.y_ranges:
            raise InvalidInputError(f"{self.command} needs --y-range")
        ranges = self.y_ranges * dim if len(self.y_ranges) == 1 else self.y_ranges
        if len(ranges) != dim:
            raise InvalidInputError(f"Expected 1 or {dim} --y-range flags, got {len(self.y_ranges)}")

        axes = []
        for lo, hi, step in ranges:
            count = int(np.floor((hi - lo) / step + 1e-9)) + 1
            axes.append(lo + step * np.arange(count))
        mesh = np.meshgrid(*axes, indexing='ij')
        return np.stack([m.ravel() for m in mesh], axis=1)
