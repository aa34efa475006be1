"""
Loss Module for L^p Estimation

The L^p-of-L^k loss l_{p,k}(x) = ||x||_k^p, its gradient and the diagonal
of its Hessian. All functions act on the last axis, so a batch of
residual vectors of shape (m, n) is evaluated in one call.
"""

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import gamma

# Below this k-norm the gradient prefactor ||x||_k^(p-k) is clamped to 0.
NORM_FLOOR = 1e-300


class LossSpec(BaseModel):
    """The exponent pair (p, k) defining l_{p,k}."""
    model_config = ConfigDict(frozen=True)

    p: float = Field(..., ge=1, description="Outer exponent applied to the k-norm")
    k: float = Field(..., ge=1, description="Exponent of the inner norm")

    @property
    def gaussian_unique_regime(self) -> bool:
        """True when p == k and 1 <= p <= 2 (the Gaussian-uniqueness regime)."""
        return self.p == self.k and 1.0 <= self.p <= 2.0


def _as_vectors(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x.reshape(1) if x.ndim == 0 else x


def loss_value(x, spec: LossSpec):
    """
    Evaluate (sum_i |x_i|^k)^(p/k).

    Args:
        x: Vector of shape (n,) or batch of shape (m, n)
        spec: Loss exponents

    Returns:
        Float for a single vector, array of length m for a batch
    """
    x = _as_vectors(x)
    total = np.sum(np.abs(x) ** spec.k, axis=-1)
    out = total ** (spec.p / spec.k)
    return float(out) if np.ndim(out) == 0 else out


def loss_gradient(x, spec: LossSpec) -> np.ndarray:
    """
    Gradient p ||x||_k^(p-k) (|x_i|^(k-1) sign(x_i))_i.

    sign(0) is 0 and the gradient at the origin is the zero vector.

    Args:
        x: Vector of shape (n,) or batch of shape (m, n)
        spec: Loss exponents

    Returns:
        Array with the same shape as x
    """
    x = _as_vectors(x)
    p, k = spec.p, spec.k
    ax = np.abs(x)
    direction = ax ** (k - 1.0) * np.sign(x)
    if p == k:
        return p * direction

    norm = np.sum(ax ** k, axis=-1, keepdims=True) ** (1.0 / k)
    tiny = norm < NORM_FLOOR
    log_norm = np.log(np.where(tiny, 1.0, norm))
    factor = np.where(tiny, 0.0, p * np.exp((p - k) * log_norm))
    return factor * direction


def loss_hessian_diag(x, spec: LossSpec) -> np.ndarray:
    """
    Diagonal of the Hessian of l_{p,k}.

    Entries that are infinite (x_i = 0 with k < 2) are reported as 0;
    callers treat a vanishing curvature as a cue to bisect.

    Args:
        x: Vector of shape (n,) or batch of shape (m, n)
        spec: Loss exponents

    Returns:
        Array with the same shape as x
    """
    x = _as_vectors(x)
    p, k = spec.p, spec.k
    ax = np.abs(x)
    with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
        local = ax ** (k - 2.0)
        local = np.where(np.isfinite(local), local, 0.0)
        if p == k:
            hess = p * (p - 1.0) * local
        else:
            total = np.sum(ax ** k, axis=-1, keepdims=True)
            positive = total > 0
            safe = np.where(positive, total, 1.0)
            hess = (p * (p - k) * safe ** (p / k - 2.0) * ax ** (2.0 * k - 2.0)
                    + p * (k - 1.0) * safe ** (p / k - 1.0) * local)
            hess = np.where(positive, hess, 0.0)
    return np.nan_to_num(hess, nan=0.0, posinf=0.0, neginf=0.0)


def odd_pairing(k: float) -> float:
    """
    E[|Z|^(k-1) sign(Z) Z] = E|Z|^k for Z standard normal.

    Strictly positive for every k >= 1; this is what forces the
    nonconstant part of a polynomial moment functional to show up.
    """
    return float(2.0 ** (k / 2.0) * gamma((k + 1.0) / 2.0) / np.sqrt(np.pi))
