"""Pointwise ball projections, shrinkage and the max-factor terms.

All functions accept either a vector field ``(2, m, n)`` or a symmetric
tensor field ``(3, m, n)``; the magnitude is chosen by channel count
(see :func:`tgvalm.grid.pointwise_norm`).
"""

from __future__ import annotations

import numpy as np

from .grid import pointwise_norm


def _require_positive(name: str, value: float) -> None:
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")


def max_factor(x: np.ndarray, alpha: float) -> np.ndarray:
    """``max(1, |x_i| / alpha)`` per pixel."""
    _require_positive("alpha", alpha)
    return np.maximum(1.0, pointwise_norm(x) / alpha)


def active_mask(x: np.ndarray, alpha: float) -> np.ndarray:
    """Pixels where ``|x_i| >= alpha``; the boundary counts as active."""
    _require_positive("alpha", alpha)
    return pointwise_norm(x) >= alpha


def project_ball(x: np.ndarray, alpha: float) -> np.ndarray:
    """Project each pixel onto the closed ball of radius ``alpha``."""
    return x / max_factor(x, alpha)


def project_ball_v(x: np.ndarray, alpha: float) -> np.ndarray:
    if x.shape[0] != 2:
        raise ValueError(f"expected a vector field, got shape {x.shape}")
    return project_ball(x, alpha)


def project_ball_w(x: np.ndarray, alpha: float) -> np.ndarray:
    if x.shape[0] != 3:
        raise ValueError(f"expected a symmetric tensor field, got shape {x.shape}")
    return project_ball(x, alpha)


def shrink(x: np.ndarray, tau: float, alpha: float = 1.0) -> np.ndarray:
    """Isotropic soft shrinkage with threshold ``kappa = tau * alpha``.

    This is the resolvent ``(I + tau*alpha d||.||_1)^{-1}``; by Moreau,
    ``shrink(x, kappa) + project_ball(x, kappa) == x``.
    """
    _require_positive("tau", tau)
    _require_positive("alpha", alpha)
    kappa = tau * alpha
    mag = pointwise_norm(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(mag > kappa, 1.0 - kappa / mag, 0.0)
    return x * scale
