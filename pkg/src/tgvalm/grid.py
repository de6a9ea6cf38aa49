"""Finite-difference operators and norms on the TGV grid spaces.

Three field types share one layout convention:

* scalar image ``u``: array of shape ``(m, n)``, row-major, ``(row, col) = (y, x)``
* vector field ``p``: shape ``(2, m, n)``; channel 0 is the x-component
* symmetric tensor field ``q``: shape ``(3, m, n)`` holding ``(xx, yy, xy)``

The off-diagonal tensor entry is stored once. Its multiplicity enters only
through :func:`inner_w` and the tensor magnitude, never the arrays.

Forward differences vanish on the last column/row. The backward
differences are the exact negative adjoints of the forward ones.
"""

from __future__ import annotations

import numpy as np

# Channel weights of the symmetric-tensor inner product.
W_WEIGHTS = np.array([1.0, 1.0, 2.0])


def dx_forward(u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u)
    out[..., :, :-1] = u[..., :, 1:] - u[..., :, :-1]
    return out


def dy_forward(u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u)
    out[..., :-1, :] = u[..., 1:, :] - u[..., :-1, :]
    return out


def dx_backward(p: np.ndarray) -> np.ndarray:
    """Negative adjoint of :func:`dx_forward`."""
    out = np.zeros_like(p)
    if p.shape[-1] == 1:
        return out
    out[..., :, 0] = p[..., :, 0]
    out[..., :, 1:-1] = p[..., :, 1:-1] - p[..., :, :-2]
    out[..., :, -1] = -p[..., :, -2]
    return out


def dy_backward(p: np.ndarray) -> np.ndarray:
    """Negative adjoint of :func:`dy_forward`."""
    out = np.zeros_like(p)
    if p.shape[-2] == 1:
        return out
    out[..., 0, :] = p[..., 0, :]
    out[..., 1:-1, :] = p[..., 1:-1, :] - p[..., :-2, :]
    out[..., -1, :] = -p[..., -2, :]
    return out


def grad(u: np.ndarray) -> np.ndarray:
    return np.stack([dx_forward(u), dy_forward(u)])


def div_v(p: np.ndarray) -> np.ndarray:
    """Discrete divergence with ``<grad u, p> = -<u, div_v p>``."""
    return dx_backward(p[0]) + dy_backward(p[1])


def sym_grad(w: np.ndarray) -> np.ndarray:
    return np.stack([
        dx_forward(w[0]),
        dy_forward(w[1]),
        0.5 * (dy_forward(w[0]) + dx_forward(w[1])),
    ])


def div_w(q: np.ndarray) -> np.ndarray:
    """Divergence of a symmetric tensor field, ``<sym_grad w, q>_W = -<w, div_w q>``."""
    return np.stack([
        dx_backward(q[0]) + dy_backward(q[2]),
        dx_backward(q[2]) + dy_backward(q[1]),
    ])


def inner_u(u: np.ndarray, v: np.ndarray) -> float:
    _check_same_shape(u, v)
    return float(np.dot(u.ravel(), v.ravel()))


def inner_v(p: np.ndarray, s: np.ndarray) -> float:
    _check_same_shape(p, s)
    return float(np.dot(p.ravel(), s.ravel()))


def inner_w(q: np.ndarray, r: np.ndarray) -> float:
    """Sum over pixels of ``q1*r1 + q2*r2 + 2*q3*r3``."""
    _check_same_shape(q, r)
    if q.shape[0] != 3:
        raise ValueError(f"expected a 3-channel tensor field, got shape {q.shape}")
    return float(np.dot((W_WEIGHTS[:, None, None] * q).ravel(), r.ravel()))


def pointwise_dot(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-pixel inner product of two vector (2-channel) or tensor (3-channel) fields."""
    _check_same_shape(x, y)
    if x.shape[0] == 2:
        return x[0] * y[0] + x[1] * y[1]
    if x.shape[0] == 3:
        return x[0] * y[0] + x[1] * y[1] + 2.0 * x[2] * y[2]
    raise ValueError(f"expected 2 or 3 channels, got shape {x.shape}")


def pointwise_norm(x: np.ndarray) -> np.ndarray:
    """Per-pixel magnitude: Euclidean for vectors, weighted for tensors.

    A 2-D input is treated as a scalar image and its absolute value returned.
    """
    if x.ndim == 2:
        return np.abs(x)
    return np.sqrt(pointwise_dot(x, x))


def global_norm(x: np.ndarray, t: float | str = 2) -> float:
    """Discrete ``||.||_t`` for ``t`` in ``{1, 2, inf}`` built on the pointwise magnitude."""
    mag = pointwise_norm(x)
    if t == 1:
        return float(mag.sum())
    if t == 2:
        return float(np.sqrt(np.dot(mag.ravel(), mag.ravel())))
    if t in (np.inf, "inf", "infinity"):
        return float(mag.max()) if mag.size else 0.0
    raise ValueError(f"unsupported norm order t={t!r}; use 1, 2 or inf")


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
