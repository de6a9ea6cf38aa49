"""Matrix-free BiCGSTAB and the inexact-Newton tolerance rule."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)

LinearOperator = Callable[[np.ndarray], np.ndarray]


@dataclass
class KrylovResult:
    x: np.ndarray
    residual: float      # achieved ||op x - rhs||
    iterations: int
    converged: bool
    restarted: bool = False


def bicgstab(
    op: LinearOperator,
    rhs: np.ndarray,
    x0: np.ndarray | None = None,
    tol: float = 1e-8,
    max_iters: int = 1000,
    atol: float = 0.0,
) -> KrylovResult:
    """Solve ``op(x) = rhs`` by van der Vorst's BiCGSTAB.

    Stops once ``||op(x) - rhs|| <= max(tol * ||rhs||, atol)``. On a
    breakdown (``rho`` or ``omega`` vanishing) the method restarts once from
    the current iterate; a second breakdown, or running out of iterations,
    returns the best iterate seen with ``converged=False``.
    """
    rhs = np.asarray(rhs, dtype=float)
    bnorm = float(np.linalg.norm(rhs))
    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0 and x0 is None:
        return KrylovResult(x, 0.0, 0, True)

    threshold = max(tol * bnorm, atol)
    r = rhs - op(x)
    rnorm = float(np.linalg.norm(r))
    best_x, best_r = x.copy(), rnorm
    if rnorm <= threshold:
        return KrylovResult(x, rnorm, 0, True)

    restarted = False
    it = 0
    tiny = np.finfo(float).tiny
    while it < max_iters:
        r_hat = r.copy()
        rho_old = alpha = omega = 1.0
        v = np.zeros_like(r)
        p = np.zeros_like(r)
        breakdown = False
        while it < max_iters:
            it += 1
            rho = float(np.dot(r_hat, r))
            if abs(rho) <= tiny * max(1.0, rnorm * rnorm) or omega == 0.0:
                breakdown = True
                break
            beta = (rho / rho_old) * (alpha / omega)
            p = r + beta * (p - omega * v)
            v = op(p)
            denom = float(np.dot(r_hat, v))
            if denom == 0.0:
                breakdown = True
                break
            alpha = rho / denom
            s = r - alpha * v
            snorm = float(np.linalg.norm(s))
            if snorm <= threshold:
                x = x + alpha * p
                r, rnorm = s, snorm
                return KrylovResult(x, rnorm, it, True, restarted)
            t = op(s)
            tt = float(np.dot(t, t))
            if tt == 0.0:
                breakdown = True
                x = x + alpha * p
                r, rnorm = s, snorm
                break
            omega = float(np.dot(t, s)) / tt
            x = x + alpha * p + omega * s
            r = s - omega * t
            rnorm = float(np.linalg.norm(r))
            if not np.isfinite(rnorm):
                breakdown = True
                break
            if rnorm < best_r:
                best_x, best_r = x.copy(), rnorm
            if rnorm <= threshold:
                return KrylovResult(x, rnorm, it, True, restarted)
            rho_old = rho
        if not breakdown or restarted:
            break
        logger.debug("BiCGSTAB breakdown at iteration %d; restarting", it)
        restarted = True
        x = best_x.copy()
        r = rhs - op(x)
        rnorm = float(np.linalg.norm(r))
    return KrylovResult(best_x, best_r, it, False, restarted)


def krylov_tolerance(res_k: float, res_0: float, floor: float = 1e-12) -> float:
    """``0.1 * min(ratio**1.5, ratio)`` with ``ratio = res_k / res_0``.

    Clipped to ``[floor, 0.1]``; the cap only matters when the residual has
    grown past its reference.
    """
    if res_0 <= 0.0:
        return floor
    ratio = res_k / res_0
    return min(max(0.1 * min(ratio ** 1.5, ratio), floor), 0.1)
