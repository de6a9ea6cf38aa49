"""Energies, duality gap, KKT residuals and image-quality measures.

The denoising model is ``K = I``, ``H = I`` throughout::

    primal  F(u, w) = 1/2 ||u - f||^2 + a/2 ||w||^2 + alpha1 ||grad u - w||_1 + alpha0 ||sym_grad w||_1
    dual    D(l, m) = 1/2 ||div_v l + f||^2 - 1/2 ||f||^2 + 1/(2a) ||l + div_w m||^2
                      (+ indicators of ||l||_inf <= alpha1, ||m||_inf <= alpha0)

so that ``F + D >= 0`` with equality exactly at the saddle point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .grid import div_v, div_w, global_norm, grad, sym_grad
from .prox import project_ball

FEASIBILITY_TOL = 1e-9


class InfeasibleDualError(ValueError):
    """A dual variable lies outside its ball, so the dual energy is +inf."""


def _fro(x: np.ndarray) -> float:
    return global_norm(x, 2) if x.ndim == 3 else float(np.linalg.norm(x))


def primal_energy(u, w, f, alpha1: float, alpha0: float, a: float) -> float:
    return (0.5 * float(np.sum((u - f) ** 2))
            + 0.5 * a * float(np.sum(w ** 2))
            + alpha1 * global_norm(grad(u) - w, 1)
            + alpha0 * global_norm(sym_grad(w), 1))


def dual_energy(lam, mu, f, a: float, alpha1: float | None = None, alpha0: float | None = None,
                tol_feas: float = FEASIBILITY_TOL) -> float:
    """Dual energy; raises :class:`InfeasibleDualError` outside the balls when radii are given."""
    if alpha1 is not None and global_norm(lam, np.inf) > alpha1 * (1 + tol_feas) + tol_feas:
        raise InfeasibleDualError(f"||lambda||_inf = {global_norm(lam, np.inf):.6g} > alpha1 = {alpha1}")
    if alpha0 is not None and global_norm(mu, np.inf) > alpha0 * (1 + tol_feas) + tol_feas:
        raise InfeasibleDualError(f"||mu||_inf = {global_norm(mu, np.inf):.6g} > alpha0 = {alpha0}")
    return (0.5 * float(np.sum((div_v(lam) + f) ** 2))
            - 0.5 * float(np.sum(f ** 2))
            + float(np.sum((lam + div_w(mu)) ** 2)) / (2.0 * a))


def gap(u, w, lam, mu, f, alpha1: float, alpha0: float, a: float) -> float:
    """Primal-dual gap normalized by the pixel count."""
    total = primal_energy(u, w, f, alpha1, alpha0, a) + dual_energy(lam, mu, f, a, alpha1, alpha0)
    return total / f.size


@dataclass(frozen=True)
class KKTResiduals:
    res_u: float
    res_w: float
    res_lambda: float
    res_mu: float

    def __iter__(self):
        return iter((self.res_u, self.res_w, self.res_lambda, self.res_mu))

    @property
    def total(self) -> float:
        return self.res_u + self.res_w + self.res_lambda + self.res_mu


def kkt_residuals(u, w, lam, mu, f, alpha1: float, alpha0: float, a: float, c0: float = 1.0) -> KKTResiduals:
    if not c0 > 0:
        raise ValueError("c0 must be positive")
    return KKTResiduals(
        _fro(u - f - div_v(lam)),
        _fro(a * w - lam - div_w(mu)),
        _fro(lam - project_ball(lam + c0 * (grad(u) - w), alpha1)),
        _fro(mu - project_ball(mu + c0 * sym_grad(w), alpha0)),
    )


def scaled_residual(res: Iterable[float], f: np.ndarray) -> float:
    """Sum of the four KKT residuals over ``||f||_F``."""
    fn = float(np.linalg.norm(f))
    if fn == 0.0:
        raise ValueError("scaled residual undefined for f = 0")
    return float(sum(res)) / fn


def mse(u, reference) -> float:
    u, reference = np.asarray(u, float), np.asarray(reference, float)
    if u.shape != reference.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {reference.shape}")
    return float(np.mean((u - reference) ** 2))


def rmse(u, reference) -> float:
    """Mean squared error under the name used in the comparison tables.

    The customary "RMSE" figures reported next to PSNR (~1e-3 at ~27 dB)
    are MSE values, so this returns the MSE rather than its root.
    """
    return mse(u, reference)


def psnr(u, reference, peak: float = 1.0) -> float:
    err = mse(u, reference)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


def ssim(u, reference, peak: float = 1.0, window: int = 8, k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean SSIM over all ``window x window`` sliding blocks (uniform weights)."""
    x, y = np.asarray(u, float), np.asarray(reference, float)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    win = min(window, *x.shape)
    c1, c2 = (k1 * peak) ** 2, (k2 * peak) ** 2
    xw = sliding_window_view(x, (win, win))
    yw = sliding_window_view(y, (win, win))
    mx, my = xw.mean(axis=(-2, -1)), yw.mean(axis=(-2, -1))
    vx = xw.var(axis=(-2, -1))
    vy = yw.var(axis=(-2, -1))
    cov = (xw * yw).mean(axis=(-2, -1)) - mx * my
    smap = ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx ** 2 + my ** 2 + c1) * (vx + vy + c2))
    return float(smap.mean())


def rate_estimate(trace: Sequence) -> list[float | None]:
    """Ratios of consecutive dual residuals ``res(lambda) + res(mu)``.

    ``trace`` holds either records with ``res_lambda``/``res_mu``
    attributes or plain distances. A ``None`` entry marks a step whose
    predecessor was already zero (converged).
    """
    if len(trace) < 3:
        raise ValueError("rate estimation needs at least three trace entries")
    dist = [t.res_lambda + t.res_mu if hasattr(t, "res_lambda") else float(t) for t in trace]
    return [None if prev == 0.0 else cur / prev for prev, cur in zip(dist, dist[1:])]
