"""Accelerated first-order primal-dual baseline (Chambolle-Pock ALG2).

The saddle problem is::

    min_{u,w} max_{|p|<=alpha1, |q|<=alpha0}
        <grad u - w, p> + <sym_grad w, q>_W + 1/2 ||u - f||^2 + a/2 ||w||^2

with linear operator ``K(u, w) = (grad u - w, sym_grad w)``. The primal
part is ``min(1, a)``-strongly convex; acceleration uses half of that by
default, since the full modulus leaves the ``u`` residual stalling
around 1e-6.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .grid import div_v, div_w, grad, inner_w, sym_grad
from .metrics import gap as normalized_gap
from .metrics import kkt_residuals, scaled_residual
from .prox import project_ball
from .ssn import PrimalDualState

logger = logging.getLogger(__name__)

FALLBACK_L2 = 12.0


def _K(u, w):
    return grad(u) - w, sym_grad(w)


def _K_adj(p, q):
    return -div_v(p), -p - div_w(q)


def operator_norm_sq(shape, iters: int = 100, seed: int = 0, rtol: float = 1e-6) -> float:
    """Power-iteration estimate of ``||K||^2``; falls back to 12 on failure."""
    rng = np.random.default_rng(seed)
    u, w = rng.standard_normal(shape), rng.standard_normal((2, *shape))
    est = prev = 0.0
    for _ in range(iters):
        nrm = math.sqrt(float(np.sum(u * u) + np.sum(w * w)))
        if nrm == 0.0 or not math.isfinite(nrm):
            return FALLBACK_L2
        u, w = u / nrm, w / nrm
        u, w = _K_adj(*_K(u, w))
        prev, est = est, math.sqrt(float(np.sum(u * u) + np.sum(w * w)))
    if not math.isfinite(est) or est <= 0 or abs(est - prev) > rtol * est * 100:
        logger.warning("power iteration did not settle (%.6g vs %.6g); using L^2 = %g", est, prev, FALLBACK_L2)
        return FALLBACK_L2
    return est


@dataclass
class ALG2Record:
    k: int
    res_u: float
    res_w: float
    res_lambda: float
    res_mu: float
    gap: float
    U: float
    wall_ms: float
    n_ssn: int = 0
    n_bicg_avg: float = 0.0


@dataclass
class ALG2Result:
    x: PrimalDualState
    iterations: int
    status: str                   # converged | max_iters | timeout
    trace: list[ALG2Record] = field(default_factory=list)
    L2: float = float("nan")
    tau_sigma_L2: list[float] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def alg2_run(f: np.ndarray, alpha1: float, alpha0: float, a: float = 1.0,
             tol: float = 1e-6, max_iters: int = 100_000, check_every: int = 10,
             residual_c0: float = 1.0, time_budget: float = 1e4,
             safety: float = 1.01, gamma: float | None = None) -> ALG2Result:
    """Run ALG2 until the scaled KKT residual drops to ``tol``.

    The residual is evaluated every ``check_every`` iterations, and each
    evaluation is appended to the trace. ``safety`` inflates the
    power-iteration estimate of ``||K||^2``, which approaches from below.
    ``gamma`` defaults to ``0.5 * min(1, a)``.
    """
    f = np.asarray(f, dtype=float)
    for name, val in (("alpha1", alpha1), ("alpha0", alpha0), ("a", a), ("tol", tol)):
        if not val > 0:
            raise ValueError(f"{name} must be positive")
    if check_every < 1:
        raise ValueError("check_every must be positive")
    L2 = operator_norm_sq(f.shape) * safety
    tau = sig = 1.0 / math.sqrt(L2)
    gamma = 0.5 * min(1.0, a) if gamma is None else gamma
    if not gamma > 0:
        raise ValueError("gamma must be positive")

    x = PrimalDualState.cold_start(f)
    u, w, p, q = x.u, x.w, x.p, x.q
    u_bar, w_bar = u.copy(), w.copy()
    result = ALG2Result(x, 0, "max_iters", L2=L2)
    started = time.perf_counter()
    t_last = started

    for n in range(1, max_iters + 1):
        gu, ew = _K(u_bar, w_bar)
        p = project_ball(p + sig * gu, alpha1)
        q = project_ball(q + sig * ew, alpha0)
        u_new = (u + tau * (div_v(p) + f)) / (1.0 + tau)
        w_new = (w + tau * (p + div_w(q))) / (1.0 + a * tau)
        theta = 1.0 / math.sqrt(1.0 + 2.0 * gamma * tau)
        u_bar = u_new + theta * (u_new - u)
        w_bar = w_new + theta * (w_new - w)
        u, w = u_new, w_new
        tau, sig = theta * tau, sig / theta

        if n % check_every == 0 or n == max_iters:
            res = kkt_residuals(u, w, p, q, f, alpha1, alpha0, a, residual_c0)
            now = time.perf_counter()
            rec = ALG2Record(n, res.res_u, res.res_w, res.res_lambda, res.res_mu,
                             normalized_gap(u, w, p, q, f, alpha1, alpha0, a),
                             scaled_residual(res, f), 1e3 * (now - t_last))
            t_last = now
            result.trace.append(rec)
            result.tau_sigma_L2.append(tau * sig * L2)
            if rec.U <= tol:
                result.status = "converged"
                break
            if now - started > time_budget:
                result.status = "timeout"
                break
    result.iterations = n
    result.x = PrimalDualState(u, w, p, q)
    return result


def saddle_value(x: PrimalDualState, f, a: float) -> float:
    """Lagrangian value at ``x`` without indicators (diagnostics only)."""
    gu, ew = _K(x.u, x.w)
    return (float(np.vdot(gu, x.p)) + inner_w(ew, x.q)
            + 0.5 * float(np.sum((x.u - f) ** 2)) + 0.5 * a * float(np.sum(x.w ** 2)))
