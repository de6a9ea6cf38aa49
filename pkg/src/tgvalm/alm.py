"""Outer augmented Lagrangian loop around the semismooth Newton solver."""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import global_norm
from .metrics import gap as normalized_gap
from .metrics import kkt_residuals, scaled_residual
from .ssn import InnerConfig, InnerResult, PrimalDualState, SolverFailure, SubproblemData, ssn_solve

logger = logging.getLogger(__name__)

VARIANTS = ("pdp", "pdd")


@dataclass
class ALMConfig:
    sigma0: float = 4.0
    growth: float = 4.0
    sigma_max: float = 4.0 ** 10
    delta: float | Sequence[float] = 1e-3
    outer_tol: float = 1e-6
    stop_on: str = "U"          # "U" (scaled residual) or "gap"
    max_outer: int = 30
    variant: str = "pdp"
    residual_c0: float = 1.0
    time_budget: float = 1e4    # seconds
    inner: InnerConfig = field(default_factory=InnerConfig)

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        if not self.growth > 1:
            raise ValueError("sigma growth factor must exceed 1")
        if not self.sigma_max >= self.sigma0:
            raise ValueError("sigma_max must be at least sigma0")
        if not self.outer_tol > 0:
            raise ValueError("outer_tol must be positive")
        if self.stop_on not in ("U", "gap"):
            raise ValueError("stop_on must be 'U' or 'gap'")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.max_outer < 1:
            raise ValueError("max_outer must be positive")
        deltas = [self.delta] if np.isscalar(self.delta) else list(self.delta)
        if not deltas or any(not x > 0 for x in deltas):
            raise ValueError("delta values must be positive")

    def delta_at(self, k: int) -> float:
        if np.isscalar(self.delta):
            return float(self.delta)
        seq = list(self.delta)
        return float(seq[min(k, len(seq) - 1)])


@dataclass
class TraceRecord:
    k: int
    res_u: float
    res_w: float
    res_lambda: float
    res_mu: float
    gap: float
    U: float
    n_ssn: int
    n_bicg_avg: float
    wall_ms: float
    sigma: float = float("nan")
    inner_converged: bool = True


@dataclass
class ALMState:
    lam: np.ndarray
    mu: np.ndarray
    sigma: float
    k: int
    x: PrimalDualState
    trace: list[TraceRecord] = field(default_factory=list)
    res_ref: float | None = None     # first subproblem's initial residual, scales Krylov tolerances

    @classmethod
    def initial(cls, f: np.ndarray, sigma0: float) -> "ALMState":
        x = PrimalDualState.cold_start(f)
        return cls(np.zeros_like(x.p), np.zeros_like(x.q), float(sigma0), 0, x)


@dataclass
class ALMResult:
    x: PrimalDualState
    state: ALMState
    status: str                  # converged | max_outer | timeout

    @property
    def trace(self) -> list[TraceRecord]:
        return self.state.trace

    @property
    def converged(self) -> bool:
        return self.status == "converged"


class ALMFailure(SolverFailure):
    """Inner solve failed twice; ``result`` holds the partial run."""

    def __init__(self, message: str, result: ALMResult):
        super().__init__(message)
        self.result = result


def sigma_update(state: ALMState, config: ALMConfig) -> ALMState:
    return dataclasses.replace(state, sigma=min(config.growth * state.sigma, config.sigma_max))


def multiplier_update(state: ALMState, x: PrimalDualState) -> ALMState:
    """Nonlinear multiplier update ``lam <- p``, ``mu <- q`` (``p``, ``q`` already projected)."""
    return dataclasses.replace(state, lam=x.p.copy(), mu=x.q.copy(), x=x)


def alm_run(f: np.ndarray, alpha1: float, alpha0: float, a: float = 1.0,
            config: ALMConfig | None = None, state: ALMState | None = None,
            on_inner: Callable[[int, InnerResult, SubproblemData], None] | None = None) -> ALMResult:
    """Run ALM-PDP / ALM-PDD on ``f`` until the outer tolerance is met.

    Passing a previously returned ``state`` resumes the run; ``max_outer``
    bounds the total outer count including earlier iterations. ``on_inner``
    observes each finished subproblem solve (with its Newton steps kept).
    """
    config = config or ALMConfig()
    f = np.asarray(f, dtype=float)
    if not np.isfinite(f).all():
        raise ValueError("input image has non-finite values")
    for name, val in (("alpha1", alpha1), ("alpha0", alpha0), ("a", a)):
        if not val > 0:
            raise ValueError(f"{name} must be positive")
    state = state or ALMState.initial(f, config.sigma0)
    started = time.perf_counter()
    status = "max_outer"

    if state.trace and _outer_converged(state.trace[-1], config):
        return ALMResult(state.x, state, "converged")

    while state.k < config.max_outer:
        if time.perf_counter() - started > config.time_budget:
            status = "timeout"
            break
        t0 = time.perf_counter()
        d = SubproblemData(f, state.lam, state.mu, state.sigma, alpha1, alpha0, a)
        delta = config.delta_at(state.k)
        try:
            inner = ssn_solve(state.x, d, config.inner, config.variant, delta,
                              keep_steps=on_inner is not None, res_ref=state.res_ref)
        except SolverFailure as exc:
            logger.warning("inner solve failed at k=%d (%s); retrying with line search", state.k, exc)
            retry_cfg = dataclasses.replace(config.inner, enable_line_search=True)
            try:
                inner = ssn_solve(state.x, d, retry_cfg, config.variant, delta,
                                  keep_steps=on_inner is not None, res_ref=state.res_ref)
            except SolverFailure as exc2:
                raise ALMFailure(f"inner solver failed at outer iteration {state.k + 1}: {exc2}",
                                 ALMResult(state.x, state, "failed")) from exc2

        if on_inner is not None:
            on_inner(state.k + 1, inner, d)
            inner.steps.clear()
        if state.res_ref is None and inner.residuals[0] > 0:
            state.res_ref = inner.residuals[0]
        state = multiplier_update(state, inner.x)
        x = inner.x
        res = kkt_residuals(x.u, x.w, state.lam, state.mu, f, alpha1, alpha0, a, config.residual_c0)
        record = TraceRecord(
            k=state.k + 1,
            res_u=res.res_u, res_w=res.res_w, res_lambda=res.res_lambda, res_mu=res.res_mu,
            gap=normalized_gap(x.u, x.w, state.lam, state.mu, f, alpha1, alpha0, a),
            U=scaled_residual(res, f),
            n_ssn=inner.newton_iters,
            n_bicg_avg=inner.avg_krylov_iters,
            wall_ms=1e3 * (time.perf_counter() - t0),
            sigma=state.sigma,
            inner_converged=inner.converged,
        )
        assert global_norm(state.lam, np.inf) <= alpha1 * (1 + 1e-12)
        assert global_norm(state.mu, np.inf) <= alpha0 * (1 + 1e-12)
        state.trace.append(record)
        logger.info("ALM k=%d sigma=%g U=%.3e gap=%.3e N_SSN=%d N_ABCG=%.1f",
                    record.k, state.sigma, record.U, record.gap, record.n_ssn, record.n_bicg_avg)
        state = sigma_update(state, config)
        state.k += 1
        if _outer_converged(record, config):
            status = "converged"
            break
    return ALMResult(state.x, state, status)


def _outer_converged(record: TraceRecord, config: ALMConfig) -> bool:
    value = record.U if config.stop_on == "U" else record.gap
    return value <= config.outer_tol
