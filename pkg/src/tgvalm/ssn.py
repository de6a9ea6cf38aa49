"""Primal-dual semismooth Newton solver for the ALM subproblem.

For fixed multipliers ``(lam, mu)`` and penalty ``sigma`` the subproblem
optimality system in ``x = (u, w, p, q)`` reads::

    F(x) = [ u - f - div_v p                          ]
           [ a w - p - div_w q                        ]
           [ -v1 + max(1, |v1| / alpha1) p            ]   v1 = lam + sigma (grad u - w)
           [ -v2 + max(1, |v2| / alpha0) q            ]   v2 = mu + sigma sym_grad w

A Newton derivative has the block form ``[[A, B], [C, D]]`` with
``A = diag(1, a)``, ``B = [[-div_v, 0], [-I, -div_w]]`` and ``D`` the
diagonal max-factors. Each Newton step solves one of the two Schur
complement systems by BiCGSTAB, back-substitutes the other half, and
projects ``(p, q)`` onto their balls.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .grid import div_v, div_w, grad, pointwise_dot, pointwise_norm, sym_grad
from .krylov import KrylovResult, bicgstab, krylov_tolerance
from .prox import active_mask, max_factor, project_ball

logger = logging.getLogger(__name__)

Variant = Literal["pdp", "pdd"]


class SolverFailure(RuntimeError):
    """Raised when an iteration produces non-finite values or a linear solve fails hard."""


@dataclass
class PrimalDualState:
    u: np.ndarray
    w: np.ndarray
    p: np.ndarray
    q: np.ndarray

    @classmethod
    def cold_start(cls, f: np.ndarray) -> "PrimalDualState":
        m, n = f.shape
        return cls(f.astype(float).copy(), np.zeros((2, m, n)), np.zeros((2, m, n)), np.zeros((3, m, n)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape

    def copy(self) -> "PrimalDualState":
        return PrimalDualState(self.u.copy(), self.w.copy(), self.p.copy(), self.q.copy())

    def projected(self, alpha1: float, alpha0: float) -> "PrimalDualState":
        return PrimalDualState(self.u, self.w, project_ball(self.p, alpha1), project_ball(self.q, alpha0))


@dataclass(frozen=True)
class SubproblemData:
    f: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    sigma: float
    alpha1: float
    alpha0: float
    a: float = 1.0

    def __post_init__(self):
        for name in ("sigma", "alpha1", "alpha0", "a"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")


@dataclass
class InnerConfig:
    max_newton_iters: int = 50
    krylov_max_iters: int = 5000
    krylov_tol_floor: float = 1e-10
    enable_line_search: bool = False
    armijo_slope: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 20
    debug_checks: bool = False

    def __post_init__(self):
        if self.max_newton_iters < 1 or self.krylov_max_iters < 1 or self.max_backtracks < 0:
            raise ValueError("iteration counts must be positive")
        if not self.krylov_tol_floor >= np.finfo(float).eps:
            raise ValueError("krylov_tol_floor must be at least machine epsilon")
        if not 0 < self.backtrack_factor < 1 or not 0 < self.armijo_slope < 0.5:
            raise ValueError("need 0 < backtrack_factor < 1 and 0 < armijo_slope < 1/2")


# -- residual -------------------------------------------------------------

def _dual_arguments(u, w, d: SubproblemData):
    v1 = d.lam + d.sigma * (grad(u) - w)
    v2 = d.mu + d.sigma * sym_grad(w)
    return v1, v2


def residual_F(x: PrimalDualState, d: SubproblemData) -> tuple[np.ndarray, ...]:
    """The four residual blocks ``(r_u, r_w, r_p, r_q)`` of the optimality system."""
    v1, v2 = _dual_arguments(x.u, x.w, d)
    blocks = (
        x.u - d.f - div_v(x.p),
        d.a * x.w - x.p - div_w(x.q),
        -v1 + max_factor(v1, d.alpha1) * x.p,
        -v2 + max_factor(v2, d.alpha0) * x.q,
    )
    if not all(np.isfinite(b).all() for b in blocks):
        raise SolverFailure("non-finite residual; the iteration diverged")
    return blocks


def block_norms(blocks) -> tuple[float, ...]:
    """Frobenius norms of the residual blocks (tensor block uses the weighted norm)."""
    return tuple(float(np.linalg.norm(pointwise_norm(b))) for b in blocks)


def residual_norm(blocks) -> float:
    """Sum of the four block Frobenius norms, the inner stopping quantity."""
    return float(sum(block_norms(blocks)))


# -- Newton derivative ----------------------------------------------------

class JacobianBlocks:
    """Matrix-free blocks of the Newton derivative at a state ``x_l``.

    ``x_l.p`` and ``x_l.q`` should lie in their balls; the Schur positivity
    guarantee depends on it.
    """

    def __init__(self, x: PrimalDualState, d: SubproblemData):
        self.x, self.d = x, d
        v1, v2 = _dual_arguments(x.u, x.w, d)
        self.v1, self.v2 = v1, v2
        self.d1 = max_factor(v1, d.alpha1)
        self.d2 = max_factor(v2, d.alpha0)
        # chi * sigma / (alpha |v|); the norm is >= alpha > 0 wherever chi = 1
        m1, m2 = pointwise_norm(v1), pointwise_norm(v2)
        chi1, chi2 = active_mask(v1, d.alpha1), active_mask(v2, d.alpha0)
        self.g1 = np.where(chi1, d.sigma / (d.alpha1 * np.where(chi1, m1, 1.0)), 0.0)
        self.g2 = np.where(chi2, d.sigma / (d.alpha0 * np.where(chi2, m2, 1.0)), 0.0)
        self.n_active = (int(chi1.sum()), int(chi2.sum()))

    def A(self, u, w):
        return u, self.d.a * w

    def A_inv(self, u, w):
        return u, w / self.d.a

    def B(self, p, q):
        return -div_v(p), -p - div_w(q)

    def C(self, u, w):
        h = grad(u) - w
        e = sym_grad(w)
        sigma = self.d.sigma
        return (
            -sigma * h + (self.g1 * pointwise_dot(self.v1, h)) * self.x.p,
            -sigma * e + (self.g2 * pointwise_dot(self.v2, e)) * self.x.q,
        )

    def D(self, p, q):
        return self.d1 * p, self.d2 * q

    def D_inv(self, p, q):
        return p / self.d1, q / self.d2

    def rhs(self):
        """``(b1, b2) = V(x_l) x_l - F(x_l)`` in closed form."""
        x, d = self.x, self.d
        h = grad(x.u) - x.w
        e = sym_grad(x.w)
        b1 = (d.f, np.zeros_like(x.w))
        b2 = (
            d.lam + (self.g1 * pointwise_dot(self.v1, h)) * x.p,
            d.mu + (self.g2 * pointwise_dot(self.v2, e)) * x.q,
        )
        return b1, b2

    def apply(self, x1, x2):
        """Full derivative ``V (x1, x2)``."""
        a1 = _add(self.A(*x1), self.B(*x2))
        a2 = _add(self.C(*x1), self.D(*x2))
        return a1, a2

    def schur_primal(self, u, w):
        """``(A - B D^-1 C)(u, w)``."""
        return _sub(self.A(u, w), self.B(*self.D_inv(*self.C(u, w))))

    def schur_dual(self, p, q):
        """``(D - C A^-1 B)(p, q)``."""
        return _sub(self.D(p, q), self.C(*self.A_inv(*self.B(p, q))))


def apply_jacobian_blocks(x: PrimalDualState, d: SubproblemData) -> JacobianBlocks:
    return JacobianBlocks(x, d)


def newton_rhs(x: PrimalDualState, d: SubproblemData):
    return JacobianBlocks(x, d).rhs()


def schur_primal_apply(v, blocks: JacobianBlocks):
    return blocks.schur_primal(*v)


def schur_dual_apply(v, blocks: JacobianBlocks):
    return blocks.schur_dual(*v)


def _add(xs, ys):
    return tuple(a + b for a, b in zip(xs, ys))


def _sub(xs, ys):
    return tuple(a - b for a, b in zip(xs, ys))


# -- flat packing for the Krylov solver ----------------------------------

def pack(*arrays) -> np.ndarray:
    return np.concatenate([a.ravel() for a in arrays])


def unpack(vec: np.ndarray, shapes) -> tuple[np.ndarray, ...]:
    out, start = [], 0
    for shape in shapes:
        size = int(np.prod(shape))
        out.append(vec[start:start + size].reshape(shape))
        start += size
    return tuple(out)


def _shapes(x: PrimalDualState, half: int):
    return (x.u.shape, x.w.shape) if half == 1 else (x.p.shape, x.q.shape)


def _flat_operator(fn: Callable, shapes) -> Callable[[np.ndarray], np.ndarray]:
    def op(vec):
        return pack(*fn(*unpack(vec, shapes)))
    return op


# -- Newton steps ---------------------------------------------------------

@dataclass
class NewtonStep:
    x: PrimalDualState          # after projection of (p, q)
    x_raw: PrimalDualState      # before projection
    krylov: KrylovResult
    tol: float                  # relative Krylov tolerance used
    step_length: float = 1.0
    line_search_failed: bool = False


def _solve_reduced(blocks: JacobianBlocks, variant: Variant, rhs1, rhs2, guess, tol, config):
    """Solve ``V (y1, y2) = (rhs1, rhs2)`` through one Schur reduction.

    ``guess`` seeds the Krylov solve on the reduced unknown; the relative
    tolerance is measured against the initial reduced residual.
    """
    x = blocks.x
    if variant == "pdp":
        shapes = _shapes(x, 1)
        op = _flat_operator(blocks.schur_primal, shapes)
        reduced = _sub(rhs1, blocks.B(*blocks.D_inv(*rhs2)))
    elif variant == "pdd":
        shapes = _shapes(x, 2)
        op = _flat_operator(blocks.schur_dual, shapes)
        reduced = _sub(rhs2, blocks.C(*blocks.A_inv(*rhs1)))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    b = pack(*reduced)
    x0 = pack(*guess) if guess is not None else np.zeros_like(b)
    r0 = float(np.linalg.norm(b - op(x0)))
    kr = bicgstab(op, b, x0, tol=0.0, max_iters=config.krylov_max_iters, atol=tol * r0)
    if not np.isfinite(kr.x).all():
        raise SolverFailure("Krylov solve produced non-finite values")
    if not kr.converged:
        logger.warning("BiCGSTAB stopped after %d iterations (residual %.3e, target %.3e)",
                       kr.iterations, kr.residual, tol * r0)
    solved = unpack(kr.x, shapes)
    if variant == "pdp":
        y1 = solved
        y2 = blocks.D_inv(*_sub(rhs2, blocks.C(*y1)))
    else:
        y2 = solved
        y1 = blocks.A_inv(*_sub(rhs1, blocks.B(*y2)))
    return y1, y2, kr


def newton_step(x: PrimalDualState, d: SubproblemData, config: InnerConfig,
                variant: Variant = "pdp", tol: float = 0.1) -> NewtonStep:
    """One semismooth Newton step in value form, ``V x_new = V x - F(x)``."""
    blocks = JacobianBlocks(x, d)
    if config.debug_checks:
        check_schur_positivity(blocks)
    b1, b2 = blocks.rhs()
    guess = (x.u, x.w) if variant == "pdp" else (x.p, x.q)
    (u, w), (p, q), kr = _solve_reduced(blocks, variant, b1, b2, guess, tol, config)
    raw = PrimalDualState(u, w, p, q)
    return NewtonStep(raw.projected(d.alpha1, d.alpha0), raw, kr, tol)


def ssnpdp_step(x, d, config, tol: float = 0.1) -> NewtonStep:
    return newton_step(x, d, config, "pdp", tol)


def ssnpdd_step(x, d, config, tol: float = 0.1) -> NewtonStep:
    return newton_step(x, d, config, "pdd", tol)


def newton_direction(x: PrimalDualState, d: SubproblemData, config: InnerConfig,
                     variant: Variant = "pdp", tol: float = 0.1, blocks=None, F=None):
    """Solve ``V dx = -F(x)``; returns ``(dx as a state, KrylovResult)``."""
    blocks = blocks or JacobianBlocks(x, d)
    F = F if F is not None else residual_F(x, d)
    rhs1 = (-F[0], -F[1])
    rhs2 = (-F[2], -F[3])
    (du, dw), (dp, dq), kr = _solve_reduced(blocks, variant, rhs1, rhs2, None, tol, config)
    return PrimalDualState(du, dw, dp, dq), kr


def _merit(blocks) -> float:
    return float(sum(n * n for n in block_norms(blocks)))


def line_search_step(x: PrimalDualState, d: SubproblemData, config: InnerConfig,
                     variant: Variant = "pdp", tol: float = 0.1) -> NewtonStep:
    """Newton step in direction form with Armijo backtracking on ``||F||^2``."""
    F = residual_F(x, d)
    phi0 = _merit(F)
    dx, kr = newton_direction(x, d, config, variant, tol, F=F)
    t, failed = 1.0, False
    for _ in range(config.max_backtracks + 1):
        trial = PrimalDualState(x.u + t * dx.u, x.w + t * dx.w, x.p + t * dx.p, x.q + t * dx.q)
        if phi0 == 0.0 or _merit(residual_F(trial, d)) <= (1.0 - 2.0 * config.armijo_slope * t) * phi0:
            break
        t *= config.backtrack_factor
    else:
        failed = True
        t = 1.0
        trial = PrimalDualState(x.u + dx.u, x.w + dx.w, x.p + dx.p, x.q + dx.q)
        logger.warning("line search exhausted %d backtracks; taking the full step", config.max_backtracks)
    return NewtonStep(trial.projected(d.alpha1, d.alpha0), trial, kr, tol, t, failed)


def check_schur_positivity(blocks: JacobianBlocks, probes: int = 3, seed: int = 0) -> None:
    """Assert ``<x1, S x1> >= ||u||^2 + a ||w||^2`` on random probes."""
    rng = np.random.default_rng(seed)
    u_shape, w_shape = blocks.x.u.shape, blocks.x.w.shape
    for _ in range(probes):
        u, w = rng.standard_normal(u_shape), rng.standard_normal(w_shape)
        su, sw = blocks.schur_primal(u, w)
        form = float(np.vdot(u, su) + np.vdot(w, sw))
        bound = float(np.vdot(u, u) + blocks.d.a * np.vdot(w, w))
        if form < bound - 1e-10 * max(1.0, bound):
            raise AssertionError(f"Schur complement lost positivity: {form} < {bound}")


# -- inner solve ----------------------------------------------------------

@dataclass
class InnerResult:
    x: PrimalDualState
    newton_iters: int
    krylov_iters: list[int] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)   # R at start, then after each step (pre-projection)
    krylov_tols: list[float] = field(default_factory=list)
    converged: bool = False
    steps: list[NewtonStep] = field(default_factory=list)

    @property
    def avg_krylov_iters(self) -> float:
        return float(np.mean(self.krylov_iters)) if self.krylov_iters else 0.0


def inner_stop_check(blocks, sigma: float, delta: float) -> bool:
    """True when the summed block residual is at most ``delta / sigma``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    norm = blocks if isinstance(blocks, (int, float)) else residual_norm(blocks)
    return norm <= delta / sigma


def ssn_solve(x0: PrimalDualState, d: SubproblemData, config: InnerConfig,
              variant: Variant = "pdp", delta: float = 1e-3,
              keep_steps: bool = False, target: float | None = None,
              res_ref: float | None = None) -> InnerResult:
    """Run semismooth Newton from ``x0`` until ``R <= delta / sigma``.

    ``target`` overrides the stopping threshold outright. ``res_ref`` is the
    reference residual of the Krylov tolerance rule (default: the residual
    at ``x0``). Hitting the Newton cap returns the last iterate with
    ``converged=False``.
    """
    threshold = delta / d.sigma if target is None else target
    x = x0.projected(d.alpha1, d.alpha0)
    r0 = residual_norm(residual_F(x, d))
    result = InnerResult(x, 0, residuals=[r0])
    if r0 <= threshold:
        result.converged = True
        return result
    res_prev = r0
    res_ref = r0 if res_ref is None else res_ref
    step_fn = line_search_step if config.enable_line_search else newton_step
    for _ in range(config.max_newton_iters):
        tol = krylov_tolerance(res_prev, res_ref, config.krylov_tol_floor)
        step = step_fn(x, d, config, variant, tol)
        res = residual_norm(residual_F(step.x_raw, d))
        x = step.x
        result.newton_iters += 1
        result.krylov_iters.append(step.krylov.iterations)
        result.krylov_tols.append(tol)
        result.residuals.append(res)
        if keep_steps:
            result.steps.append(step)
        if res <= threshold:
            result.converged = True
            break
        res_prev = res
    else:
        logger.info("Newton cap of %d reached (R = %.3e, target %.3e)",
                    config.max_newton_iters, res_prev, threshold)
    result.x = x
    return result
