"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Criterion 11 needs a 256x256 cameraman PGM given by the ``TGVALM_CAMERAMAN``
environment variable and is skipped otherwise.
"""

import itertools
import os
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES, random_state
from dense_oracle import DenseModel

from tgvalm.alm import ALMConfig, alm_run
from tgvalm.grid import div_v, div_w, grad, inner_u, inner_v, inner_w, sym_grad
from tgvalm.imageio import acceptance_instance, add_gaussian_noise, load_image
from tgvalm.metrics import primal_energy, psnr, rate_estimate
from tgvalm.primal_dual import alg2_run
from tgvalm.prox import project_ball_v, project_ball_w, shrink
from tgvalm.ssn import (InnerConfig, JacobianBlocks, PrimalDualState, SubproblemData, pack,
                        residual_F, ssn_solve, ssnpdd_step, ssnpdp_step)

ALPHA1, ALPHA0, A = 0.1, 0.05, 1.0
TOL = 1e-6


def report(n, title, ok, detail):
    line = f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def instance64():
    return acceptance_instance(64, 10.0, 42)


@pytest.fixture(scope="module")
def runs64(instance64):
    """ALM-PDP, ALM-PDD and ALG2 on the 64x64 instance, with per-step PDD data."""
    _, f = instance64
    out, pdd_steps = {}, []

    def watch(k, inner, d):
        for step in inner.steps:
            r_u = residual_F(step.x_raw, d)[0]
            pdd_steps.append((k, float(np.linalg.norm(r_u)), step.tol))

    for name, variant in (("ALM-PDP", "pdp"), ("ALM-PDD", "pdd")):
        t0 = time.perf_counter()
        res = alm_run(f, ALPHA1, ALPHA0, A, ALMConfig(variant=variant, outer_tol=TOL),
                      on_inner=watch if variant == "pdd" else None)
        out[name] = (res, time.perf_counter() - t0)
    t0 = time.perf_counter()
    out["ALG2"] = (alg2_run(f, ALPHA1, ALPHA0, A, tol=TOL), time.perf_counter() - t0)
    out["pdd_steps"] = pdd_steps
    return out


def test_criterion_01_adjointness():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        u, p = rng.standard_normal((64, 64)), rng.standard_normal((2, 64, 64))
        w, q = rng.standard_normal((2, 64, 64)), rng.standard_normal((3, 64, 64))
        e1 = abs(inner_v(grad(u), p) + inner_u(u, div_v(p))) / (np.linalg.norm(u) * np.linalg.norm(p))
        e2 = abs(inner_w(sym_grad(w), q) + inner_v(w, div_w(q))) / (np.linalg.norm(w) * np.linalg.norm(q))
        worst = max(worst, e1, e2)
    elapsed = time.perf_counter() - t0
    report(1, "adjointness", worst <= 1e-12 and elapsed < 1.0,
           f"max relative defect {worst:.2e} (<= 1e-12), {elapsed:.2f}s (< 1s)")


def test_criterion_02_moreau():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for kappa, channels in itertools.product((0.05, 0.1, 1.0), (2, 3)):
        x = rng.standard_normal((channels, 64, 64))
        proj = project_ball_v if channels == 2 else project_ball_w
        worst = max(worst, float(np.abs(x - shrink(x, kappa) - proj(x, kappa)).max()))
    elapsed = time.perf_counter() - t0
    report(2, "Moreau identity", worst <= 1e-14 and elapsed < 1.0,
           f"max pointwise residual {worst:.2e} (<= 1e-14), {elapsed:.2f}s")


def test_criterion_03_dense_jacobian():
    t0 = time.perf_counter()
    cfg = InnerConfig(krylov_tol_floor=1e-15, krylov_max_iters=2000)
    dm = DenseModel(4, 4)
    worst_step = worst_jac = 0.0
    for seed in range(3):
        x, d = random_state(np.random.default_rng(seed), sigma=0.5)
        z = pack(x.u, x.w, x.p, x.q)
        V = dm.jacobian(z, d)
        blocks = JacobianBlocks(x, d)
        shapes = (x.u.shape, x.w.shape, x.p.shape, x.q.shape)
        probed = np.column_stack([_apply_unit(blocks, shapes, j, z.size) for j in range(z.size)])
        worst_jac = max(worst_jac, np.linalg.norm(probed - V) / np.linalg.norm(V))
        expected = dm.newton_step(z, d)
        for step in (ssnpdp_step, ssnpdd_step):
            raw = step(x, d, cfg, tol=1e-14).x_raw
            got = pack(raw.u, raw.w, raw.p, raw.q)
            worst_step = max(worst_step, np.linalg.norm(got - expected) / np.linalg.norm(expected))
    elapsed = time.perf_counter() - t0
    report(3, "dense-Jacobian oracle", worst_step <= 1e-8 and worst_jac <= 1e-8 and elapsed < 5.0,
           f"step rel err {worst_step:.2e}, probed-vs-formula {worst_jac:.2e} (<= 1e-8), {elapsed:.2f}s")


def _apply_unit(blocks, shapes, j, n):
    e = np.zeros(n)
    e[j] = 1.0
    sizes = np.cumsum([0] + [int(np.prod(s)) for s in shapes])
    u, w, p, q = (e[sizes[i]:sizes[i + 1]].reshape(shapes[i]) for i in range(4))
    (a1, a2), (c1, c2) = blocks.apply((u, w), (p, q))
    return pack(a1, a2, c1, c2)


def test_criterion_04_schur_positivity():
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    worst = np.inf
    for _ in range(100):
        sigma = 4.0 ** int(rng.integers(1, 11))
        x, d = random_state(rng, shape=(32, 32), sigma=sigma, scale=float(rng.uniform(0.1, 10.0)))
        blocks = JacobianBlocks(x, d)
        u, w = rng.standard_normal((32, 32)), rng.standard_normal((2, 32, 32))
        su, sw = blocks.schur_primal(u, w)
        margin = np.vdot(u, su) + np.vdot(w, sw) - (np.vdot(u, u) + A * np.vdot(w, w))
        worst = min(worst, float(margin))
    elapsed = time.perf_counter() - t0
    report(4, "Schur positivity", worst >= -1e-10 and elapsed < 10.0,
           f"min <x,Sx> - (|u|^2 + a|w|^2) = {worst:.3e} (>= -1e-10), {elapsed:.2f}s")


@pytest.mark.parametrize("variant", ["pdp", "pdd"])
def test_criterion_05_superlinear_inner(variant):
    t0 = time.perf_counter()
    _, f = acceptance_instance(32, 10.0, 42)
    d = SubproblemData(f, np.zeros((2, 32, 32)), np.zeros((3, 32, 32)), 16.0, ALPHA1, ALPHA0, A)
    res = ssn_solve(PrimalDualState.cold_start(f), d, InnerConfig(), variant, target=1e-10)
    R = res.residuals
    ratios = [b / a for a, b in zip(R, R[1:])]
    monotone = all(r < 1 for r in ratios)
    elapsed = time.perf_counter() - t0
    ok = res.converged and monotone and len(ratios) >= 2 and all(r < 0.1 for r in ratios[-2:]) and elapsed < 30
    report(5, f"superlinear inner convergence ({variant.upper()})", ok,
           f"{len(ratios)} Newton steps, monotone={monotone}, last ratios "
           f"{', '.join(f'{r:.1e}' for r in ratios[-2:])} (< 0.1), {elapsed:.2f}s")


def test_criterion_06_cross_solver(runs64, instance64):
    _, f = instance64
    names = ("ALM-PDP", "ALM-PDD", "ALG2")
    total = sum(runs64[n][1] for n in names)
    conv = all(runs64[n][0].converged for n in names)
    du = df = 0.0
    for a, b in itertools.combinations(names, 2):
        xa, xb = runs64[a][0].x, runs64[b][0].x
        du = max(du, np.linalg.norm(xa.u - xb.u) / np.linalg.norm(f))
        ea = primal_energy(xa.u, xa.w, f, ALPHA1, ALPHA0, A)
        eb = primal_energy(xb.u, xb.w, f, ALPHA1, ALPHA0, A)
        df = max(df, abs(ea - eb))
    bound = 1e-8 * f.size
    report(6, "cross-solver agreement", conv and du <= 1e-4 and df <= bound and total < 300,
           f"max |du|/|f| {du:.2e} (<= 1e-4), max |dF| {df:.2e} (<= {bound:.2e}), {total:.1f}s")


def test_criterion_07_outer_rate(runs64):
    trace = runs64["ALM-PDP"][0].trace
    theta = rate_estimate(trace)            # theta[i] compares k = i + 2 with k = i + 1
    late = [t for k, t in zip(range(2, len(trace) + 1), theta) if k >= 3]
    gaps = [r.gap for r in trace]
    drops = [gaps[i - 1] / gaps[i] for i in range(1, len(gaps))]   # k >= 2
    ok = (all(t is not None and t <= 0.5 for t in late) and all(x >= 3 for x in drops)
          and runs64["ALM-PDP"][1] < 120)
    report(7, "outer linear rate", ok,
           f"theta_k (k>=3) max {max(late):.3f} (<= 0.5), min gap reduction {min(drops):.2f}x (>= 3)")


def test_criterion_08_pdd_elimination(runs64):
    steps = runs64["pdd_steps"]
    worst = max(r / (10 * tol) for _, r, tol in steps)
    report(8, "PDD elimination", bool(steps) and worst <= 1.0,
           f"{len(steps)} back-substitutions, max |u - f - div p| / (10 tol) = {worst:.2e} (<= 1)")


def test_criterion_09_efficiency(runs64):
    n_alm = len(runs64["ALM-PDP"][0].trace)
    n_pd = runs64["ALG2"][0].iterations
    report(9, "efficiency ordering", n_alm <= 15 and n_pd >= 100 * n_alm,
           f"ALM-PDP {n_alm} outer iterations (<= 15), ALG2 {n_pd} iterations (>= {100 * n_alm})")


def test_criterion_10_constant_image():
    f = np.full((32, 32), 0.6)
    errs, iters = [], []
    for variant in ("pdp", "pdd"):
        res = alm_run(f, ALPHA1, ALPHA0, A, ALMConfig(variant=variant, outer_tol=1e-10))
        iters.append(len(res.trace))
        errs += [np.abs(res.x.u - f).max(), np.abs(res.x.w).max(), abs(res.trace[-1].gap)]
    pd = alg2_run(f, ALPHA1, ALPHA0, A, tol=1e-10, max_iters=1000)
    errs += [np.abs(pd.x.u - f).max(), np.abs(pd.x.w).max(), abs(pd.trace[-1].gap)]
    worst = max(errs)
    ok = pd.converged and max(iters) <= 1 and pd.iterations <= 1000 and worst <= 1e-10
    report(10, "constant-image exactness", ok,
           f"ALM iterations {iters} (<= 1), ALG2 {pd.iterations} (<= 1000), max error {worst:.1e}")


@pytest.mark.skipif(not os.environ.get("TGVALM_CAMERAMAN"), reason="set TGVALM_CAMERAMAN to a 256x256 PGM")
def test_criterion_11_cameraman():
    clean = load_image(os.environ["TGVALM_CAMERAMAN"])
    f = add_gaussian_noise(clean, 5.0, seed=int(os.environ.get("TGVALM_SEED", "0")))
    res = alm_run(f, ALPHA1, ALPHA0, A, ALMConfig(outer_tol=TOL))
    value = psnr(res.x.u, clean)
    report(11, "cameraman PSNR", abs(value - 30.16) <= 0.3, f"PSNR {value:.2f} dB (30.16 +- 0.3)")
