"""Acceptance criteria 1-13, each at its stated tolerance and runtime budget.

Every test records a PASS/FAIL line; the lines are printed together in the
``acceptance criteria`` section of the pytest summary.
"""

import time

import numpy as np
import pytest
from scipy import special

from fwbq.density import GaussianMixture, TruncatedGaussian, random_mixture
from fwbq.evidence import run_model_selection, synthetic_data
from fwbq.kernel import EqKernel, rff_sample
from fwbq.mean_element import REFERENCE_TRUNC_INITIAL_ERRORS, mean_element, numeric_mean_element
from fwbq.quadrature import (
    IntegralPosterior,
    KernelExpansion,
    QuadratureRule,
    bq_rule,
    contraction_bound,
    contraction_mass,
    fw_weights,
    mmd_squared,
    posterior,
)
from fwbq.selector import SelectionConfig, fwls_step, select

KERNEL = EqKernel(1.0, 0.8, 2)


@pytest.fixture(scope="module")
def study():
    p = random_mixture(20, 2, seed=0)
    return p, KERNEL, mean_element(p, KERNEL)


def test_criterion_01_truncated_initial_errors(report):
    t0 = time.perf_counter()
    got = {}
    for d in (1, 2, 3):
        p = TruncatedGaussian(d)
        k = EqKernel(1.0, 1.0, d, exponent_scale=1.0)
        got[d] = numeric_mean_element(p, k, tol=1e-9).initial_error
    elapsed = time.perf_counter() - t0
    dev = max(abs(got[d] - REFERENCE_TRUNC_INITIAL_ERRORS[d]) for d in got)
    ok = dev <= 5e-5 and elapsed < 30
    values = ", ".join(f"d={d}: {v:.7f}" for d, v in got.items())
    assert report(1, ok, f"{values}; max deviation {dev:.2e} (tol 5e-5); {elapsed:.1f}s (< 30s)")


def test_criterion_02_variance_equals_mmd(report):
    t0 = time.perf_counter()
    worst = 0.0
    for trial in range(50):
        p = random_mixture(1 + trial % 5, 2, seed=100 + trial)
        mu = mean_element(p, KERNEL)
        n = 1 + trial % 20
        x = p.sample(n, trial)
        var = posterior(x, np.zeros(n), KERNEL, mu).variance
        mmd2 = mmd_squared(bq_rule(x, KERNEL, mu), KERNEL, mu)
        worst = max(worst, abs(var - mmd2) / mmd2)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 5
    assert report(2, ok, f"max relative gap {worst:.2e} over 50 sets (tol 1e-10); {elapsed:.1f}s (< 5s)")


def test_criterion_03_bq_weights_minimax(report, study):
    p, k, mu = study
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = np.inf
    for seed in range(3):
        tr = select("FW", p, k, mu, SelectionConfig(20, pool_size=2000, seed=seed))
        w_bq = bq_rule(tr.points, k, mu).weights
        best = mmd_squared(QuadratureRule(tr.points, w_bq), k, mu)
        rivals = [tr.fw_weights]
        for i in range(100):
            base = w_bq if i % 2 else tr.fw_weights
            rivals.append(base + 10 ** rng.uniform(-6, -1) * rng.standard_normal(len(base)))
        for w in rivals:
            worst = min(worst, mmd_squared(QuadratureRule(tr.points, w), k, mu) - best)
    elapsed = time.perf_counter() - t0
    ok = worst >= -1e-12 and elapsed < 5
    assert report(3, ok, f"min MMD^2(w) - MMD^2(w_BQ) = {worst:.2e} (>= -1e-12); {elapsed:.1f}s (< 5s)")


def test_criterion_04_herding_weights_uniform(report):
    dev = max(np.max(np.abs(fw_weights(1.0 / np.arange(1, n + 1)) - 1.0 / n)) for n in range(1, 51))
    assert report(4, dev <= 1e-12, f"max deviation from 1/n {dev:.1e} for n = 1..50 (tol 1e-12)")


def test_criterion_05_bq_weights_tenfold(report, study):
    p, k, mu = study
    t0 = time.perf_counter()
    cfg = SelectionConfig(50, pool_size=10_000, seed=0)
    ratios = {}
    for base in ("FW", "FWLS"):
        tr = select(base, p, k, mu, cfg)
        plain = mmd_squared(QuadratureRule(tr.points, tr.fw_weights), k, mu)
        bq = mmd_squared(bq_rule(tr.points, k, mu), k, mu)
        ratios[base] = bq / plain
    elapsed = time.perf_counter() - t0
    ok = max(ratios.values()) <= 0.1 and elapsed < 120
    detail = (f"mmd2(FWBQ)/mmd2(FW) = {ratios['FW']:.3f}, mmd2(FWLSBQ)/mmd2(FWLS) = "
              f"{ratios['FWLS']:.3f} at n=50 (need <= 0.1); {elapsed:.1f}s (< 120s)")
    assert report(5, ok, detail)


def test_criterion_06_monotone_refinement(report, study):
    p, k, mu = study
    worst = -np.inf
    for seed in range(3):
        for method in ("SBQ", "FWBQ", "FWLSBQ"):
            tr = select(method, p, k, mu, SelectionConfig(60, pool_size=10_000, seed=seed))
            m = [mmd_squared(bq_rule(tr.points[:n], k, mu), k, mu) for n in range(1, 61)]
            worst = max(worst, np.max(np.diff(m)))
    ok = worst <= 1e-12
    assert report(6, ok, f"largest step increase {worst:.2e} over n = 1..60, 3 seeds (tol 1e-12)")


def _grid_objective(X, w, x, k, mu, grid):
    # J(rho) = MMD^2((1 - rho) g + rho Phi(x)) / 2 on every grid value at once
    pts = np.vstack([X, x])
    W = np.column_stack([np.outer(1 - grid, w), grid])
    K = k(pts, pts)
    z = mu.evaluate(pts)
    return 0.5 * (mu.initial_error - 2 * W @ z + np.einsum("gi,ij,gj->g", W, K, W))


def test_criterion_07_line_search_optimal(report, study):
    p, k, mu = study
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    grid = np.linspace(0.0, 1.0, 10_000)
    cell = grid[1] - grid[0]
    worst = 0.0
    for trial in range(100):
        n = int(rng.integers(1, 11))
        X = p.sample(n, 700 + trial)
        w = rng.dirichlet(np.ones(n))
        x = p.sample(1, 700 + trial, 1) if trial % 4 else rng.uniform(-5, 5, size=(1, 2))
        rho = fwls_step(X, w, x, k, mu)
        rho_grid = grid[np.argmin(_grid_objective(X, w, x, k, mu, grid))]
        worst = max(worst, abs(rho - rho_grid) / cell)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1.0 and elapsed < 10
    assert report(7, ok, f"max |rho* - grid argmin| = {worst:.2f} cells on 100 states (<= 1); "
                         f"{elapsed:.1f}s (< 10s)")


def test_criterion_08_rff_unbiased(report):
    rng = np.random.default_rng(8)
    exact = EqKernel(1.0, 0.8, 2)
    X, Y = rng.normal(size=(10, 2)), rng.normal(size=(10, 2))
    draws = np.array([
        [rff_sample(0.8, 1.0, 2, 1, seed).eval(x, y) for x, y in zip(X, Y)] for seed in range(2000)
    ])
    z = (draws.mean(axis=0) - [exact.eval(x, y) for x, y in zip(X, Y)]) / (
        draws.std(axis=0, ddof=1) / np.sqrt(2000)
    )
    worst = np.max(np.abs(z))
    assert report(8, worst <= 3, f"max |z| = {worst:.2f} over 10 pairs, 2000 D=1 draws (<= 3)")


def test_criterion_09_finite_dimensional_rate(report):
    t0 = time.perf_counter()
    p = GaussianMixture.single(np.zeros(2), np.eye(2))
    k = rff_sample(0.8, 1.0, 2, 100, 0)
    mu = mean_element(p, k)
    tr = select("FWBQ", p, k, mu, SelectionConfig(80, pool_size=10_000, seed=0))
    ns = np.arange(10, 81)
    mmd = [np.sqrt(mmd_squared(bq_rule(tr.points[:n], k, mu), k, mu)) for n in ns]
    slope = np.polyfit(np.log(ns), np.log(mmd), 1)[0]
    elapsed = time.perf_counter() - t0
    ok = slope <= -0.9 and elapsed < 120
    assert report(9, ok, f"log-log slope of mmd(FWBQ), n = 10..80, D=100: {slope:.2f} (<= -0.9); "
                         f"{elapsed:.1f}s (< 120s)")


def test_criterion_10_contraction(report):
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(200):
        m, s = rng.normal(), 10 ** rng.uniform(-3, 1)
        a, b = np.sort(rng.normal(size=2) * 2)
        post = IntegralPosterior(m, s * s)
        closed = 0.5 * special.erfc((m - a) / (np.sqrt(2) * s)) + 0.5 * special.erfc(
            (b - m) / (np.sqrt(2) * s)
        )
        worst = max(worst, abs(contraction_mass(post, a, b) - closed))
    sds = np.logspace(-3, 1, 200)
    masses = [contraction_mass(IntegralPosterior(0.1, s * s), -0.5, 0.8) for s in sds]
    monotone = bool(np.all(np.diff(masses) >= 0))
    ratios = [np.divide(*contraction_bound(r, 1.0)[::-1]) for r in (6, 6.5, 8, 12, 20)]
    ratio_gap = max(abs(r - 1) for r in ratios)
    ok = worst <= 1e-10 and monotone and ratio_gap <= 0.05
    assert report(10, ok, f"tail-mass error {worst:.1e} (tol 1e-10); monotone in sd: {monotone}; "
                          f"max |asymptotic/erfc - 1| at ratio >= 6: {ratio_gap:.3f} (<= 0.05)")


def test_criterion_11_interpolation_exact(report, study):
    p, k, mu = study
    rng = np.random.default_rng(11)
    worst = 0.0
    for trial in range(30):
        n = int(rng.integers(1, 21))
        tr = select("FWBQ", p, k, mu, SelectionConfig(n, pool_size=1000, seed=trial))
        idx = rng.choice(n, size=min(n, 5), replace=False)
        f = KernelExpansion(tr.points[idx], rng.normal(size=len(idx)), k)
        truth = f.integral(mu)
        est = posterior(tr.points, f(tr.points), k, mu).mean
        worst = max(worst, abs(est - truth) / abs(truth))
    assert report(11, worst <= 1e-8, f"max relative error {worst:.1e} on 30 rules, n <= 20 (tol 1e-8)")


def test_criterion_12_model_selection_narrowing(report):
    t0 = time.perf_counter()
    data = synthetic_data(seed=0)
    models, res = run_model_selection(data, [10, 200], "FWBQ", seed=0, pool_size=10_000,
                                      sample_count=10_000)
    w10, w200 = res[10].widths.mean(), res[200].widths.mean()
    s10, s200 = res[10].map_stability, res[200].map_stability
    elapsed = time.perf_counter() - t0
    ok = len(models) == 56 and w200 < w10 and s200 >= s10 and elapsed < 300
    assert report(12, ok, f"mean 95% width {w10:.4f} -> {w200:.4f}; mapStability {s10:.3f} -> "
                          f"{s200:.3f} (n = 10 -> 200, 56 models); {elapsed:.1f}s (< 300s)")


def test_criterion_13_error_bound(report, study):
    p, k, mu = study
    rng = np.random.default_rng(13)
    worst = -np.inf
    for trial in range(50):
        n = int(rng.integers(1, 31))
        tr = select(("FWBQ", "FWLSBQ", "SBQ")[trial % 3], p, k, mu,
                    SelectionConfig(n, pool_size=500, seed=trial))
        J = int(rng.integers(1, 8))
        f = KernelExpansion(rng.uniform(-4, 4, size=(J, 2)), rng.normal(size=J), k)
        post = posterior(tr.points, f(tr.points), k, mu)
        mmd = np.sqrt(mmd_squared(bq_rule(tr.points, k, mu), k, mu))
        worst = max(worst, abs(f.integral(mu) - post.mean) - mmd * f.rkhs_norm())
    ok = worst <= 1e-10
    assert report(13, ok, f"max |error| - mmd * norm = {worst:.2e} on 50 functions (<= 1e-10)")
