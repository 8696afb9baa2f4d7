"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also collected into the terminal summary.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from vectorgas.coulomb_gas import default_init, mcmc_run
from vectorgas.energy import rate_line, rate_sphere
from vectorgas.equilibrium import build_problem, solution_distance, solve
from vectorgas.fields import ModelParams
from vectorgas.matrix_model import sample_spectra
from vectorgas.measures import EmpiricalMeasure, GridMeasure, bl_distance, sigma_mass, sigma_n_mass, stereo_push
from vectorgas.mop_oracle import nikishin_check, pooled_marginal_cdf, ratio_table
from vectorgas.special import bessel_zero, clear_zero_cache, reciprocal_square_zero_sum

RESULTS = []


def record(number, title, ok, detail, elapsed, limit):
    ok = bool(ok) and elapsed < limit
    line = f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail} ({elapsed:.2f}s / {limit:.0f}s)"
    RESULTS.append(line)
    print(line)
    return ok


def test_01_zero_sum_identity():
    clear_zero_cache()
    t0 = time.perf_counter()
    errs = {}
    for alpha in (0.0, 1.0, 2.5):
        total, _, _ = reciprocal_square_zero_sum(alpha, 10_000)
        errs[alpha] = abs(total - 1.0 / (4.0 * (1.0 + alpha)))
    dt = time.perf_counter() - t0
    worst = max(errs.values())
    assert record(1, "zero-sum identity", worst <= 1e-6, f"max error {worst:.2e} <= 1e-6", dt, 10)


def test_02_mcmahon_spacing():
    clear_zero_cache()
    t0 = time.perf_counter()
    gaps = {alpha: abs(bessel_zero(alpha, 1001) - bessel_zero(alpha, 1000) - math.pi) for alpha in (0.0, 1.0)}
    dt = time.perf_counter() - t0
    worst = max(gaps.values())
    assert record(2, "McMahon spacing", worst <= 1e-4, f"max |gap - pi| {worst:.2e} <= 1e-4", dt, 5)


def test_03_nikishin_identity():
    clear_zero_cache()
    t0 = time.perf_counter()
    x = np.geomspace(0.01, 10.0, 100)
    err, terms = nikishin_check(ModelParams(1.0, 0.0, 10), x)
    dt = time.perf_counter() - t0
    assert record(
        3, "Nikishin identity", err.max() <= 1e-6, f"max rel error {err.max():.2e} <= 1e-6 (K={terms})", dt, 10
    )


def test_04_gas_representation():
    t0 = time.perf_counter()
    _, ratios, cv = ratio_table(ModelParams(1.0, 0.0, 2), points=200, K=4096, seed=0)
    dt = time.perf_counter() - t0
    assert record(4, "gas/MOP proportionality", cv <= 1e-3 and np.all(ratios > 0), f"CV {cv:.2e} <= 1e-3", dt, 30)


def test_05_constraint_convergence():
    clear_zero_cache()
    t0 = time.perf_counter()
    gap = abs(sigma_n_mass(ModelParams(1.0, 0.0, 10_000), -1.0) - sigma_mass(1.0, -1.0))
    dt = time.perf_counter() - t0
    assert record(5, "constraint convergence", gap <= 0.01, f"|sigma_N - sigma| {gap:.2e} <= 0.01", dt, 5)


def test_06_matrix_moment():
    t0 = time.perf_counter()
    p = ModelParams(1.0, 0, 100)
    ev, _ = sample_spectra(p, 200, seed=20240601)
    tr = ev.sum(axis=1) / p.N
    se = tr.std(ddof=1) / math.sqrt(tr.size)
    z = abs(tr.mean() - 2.0) / se
    dt = time.perf_counter() - t0
    assert record(6, "matrix first moment", z <= 3, f"mean {tr.mean():.5f}, |z| {z:.2f} <= 3", dt, 60)


def test_07_sampler_vs_oracle():
    t0 = time.perf_counter()
    p = ModelParams(1.0, 0.0, 2)
    res = mcmc_run(default_init(p, 4096), steps=500_000, burnin=20_000, seed=7, thin=5)
    grid, cdf = pooled_marginal_cdf(p)
    samples = res.x.ravel()
    ks = stats.kstest(samples, lambda v: np.interp(v, grid, cdf)).statistic
    dt = time.perf_counter() - t0
    ok = ks <= 0.02 and res.x.shape[0] >= 100_000
    detail = f"KS {ks:.4f} <= 0.02 over {res.x.shape[0]} samples, acceptance {res.stats.acceptance_x:.2f}"
    assert record(7, "sampler vs oracle", ok, detail, dt, 120)


@pytest.fixture(scope="module")
def solutions():
    t0 = time.perf_counter()
    tol = 1e-9
    out = {}
    for a in (0.5, 1.0, 4.0):
        prob = build_problem(a, 400, 400)
        out[a] = (solve(prob, tol=tol, start="uniform"), solve(prob, tol=tol, start="edge"))
    return out, tol, time.perf_counter() - t0


def test_08_equilibrium_solver(solutions):
    sols, tol, dt = solutions
    ok = True
    parts = []
    for a, (s1, s2) in sols.items():
        prob = s1.problem
        mu, nu = s1.mu_star.weights, s1.nu_star.weights
        mass_ok = abs(math.fsum(mu) - 1) <= 1e-12 and abs(math.fsum(nu) - 0.5) <= 1e-12
        caps_ok = bool(np.all(nu <= prob.caps))
        kkt = max(s1.el_mu_residual, s1.el_nu_residual)
        kkt_ok = kkt <= 1e-3 * prob.field_scale
        m1 = s1.mu_star.moment(1)
        mom_ok = abs(m1 - (a + 1)) <= 0.02 * (a + 1)
        d = solution_distance(s1, s2)
        uniq_ok = d <= 2 * tol * prob.field_scale
        ok &= mass_ok and caps_ok and kkt_ok and mom_ok and uniq_ok and s1.converged and s2.converged
        parts.append(f"a={a}: m1 {m1:.4f} ({(m1 / (a + 1) - 1) * 100:+.2f}%), KKT {kkt:.1e}, BL(two starts) {d:.1e}")
    assert record(8, "equilibrium solver", ok, "; ".join(parts), dt, 300)


def test_09_matrix_vs_equilibrium(solutions):
    t0 = time.perf_counter()
    sols, _, _ = solutions
    mu_star = sols[1.0][0].mu_star
    ev, _ = sample_spectra(ModelParams(1.0, 0, 200), 20, seed=9)
    avg = EmpiricalMeasure(ev.ravel(), 1.0 / ev.size)
    d = bl_distance(stereo_push(avg), stereo_push(mu_star))
    dt = time.perf_counter() - t0
    assert record(9, "spectrum vs equilibrium measure", d <= 0.05, f"BL {d:.4f} <= 0.05", dt, 300)


def _random_grid(rng, lo, hi, n, mass):
    edges = np.sort(rng.uniform(lo, hi, n + 1))
    w = rng.uniform(0.1, 1.0, n)
    return GridMeasure(edges, w * mass / w.sum(), mass)


def test_10_rate_consistency():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_rel = 0.0
    for _ in range(50):
        mu = _random_grid(rng, 0.0, rng.uniform(0.5, 20), int(rng.integers(2, 30)), 1.0)
        nu = _random_grid(rng, -rng.uniform(0.5, 20), 0.0, int(rng.integers(2, 30)), 0.5)
        a = rng.uniform(0.1, 4.0)
        line = rate_line(mu, nu, a).total
        sph = rate_sphere(stereo_push(mu), stereo_push(nu), a).total
        worst_rel = max(worst_rel, abs(sph - line) / abs(line))
    worst_gap = -math.inf
    mu_edges, nu_edges = np.linspace(0.0, 8.0, 21), np.linspace(-8.0, 0.0, 21)
    for _ in range(100):
        p = [rng.dirichlet(np.ones(20)) for _ in range(4)]
        t = rng.uniform(0.05, 0.95)

        def J(m, n):
            return rate_line(GridMeasure(mu_edges, m), GridMeasure(nu_edges, 0.5 * n), 1.0).total

        mid = J(t * p[0] + (1 - t) * p[1], t * p[2] + (1 - t) * p[3])
        worst_gap = max(worst_gap, mid - (t * J(p[0], p[2]) + (1 - t) * J(p[1], p[3])))
    dt = time.perf_counter() - t0
    ok = worst_rel <= 1e-6 and worst_gap <= 1e-10
    detail = f"max line/sphere rel diff {worst_rel:.1e} <= 1e-6; max convexity gap {worst_gap:.1e} <= 1e-10"
    assert record(10, "rate functional consistency", ok, detail, dt, 60)
