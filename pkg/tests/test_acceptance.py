"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line verdict that conftest prints in the terminal
summary. Timed sections cover solver work only, not oracle computation.
"""

import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE
from oracles import (
    dense_rho,
    eager_sgd,
    lasso_objective,
    projected_gradient_lasso,
    soft_threshold,
)
from shotgun.driver import BenchConfig, PathConfig, benchmark_speedup, solve_path
from shotgun.matrix_io import DesignMatrix, load_dataset, normalize_columns
from shotgun.objective import (
    Problem,
    SolverState,
    assumption2_gap,
    duplicated_objective,
    kkt_violation,
    objective_at,
    objective_value,
    to_duplicated,
)
from shotgun.sgd_baseline import SgdConfig, sgd_run, sgd_solve
from shotgun.solver_par import (
    ParConfig,
    interference_decomposition,
    lemma4_empirical_check,
    shotgun_round_sync,
    solve_shotgun,
    verify_commit_log,
)
from shotgun.solver_seq import SeqConfig, cdn_update, scd_suboptimality_bound, scd_update, solve_sequential
from shotgun.spectral import power_iteration, predicted_pstar
from shotgun.synthetic import lasso_instance, logistic_instance, random_design, replicated_lasso

FIX = Path(__file__).parent / "fixtures"

pytestmark = pytest.mark.acceptance


def check(num, title, ok, detail):
    ACCEPTANCE[num] = (title, bool(ok), detail)
    assert ok, f"criterion {num} ({title}): {detail}"


class Clock:
    def __init__(self):
        self.total = 0.0

    def __enter__(self):
        self.t = time.perf_counter()

    def __exit__(self, *exc):
        self.total += time.perf_counter() - self.t


def test_01_lasso_correctness(warm):
    rng = np.random.default_rng(2024)
    clock = Clock()
    worst_rel = worst_kkt = 0.0
    for i in range(20):
        n, d = int(rng.integers(20, 201)), int(rng.integers(10, 201))
        p = lasso_instance(n, d, density=float(rng.choice([1.0, 0.3])),
                           lam_ratio=float(rng.uniform(0.02, 0.5)), seed=100 + i)
        with clock:
            res = solve_sequential(p, SeqConfig(tol=1e-7, max_epochs=100_000, seed=i))
        a = p.matrix.toarray()
        f_oracle = lasso_objective(a, p.y, p.lam, projected_gradient_lasso(a, p.y, p.lam))
        worst_rel = max(worst_rel, abs(res.objective - f_oracle) / abs(f_oracle))
        worst_kkt = max(worst_kkt, float(kkt_violation(p, res.x).max()))
    ok = worst_rel <= 1e-6 and worst_kkt <= 1e-4 and clock.total < 10
    check(1, "Lasso correctness", ok,
          f"max rel err {worst_rel:.1e}, max KKT {worst_kkt:.1e}, {clock.total:.2f}s")


def test_02_orthogonal_closed_form(warm):
    m, y = load_dataset(FIX / "identity.csv", "csv")
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(rng.standard_normal((40, 25)))
    yq = 2 * rng.standard_normal(40)
    cases = [(Problem(m, y, "squared", 1.0), y), (Problem(DesignMatrix.from_dense(q), yq, "squared", 0.5), q.T @ yq)]
    clock = Clock()
    err = 0.0
    for p, proj in cases:
        with clock:
            res = solve_sequential(p, SeqConfig(tol=1e-12, max_epochs=10_000))
        err = max(err, float(np.abs(res.x - soft_threshold(proj, p.lam)).max()))
    check(2, "orthogonal closed form", err <= 1e-8 and clock.total < 1,
          f"max abs err {err:.1e}, {clock.total:.3f}s")


def test_03_assumption2(warm):
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    worst_sq, worst_log = 0.0, np.inf
    for loss in ("squared", "logistic"):
        problems = []
        for s in range(10):
            a = random_design(10, 20, seed=s)
            y = rng.standard_normal(10) if loss == "squared" else np.where(rng.random(10) < 0.5, -1.0, 1.0)
            problems.append(Problem(a, y, loss, float(rng.uniform(0, 1))))
        for t in range(1000):
            p = problems[t % 10]
            scale = 10.0 ** rng.uniform(-2, 1)
            xhat = scale * np.abs(rng.standard_normal(2 * p.d)) * (rng.random(2 * p.d) < 0.7)
            dx = np.maximum(scale * rng.standard_normal(2 * p.d), -xhat)
            gap = assumption2_gap(p, xhat, dx)
            if loss == "squared":
                worst_sq = max(worst_sq, abs(gap))
            else:
                worst_log = min(worst_log, gap)
    elapsed = time.perf_counter() - t0
    ok = worst_sq <= 1e-12 and worst_log >= -1e-12 and elapsed < 5
    check(3, "curvature bound", ok,
          f"squared max |gap| {worst_sq:.1e}, logistic min gap {worst_log:.1e}, {elapsed:.2f}s")


def test_04_interference_decomposition(warm):
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    violations = rounds = 0
    for s in range(10):
        p = lasso_instance(40, 80, density=0.5, lam_ratio=float(rng.uniform(0.05, 0.5)), seed=200 + s)
        x = np.zeros(p.d)
        for r in range(100):
            pp = int(rng.choice([2, 4, 8, 16]))
            state = SolverState.from_weights(p, x)
            up = shotgun_round_sync(p, state, ParConfig(p=pp), rng)
            progress, interference = interference_decomposition(p, x, up)
            xhat = to_duplicated(x)
            # the collective update before the zero clamp; the duplicated
            # objective is linear in the penalty so it is defined there too
            change = duplicated_objective(p, xhat + up.collective) - duplicated_objective(p, xhat)
            f = duplicated_objective(p, xhat)
            violations += change > progress + interference + 1e-12 * max(1.0, f)
            rounds += 1
            x = state.x.copy()
    elapsed = time.perf_counter() - t0
    check(4, "interference decomposition", violations == 0 and elapsed < 10,
          f"{violations} violations in {rounds} rounds, {elapsed:.2f}s")


def test_05_expected_round_change(warm):
    t0 = time.perf_counter()
    lines, ok = [], True
    for s in range(5):
        p = lasso_instance(60, 40, lam_ratio=0.1, seed=300 + s)
        rho = dense_rho(p.matrix.toarray())
        x = np.random.default_rng(s).standard_normal(p.d) * 0.2 * (np.random.default_rng(s + 9).random(p.d) < 0.5)
        for pp in (1, 2, 4):
            lhs, rhs, se = lemma4_empirical_check(p, x, pp, 10_000, np.random.default_rng(1000 * s + pp), rho=rho)
            good = lhs <= rhs + 3 * se and (pp != 1 or abs(lhs - rhs) <= 3 * se)
            ok &= good
            lines.append((lhs - rhs) / se)
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60
    check(5, "expected round change", ok,
          f"15 cases, max (LHS-RHS)/se {max(lines):+.2f}, {elapsed:.1f}s")


def test_06_spectral(warm):
    rng = np.random.default_rng(6)
    t0 = time.perf_counter()
    worst = 0.0
    above = False
    for s in range(20):
        n, d = int(rng.integers(5, 120)), int(rng.integers(1, 101))
        m, _ = normalize_columns(random_design(n, d, density=float(rng.uniform(0.2, 1.0)), seed=400 + s))
        est = power_iteration(m, tol=1e-12, max_iters=100_000, seed=s)
        true = dense_rho(m.toarray())
        worst = max(worst, abs(est.rho - true) / true)
        above |= est.rho > true * (1 + 1e-6)
    elapsed = time.perf_counter() - t0
    pstar = predicted_pstar(4096, 2047.8)
    ok = worst <= 1e-6 and not above and pstar == 3 and elapsed < 5
    check(6, "spectral estimate", ok,
          f"max rel err {worst:.1e}, P*(4096, 2047.8) = {pstar}, {elapsed:.2f}s")


def test_07_speedup(warm):
    p = lasso_instance(1024, 512, density=0.1, lam_ratio=0.1, seed=1)
    t0 = time.perf_counter()
    report = benchmark_speedup(p, [1, 2, 4, 8, 16], BenchConfig(seeds=10))
    elapsed = time.perf_counter() - t0
    ratios = {r.p: r.iteration_ratio for r in report.rows if r.p > 1}
    ok = all(r is not None and 0.67 <= r <= 1.5 for r in ratios.values()) and elapsed < 120
    shown = ", ".join(f"P={k}: {v:.3f}" if v is not None else f"P={k}: none" for k, v in ratios.items())
    check(7, "speedup in iterations", ok,
          f"rho {report.spectral['rho']:.2f}, {shown}, {elapsed:.1f}s")


def test_08_divergence_past_pstar(warm):
    p = replicated_lasso(seed=0)
    t0 = time.perf_counter()
    est = power_iteration(p.matrix, tol=1e-8, max_iters=10_000)
    diverged = sum(solve_shotgun(p, ParConfig(p=64, seed=s)).diverged for s in range(10))
    converged = sum(solve_shotgun(p, ParConfig(p=1, seed=s, tol=1e-6, max_epochs=5000)).converged
                    for s in range(10))
    elapsed = time.perf_counter() - t0
    ok = p.d == 256 and est.pstar <= 2 and diverged >= 8 and converged == 10 and elapsed < 60
    check(8, "divergence past P*", ok,
          f"rho {est.rho:.1f}, P* {est.pstar}, P=64 diverged {diverged}/10, "
          f"P=1 converged {converged}/10, {elapsed:.1f}s")


def test_09_rate_envelope(warm):
    p = lasso_instance(50, 100, lam_ratio=0.1, seed=9)
    t0 = time.perf_counter()
    ref = solve_sequential(p, SeqConfig(tol=1e-12, max_epochs=200_000))
    fstar = ref.objective
    f0 = objective_at(p, np.zeros(p.d))
    horizon = 40 * 2 * p.d
    curves = []
    for s in range(20):
        state = SolverState.zeros(p)
        rng = np.random.default_rng(s)
        curve = [objective_value(p, state)]
        for j in rng.integers(0, 2 * p.d, size=horizon):
            scd_update(p, state, int(j))
            curve.append(objective_value(p, state))
        curves.append(curve)
    elapsed = time.perf_counter() - t0
    mean_gap = np.mean(curves, axis=0) - fstar
    t = np.arange(horizon + 1)
    bound = scd_suboptimality_bound(p.d, p.beta, float(ref.x @ ref.x), f0, t)
    worst = float(np.max(mean_gap / bound))
    check(9, "rate envelope", worst < 1 and elapsed < 30,
          f"{horizon + 1} logged T, max mean gap / bound {worst:.3f}, {elapsed:.1f}s")


def test_10_cdn(warm):
    t0 = time.perf_counter()
    worst_rel = 0.0
    rise = 0.0
    for s in range(10):
        p = logistic_instance(80, 60, density=0.4, lam_ratio=0.1, seed=500 + s)
        cdn = solve_sequential(p, SeqConfig(variant="cdn", tol=1e-9, max_epochs=20_000, seed=s, trace_every=1))
        fix = solve_sequential(p, SeqConfig(variant="fixed", tol=1e-9, max_epochs=100_000, seed=s))
        worst_rel = max(worst_rel, abs(cdn.objective - fix.objective) / fix.objective)
        f = cdn.trace_array()[:, 2]
        # evaluated from a cached ax summed over thousands of steps, so a
        # rounded value can sit a few ulps above its predecessor
        rise = max(rise, float(np.max(np.diff(f) / f[:-1])))
    rng = np.random.default_rng(10)
    exact = compared = 0
    for s in range(10):
        p = lasso_instance(30, 20, lam_ratio=float(rng.uniform(0.05, 0.5)), seed=600 + s)
        for _ in range(100):
            x = rng.standard_normal(p.d) * (rng.random(p.d) < 0.5)
            k = int(rng.integers(p.d))
            s_cdn = SolverState.from_weights(p, x)
            cdn_update(p, s_cdn, k, SeqConfig(variant="cdn"))
            s_fix = SolverState.from_weights(p, x)
            first = p.d + k if x[k] >= 0 else k
            scd_update(p, s_fix, first)
            scd_update(p, s_fix, k if first >= p.d else p.d + k)
            if x[k] * s_fix.x[k] >= 0:  # no sign change: the two paths are the same arithmetic
                compared += 1
                exact += s_cdn.x[k] == s_fix.x[k]
    elapsed = time.perf_counter() - t0
    monotone = rise <= 1e-12
    ok = worst_rel <= 1e-5 and monotone and exact == compared and elapsed < 30
    check(10, "CDN", ok,
          f"max rel gap {worst_rel:.1e}, largest step rise {max(rise, 0.0):.1e} rel, squared steps equal {exact}/{compared}, "
          f"{elapsed:.1f}s")


def test_11_sgd(warm):
    t0 = time.perf_counter()
    worst = 0.0
    for s in range(20):
        p = logistic_instance(40, 30, density=0.15, lam_ratio=0.1, seed=700 + s)
        rate = 10.0 ** np.random.default_rng(s).uniform(-3, -1.5)
        x, _ = sgd_run(p, rate, 3, np.random.default_rng(s), lazy=True)
        order_rng = np.random.default_rng(s)
        orders = [order_rng.permutation(p.n) for _ in range(3)]
        want = eager_sgd(p.matrix.toarray(), p.y, p.lam, rate, orders, float(p.n))
        worst = max(worst, float(np.abs(x - want).max()))
    big = logistic_instance(1000, 200, density=0.1, lam_ratio=0.05, seed=11)
    sgd = sgd_solve(big, SgdConfig(seed=0))
    cdn = solve_sequential(big, SeqConfig(variant="cdn", tol=1e-8, max_epochs=10_000))
    gap = (sgd.objective - cdn.objective) / cdn.objective
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and gap <= 0.02 and elapsed < 120
    check(11, "SGD lazy/eager and grid", ok,
          f"max weight diff {worst:.1e}, SGD vs CDN {100 * gap:.2f}%, {elapsed:.1f}s")


def test_12_path(warm):
    t0 = time.perf_counter()
    worst = 0.0
    for s in range(5):
        p = lasso_instance(100, 150, density=0.5, lam_ratio=0.05, seed=800 + s)
        cfg = SeqConfig(tol=1e-9, max_epochs=100_000, seed=s)
        path = solve_path(p, PathConfig(p.lam, 10), cfg)
        cold = solve_sequential(p, cfg)
        assert len(path) == 10 and path[-1].meta["lambda"] == p.lam
        worst = max(worst, abs(path[-1].objective - cold.objective) / cold.objective)
    elapsed = time.perf_counter() - t0
    check(12, "pathwise consistency", worst <= 1e-6 and elapsed < 30,
          f"max rel diff {worst:.1e}, {elapsed:.1f}s")


def test_13_async_integrity(warm):
    t0 = time.perf_counter()
    p = lasso_instance(200, 400, density=0.1, lam_ratio=0.05, seed=13)
    x0 = np.random.default_rng(0).standard_normal(p.d) * 0.1 * (np.random.default_rng(1).random(p.d) < 0.3)
    res = solve_shotgun(p, ParConfig(p=8, mode="async", seed=0, max_updates=10_000, tol=1e-14,
                                     log_commits=True), x0=x0)
    log = res.meta["commit_log"]
    k, old, new = log.arrays()
    sums = [Fraction(0)] * p.d
    for kk, a, b in zip(k.tolist(), old.tolist(), new.tolist()):
        sums[kk] += Fraction(b) - Fraction(a)
    exact = all(Fraction(float(x0[j])) + sums[j] == Fraction(float(res.x[j])) for j in range(p.d))
    trail = verify_commit_log(x0, res.x, log)
    ax_true = p.matrix.matvec(res.x)
    ax_rel = float(np.linalg.norm(res.meta["ax"] - ax_true) / np.linalg.norm(ax_true))

    q = lasso_instance(60, 120, lam_ratio=0.1, seed=14)
    seq = solve_sequential(q, SeqConfig(tol=1e-8, max_epochs=10_000))
    one = solve_shotgun(q, ParConfig(p=1, mode="async", tol=1e-8, max_epochs=10_000))
    rel = abs(one.objective - seq.objective) / seq.objective
    elapsed = time.perf_counter() - t0
    ok = res.updates >= 10_000 and exact and trail and ax_rel <= 1e-6 and rel <= 1e-6 and elapsed < 60
    check(13, "async integrity", ok,
          f"{res.updates} updates, {len(log)} commits, exact sum {exact}, trail {trail}, "
          f"ax rel {ax_rel:.1e}, P=1 vs sequential {rel:.1e}, {elapsed:.1f}s")
