"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines
as they complete.  Every tolerance is fixed here; nothing is calibrated at
run time.
"""

import itertools
import math
import time

import numpy as np

from varalloc import (
    ExperimentConfig,
    VarianceProfile,
    bound_value,
    conditional_mse,
    objective_rp,
    optimal_allocation,
    radius_gaussian,
    radius_gsg,
    radius_ssg,
    run_experiment,
    run_selftest,
    slope_estimate,
    summarize,
)
from varalloc.harness import oracle_best_allocation

INF = math.inf


def _report(criterion: str, ok: bool, detail: str, elapsed: float):
    status = "PASS" if ok else "FAIL"
    print(f"\n[{criterion}] {status} ({detail}) in {elapsed:.1f}s")


def test_criterion_1_allocation_matches_exhaustive_oracle():
    start = time.perf_counter()
    worst = 0.0
    for p in (1.0, 2.0, INF):
        for variances in itertools.product((1.0, 2.0, 4.0), repeat=3):
            plan = optimal_allocation(VarianceProfile(variances), p, 30)
            best = oracle_best_allocation(variances, p, 30)
            value_plan = objective_rp(plan.counts, variances, p)
            value_best = objective_rp(best, variances, p)
            worst = max(worst, (value_plan - value_best) / value_best)
    elapsed = time.perf_counter() - start
    ok = worst <= 0.05 and elapsed < 10.0
    _report("criterion 1: rounded allocation vs oracle", ok,
            f"worst gap {worst:.2%}, limit 5%", elapsed)
    assert worst <= 0.05
    assert elapsed < 10.0


def test_criterion_2_variance_radius_coverage():
    start = time.perf_counter()
    reps, sigma_sq = 10_000, 2.0
    rng = np.random.default_rng(909)
    worst_excess = -1.0
    for n in (10, 50, 200):
        draws = rng.normal(0.3, math.sqrt(sigma_sq), (reps, n))
        estimates = draws.var(axis=1, ddof=1)
        for delta in (0.1, 0.01):
            allowance = delta + 3.0 * math.sqrt(delta * (1 - delta) / reps)
            for radius in (radius_gsg, radius_ssg, radius_gaussian):
                r = radius(n, delta, sigma_sq)
                upper_rate = float(np.mean(estimates - sigma_sq > r.eps_plus))
                lower_rate = float(np.mean(sigma_sq - estimates > r.eps_minus))
                worst_excess = max(
                    worst_excess, upper_rate - allowance, lower_rate - allowance
                )
    elapsed = time.perf_counter() - start
    ok = worst_excess <= 0.0 and elapsed < 30.0
    _report("criterion 2: per-tail radius coverage", ok,
            f"worst excess over delta+3se: {worst_excess:+.4f}", elapsed)
    assert worst_excess <= 0.0
    assert elapsed < 30.0


def test_criterion_3_conditional_mse_monte_carlo():
    start = time.perf_counter()
    rng = np.random.default_rng(1234)
    reps = 10**5
    worst_sigmas = 0.0
    for instance in range(20):
        d = int(rng.integers(1, 5))
        n = int(rng.integers(d + 1, 21))
        contexts = rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), (n, d))
        beta = rng.uniform(-2.0, 2.0, d)
        sigma_sq = float(rng.uniform(0.5, 4.0))
        gamma = 0.0 if instance % 2 == 0 else 1.0 / n
        gram = contexts.T @ contexts
        if gamma == 0.0 and np.linalg.eigvalsh(gram).min() < 1e-9:
            gamma = 1.0 / n
        closed = conditional_mse(gram, beta, sigma_sq, gamma)

        v = gamma * np.eye(d) + gram
        noise = rng.normal(0.0, math.sqrt(sigma_sq), (reps, n))
        rhs = contexts.T @ noise.T + (gram @ beta)[:, None]
        errors = np.linalg.solve(v, rhs).T - beta
        squared = (errors**2).sum(axis=1)
        se = squared.std(ddof=1) / math.sqrt(reps)
        worst_sigmas = max(worst_sigmas, abs(squared.mean() - closed) / se)
    elapsed = time.perf_counter() - start
    ok = worst_sigmas <= 3.0 and elapsed < 60.0
    _report("criterion 3: closed-form MSE vs Monte Carlo", ok,
            f"worst |z| {worst_sigmas:.2f} of 3.0 allowed", elapsed)
    assert worst_sigmas <= 3.0
    assert elapsed < 60.0


def test_criterion_4_nonadaptive_rate_reproduction():
    start = time.perf_counter()
    base = dict(
        name="rate-k4",
        policy="nonadaptive",
        horizons=(2000, 5000, 10000, 20000, 50000, 100000),
        trials=100,
        seed=424242,
        regime="gsg",
        variances=(1.0, 1.5, 2.0, 2.5),
        means="uniform -1 1",
        lower_bound=1.0,
        proxy=2.5,
        knows_lower_bound=True,
    )
    rows_inf = run_experiment(ExperimentConfig(p=INF, **base))
    slope_inf = slope_estimate(rows_inf)
    rows_one = run_experiment(ExperimentConfig(p=1.0, **base))
    slope_one = slope_estimate(rows_one)

    means = [agg["mean_regret"] for agg in summarize(rows_inf)]
    ranks = np.argsort(np.argsort(means))
    spearman = float(np.corrcoef(np.arange(len(means)), ranks)[0, 1])

    elapsed = time.perf_counter() - start
    ok = (
        -1.8 < slope_inf < -1.2
        and -2.4 < slope_one < -1.6
        and spearman < -0.9
        and elapsed < 600.0
    )
    _report("criterion 4: worst-group and p=1 rate slopes", ok,
            f"slope(p=inf) {slope_inf:.2f} in (-1.8,-1.2); "
            f"slope(p=1) {slope_one:.2f} in (-2.4,-1.6); spearman {spearman:.2f}",
            elapsed)
    assert -1.8 < slope_inf < -1.2
    assert -2.4 < slope_one < -1.6
    assert spearman < -0.9
    assert elapsed < 600.0


def test_criterion_5_adaptive_regret_below_bound():
    start = time.perf_counter()
    results = []
    for sigma1_sq in (5.0, 20.0, 50.0, 100.0):
        cfg = ExperimentConfig(
            name="two-arm-ssg",
            policy="adaptive",
            horizons=(1000,),
            trials=100,
            seed=515151,
            p=INF,
            regime="ssg",
            families=("gaussian", "rademacher"),
            variances=(sigma1_sq, 1.0),
            means=(0.0, 0.0),
        )
        mean_regret = summarize(run_experiment(cfg))[0]["mean_regret"]
        bound = bound_value(
            "t7_ssg_adaptive_inf", VarianceProfile((sigma1_sq, 1.0)), 2, 1000, INF
        )
        results.append((sigma1_sq, mean_regret, bound))
    elapsed = time.perf_counter() - start
    ok = all(reg <= b for _, reg, b in results) and elapsed < 300.0
    detail = "; ".join(f"s1^2={s:g}: {r:.4f} <= {b:.4f}" for s, r, b in results)
    _report("criterion 5: empirical regret below adaptive bound", ok, detail, elapsed)
    for _, reg, b in results:
        assert reg <= b
    assert elapsed < 300.0


def test_criterion_6_contextual_rate_reproduction():
    start = time.perf_counter()
    slopes = {}
    # the smallest horizons must leave the initial phase below the optimal
    # per-arm counts, so the K=10 grid starts one step later (still a decade)
    grids = {5: (2000, 5000, 10000, 20000), 10: (4000, 10000, 20000, 40000)}
    for k, horizons in grids.items():
        cfg = ExperimentConfig(
            name=f"contextual-k{k}",
            policy="contextual",
            horizons=horizons,
            trials=100,
            seed=616161,
            p=1.0,
            regime="ssg",
            num_arms=k,
            dim=4,
            lambda_min=1.0,
            beta_low=-2.0,
            beta_high=2.0,
            noise_variances="uniform 1 4",
            lower_bound=1.0,
            proxy=4.0,
            knows_lower_bound=True,
        )
        slopes[k] = slope_estimate(run_experiment(cfg))
    elapsed = time.perf_counter() - start
    ok = all(-2.4 < s < -1.6 for s in slopes.values()) and elapsed < 900.0
    detail = "; ".join(f"K={k}: slope {s:.2f}" for k, s in slopes.items())
    _report("criterion 6: contextual rate slopes", ok, detail + " in (-2.4,-1.6)", elapsed)
    for s in slopes.values():
        assert -2.4 < s < -1.6
    assert elapsed < 900.0


def test_criterion_7_structural_invariants():
    start = time.perf_counter()
    failures = run_selftest(1000, seed=2024)
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 120.0
    _report("criterion 7: structural invariant battery", ok,
            f"{len(failures)} failures over 1000 configs", elapsed)
    assert failures == []
    assert elapsed < 120.0
