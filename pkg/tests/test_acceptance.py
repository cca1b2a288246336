"""Acceptance suite: one test per release criterion, at fixed tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
criterion.  Every tolerance is pinned here; nothing is deferred to later
calibration.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

import robustpricing as rp
from robustpricing.seeding import derive_seed, derived_rng

from conftest import random_instance

VALUE_ATOL = 1e-9
PRICE_CHANGE_MARKS = np.array([0, 0, 0, 0, 0, 1, 1, 1, 1.0])


def report(number: int, name: str, ok: bool, detail: str = "") -> None:
    print(f"\nACCEPTANCE {number:02d} {name}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"criterion {number} ({name}) failed: {detail}"


def synthetic_pipeline(dataset_id, seed, n_train, n_test, alpha, kappa,
                       n_bootstrap=20, price_change=None):
    """The full data -> model -> uncertainty -> instance path used by the
    solver-quality and revenue criteria."""
    train_gen = rp.make_generator(dataset_id, seed=derive_seed(seed, "generator", "train"))
    test_gen = rp.make_generator(dataset_id, seed=derive_seed(seed, "generator", "test"))
    train_data = rp.generate_dataset(train_gen, n_train, derived_rng(seed, "data", "train"))
    test_data = rp.generate_dataset(test_gen, n_test, derived_rng(seed, "data", "test"))
    config = rp.TrainConfig(seed=derive_seed(seed, "split"))
    model = rp.train(train_data, config)
    grid = rp.PriceGrid(np.tile(rp.candidate_prices(train_data), (n_test, 1)))
    qhat = rp.predict_grid(model, test_data.covariates, grid)
    estimate = rp.estimate_uncertainty(
        train_data, model, test_data.covariates, grid,
        rp.BootstrapConfig(n_bootstrap=n_bootstrap, kappa=kappa,
                           seed=derive_seed(seed, "bootstrap"), train_config=config),
    )
    constraints = ()
    if price_change is not None:
        marks = np.tile(PRICE_CHANGE_MARKS, (n_test, 1))
        constraints = (rp.LinearConstraint(marks, price_change * n_test),)
    instance = rp.PricingInstance(
        grid, qhat, estimate.delta,
        rp.RobustBudget.from_alpha(alpha, n_test, kappa), constraints,
    )
    return instance, model, test_gen, test_data, grid


def test_01_oracle_equivalence():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst_gap = 0.0
    for trial in range(200):
        n = int(rng.integers(1, 7))
        m = int(rng.integers(1, 4))
        gamma = (0.0, 1.0, 2.0, 2.5)[trial % 4]
        inst = random_instance(rng, n, m, gamma, with_constraint=trial % 2 == 0)
        exact = rp.solve_exact(inst)
        oracle = rp.brute_force_oracle(inst)
        worst_gap = max(worst_gap, abs(exact.worst_case_value - oracle.worst_case_value))
    elapsed = time.perf_counter() - start
    ok = worst_gap <= VALUE_ATOL and elapsed < 30.0
    report(1, "oracle equivalence", ok,
           f"max |exact - brute force| = {worst_gap:.2e} over 200 instances in {elapsed:.1f}s")


def test_02_strong_duality():
    rng = np.random.default_rng(202)
    worst_gap = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 10))
        inst = random_instance(rng, n, int(rng.integers(1, 4)), float(rng.uniform(0, n + 2)))
        choice = rng.integers(0, inst.n_candidates, size=n)
        assignment = rp.PriceAssignment(choice)
        worst, _ = rp.worst_case_objective(assignment, inst)
        costs = inst.degradation_terms()[np.arange(n), choice]
        best_dual = max(
            rp.dual_value(assignment, inst, float(nu))[0]
            for nu in np.concatenate([[0.0], costs])
        )
        worst_gap = max(worst_gap, abs(best_dual - worst))
    ok = worst_gap <= VALUE_ATOL
    report(2, "strong duality", ok, f"max |max-dual - worst case| = {worst_gap:.2e} over 1000 pairs")


def test_03_zero_budget_reduction():
    rng = np.random.default_rng(303)
    mismatches = 0
    for _ in range(100):
        n = int(rng.integers(1, 9))
        inst = random_instance(rng, n, int(rng.integers(1, 5)), 0.0)
        nominal = rp.nominal_assignment(inst)
        exact = rp.solve_exact(inst)
        heuristic = rp.heuristic_solve(inst)
        if not (
            np.array_equal(exact.assignment.choice, nominal.choice)
            and np.array_equal(heuristic.assignment.choice, nominal.choice)
        ):
            mismatches += 1
    report(3, "zero-budget reduction", mismatches == 0,
           f"{100 - mismatches}/100 instances assignment-identical to the nominal argmax")


def test_04_monotonicity_suite():
    rng = np.random.default_rng(404)
    violations = 0
    for _ in range(100):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(2, 4))
        prices = rng.uniform(1, 10, size=(n, m))
        qhat = rng.uniform(0.05, 0.95, size=(n, m))
        stddev = rng.uniform(0, 0.3, size=(n, m))
        previous = np.inf
        for cap in np.arange(0.0, n + 0.5, 0.5):
            inst = rp.PricingInstance(
                rp.PriceGrid(prices), rp.PredictionMatrix(qhat),
                rp.UncertaintyMatrix(np.minimum(stddev, qhat)), rp.RobustBudget(float(cap)),
            )
            value = rp.solve_exact(inst).worst_case_value
            if value > previous + VALUE_ATOL:
                violations += 1
            previous = value
        previous = np.inf
        for kappa in (0.0, 0.5, 1.0, 2.0):
            inst = rp.PricingInstance(
                rp.PriceGrid(prices), rp.PredictionMatrix(qhat),
                rp.UncertaintyMatrix(np.minimum(kappa * stddev, qhat)),
                rp.RobustBudget(n / 2.0),
            )
            value = rp.solve_exact(inst).worst_case_value
            if value > previous + VALUE_ATOL:
                violations += 1
            previous = value
    report(4, "monotonicity suite", violations == 0,
           f"{violations} violations over 100 instances x (budget grid + kappa grid)")


def test_05_heuristic_quality_vs_exact():
    details = []
    ok = True
    for n_test in (100, 1000):
        exact_values, heuristic_values, all_feasible = [], [], True
        for seed in range(10):
            instance, *_ = synthetic_pipeline(
                1, seed, n_train=1000, n_test=n_test, alpha=0.5, kappa=1.0,
                price_change=0.1,
            )
            exact = rp.solve_exact(instance)
            heuristic = rp.heuristic_solve(instance)
            exact_values.append(exact.worst_case_value)
            heuristic_values.append(heuristic.worst_case_value)
            all_feasible &= heuristic.feasible
        gap = abs(np.mean(exact_values) - np.mean(heuristic_values)) / np.mean(exact_values)
        details.append(f"|I|={n_test}: mean gap {gap * 100:.3f}%, feasible={all_feasible}")
        ok &= gap <= 0.02 and all_feasible
    report(5, "heuristic quality vs exact", ok, "; ".join(details))


def test_06_heuristic_scalability():
    instance, *_ = synthetic_pipeline(
        1, seed=0, n_train=1000, n_test=10_000, alpha=0.5, kappa=1.0, price_change=0.1
    )
    start = time.perf_counter()
    result = rp.heuristic_solve(instance)
    elapsed = time.perf_counter() - start
    ok = elapsed < 120.0 and result.feasible
    report(6, "heuristic scalability", ok,
           f"|I|=10000, |J|=9 solved in {elapsed:.1f}s "
           f"({result.iterations} iterations, feasible={result.feasible})")


def auc_for(dataset_id, seed, n_train, n_test=500):
    train_gen = rp.make_generator(dataset_id, seed=derive_seed(seed, "generator", "train"))
    test_gen = rp.make_generator(dataset_id, seed=derive_seed(seed, "generator", "test"))
    train_data = rp.generate_dataset(train_gen, n_train, derived_rng(seed, "data", "train"))
    test_data = rp.generate_dataset(test_gen, n_test, derived_rng(seed, "data", "test"))
    model = rp.train(train_data, rp.TrainConfig(seed=derive_seed(seed, "split")))
    return rp.auc(model.predict(test_data.features()), test_data.labels)


def test_07_prediction_sanity():
    ds1 = np.mean([auc_for(1, seed, 1000) for seed in range(10)])
    ds2 = np.mean([auc_for(2, seed, 1000) for seed in range(10)])
    ordering_ok = True
    order_details = []
    for dataset_id in range(1, 7):
        small = np.mean([auc_for(dataset_id, seed, 100) for seed in range(10)])
        large = np.mean([auc_for(dataset_id, seed, 1000) for seed in range(10)])
        ordering_ok &= large >= small
        order_details.append(f"ds{dataset_id}:{small:.3f}->{large:.3f}")
    ok = ds1 >= 0.78 and ds2 <= 0.65 and ordering_ok
    report(7, "prediction sanity", ok,
           f"AUC ds1={ds1:.3f} (>=0.78), ds2={ds2:.3f} (<=0.65); size ordering "
           + " ".join(order_details))


def test_08_revenue_behavior():
    revenue = {0.0: [], 1.0: []}
    for seed in range(10):
        for alpha in (0.0, 1.0):
            instance, model, generator, test_data, grid = synthetic_pipeline(
                5, seed, n_train=1000, n_test=500, alpha=alpha, kappa=1.0
            )
            solved = rp.solve_exact(instance)
            value = rp.evaluate_policy(
                solved.assignment, test_data.covariates, grid, generator
            ).expected_revenue
            revenue[alpha].append(value)
    robust_gain_ok = np.mean(revenue[1.0]) >= np.mean(revenue[0.0])

    dominance_ok = True
    for dataset_id in range(1, 7):
        instance, model, generator, test_data, grid = synthetic_pipeline(
            dataset_id, seed=1, n_train=300, n_test=100, alpha=0.5, kappa=1.0, n_bootstrap=5
        )
        best = rp.optimal_assignment(test_data.covariates, grid, generator)
        ceiling = rp.evaluate_policy(best, test_data.covariates, grid, generator).expected_revenue
        for solver in (rp.solve_exact, rp.heuristic_solve):
            policy = solver(instance).assignment
            value = rp.evaluate_policy(
                policy, test_data.covariates, grid, generator
            ).expected_revenue
            dominance_ok &= value <= ceiling + VALUE_ATOL
    ok = robust_gain_ok and dominance_ok
    report(8, "revenue behavior", ok,
           f"dataset 5 mean revenue alpha=1: {np.mean(revenue[1.0]):.2f} >= "
           f"alpha=0: {np.mean(revenue[0.0]):.2f}; oracle dominance on all datasets: {dominance_ok}")


def test_09_golden_section_correctness():
    rng = np.random.default_rng(909)
    eps = 0.01
    point_ok = count_ok = True
    for _ in range(100):
        curvature = float(rng.uniform(0.1, 5))
        vertex = float(rng.uniform(-10, 10))
        lo = float(rng.uniform(-12, 8))
        hi = lo + float(rng.uniform(5 * eps, 20))
        point, iterations = rp.golden_section_search(
            lambda v: -curvature * (v - vertex) ** 2, lo, hi, eps, return_iterations=True
        )
        best = min(max(vertex, lo), hi)
        point_ok &= abs(point - best) < eps
        expected = math.ceil(math.log(eps / (hi - lo)) / math.log(1 / rp.GOLDEN_RATIO))
        count_ok &= iterations == expected
    report(9, "golden-section correctness", point_ok and count_ok,
           f"points within eps of the maximizer: {point_ok}; iteration counts match: {count_ok}")


def test_10_determinism(tmp_path):
    doc = {
        "dataset": {"source": "synthetic", "id": 1, "train_size": 150, "test_size": 10},
        "train": {"rounds": 6},
        "bootstrap": {"n_bootstrap": 3},
        "alphas": [0.0, 1.0],
        "kappas": [1.0, 2.0],
        "solvers": ["exact", "heuristic"],
        "replications": 25,
        "seeds": [1, 2],
    }
    outputs = []
    for name in ("first", "second"):
        config = rp.ExperimentConfig.from_dict({**doc, "output_dir": str(tmp_path / name)})
        rp.run_experiment(config)
        outputs.append(tmp_path / name)
    identical = True
    compared = []
    for rel in ["results.csv"] + [
        f"uncertainty/uncertainty_seed{s}_kappa{k!r}.csv" for s in (1, 2) for k in (1.0, 2.0)
    ] + [f"models/model_seed{s}.json" for s in (1, 2)]:
        same = (outputs[0] / rel).read_bytes() == (outputs[1] / rel).read_bytes()
        identical &= same
        compared.append(rel)
    report(10, "determinism", identical,
           f"{len(compared)} artifacts byte-identical across reruns")
