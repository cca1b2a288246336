"""Command-line entry point.

Six subcommands cover the pipeline stages and the full sweep:

    generate     draw a synthetic dataset            -> dataset.csv, generator.json
    train        fit the purchase model              -> model.json
    uncertainty  bootstrap the prediction spread     -> grid.json, uncertainty.csv
    solve        robust price assignment             -> solution.json
    evaluate     counterfactual revenue of a policy  -> evaluation.json
    experiment   full sweep over (seed, alpha, kappa, solver)

Every subcommand takes --config PATH (a JSON document), --out DIR, and an
optional --seed N override.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .boosting import ProbabilityModel, TrainConfig, predict_grid, train
from .bootstrap import (
    BootstrapConfig,
    bootstrap_prediction_stack,
    ensemble_stats,
    read_uncertainty_csv,
    write_uncertainty_csv,
)
from .core import (
    PredictionMatrix,
    PriceAssignment,
    PriceGrid,
    PricingInstance,
    RobustBudget,
    price_change_limit,
)
from .errors import ConfigError, PricingError
from .exact import ExactConfig, solve_exact
from .experiments import ExperimentConfig, run_experiment
from .lagrangian import HeuristicConfig, heuristic_solve
from .seeding import derive_seed, derived_rng
from .synthetic import (
    candidate_prices,
    evaluate_policy,
    expected_revenue_at,
    generate_dataset,
    make_generator,
    optimal_assignment,
    read_dataset_csv,
    read_generator_json,
    write_dataset_csv,
    write_generator_json,
)

__all__ = ["main"]


def _load_config(path, seed_override: int | None) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if seed_override is not None:
        doc["seed"] = seed_override
        if "seeds" in doc:
            doc["seeds"] = [seed_override]
    return doc


def _need(doc: dict, key: str):
    if key not in doc:
        raise ConfigError(f"config is missing required key {key!r}")
    return doc[key]


def _write_json(path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_generate(doc: dict, out: Path) -> None:
    seed = int(doc.get("seed", 0))
    role = doc.get("role", "train")
    generator = make_generator(int(_need(doc, "dataset_id")), seed=derive_seed(seed, "generator", role))
    data = generate_dataset(generator, int(_need(doc, "n_rows")), derived_rng(seed, "data", role))
    write_dataset_csv(out / "dataset.csv", data)
    write_generator_json(out / "generator.json", generator)
    print(f"wrote {out / 'dataset.csv'} ({len(data)} rows) and generator.json")


def cmd_train(doc: dict, out: Path) -> None:
    data = read_dataset_csv(_need(doc, "data"))
    seed = int(doc.get("seed", 0))
    config = TrainConfig(**{**doc.get("train", {}), "seed": derive_seed(seed, "split")})
    model = train(data, config)
    model.save(out / "model.json")
    print(f"wrote {out / 'model.json'} ({len(model.stumps)} stumps)")


def _resolve_grid(doc: dict, train_data, n_consumers: int) -> PriceGrid:
    grid_doc = doc.get("grid", {})
    if "prices" in grid_doc:
        prices = np.asarray(grid_doc["prices"], dtype=float)
    elif "path" in grid_doc:
        with open(grid_doc["path"], encoding="utf-8") as fh:
            prices = np.asarray(json.load(fh)["prices"], dtype=float)
    else:
        if train_data is None:
            raise ConfigError("grid needs 'prices', 'path', or training data percentiles")
        prices = candidate_prices(train_data)
    return PriceGrid(np.tile(prices, (n_consumers, 1)))


def cmd_uncertainty(doc: dict, out: Path) -> None:
    train_data = read_dataset_csv(_need(doc, "train_data"))
    consumers = read_dataset_csv(_need(doc, "consumers"))
    model = ProbabilityModel.load(_need(doc, "model"))
    seed = int(doc.get("seed", 0))
    grid = _resolve_grid(doc, train_data, len(consumers))
    config = BootstrapConfig(
        n_bootstrap=int(doc.get("bootstrap", {}).get("n_bootstrap", 20)),
        kappa=float(doc.get("kappa", 1.0)),
        seed=derive_seed(seed, "bootstrap"),
        train_config=model.config,
    )
    qhat = predict_grid(model, consumers.covariates, grid)
    stack = bootstrap_prediction_stack(train_data, consumers.covariates, grid, config)
    estimate = ensemble_stats(stack, qhat.qhat, config.kappa)
    _write_json(out / "grid.json", {"prices": [float(p) for p in grid.prices[0]]})
    write_uncertainty_csv(out / "uncertainty.csv", estimate, qhat.qhat)
    print(f"wrote {out / 'uncertainty.csv'} and grid.json")


def cmd_solve(doc: dict, out: Path) -> None:
    consumers = read_dataset_csv(_need(doc, "consumers"))
    estimate, qhat = read_uncertainty_csv(_need(doc, "uncertainty"))
    grid = _resolve_grid(doc, None, len(consumers))
    alpha = float(doc.get("alpha", 0.5))
    kappa = doc.get("kappa")
    constraints = ()
    if doc.get("price_change") is not None:
        constraints = (price_change_limit(grid, float(doc["price_change"]["beta"])),)
    instance = PricingInstance(
        grid=grid,
        predictions=PredictionMatrix(qhat),
        uncertainty=estimate.delta,
        budget=RobustBudget.from_alpha(alpha, len(consumers), kappa),
        constraints=constraints,
    )
    solver = doc.get("solver", "exact")
    if solver == "exact":
        report = solve_exact(instance, ExactConfig(**doc.get("exact", {})))
    elif solver == "heuristic":
        report = heuristic_solve(instance, HeuristicConfig(**doc.get("heuristic", {})))
    else:
        raise ConfigError("solver must be 'exact' or 'heuristic'")
    solution = {
        "solver": solver,
        "method": report.method_tag,
        "alpha": alpha,
        "choice": [int(j) for j in report.assignment.choice],
        "prices": [float(p) for p in grid.prices[np.arange(len(consumers)), report.assignment.choice]],
        "worst_case": report.worst_case_value,
        "nominal": report.nominal_value,
        "feasible": report.feasible,
        "iterations": report.iterations,
    }
    if report.multipliers is not None:
        solution["multipliers"] = [float(v) for v in report.multipliers]
    _write_json(out / "solution.json", solution)
    print(
        f"wrote {out / 'solution.json'} (worst case {report.worst_case_value:.4f}, "
        f"nominal {report.nominal_value:.4f})"
    )


def cmd_evaluate(doc: dict, out: Path) -> None:
    with open(_need(doc, "solution"), encoding="utf-8") as fh:
        solution = json.load(fh)
    consumers = read_dataset_csv(_need(doc, "consumers"))
    generator = read_generator_json(_need(doc, "generator"))
    grid = _resolve_grid(doc, None, len(consumers))
    seed = int(doc.get("seed", 0))
    replications = int(doc.get("replications", 0))
    assignment = PriceAssignment(np.asarray(solution["choice"], dtype=int))
    evaluation = evaluate_policy(
        assignment,
        consumers.covariates,
        grid,
        generator,
        replications=replications,
        rng=derived_rng(seed, "simulation") if replications else None,
    )
    best = optimal_assignment(consumers.covariates, grid, generator)
    optimal = evaluate_policy(best, consumers.covariates, grid, generator).expected_revenue
    nochange = expected_revenue_at(consumers.covariates, consumers.prices, generator)
    _write_json(
        out / "evaluation.json",
        {
            "expected_revenue": evaluation.expected_revenue,
            "simulated_revenue": evaluation.simulated_revenue,
            "optimal_revenue": optimal,
            "nochange_revenue": nochange,
            "replications": replications,
        },
    )
    print(f"wrote {out / 'evaluation.json'} (expected {evaluation.expected_revenue:.4f})")


def cmd_experiment(doc: dict, out: Path) -> None:
    doc = dict(doc)
    doc.setdefault("output_dir", str(out))
    summary = run_experiment(ExperimentConfig.from_dict(doc))
    print(f"wrote {summary['results']} ({summary['n_rows']} rows)")


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "uncertainty": cmd_uncertainty,
    "solve": cmd_solve,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robust-pricing",
        description="Robust personalized pricing under purchase-probability uncertainty.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name, help=f"run the {name} stage")
        cmd.add_argument("--config", required=True, help="path to a JSON config")
        cmd.add_argument("--out", default=".", help="output directory (created if absent)")
        cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = _load_config(args.config, args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](doc, out)
    except PricingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
