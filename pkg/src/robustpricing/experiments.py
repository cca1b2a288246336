"""Configuration-driven end-to-end experiment runs.

One JSON config describes the data source, the sweep over the budget ratio
alpha and the uncertainty scale kappa, the solver selection, and the seeds.
``run_experiment`` executes every (seed, alpha, kappa, solver) cell and
writes:

* ``results.csv``      one row per solve (deterministic, byte-stable)
* ``timings.csv``      wall-clock seconds per solve, keyed by run id
* ``aggregate.json``   mean and sample stddev over seeds per sweep cell
* ``plotdata/*.csv``   revenue-vs-alpha series, one file per kappa
* ``models/``, ``uncertainty/``  per-seed model and uncertainty artifacts

All timing information lives in timings.csv so that every other output is
bit-reproducible across reruns of the same config.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .boosting import LabeledDataset, TrainConfig, predict_grid, train
from .bootstrap import BootstrapConfig, bootstrap_prediction_stack, ensemble_stats, write_uncertainty_csv
from .core import (
    PredictionMatrix,
    PriceGrid,
    PricingInstance,
    RobustBudget,
    price_change_limit,
)
from .errors import ConfigError
from .exact import ExactConfig, solve_exact
from .ingestion import TransactionSchema, load_dataset_csv
from .lagrangian import HeuristicConfig, heuristic_solve
from .seeding import derive_seed, derived_rng
from .synthetic import (
    GeneratorSpec,
    candidate_prices,
    evaluate_policy,
    expected_revenue_at,
    generate_dataset,
    make_generator,
    optimal_assignment,
)

__all__ = ["DatasetSource", "ExperimentConfig", "run_experiment"]

RESULT_COLUMNS = [
    "run_id",
    "seed",
    "dataset",
    "alpha",
    "kappa",
    "solver",
    "worst_case",
    "nominal",
    "feasible",
    "iterations",
    "expected_revenue",
    "simulated_revenue",
    "optimal_revenue",
    "nochange_revenue",
]


@dataclass(frozen=True)
class DatasetSource:
    source: str  # "synthetic" or "csv"
    dataset_id: int | None = None
    train_size: int | None = None
    test_size: int | None = None
    path: str | None = None
    schema: TransactionSchema | None = None
    test_fraction: float = 0.5

    def __post_init__(self):
        if self.source == "synthetic":
            if not self.dataset_id or not self.train_size or not self.test_size:
                raise ConfigError("synthetic source needs dataset_id, train_size, test_size")
            if self.train_size < 1 or self.test_size < 1:
                raise ConfigError("train_size and test_size must be >= 1")
        elif self.source == "csv":
            if not self.path or self.schema is None:
                raise ConfigError("csv source needs path and schema")
            if not 0 < self.test_fraction < 1:
                raise ConfigError("test_fraction must lie in (0, 1)")
        else:
            raise ConfigError("dataset source must be 'synthetic' or 'csv'")

    @property
    def label(self) -> str:
        if self.source == "synthetic":
            return f"synthetic-{self.dataset_id}"
        return Path(self.path).stem


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSource
    seeds: tuple[int, ...]
    alphas: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    kappas: tuple[float, ...] = (1.0,)
    solvers: tuple[str, ...] = ("exact",)
    train: TrainConfig = field(default_factory=TrainConfig)
    n_bootstrap: int = 20
    exact: ExactConfig = field(default_factory=ExactConfig)
    heuristic: HeuristicConfig = field(default_factory=HeuristicConfig)
    price_change_fraction: float | None = None
    replications: int = 0
    output_dir: str = "out"

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if any(not 0 <= a <= 1 for a in self.alphas):
            raise ConfigError("alpha values must lie in [0, 1]")
        if any(k < 0 for k in self.kappas):
            raise ConfigError("kappa values must be non-negative")
        bad = [s for s in self.solvers if s not in ("exact", "heuristic")]
        if bad:
            raise ConfigError(f"unknown solvers {bad}; valid: exact, heuristic")
        if not self.solvers:
            raise ConfigError("at least one solver is required")
        if self.replications < 0:
            raise ConfigError("replications must be >= 0")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "kappas", tuple(float(k) for k in self.kappas))
        object.__setattr__(self, "solvers", tuple(self.solvers))

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        try:
            ds = dict(doc["dataset"])
        except KeyError as exc:
            raise ConfigError("config needs a 'dataset' section") from exc
        schema = ds.get("schema")
        source = DatasetSource(
            source=ds.get("source", "synthetic"),
            dataset_id=ds.get("id", ds.get("dataset_id")),
            train_size=ds.get("train_size"),
            test_size=ds.get("test_size"),
            path=ds.get("path"),
            schema=TransactionSchema.from_dict(schema) if schema else None,
            test_fraction=ds.get("test_fraction", 0.5),
        )
        kwargs: dict = {"dataset": source}
        if "seeds" in doc:
            kwargs["seeds"] = tuple(doc["seeds"])
        elif "seed" in doc:
            kwargs["seeds"] = (doc["seed"],)
        else:
            raise ConfigError("config needs 'seeds' (or a single 'seed')")
        for key in ("alphas", "kappas", "solvers"):
            if key in doc:
                kwargs[key] = tuple(doc[key])
        if "train" in doc:
            kwargs["train"] = TrainConfig(**doc["train"])
        if "bootstrap" in doc:
            kwargs["n_bootstrap"] = int(doc["bootstrap"].get("n_bootstrap", 20))
        if "exact" in doc:
            kwargs["exact"] = ExactConfig(**doc["exact"])
        if "heuristic" in doc:
            kwargs["heuristic"] = HeuristicConfig(**doc["heuristic"])
        if "price_change" in doc and doc["price_change"] is not None:
            kwargs["price_change_fraction"] = float(doc["price_change"]["beta"])
        if "replications" in doc:
            kwargs["replications"] = int(doc["replications"])
        if "output_dir" in doc:
            kwargs["output_dir"] = str(doc["output_dir"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in columns])


@dataclass
class _SeedArtifacts:
    generator: GeneratorSpec | None
    test_data: LabeledDataset
    grid: PriceGrid
    qhat: np.ndarray
    stack: np.ndarray
    optimal_revenue: float | None
    nochange_revenue: float | None


def _prepare_seed(config: ExperimentConfig, seed: int, out: Path) -> _SeedArtifacts:
    source = config.dataset
    if source.source == "synthetic":
        # The train and test phases own separate generator streams: dataset
        # 2's interaction weights are redrawn between them, which is what
        # makes its prediction problem genuinely hard.
        train_gen = make_generator(source.dataset_id, seed=derive_seed(seed, "generator", "train"))
        generator = make_generator(source.dataset_id, seed=derive_seed(seed, "generator", "test"))
        train_data = generate_dataset(train_gen, source.train_size, derived_rng(seed, "data", "train"))
        test_data = generate_dataset(generator, source.test_size, derived_rng(seed, "data", "test"))
        prices = candidate_prices(train_data)
    else:
        generator = None
        full = load_dataset_csv(source.path, source.schema)
        perm = derived_rng(seed, "split").permutation(len(full))
        n_test = max(1, int(len(full) * source.test_fraction))
        test_data = full.subset(np.sort(perm[:n_test]))
        train_data = full.subset(np.sort(perm[n_test:]))
        if source.schema.price_grid:
            prices = np.asarray(source.schema.price_grid, dtype=float)
        else:
            prices = candidate_prices(train_data)

    train_config = replace(config.train, seed=derive_seed(seed, "split"))
    model = train(train_data, train_config)
    model.save(out / "models" / f"model_seed{seed}.json")

    grid = PriceGrid(np.tile(prices, (len(test_data), 1)))
    qhat = predict_grid(model, test_data.covariates, grid)
    stack = bootstrap_prediction_stack(
        train_data,
        test_data.covariates,
        grid,
        BootstrapConfig(
            n_bootstrap=config.n_bootstrap,
            seed=derive_seed(seed, "bootstrap"),
            train_config=train_config,
        ),
    )

    optimal_revenue = nochange_revenue = None
    if generator is not None:
        best = optimal_assignment(test_data.covariates, grid, generator)
        optimal_revenue = evaluate_policy(best, test_data.covariates, grid, generator).expected_revenue
        nochange_revenue = expected_revenue_at(test_data.covariates, test_data.prices, generator)
    return _SeedArtifacts(
        generator=generator,
        test_data=test_data,
        grid=grid,
        qhat=qhat.qhat,
        stack=stack,
        optimal_revenue=optimal_revenue,
        nochange_revenue=nochange_revenue,
    )


def _solve_cell(config: ExperimentConfig, instance: PricingInstance, solver: str):
    start = time.perf_counter()
    if solver == "exact":
        report = solve_exact(instance, config.exact)
    else:
        report = heuristic_solve(instance, config.heuristic)
    return report, time.perf_counter() - start


def _aggregate(rows: list[dict], config: ExperimentConfig) -> dict:
    def stats(values):
        values = [v for v in values if v is not None]
        if not values:
            return None, None
        arr = np.asarray(values, dtype=float)
        std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
        return float(arr.mean()), std

    cells = []
    for kappa in config.kappas:
        for alpha in config.alphas:
            for solver in config.solvers:
                group = [
                    r
                    for r in rows
                    if r["kappa"] == kappa and r["alpha"] == alpha and r["solver"] == solver
                ]
                worst_mean, worst_std = stats([r["worst_case"] for r in group])
                rev_mean, rev_std = stats([r["expected_revenue"] for r in group])
                cells.append(
                    {
                        "alpha": alpha,
                        "kappa": kappa,
                        "solver": solver,
                        "n_seeds": len(group),
                        "worst_case_mean": worst_mean,
                        "worst_case_std": worst_std,
                        "expected_revenue_mean": rev_mean,
                        "expected_revenue_std": rev_std,
                    }
                )
    optimal_mean, optimal_std = stats(
        [r["optimal_revenue"] for r in rows if r["solver"] == config.solvers[0]]
    )
    nochange_mean, nochange_std = stats(
        [r["nochange_revenue"] for r in rows if r["solver"] == config.solvers[0]]
    )
    return {
        "dataset": config.dataset.label,
        "cells": cells,
        "baselines": {
            "optimal_mean": optimal_mean,
            "optimal_std": optimal_std,
            "nochange_mean": nochange_mean,
            "nochange_std": nochange_std,
        },
    }


def _write_plotdata(out: Path, aggregate: dict, config: ExperimentConfig) -> None:
    plot_dir = out / "plotdata"
    plot_dir.mkdir(exist_ok=True)
    for kappa in config.kappas:
        columns = ["alpha"]
        for solver in config.solvers:
            columns.append(f"robust_{solver}")
        columns += ["optimal", "no_change"]
        rows = []
        for alpha in config.alphas:
            row = {"alpha": alpha}
            for solver in config.solvers:
                cell = next(
                    c
                    for c in aggregate["cells"]
                    if c["alpha"] == alpha and c["kappa"] == kappa and c["solver"] == solver
                )
                row[f"robust_{solver}"] = cell["expected_revenue_mean"]
            row["optimal"] = aggregate["baselines"]["optimal_mean"]
            row["no_change"] = aggregate["baselines"]["nochange_mean"]
            rows.append(row)
        _write_csv(plot_dir / f"revenue_vs_alpha_kappa{kappa!r}.csv", columns, rows)


def run_experiment(config: ExperimentConfig) -> dict:
    """Execute the full sweep and write the report bundle.

    Returns a summary dict with the aggregate statistics and output paths.
    """
    out = Path(config.output_dir)
    (out / "models").mkdir(parents=True, exist_ok=True)
    (out / "uncertainty").mkdir(exist_ok=True)

    rows: list[dict] = []
    timing_rows: list[dict] = []
    for seed in config.seeds:
        artifacts = _prepare_seed(config, seed, out)
        n_test = len(artifacts.test_data)
        constraints = ()
        if config.price_change_fraction is not None:
            constraints = (price_change_limit(artifacts.grid, config.price_change_fraction),)
        for kappa in config.kappas:
            estimate = ensemble_stats(artifacts.stack, artifacts.qhat, kappa)
            write_uncertainty_csv(
                out / "uncertainty" / f"uncertainty_seed{seed}_kappa{kappa!r}.csv",
                estimate,
                artifacts.qhat,
            )
            for alpha in config.alphas:
                instance = PricingInstance(
                    grid=artifacts.grid,
                    predictions=PredictionMatrix(artifacts.qhat),
                    uncertainty=estimate.delta,
                    budget=RobustBudget.from_alpha(alpha, n_test, kappa),
                    constraints=constraints,
                )
                for solver in config.solvers:
                    report, elapsed = _solve_cell(config, instance, solver)
                    run_id = f"s{seed}-a{alpha!r}-k{kappa!r}-{solver}"
                    row = {
                        "run_id": run_id,
                        "seed": seed,
                        "dataset": config.dataset.label,
                        "alpha": alpha,
                        "kappa": kappa,
                        "solver": solver,
                        "worst_case": report.worst_case_value,
                        "nominal": report.nominal_value,
                        "feasible": report.feasible,
                        "iterations": report.iterations,
                        "expected_revenue": None,
                        "simulated_revenue": None,
                        "optimal_revenue": artifacts.optimal_revenue,
                        "nochange_revenue": artifacts.nochange_revenue,
                    }
                    if artifacts.generator is not None:
                        evaluation = evaluate_policy(
                            report.assignment,
                            artifacts.test_data.covariates,
                            artifacts.grid,
                            artifacts.generator,
                            replications=config.replications,
                            rng=derived_rng(seed, "simulation", repr(alpha), repr(kappa), solver),
                        )
                        row["expected_revenue"] = evaluation.expected_revenue
                        row["simulated_revenue"] = evaluation.simulated_revenue
                    rows.append(row)
                    timing_rows.append({"run_id": run_id, "wall_time_s": elapsed})

    _write_csv(out / "results.csv", RESULT_COLUMNS, rows)
    _write_csv(out / "timings.csv", ["run_id", "wall_time_s"], timing_rows)
    aggregate = _aggregate(rows, config)
    with open(out / "aggregate.json", "w", encoding="utf-8") as fh:
        json.dump(aggregate, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_plotdata(out, aggregate, config)
    return {
        "results": str(out / "results.csv"),
        "aggregate": aggregate,
        "n_rows": len(rows),
    }
