"""Bootstrap estimation of prediction uncertainty.

Resamples the training data with replacement, trains one model per resample,
and turns the spread of the ensemble's predictions into per-(consumer,
candidate) degradation magnitudes delta = min(kappa * stddev, qhat).  The cap
uses the base model's qhat so the degraded probability can never go negative.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .boosting import LabeledDataset, ProbabilityModel, TrainConfig, predict_grid, train
from .core import PriceGrid, UncertaintyMatrix
from .errors import ConfigError, InputError
from .seeding import derive_seed, derived_rng

__all__ = [
    "BootstrapConfig",
    "UncertaintyEstimate",
    "resample",
    "bootstrap_prediction_stack",
    "ensemble_stats",
    "estimate_uncertainty",
    "write_uncertainty_csv",
    "read_uncertainty_csv",
]


@dataclass(frozen=True)
class BootstrapConfig:
    n_bootstrap: int = 20
    kappa: float = 1.0
    seed: int = 0
    train_config: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.kappa < 0:
            raise ConfigError("kappa must be non-negative")


@dataclass(frozen=True)
class UncertaintyEstimate:
    """Ensemble mean, sample standard deviation, and capped delta matrix."""

    mean: np.ndarray
    stddev: np.ndarray
    delta: UncertaintyMatrix


def resample(data: LabeledDataset, rng: np.random.Generator) -> LabeledDataset:
    """Draw len(data) rows uniformly with replacement."""
    if len(data) == 0:
        raise InputError("cannot resample an empty dataset")
    idx = rng.integers(0, len(data), size=len(data))
    return data.subset(idx)


def bootstrap_prediction_stack(
    train_data: LabeledDataset,
    covariates: np.ndarray,
    grid: PriceGrid,
    config: BootstrapConfig,
) -> np.ndarray:
    """Predictions of the full bootstrap ensemble, shape (n_bootstrap, I, J).

    Each trial owns a private stream derived from (seed, trial index), so the
    result does not depend on the order trials are run in.
    """
    if config.n_bootstrap < 2:
        raise ConfigError("n_bootstrap must be >= 2 for a sample standard deviation")
    stack = np.empty((config.n_bootstrap, *grid.shape))
    for k in range(config.n_bootstrap):
        sample = resample(train_data, derived_rng(config.seed, "bootstrap-trial", k))
        trial_config = replace(
            config.train_config, seed=derive_seed(config.seed, "bootstrap-train", k)
        )
        model = train(sample, trial_config)
        stack[k] = predict_grid(model, covariates, grid).qhat
    return stack


def ensemble_stats(
    stack: np.ndarray, qhat: np.ndarray, kappa: float
) -> UncertaintyEstimate:
    """Mean, (n-1)-denominator standard deviation, and capped delta."""
    stack = np.asarray(stack, dtype=float)
    if stack.ndim != 3 or stack.shape[0] < 2:
        raise ConfigError("need a stack of >= 2 ensemble predictions")
    if stack.shape[1:] != np.shape(qhat):
        raise InputError(f"stack shape {stack.shape[1:]} != qhat shape {np.shape(qhat)}")
    mean = stack.mean(axis=0)
    stddev = stack.std(axis=0, ddof=1)
    delta = np.minimum(kappa * stddev, np.asarray(qhat, dtype=float))
    return UncertaintyEstimate(mean=mean, stddev=stddev, delta=UncertaintyMatrix(delta))


def estimate_uncertainty(
    train_data: LabeledDataset,
    base_model: ProbabilityModel,
    covariates: np.ndarray,
    grid: PriceGrid,
    config: BootstrapConfig,
) -> UncertaintyEstimate:
    """Full bootstrap pass: resample, retrain, and summarize the spread."""
    qhat = predict_grid(base_model, covariates, grid).qhat
    stack = bootstrap_prediction_stack(train_data, covariates, grid, config)
    return ensemble_stats(stack, qhat, config.kappa)


def write_uncertainty_csv(path, estimate: UncertaintyEstimate, qhat: np.ndarray) -> None:
    """One row per (consumer, candidate): qhat, ensemble mean/stddev, delta."""
    qhat = np.asarray(qhat, dtype=float)
    n, m = estimate.delta.shape
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["consumer", "candidate", "qhat", "mean", "stddev", "delta"])
        for i in range(n):
            for j in range(m):
                writer.writerow(
                    [
                        i,
                        j,
                        repr(float(qhat[i, j])),
                        repr(float(estimate.mean[i, j])),
                        repr(float(estimate.stddev[i, j])),
                        repr(float(estimate.delta.delta[i, j])),
                    ]
                )


def read_uncertainty_csv(path) -> tuple[UncertaintyEstimate, np.ndarray]:
    """Inverse of :func:`write_uncertainty_csv`; returns (estimate, qhat)."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for record in reader:
            rows.append(
                (
                    int(record["consumer"]),
                    int(record["candidate"]),
                    float(record["qhat"]),
                    float(record["mean"]),
                    float(record["stddev"]),
                    float(record["delta"]),
                )
            )
    if not rows:
        raise InputError(f"no data rows in {path}")
    n = max(r[0] for r in rows) + 1
    m = max(r[1] for r in rows) + 1
    qhat = np.zeros((n, m))
    mean = np.zeros((n, m))
    stddev = np.zeros((n, m))
    delta = np.zeros((n, m))
    for i, j, q, mu, sd, d in rows:
        qhat[i, j], mean[i, j], stddev[i, j], delta[i, j] = q, mu, sd, d
    estimate = UncertaintyEstimate(mean=mean, stddev=stddev, delta=UncertaintyMatrix(delta))
    return estimate, qhat
