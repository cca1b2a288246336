"""Synthetic probit demand models and counterfactual policy evaluation.

Six generators, each defining a latent utility g(X) + h(X) * P + eps with
eps ~ N(0, 2); a purchase occurs iff the utility is positive.  Throughout
this module the second parameter of every normal distribution is a VARIANCE
(so eps has standard deviation sqrt(2)).  Because the genuine model is known,
any price assignment can be scored exactly: for most datasets
P(purchase) = Phi((g + h * p) / sqrt(2)); dataset 2 draws its sparse
interaction weights per row, so its exact probability marginalizes them out
to Phi(5 / sqrt(2.25 * p**2 * |x_1..5|**2 + 2)).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .boosting import LabeledDataset
from .core import PriceAssignment, PriceGrid
from .errors import InputError

__all__ = [
    "GeneratorSpec",
    "PolicyEvaluation",
    "make_generator",
    "generate_dataset",
    "true_purchase_probability",
    "probability_grid",
    "candidate_prices",
    "evaluate_policy",
    "optimal_assignment",
    "expected_revenue_at",
    "write_dataset_csv",
    "read_dataset_csv",
    "write_generator_json",
    "read_generator_json",
]

NOISE_STD = np.sqrt(2.0)  # eps ~ N(0, variance 2)
PRICE_STD = np.sqrt(2.0)  # price draws ~ N(center, variance 2)

DATASET_DIMS = {1: 1, 2: 20, 3: 1, 4: 2, 5: 1, 6: 2}


N_INTERACTION = 5  # dataset 2: weights on the first five covariates only
INTERACTION_SCALE = -1.5


@dataclass(frozen=True)
class GeneratorSpec:
    """One of the six demand models; fully determined by the dataset id."""

    dataset_id: int
    covariate_dim: int

    def __post_init__(self):
        if self.dataset_id not in DATASET_DIMS:
            raise InputError(f"dataset_id must be in {sorted(DATASET_DIMS)}")
        if self.covariate_dim != DATASET_DIMS[self.dataset_id]:
            raise InputError(
                f"dataset {self.dataset_id} has {DATASET_DIMS[self.dataset_id]} covariates"
            )


def make_generator(dataset_id: int) -> GeneratorSpec:
    dim = DATASET_DIMS.get(dataset_id)
    if dim is None:
        raise InputError(f"dataset_id must be in {sorted(DATASET_DIMS)}")
    return GeneratorSpec(dataset_id=dataset_id, covariate_dim=dim)


def _step_effect(x1: np.ndarray, levels: tuple[float, float, float, float]) -> np.ndarray:
    out = np.empty_like(x1)
    out[x1 < -1] = levels[0]
    out[(x1 >= -1) & (x1 < 0)] = levels[1]
    out[(x1 >= 0) & (x1 < 1)] = levels[2]
    out[x1 >= 1] = levels[3]
    return out


def _check_dim(spec: GeneratorSpec, covariates: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(covariates, dtype=float))
    if x.shape[1] != spec.covariate_dim:
        raise InputError(
            f"dataset {spec.dataset_id} expects {spec.covariate_dim} covariates, "
            f"got {x.shape[1]}"
        )
    return x


def latent_terms(spec: GeneratorSpec, covariates: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Intercept g(X) and price slope h(X) of the latent utility, per row.

    Not defined for dataset 2, whose slope also involves per-row random
    weights; its marginal probability is handled in purchase probabilities
    directly.
    """
    x = _check_dim(spec, covariates)
    ds = spec.dataset_id
    if ds in (1, 5):
        return x[:, 0], np.full(len(x), -1.0)
    if ds == 2:
        raise InputError("dataset 2 has no deterministic price slope")
    if ds == 3:
        return np.full(len(x), 5.0), _step_effect(x[:, 0], (-1.2, -1.1, -0.9, -0.8))
    if ds == 4:
        h = _step_effect(x[:, 0], (-1.25, -1.1, -0.9, -0.75))
        h = h + np.where(x[:, 1] < 0, 0.1, -0.1)
        return np.full(len(x), 5.0), h
    spread = np.abs(x[:, 0] + x[:, 1])  # dataset 6
    return 4.0 * spread, -spread


def draw_covariates(spec: GeneratorSpec, n_rows: int, rng: np.random.Generator) -> np.ndarray:
    if spec.dataset_id in (1, 5):
        return rng.normal(5.0, 1.0, size=(n_rows, 1))
    return rng.normal(0.0, 1.0, size=(n_rows, spec.covariate_dim))


def price_centers(spec: GeneratorSpec, covariates: np.ndarray) -> np.ndarray:
    """Center of the observed-price distribution per consumer.

    Datasets 1 and 2 price around 5 independently of the covariates; the
    confounded datasets price around the first covariate, shifted so the
    center stays near 5 (dataset 5's covariate is already centered at 5,
    datasets 3, 4, 6 draw it at 0 and add 5).
    """
    if spec.dataset_id in (1, 2):
        return np.full(len(covariates), 5.0)
    if spec.dataset_id == 5:
        return covariates[:, 0]
    return covariates[:, 0] + 5.0


def draw_prices(spec: GeneratorSpec, covariates: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Observed prices; redrawn until positive (excluded mass ~2e-4 per row)."""
    center = price_centers(spec, covariates)
    prices = rng.normal(center, PRICE_STD)
    while np.any(prices <= 0):
        redo = prices <= 0
        prices[redo] = rng.normal(center[redo], PRICE_STD)
    return prices


def generate_dataset(spec: GeneratorSpec, n_rows: int, rng: np.random.Generator) -> LabeledDataset:
    """Draw covariates and prices, then label by the latent-utility sign.

    Dataset 2 additionally draws sparse interaction weights per row, so its
    price slope is itself random; every other dataset's slope is a
    deterministic function of the covariates.
    """
    if n_rows < 1:
        raise InputError("n_rows must be >= 1")
    covariates = draw_covariates(spec, n_rows, rng)
    if spec.dataset_id == 2:
        weights = rng.normal(size=(n_rows, N_INTERACTION))
        g = np.full(n_rows, 5.0)
        h = INTERACTION_SCALE * (covariates[:, :N_INTERACTION] * weights).sum(axis=1)
    else:
        g, h = latent_terms(spec, covariates)
    prices = draw_prices(spec, covariates, rng)
    utility = g + h * prices + rng.normal(0.0, NOISE_STD, size=n_rows)
    labels = (utility > 0).astype(int)
    names = tuple(f"x{i + 1}" for i in range(spec.covariate_dim))
    return LabeledDataset(covariates, prices, labels, feature_names=names)


def _probability(spec: GeneratorSpec, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    if spec.dataset_id == 2:
        # weights are per-row noise: the margin 5 - 1.5 * (w . x_1..5) * p + eps
        # is normal with variance 2.25 p^2 |x_1..5|^2 + 2
        spread = np.sqrt(
            INTERACTION_SCALE**2 * p**2 * (x[:, :N_INTERACTION] ** 2).sum(axis=1) + 2.0
        )
        return ndtr(5.0 / spread)
    g, h = latent_terms(spec, x)
    return ndtr((g + h * p) / NOISE_STD)


def true_purchase_probability(spec: GeneratorSpec, x, p) -> float | np.ndarray:
    """Exact purchase probability under the data-generating model.

    Phi is the standard normal CDF evaluated through scipy's erf-based
    ``ndtr``, accurate to about 1e-15.  For dataset 2 the per-row interaction
    weights are marginalized out in closed form.
    """
    x = _check_dim(spec, x)
    result = _probability(spec, x, np.asarray(p, dtype=float))
    return float(result[0]) if result.shape == (1,) else result


def probability_grid(spec: GeneratorSpec, covariates: np.ndarray, grid: PriceGrid) -> np.ndarray:
    """True purchase probabilities for every (consumer, candidate) pair."""
    x = _check_dim(spec, covariates)
    if len(x) != grid.shape[0]:
        raise InputError("covariates and grid disagree on the number of consumers")
    columns = [
        _probability(spec, x, grid.prices[:, j]) for j in range(grid.shape[1])
    ]
    return np.column_stack(columns) if columns else np.zeros(grid.shape)


def candidate_prices(train: LabeledDataset) -> np.ndarray:
    """The nine deciles (10th..90th percentile, linear interpolation) of the
    training prices, in non-decreasing order."""
    if len(train) == 0:
        raise InputError("cannot take percentiles of an empty dataset")
    return np.percentile(train.prices, np.arange(10, 100, 10))


@dataclass(frozen=True)
class PolicyEvaluation:
    """Counterfactual revenue of an assignment under the known demand model."""

    expected_revenue: float
    simulated_revenue: float | None
    prices: np.ndarray
    probabilities: np.ndarray


def evaluate_policy(
    assignment: PriceAssignment,
    covariates: np.ndarray,
    grid: PriceGrid,
    spec: GeneratorSpec,
    replications: int = 0,
    rng: np.random.Generator | None = None,
) -> PolicyEvaluation:
    """Score an assignment against the true model.

    ``expected_revenue`` is the exact sum of price * true probability;
    ``simulated_revenue`` averages Bernoulli-draw revenue over the requested
    replications (None when replications == 0).
    """
    if replications < 0:
        raise InputError("replications must be >= 0")
    n, _ = grid.shape
    if len(assignment.choice) != n:
        raise InputError("assignment and grid disagree on the number of consumers")
    if assignment.choice.size and assignment.choice.max() >= grid.shape[1]:
        raise InputError("candidate index out of range")
    prices = grid.prices[np.arange(n), assignment.choice]
    probabilities = _probability(spec, _check_dim(spec, covariates), prices)
    expected = float((prices * probabilities).sum())
    simulated = None
    if replications > 0:
        if rng is None:
            raise InputError("simulation needs a random generator")
        draws = rng.random((replications, n)) < probabilities
        simulated = float((draws * prices).sum(axis=1).mean())
    return PolicyEvaluation(
        expected_revenue=expected,
        simulated_revenue=simulated,
        prices=prices,
        probabilities=probabilities,
    )


def optimal_assignment(covariates: np.ndarray, grid: PriceGrid, spec: GeneratorSpec) -> PriceAssignment:
    """Best candidate per consumer under the TRUE model (the oracle policy)."""
    revenue = grid.prices * probability_grid(spec, covariates, grid)
    return PriceAssignment(np.argmax(revenue, axis=1))


def expected_revenue_at(covariates: np.ndarray, prices: np.ndarray, spec: GeneratorSpec) -> float:
    """Expected revenue of charging each consumer a given price (used for the
    no-change baseline at the originally generated prices)."""
    prices = np.asarray(prices, dtype=float)
    x = _check_dim(spec, covariates)
    if len(prices) != len(x):
        raise InputError("one price per consumer is required")
    return float((prices * _probability(spec, x, prices)).sum())


def write_dataset_csv(path, data: LabeledDataset) -> None:
    """Columns x1..xn, price, purchased."""
    names = data.feature_names or tuple(f"x{i + 1}" for i in range(data.n_covariates))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names) + ["price", "purchased"])
        for i in range(len(data)):
            row = [repr(float(v)) for v in data.covariates[i]]
            row.append(repr(float(data.prices[i])))
            row.append(int(data.labels[i]))
            writer.writerow(row)


def read_dataset_csv(path) -> LabeledDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[-2:] != ["price", "purchased"]:
            raise InputError(f"{path} is not a dataset CSV (want x1..xn, price, purchased)")
        names = tuple(header[:-2])
        covariates, prices, labels = [], [], []
        for row in reader:
            covariates.append([float(v) for v in row[: len(names)]])
            prices.append(float(row[len(names)]))
            labels.append(int(row[len(names) + 1]))
    if not prices:
        raise InputError(f"{path} contains no data rows")
    return LabeledDataset(np.array(covariates), np.array(prices), np.array(labels),
                          feature_names=names)


def write_generator_json(path, spec: GeneratorSpec) -> None:
    doc = {
        "dataset_id": spec.dataset_id,
        "covariate_dim": spec.covariate_dim,
        "beta": None if spec.beta is None else [float(v) for v in spec.beta],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_generator_json(path) -> GeneratorSpec:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    beta = doc.get("beta")
    return GeneratorSpec(
        dataset_id=int(doc["dataset_id"]),
        covariate_dim=int(doc["covariate_dim"]),
        beta=None if beta is None else np.asarray(beta, dtype=float),
    )
