"""Purchase-probability prediction with gradient-boosted decision stumps.

The model is an additive ensemble of depth-1 regression trees over the
feature vector (covariates..., price), fit with logistic loss.  Each boosting
round searches every feature exhaustively, with candidate thresholds at the
midpoints of consecutive distinct sorted values, and sets the two leaf values
by a single damped Newton step.  Deliberately small: no deep trees, no
categorical handling, no calibration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import rankdata

from .core import PredictionMatrix, PriceGrid
from .errors import InputError, MetricUndefinedError

__all__ = [
    "LabeledDataset",
    "TrainConfig",
    "Stump",
    "ProbabilityModel",
    "train",
    "predict_grid",
    "auc",
]

PROB_CLAMP = 1e-6
LEAF_DAMPING = 1.0  # L2 damping added to the hessian in the Newton step


@dataclass(frozen=True)
class LabeledDataset:
    """Rows of (covariate vector, offered price, purchased 0/1)."""

    covariates: np.ndarray
    prices: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        x = np.asarray(self.covariates, dtype=float)
        p = np.asarray(self.prices, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if x.ndim != 2 or x.shape[1] < 1:
            raise InputError("covariates must be a 2-d matrix with >= 1 column")
        if p.ndim != 1 or y.ndim != 1 or len(p) != len(x) or len(y) != len(x):
            raise InputError("covariates, prices and labels must have equal length")
        if np.any(p <= 0):
            raise InputError("prices must be strictly positive")
        if not np.all(np.isin(y, (0.0, 1.0))):
            raise InputError("labels must be 0 or 1")
        for name, arr in (("covariates", x), ("prices", p)):
            if not np.all(np.isfinite(arr)):
                raise InputError(f"{name} contain non-finite values")
        y = y.astype(np.int8)
        for arr in (x, p):
            arr.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "covariates", x)
        object.__setattr__(self, "prices", p)
        object.__setattr__(self, "labels", y)
        if self.feature_names is not None:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self) -> int:
        return len(self.prices)

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]

    def features(self) -> np.ndarray:
        """Model features: covariates with the price appended as last column."""
        return np.column_stack([self.covariates, self.prices])

    def subset(self, idx: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(
            self.covariates[idx], self.prices[idx], self.labels[idx], self.feature_names
        )


@dataclass(frozen=True)
class TrainConfig:
    rounds: int = 50
    learning_rate: float = 0.1
    validation_fraction: float = 0.2
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 1:
            raise InputError("rounds must be >= 1")
        if not 0 <= self.validation_fraction < 1:
            raise InputError("validation_fraction must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise InputError("learning_rate must be positive")


@dataclass(frozen=True)
class Stump:
    """One depth-1 tree: value ``left`` if x[feature] <= threshold else ``right``.
    Leaf values are already scaled by the learning rate."""

    feature: int
    threshold: float
    left: float
    right: float

    def apply(self, features: np.ndarray) -> np.ndarray:
        return np.where(features[:, self.feature] <= self.threshold, self.left, self.right)


@dataclass(frozen=True)
class ProbabilityModel:
    """Immutable boosted-stump classifier over (covariates, price)."""

    base_score: float
    stumps: tuple[Stump, ...]
    n_features: int
    config: TrainConfig

    def decision_function(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=float)
        if features.ndim != 2 or features.shape[1] != self.n_features:
            raise InputError(
                f"expected {self.n_features} features, got shape {features.shape}"
            )
        score = np.full(len(features), self.base_score)
        for stump in self.stumps:
            score += stump.apply(features)
        return score

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Purchase probabilities, clamped away from 0 and 1."""
        return np.clip(expit(self.decision_function(features)), PROB_CLAMP, 1 - PROB_CLAMP)

    def to_json(self) -> str:
        doc = {
            "format": "boosted-stumps",
            "version": 1,
            "n_features": self.n_features,
            "base_score": self.base_score,
            "stumps": [
                {"feature": s.feature, "threshold": s.threshold, "left": s.left, "right": s.right}
                for s in self.stumps
            ],
            "config": {
                "rounds": self.config.rounds,
                "learning_rate": self.config.learning_rate,
                "validation_fraction": self.config.validation_fraction,
                "patience": self.config.patience,
                "seed": self.config.seed,
            },
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ProbabilityModel":
        doc = json.loads(text)
        if doc.get("format") != "boosted-stumps":
            raise InputError("not a boosted-stumps model document")
        return cls(
            base_score=float(doc["base_score"]),
            stumps=tuple(
                Stump(int(s["feature"]), float(s["threshold"]), float(s["left"]), float(s["right"]))
                for s in doc["stumps"]
            ),
            n_features=int(doc["n_features"]),
            config=TrainConfig(**doc["config"]),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ProbabilityModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


class _FeatureIndex:
    """Per-feature sort orders and candidate split positions, computed once."""

    def __init__(self, features: np.ndarray):
        self.orders = []
        self.thresholds = []
        self.valid = []
        for f in range(features.shape[1]):
            order = np.argsort(features[:, f], kind="stable")
            xs = features[order, f]
            self.orders.append(order)
            self.thresholds.append((xs[:-1] + xs[1:]) / 2.0)
            self.valid.append(xs[:-1] < xs[1:])


def _best_stump(
    index: _FeatureIndex, grad: np.ndarray, hess: np.ndarray, learning_rate: float
) -> Stump | None:
    """Exhaustive split search maximizing the damped Newton gain.

    Returns None when no split improves on the unsplit Newton objective.
    """
    total_g = grad.sum()
    total_h = hess.sum()
    parent = total_g**2 / (total_h + LEAF_DAMPING)
    best = None
    best_gain = 0.0
    for f, order in enumerate(index.orders):
        valid = index.valid[f]
        if not valid.any():
            continue
        gl = np.cumsum(grad[order])[:-1]
        hl = np.cumsum(hess[order])[:-1]
        gr = total_g - gl
        hr = total_h - hl
        gain = gl**2 / (hl + LEAF_DAMPING) + gr**2 / (hr + LEAF_DAMPING) - parent
        gain = np.where(valid, gain, -np.inf)
        pos = int(np.argmax(gain))
        if gain[pos] > best_gain:
            best_gain = float(gain[pos])
            left = -gl[pos] / (hl[pos] + LEAF_DAMPING) * learning_rate
            right = -gr[pos] / (hr[pos] + LEAF_DAMPING) * learning_rate
            best = Stump(f, float(index.thresholds[f][pos]), float(left), float(right))
    return best


def _base_rate_model(labels: np.ndarray, n_features: int, config: TrainConfig) -> ProbabilityModel:
    rate = float(np.clip(labels.mean() if len(labels) else 0.5, 0.01, 0.99))
    base = float(np.log(rate / (1 - rate)))
    return ProbabilityModel(base_score=base, stumps=(), n_features=n_features, config=config)


def train(data: LabeledDataset, config: TrainConfig = TrainConfig()) -> ProbabilityModel:
    """Fit a boosted-stump purchase model with optional AUC early stopping.

    When ``validation_fraction`` > 0 a seeded shuffle holds out that fraction;
    boosting stops once validation AUC has not improved for ``patience``
    consecutive rounds and the model keeps the stump count of the best round.
    Deterministic: same data and config give a bit-identical model.
    """
    if len(data) == 0:
        raise InputError("cannot train on an empty dataset")
    n_features = data.n_covariates + 1
    if len(np.unique(data.labels)) < 2:
        return _base_rate_model(data.labels, n_features, config)

    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(len(data))
    n_val = int(len(data) * config.validation_fraction)
    val_idx, fit_idx = perm[:n_val], perm[n_val:]
    if len(fit_idx) == 0:
        fit_idx, val_idx = perm, perm[:0]

    fit = data.subset(fit_idx)
    x_fit = fit.features()
    y_fit = fit.labels.astype(float)
    index = _FeatureIndex(x_fit)

    val = data.subset(val_idx) if len(val_idx) else None
    use_early_stop = val is not None and len(np.unique(val.labels)) == 2
    x_val = val.features() if use_early_stop else None

    rate = float(np.clip(y_fit.mean(), PROB_CLAMP, 1 - PROB_CLAMP))
    base = float(np.log(rate / (1 - rate)))
    score_fit = np.full(len(fit), base)
    score_val = np.full(len(val), base) if use_early_stop else None

    stumps: list[Stump] = []
    best_auc = -np.inf
    best_rounds = 0
    since_best = 0
    for _ in range(config.rounds):
        prob = expit(score_fit)
        stump = _best_stump(index, prob - y_fit, prob * (1 - prob), config.learning_rate)
        if stump is None:
            break
        stumps.append(stump)
        score_fit += stump.apply(x_fit)
        if use_early_stop:
            score_val += stump.apply(x_val)
            val_auc = auc(score_val, val.labels)
            if val_auc > best_auc:
                best_auc = val_auc
                best_rounds = len(stumps)
                since_best = 0
            else:
                since_best += 1
                if since_best >= config.patience:
                    break
    if use_early_stop:
        stumps = stumps[:best_rounds]
    return ProbabilityModel(
        base_score=base, stumps=tuple(stumps), n_features=n_features, config=config
    )


def predict_grid(
    model: ProbabilityModel, covariates: np.ndarray, grid: PriceGrid
) -> PredictionMatrix:
    """Score every (consumer, candidate price) pair of the grid."""
    covariates = np.atleast_2d(np.asarray(covariates, dtype=float))
    n, m = grid.shape
    if len(covariates) != n and not (n == 0 and covariates.size == 0):
        raise InputError(f"got {len(covariates)} consumers for a grid with {n} rows")
    if n == 0:
        return PredictionMatrix(np.zeros((0, m)))
    if covariates.shape[1] + 1 != model.n_features:
        raise InputError(
            f"model expects {model.n_features - 1} covariates, got {covariates.shape[1]}"
        )
    features = np.column_stack(
        [np.repeat(covariates, m, axis=0), grid.prices.reshape(-1)]
    )
    return PredictionMatrix(model.predict(features).reshape(n, m))


def auc(scores, labels) -> float:
    """Area under the ROC curve via average ranks; ties count as one half.

    Equals the probability that a uniformly random positive outranks a
    uniformly random negative, and is invariant under any strictly increasing
    transform of the scores.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise InputError("scores and labels must be 1-d arrays of equal length")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricUndefinedError("AUC needs at least one positive and one negative label")
    ranks = rankdata(scores)
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
