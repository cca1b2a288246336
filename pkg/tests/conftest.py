import numpy as np
import pytest

from robustpricing import (
    LinearConstraint,
    PredictionMatrix,
    PriceGrid,
    PricingInstance,
    RobustBudget,
    UncertaintyMatrix,
)


def random_instance(
    rng: np.random.Generator,
    n_consumers: int,
    n_candidates: int,
    gamma: float,
    with_constraint: bool = False,
    kappa: float = 1.0,
) -> PricingInstance:
    """A random but always-valid instance; constrained variants keep an
    unmarked candidate in every row so feasibility is never vacuous."""
    prices = rng.uniform(1.0, 10.0, size=(n_consumers, n_candidates))
    qhat = rng.uniform(0.05, 0.95, size=(n_consumers, n_candidates))
    stddev = rng.uniform(0.0, 0.3, size=(n_consumers, n_candidates))
    delta = np.minimum(kappa * stddev, qhat)
    constraints = ()
    if with_constraint:
        marks = (rng.random((n_consumers, n_candidates)) < 0.4).astype(float)
        marks[:, 0] = 0.0
        constraints = (LinearConstraint(marks, float(rng.integers(0, 3))),)
    return PricingInstance(
        grid=PriceGrid(prices),
        predictions=PredictionMatrix(qhat),
        uncertainty=UncertaintyMatrix(delta),
        budget=RobustBudget(gamma),
        constraints=constraints,
    )


def single_column_instance(prices, qhat, delta, gamma) -> PricingInstance:
    """Instance with one candidate per consumer (assignment is forced)."""
    prices = np.asarray(prices, dtype=float)[:, None]
    qhat = np.asarray(qhat, dtype=float)[:, None]
    delta = np.asarray(delta, dtype=float)[:, None]
    return PricingInstance(
        grid=PriceGrid(prices),
        predictions=PredictionMatrix(qhat),
        uncertainty=UncertaintyMatrix(delta),
        budget=RobustBudget(gamma),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
