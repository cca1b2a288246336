"""Problem representation and closed-form worst-case / dual machinery.

The robust price-assignment problem: each consumer i is offered one price
from a candidate row P[i, :].  Predicted purchase probabilities qhat may be
degraded by an adversary who subtracts gamma_i * delta[i, j] from the chosen
entry, subject to 0 <= gamma_i <= 1 and sum(gamma) <= Gamma (the budget).
Everything downstream (exact solver, Lagrangian heuristic, experiment
harness) works on the types defined here.

All types are immutable after construction and safe to share across threads;
the operations are pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

__all__ = [
    "PriceGrid",
    "PredictionMatrix",
    "UncertaintyMatrix",
    "RobustBudget",
    "LinearConstraint",
    "PricingInstance",
    "PriceAssignment",
    "AdversaryResponse",
    "DualCertificate",
    "SolveReport",
    "nominal_objective",
    "worst_case_objective",
    "dual_value",
    "check_feasibility",
    "nominal_assignment",
    "price_change_limit",
]


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


def _matrix(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise InputError(f"{name} must be a 2-d matrix, got ndim={arr.ndim}")
    if arr.shape[1] < 1:
        raise InputError(f"{name} needs at least one candidate column")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class PriceGrid:
    """Candidate prices, one row per consumer, one column per candidate."""

    prices: np.ndarray

    def __post_init__(self):
        arr = _matrix(self.prices, "prices")
        if not np.all(arr > 0):
            raise InputError("all candidate prices must be strictly positive")
        object.__setattr__(self, "prices", _frozen(arr))

    @property
    def shape(self) -> tuple[int, int]:
        return self.prices.shape


@dataclass(frozen=True)
class PredictionMatrix:
    """Predicted purchase probabilities, aligned with a PriceGrid."""

    qhat: np.ndarray

    def __post_init__(self):
        arr = _matrix(self.qhat, "qhat")
        if np.any(arr < 0) or np.any(arr > 1):
            raise InputError("predicted probabilities must lie in [0, 1]")
        object.__setattr__(self, "qhat", _frozen(arr))

    @property
    def shape(self) -> tuple[int, int]:
        return self.qhat.shape


@dataclass(frozen=True)
class UncertaintyMatrix:
    """Per-(consumer, candidate) degradation magnitudes."""

    delta: np.ndarray

    def __post_init__(self):
        arr = _matrix(self.delta, "delta")
        if np.any(arr < 0):
            raise InputError("uncertainty magnitudes must be non-negative")
        object.__setattr__(self, "delta", _frozen(arr))

    @property
    def shape(self) -> tuple[int, int]:
        return self.delta.shape


@dataclass(frozen=True)
class RobustBudget:
    """Adversarial budget: at most ``gamma_cap`` units of degradation mass.

    ``alpha`` and ``kappa`` record how the budget was parameterized (ratio of
    consumers affected, and ratio of uncertainty to the bootstrap standard
    deviation); they are metadata and do not enter any computation here.
    """

    gamma_cap: float
    alpha: float | None = None
    kappa: float | None = None

    def __post_init__(self):
        if not (self.gamma_cap >= 0 and math.isfinite(self.gamma_cap)):
            raise InputError("budget gamma_cap must be a finite non-negative real")

    @classmethod
    def from_alpha(cls, alpha: float, n_consumers: int, kappa: float | None = None) -> "RobustBudget":
        if not 0 <= alpha <= 1:
            raise InputError("alpha must lie in [0, 1]")
        return cls(gamma_cap=alpha * n_consumers, alpha=alpha, kappa=kappa)


@dataclass(frozen=True)
class LinearConstraint:
    """Side constraint sum_ij coefficients[i, j] * z[i, j] <= bound.

    Coefficients are additive across consumer rows, which is what lets the
    Lagrangian heuristic decompose the problem per consumer.
    """

    coefficients: np.ndarray
    bound: float

    def __post_init__(self):
        arr = _matrix(self.coefficients, "coefficients")
        object.__setattr__(self, "coefficients", _frozen(arr))
        object.__setattr__(self, "bound", float(self.bound))

    def value(self, choice: np.ndarray) -> float:
        """f(z) = sum of chosen coefficients minus the bound."""
        rows = np.arange(len(choice))
        return float(self.coefficients[rows, choice].sum() - self.bound)


@dataclass(frozen=True)
class PricingInstance:
    """Complete input to any solver: grid, predictions, uncertainty, budget."""

    grid: PriceGrid
    predictions: PredictionMatrix
    uncertainty: UncertaintyMatrix
    budget: RobustBudget
    constraints: tuple[LinearConstraint, ...] = field(default_factory=tuple)

    def __post_init__(self):
        shape = self.grid.shape
        if self.predictions.shape != shape or self.uncertainty.shape != shape:
            raise InputError(
                f"matrix shapes differ: grid {shape}, predictions "
                f"{self.predictions.shape}, uncertainty {self.uncertainty.shape}"
            )
        if np.any(self.uncertainty.delta > self.predictions.qhat):
            raise InputError("uncertainty must satisfy 0 <= delta <= qhat entrywise")
        for k, con in enumerate(self.constraints):
            if con.coefficients.shape != shape:
                raise InputError(f"constraint {k} shape {con.coefficients.shape} != {shape}")
        object.__setattr__(self, "constraints", tuple(self.constraints))

    @property
    def n_consumers(self) -> int:
        return self.grid.shape[0]

    @property
    def n_candidates(self) -> int:
        return self.grid.shape[1]

    @property
    def gamma(self) -> float:
        """Effective budget: clamped to the number of consumers, beyond which
        extra budget cannot make the worst case any worse."""
        return min(self.budget.gamma_cap, float(self.n_consumers))

    def revenue_terms(self) -> np.ndarray:
        """P * qhat entrywise."""
        return self.grid.prices * self.predictions.qhat

    def degradation_terms(self) -> np.ndarray:
        """P * delta entrywise (the worst-case revenue loss per unit gamma)."""
        return self.grid.prices * self.uncertainty.delta


@dataclass(frozen=True)
class PriceAssignment:
    """One chosen candidate index per consumer."""

    choice: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.choice)
        if arr.ndim != 1:
            raise InputError("choice must be a 1-d vector of candidate indices")
        if arr.size and not np.issubdtype(arr.dtype, np.integer):
            rounded = np.rint(np.asarray(arr, dtype=float))
            if np.any(rounded != np.asarray(arr, dtype=float)):
                raise InputError("candidate indices must be integers")
            arr = rounded
        arr = arr.astype(np.int64, copy=True)
        if arr.size and arr.min() < 0:
            raise InputError("candidate indices must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "choice", arr)

    def __len__(self) -> int:
        return len(self.choice)


@dataclass(frozen=True)
class AdversaryResponse:
    """Degradation fractions gamma_i in [0, 1] chosen by the inner adversary."""

    gamma: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.gamma, dtype=float)
        if arr.ndim != 1:
            raise InputError("gamma must be a 1-d vector")
        if np.any(arr < 0) or np.any(arr > 1):
            raise InputError("gamma entries must lie in [0, 1]")
        object.__setattr__(self, "gamma", _frozen(arr))


@dataclass(frozen=True)
class DualCertificate:
    """Multipliers (mu per consumer, scalar nu) certifying a worst-case value."""

    mu: np.ndarray
    nu: float

    def __post_init__(self):
        arr = np.asarray(self.mu, dtype=float)
        if arr.ndim != 1 or np.any(arr < 0):
            raise InputError("mu must be a 1-d non-negative vector")
        if self.nu < 0:
            raise InputError("nu must be non-negative")
        object.__setattr__(self, "mu", _frozen(arr))
        object.__setattr__(self, "nu", float(self.nu))


@dataclass(frozen=True)
class SolveReport:
    """What a solver hands back: the assignment plus bookkeeping."""

    assignment: PriceAssignment
    nominal_value: float
    worst_case_value: float
    dual: DualCertificate | None = None
    multipliers: np.ndarray | None = None
    iterations: int = 0
    wall_time: float = 0.0
    feasible: bool = True
    method_tag: str = ""


def _validate_pair(assignment: PriceAssignment, instance: PricingInstance) -> None:
    n, m = instance.grid.shape
    if len(assignment.choice) != n:
        raise InputError(
            f"assignment covers {len(assignment.choice)} consumers, instance has {n}"
        )
    if assignment.choice.size and assignment.choice.max() >= m:
        raise InputError(f"candidate index out of range (grid has {m} candidates)")


def _chosen(matrix: np.ndarray, choice: np.ndarray) -> np.ndarray:
    return matrix[np.arange(len(choice)), choice]


def nominal_objective(assignment: PriceAssignment, instance: PricingInstance) -> float:
    """Expected revenue under the point predictions: sum of P * qhat at the
    chosen candidates."""
    _validate_pair(assignment, instance)
    return float(_chosen(instance.revenue_terms(), assignment.choice).sum())


def worst_case_degradation(costs: np.ndarray, gamma_cap: float) -> tuple[float, np.ndarray]:
    """Solve the adversary's LP for fixed per-consumer costs.

    Maximizes sum(gamma * costs) subject to 0 <= gamma <= 1 and
    sum(gamma) <= gamma_cap.  Since costs >= 0, the optimum sets gamma = 1 on
    the floor(gamma_cap) largest costs and puts the fractional remainder on
    the next one.  Ties are broken toward the lower consumer index.
    """
    n = len(costs)
    cap = min(float(gamma_cap), float(n))
    gamma = np.zeros(n)
    if n == 0 or cap <= 0:
        return 0.0, gamma
    order = np.argsort(-costs, kind="stable")
    whole = int(math.floor(cap))
    gamma[order[:whole]] = 1.0
    frac = cap - whole
    if whole < n and frac > 0:
        gamma[order[whole]] = frac
    return float(np.dot(gamma, costs)), gamma


def worst_case_objective(
    assignment: PriceAssignment, instance: PricingInstance
) -> tuple[float, AdversaryResponse]:
    """Revenue under the adversary's best response to this assignment.

    The inner problem is a linear program over the box-and-budget polytope;
    its optimum is the closed-form greedy solution of
    :func:`worst_case_degradation`.
    """
    _validate_pair(assignment, instance)
    nominal = nominal_objective(assignment, instance)
    costs = _chosen(instance.degradation_terms(), assignment.choice)
    loss, gamma = worst_case_degradation(costs, instance.gamma)
    return nominal - loss, AdversaryResponse(gamma)


def dual_value(
    assignment: PriceAssignment, instance: PricingInstance, nu: float
) -> tuple[float, DualCertificate]:
    """Dual objective of the inner adversary LP at a given nu >= 0.

    For fixed assignment and nu the componentwise-optimal multipliers are
    mu_i = max(0, c_i - nu) with c_i the chosen degradation cost; the value is
    nominal - sum(mu) - gamma_cap * nu.  Maximized over nu (which only needs
    the breakpoints {0} union {c_i}), this equals the worst-case objective.
    """
    if nu < 0:
        raise InputError("nu must be non-negative")
    _validate_pair(assignment, instance)
    nominal = nominal_objective(assignment, instance)
    costs = _chosen(instance.degradation_terms(), assignment.choice)
    mu = np.maximum(costs - nu, 0.0)
    value = nominal - float(mu.sum()) - instance.gamma * nu
    return value, DualCertificate(mu=mu, nu=nu)


def check_feasibility(
    assignment: PriceAssignment, constraints
) -> tuple[bool, np.ndarray]:
    """Evaluate every constraint at the assignment; feasible iff all f_k <= 0."""
    constraints = tuple(constraints)
    if not constraints:
        return True, np.zeros(0)
    values = np.empty(len(constraints))
    for k, con in enumerate(constraints):
        if con.coefficients.shape[0] != len(assignment.choice):
            raise InputError(
                f"constraint {k} has {con.coefficients.shape[0]} rows, "
                f"assignment has {len(assignment.choice)}"
            )
        if assignment.choice.size and assignment.choice.max() >= con.coefficients.shape[1]:
            raise InputError(f"candidate index out of range for constraint {k}")
        values[k] = con.value(assignment.choice)
    return bool(np.all(values <= 0)), values


def nominal_assignment(instance: PricingInstance) -> PriceAssignment:
    """Per-consumer argmax of P * qhat, ignoring uncertainty and constraints.
    Ties go to the lower candidate index."""
    return PriceAssignment(np.argmax(instance.revenue_terms(), axis=1))


def price_change_limit(grid: PriceGrid, fraction: float) -> LinearConstraint:
    """Limit the number of consumers offered an above-average price.

    Marks every candidate strictly above its row's mean price and bounds the
    number of marked picks by ``fraction`` times the number of consumers.
    """
    if not 0 <= fraction <= 1:
        raise InputError("fraction must lie in [0, 1]")
    marks = (grid.prices > grid.prices.mean(axis=1, keepdims=True)).astype(float)
    return LinearConstraint(coefficients=marks, bound=fraction * grid.shape[0])
