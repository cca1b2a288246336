"""Scalable heuristic: Lagrangian relaxation plus golden-section line search.

Side constraints are priced into the objective with multipliers lambda >= 0
updated by a projected subgradient rule with diminishing steps.  With the
constraints relaxed and the scalar dual variable nu fixed, the problem splits
into independent per-consumer picks, so each candidate nu costs one O(I*J)
sweep; nu itself is chosen by a golden-section search over
[0, max(P * delta)].  The best feasible iterate encountered is returned.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass

import numpy as np

from .core import (
    LinearConstraint,
    PriceAssignment,
    PricingInstance,
    SolveReport,
    check_feasibility,
    dual_value,
    nominal_objective,
    worst_case_objective,
)
from .errors import CapabilityError, ConfigError, InputError

__all__ = [
    "GOLDEN_RATIO",
    "LagrangianState",
    "HeuristicConfig",
    "golden_section_search",
    "consumer_subproblem",
    "update_multipliers",
    "heuristic_solve",
    "relaxation_value",
]

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class HeuristicConfig:
    eps_primal: float = 0.01
    eps_golden: float = 0.01
    max_iterations: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.eps_primal <= 0 or self.eps_golden <= 0:
            raise ConfigError("tolerances must be positive")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")


@dataclass(frozen=True)
class LagrangianState:
    """Snapshot of one subgradient iteration."""

    multipliers: np.ndarray
    step: float
    iteration: int
    rho: float
    subgradient: np.ndarray


def golden_section_search(objective, lower: float, upper: float, eps: float,
                          *, return_iterations: bool = False):
    """Maximize a scalar function on [lower, upper] by golden-section search.

    Shrinks the bracket by 1/phi per iteration until its width drops below
    ``eps`` and returns the midpoint.  The two interior probes are seeded once
    and one of them is inherited on every shrink, so a search that runs n
    iterations costs n + 1 objective evaluations.  Exact for unimodal
    objectives; used heuristically otherwise.
    """
    if upper < lower:
        raise InputError("upper must be >= lower")
    if eps <= 0:
        raise InputError("eps must be positive")
    a, b = float(lower), float(upper)
    iterations = 0
    c = b - (b - a) / GOLDEN_RATIO
    d = a + (b - a) / GOLDEN_RATIO
    fc = fd = None
    while abs(b - a) >= eps:
        if fc is None:
            fc = objective(c)
        if fd is None:
            fd = objective(d)
        if fc < fd:
            a = c
            c = b - (b - a) / GOLDEN_RATIO
            d = a + (b - a) / GOLDEN_RATIO
            fc = fd  # the new c lands where d used to be
            fd = None
        else:
            b = d
            c = b - (b - a) / GOLDEN_RATIO
            d = a + (b - a) / GOLDEN_RATIO
            fd = fc  # the new d lands where c used to be
            fc = None
        iterations += 1
    mid = 0.5 * (a + b)
    if return_iterations:
        return mid, iterations
    return mid


def _penalty_matrix(instance: PricingInstance, multipliers: np.ndarray) -> np.ndarray:
    penalty = np.zeros(instance.grid.shape)
    for lam, constraint in zip(multipliers, instance.constraints):
        if lam != 0.0:
            penalty += lam * constraint.coefficients
    return penalty


def _penalty_offset(instance: PricingInstance, multipliers: np.ndarray) -> float:
    """Constant part of the priced constraints: sum of lambda_k * bound_k.
    It never moves any argmax but belongs in the relaxation value."""
    return float(sum(lam * con.bound for lam, con in zip(multipliers, instance.constraints)))


def _scores(instance: PricingInstance, nu: float, penalty: np.ndarray) -> np.ndarray:
    mu = np.maximum(instance.degradation_terms() - nu, 0.0)
    return instance.revenue_terms() - mu - penalty


def _relaxed_total(instance: PricingInstance, nu: float, penalty: np.ndarray,
                   offset: float = 0.0) -> float:
    """Relaxation objective at fixed nu: per-consumer maxima minus gamma*nu."""
    return float(_scores(instance, nu, penalty).max(axis=1).sum() - instance.gamma * nu + offset)


def consumer_subproblem(
    i: int, nu: float, multipliers: np.ndarray, instance: PricingInstance
) -> tuple[int, float, float]:
    """Best candidate for consumer i at fixed nu and multipliers.

    Scores each candidate as P*qhat - max(0, P*delta - nu) minus the priced
    constraint coefficients, and returns (argmax index, its mu, the score
    minus this consumer's uniform share gamma*nu/I).  Ties go to the lower
    candidate index.
    """
    if nu < 0:
        raise InputError("nu must be non-negative")
    multipliers = np.asarray(multipliers, dtype=float)
    if len(multipliers) != len(instance.constraints):
        raise InputError("one multiplier per constraint is required")
    if np.any(multipliers < 0):
        raise InputError("multipliers must be non-negative")
    prices = instance.grid.prices[i]
    mu = np.maximum(prices * instance.uncertainty.delta[i] - nu, 0.0)
    scores = prices * instance.predictions.qhat[i] - mu
    for lam, constraint in zip(multipliers, instance.constraints):
        scores = scores - lam * constraint.coefficients[i]
    j = int(np.argmax(scores))
    share = instance.gamma * nu / instance.n_consumers if instance.n_consumers else 0.0
    return j, float(mu[j]), float(scores[j] - share)


def update_multipliers(state: LagrangianState, f_values: np.ndarray) -> np.ndarray:
    """Projected subgradient step: max(lambda + step * f, 0) componentwise."""
    return np.maximum(state.multipliers + state.step * np.asarray(f_values, dtype=float), 0.0)


def heuristic_solve(
    instance: PricingInstance,
    config: HeuristicConfig = HeuristicConfig(),
    trace=None,
) -> SolveReport:
    """Lagrangian decomposition with golden-section search over nu.

    Per iteration: pick nu on [0, max(P*delta)] (when the budget is zero the
    relaxation objective is non-decreasing in nu, so the interval's top is
    optimal and the search is skipped), assemble the per-consumer argmax
    assignment, and update the multipliers from the constraint violations
    with step 1 / (||subgradient|| * sqrt(t)).  Stops when the subgradient
    norm divided by t falls below eps_primal at a feasible iterate, or after
    max_iterations.  Returns the best feasible iterate found by worst-case
    value; if none was found the last iterate is returned with
    feasible=False.

    ``trace``, if given, is a path that receives one CSV row per iteration:
    t, nu, rho, subgradient norm, feasible flag.
    """
    for constraint in instance.constraints:
        if not isinstance(constraint, LinearConstraint):
            raise CapabilityError("only additive per-consumer constraints are supported")
    start = time.perf_counter()
    n_constraints = len(instance.constraints)
    multipliers = np.zeros(n_constraints)
    upper = float(instance.degradation_terms().max(initial=0.0))
    skip_search = instance.gamma == 0.0 or upper == 0.0

    best = None  # (worst_case, nominal, assignment, multipliers, nu)
    last = None
    trace_rows = []
    t = 1
    while True:
        penalty = _penalty_matrix(instance, multipliers)
        offset = _penalty_offset(instance, multipliers)
        if skip_search:
            nu = upper
        else:
            nu = golden_section_search(
                lambda v: _relaxed_total(instance, v, penalty), 0.0, upper, config.eps_golden
            )
        scores = _scores(instance, nu, penalty)
        choice = np.argmax(scores, axis=1)
        rho = float(scores.max(axis=1).sum() - instance.gamma * nu + offset)
        assignment = PriceAssignment(choice)
        feasible, f_values = check_feasibility(assignment, instance.constraints)
        subgradient = -f_values
        norm = float(np.linalg.norm(subgradient))
        last = (assignment, multipliers.copy(), nu)
        if feasible:
            worst, _ = worst_case_objective(assignment, instance)
            if best is None or worst > best[0]:
                best = (worst, nominal_objective(assignment, instance),
                        assignment, multipliers.copy(), nu)
        if trace is not None:
            trace_rows.append((t, nu, rho, norm, feasible))
        if (norm / t < config.eps_primal and feasible) or t >= config.max_iterations:
            break
        step = 1.0 / (norm * math.sqrt(t))
        state = LagrangianState(
            multipliers=multipliers, step=step, iteration=t, rho=rho, subgradient=subgradient
        )
        multipliers = update_multipliers(state, f_values)
        t += 1

    if trace is not None:
        with open(trace, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "nu", "rho", "subgradient_norm", "feasible"])
            for row in trace_rows:
                writer.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3]), int(row[4])])

    elapsed = time.perf_counter() - start
    if best is not None:
        worst, nominal, assignment, lam, nu = best
        _, certificate = dual_value(assignment, instance, nu)
        return SolveReport(
            assignment=assignment,
            nominal_value=nominal,
            worst_case_value=worst,
            dual=certificate,
            multipliers=lam,
            iterations=t,
            wall_time=elapsed,
            feasible=True,
            method_tag="lagrangian",
        )
    assignment, lam, nu = last
    worst, _ = worst_case_objective(assignment, instance)
    _, certificate = dual_value(assignment, instance, nu)
    return SolveReport(
        assignment=assignment,
        nominal_value=nominal_objective(assignment, instance),
        worst_case_value=worst,
        dual=certificate,
        multipliers=lam,
        iterations=t,
        wall_time=elapsed,
        feasible=False,
        method_tag="lagrangian",
    )


def relaxation_value(instance: PricingInstance, multipliers: np.ndarray) -> float:
    """Exact value of the relaxation at fixed multipliers.

    The relaxation objective is piecewise linear in nu with kinks only at the
    values P * delta, so maximizing over that finite set (plus zero) is
    exact.  This upper-bounds the optimum of the constrained problem for any
    multipliers >= 0.  Cost grows with (I*J)^2; intended for small instances
    and tests.
    """
    multipliers = np.asarray(multipliers, dtype=float)
    penalty = _penalty_matrix(instance, multipliers)
    offset = _penalty_offset(instance, multipliers)
    candidates = np.unique(np.concatenate([[0.0], instance.degradation_terms().ravel()]))
    return max(_relaxed_total(instance, float(nu), penalty, offset) for nu in candidates)
