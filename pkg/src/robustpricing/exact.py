"""Exact solution of the robust price-assignment problem at desk scale.

For a fixed assignment the dual of the adversary's LP is concave and
piecewise linear in the scalar multiplier nu, with kinks only at the values
P[i, j] * delta[i, j].  Sweeping that finite breakpoint set therefore finds a
provably optimal assignment: at each candidate nu the problem decomposes into
independent per-consumer picks (plus, optionally, one 0/1 "price change"
budget handled by a greedy top-k selection).  A brute-force enumerator serves
as the oracle for everything else.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .core import (
    DualCertificate,
    LinearConstraint,
    PriceAssignment,
    PricingInstance,
    SolveReport,
    check_feasibility,
    dual_value,
    nominal_objective,
    worst_case_degradation,
    worst_case_objective,
)
from .errors import CapabilityError, ConfigError, InputError, NoFeasibleSolutionError, SolveTimeout

__all__ = ["ExactConfig", "solve_exact", "brute_force_oracle"]

MODES = ("auto", "breakpoint", "knapsack_dp", "brute_force")
BRUTE_FORCE_LIMIT = 10**6
_CHUNK = 256


@dataclass(frozen=True)
class ExactConfig:
    time_limit: float = 300.0
    mode: str = "auto"

    def __post_init__(self):
        if self.time_limit <= 0:
            raise ConfigError("time_limit must be positive")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")


def _breakpoints(instance: PricingInstance) -> np.ndarray:
    costs = instance.degradation_terms()
    return np.unique(np.concatenate([[0.0], costs.ravel()]))


def _candidate_values(instance: PricingInstance, nu: float) -> np.ndarray:
    """Per-(consumer, candidate) value P*qhat - max(0, P*delta - nu)."""
    return instance.revenue_terms() - np.maximum(instance.degradation_terms() - nu, 0.0)


def _is_knapsack(constraint: LinearConstraint) -> bool:
    return bool(np.all(np.isin(constraint.coefficients, (0.0, 1.0))))


class _Deadline:
    def __init__(self, limit: float):
        self.start = time.perf_counter()
        self.limit = limit

    def check(self, incumbent=None):
        if time.perf_counter() - self.start > self.limit:
            raise SolveTimeout(
                f"exact solve exceeded time limit of {self.limit} s", incumbent=incumbent
            )

    def elapsed(self) -> float:
        return time.perf_counter() - self.start


def _finish(instance: PricingInstance, choice: np.ndarray, nu: float,
            iterations: int, elapsed: float, tag: str) -> SolveReport:
    assignment = PriceAssignment(choice)
    worst, _ = worst_case_objective(assignment, instance)
    _, certificate = dual_value(assignment, instance, nu)
    feasible, _ = check_feasibility(assignment, instance.constraints)
    return SolveReport(
        assignment=assignment,
        nominal_value=nominal_objective(assignment, instance),
        worst_case_value=worst,
        dual=certificate,
        iterations=iterations,
        wall_time=elapsed,
        feasible=feasible,
        method_tag=tag,
    )


def _sweep_unconstrained(instance: PricingInstance, deadline: _Deadline) -> tuple[float, np.ndarray, int]:
    """Best (value, nu) over all breakpoints; ties keep the smallest nu."""
    nus = _breakpoints(instance)
    gamma = instance.gamma
    revenue = instance.revenue_terms()
    costs = instance.degradation_terms()
    best_value = -np.inf
    best_nu = 0.0
    for lo in range(0, len(nus), _CHUNK):
        block = nus[lo : lo + _CHUNK]
        values = revenue[None, :, :] - np.maximum(costs[None, :, :] - block[:, None, None], 0.0)
        totals = values.max(axis=2).sum(axis=1) - gamma * block
        pos = int(np.argmax(totals))
        if totals[pos] > best_value:
            best_value = float(totals[pos])
            best_nu = float(block[pos])
        deadline.check()
    return best_value, best_nu, len(nus)


def solve_exact(instance: PricingInstance, config: ExactConfig = ExactConfig()) -> SolveReport:
    """Provably optimal robust assignment via breakpoint enumeration.

    Supported structures: no constraints; exactly one constraint with 0/1
    coefficients (handled by a per-breakpoint top-k selection that is exact
    for unit weights); anything else falls back to brute force when small
    enough, otherwise raises CapabilityError.  A fractional knapsack bound is
    floored, since 0/1 coefficients cannot use the fractional slack.
    """
    mode = config.mode
    constraints = instance.constraints
    if mode == "auto":
        if not constraints:
            mode = "breakpoint"
        elif len(constraints) == 1 and _is_knapsack(constraints[0]):
            mode = "knapsack_dp"
        elif instance.n_candidates ** instance.n_consumers <= BRUTE_FORCE_LIMIT:
            mode = "brute_force"
        else:
            raise CapabilityError(
                "no exact mode supports this constraint structure at this size"
            )
    if mode == "brute_force":
        return brute_force_oracle(instance)
    if mode == "breakpoint" and constraints:
        raise CapabilityError("breakpoint mode handles unconstrained instances only")
    if mode == "knapsack_dp":
        if len(constraints) != 1 or not _is_knapsack(constraints[0]):
            raise CapabilityError(
                "knapsack_dp mode needs exactly one constraint with 0/1 coefficients"
            )
        return _solve_knapsack(instance, config)
    return _solve_unconstrained(instance, config)


def _solve_unconstrained(instance: PricingInstance, config: ExactConfig) -> SolveReport:
    deadline = _Deadline(config.time_limit)
    if instance.gamma == 0 or float(instance.uncertainty.delta.max(initial=0.0)) == 0.0:
        # The robust problem collapses to the nominal one; skip the sweep so
        # the returned assignment is exactly the nominal argmax.
        choice = np.argmax(instance.revenue_terms(), axis=1)
        nu = float(instance.degradation_terms()[np.arange(len(choice)), choice].max(initial=0.0))
        return _finish(instance, choice, nu, 1, deadline.elapsed(), "exact-breakpoint")
    _, best_nu, n_checked = _sweep_unconstrained(instance, deadline)
    choice = np.argmax(_candidate_values(instance, best_nu), axis=1)
    return _finish(instance, choice, best_nu, n_checked, deadline.elapsed(), "exact-breakpoint")


def _knapsack_pick(values: np.ndarray, marks: np.ndarray, capacity: int) -> np.ndarray:
    """Best per-consumer picks with at most ``capacity`` marked choices.

    ``marks`` is the 0/1 coefficient matrix.  With unit weights the knapsack
    is solved exactly by taking each consumer's best unmarked candidate and
    upgrading the consumers with the largest positive gains to their best
    marked candidate; rows with no unmarked candidate are forced upgrades.
    """
    n = values.shape[0]
    unmarked = marks == 0
    neg_inf = -np.inf
    v0 = np.where(unmarked, values, neg_inf)
    v1 = np.where(~unmarked, values, neg_inf)
    best0 = v0.max(axis=1)
    best1 = v1.max(axis=1)
    forced = ~np.isfinite(best0)
    n_forced = int(forced.sum())
    if n_forced > capacity:
        raise NoFeasibleSolutionError(
            f"{n_forced} consumers have only marked candidates but capacity is {capacity}"
        )
    choice = np.where(forced, np.argmax(v1, axis=1), np.argmax(v0, axis=1))
    remaining = capacity - n_forced
    gains = np.where(~forced & np.isfinite(best1), best1 - best0, neg_inf)
    if remaining > 0:
        order = np.argsort(-gains, kind="stable")[:remaining]
        upgrade = order[gains[order] > 0]
        choice[upgrade] = np.argmax(v1[upgrade], axis=1)
    return choice


def _knapsack_totals(values: np.ndarray, marks: np.ndarray, capacity: int) -> np.ndarray:
    """Optimal knapsack objective for a stack of value matrices (B, I, J)."""
    unmarked = marks == 0
    v0 = np.where(unmarked[None, :, :], values, -np.inf)
    v1 = np.where(~unmarked[None, :, :], values, -np.inf)
    best0 = v0.max(axis=2)
    best1 = v1.max(axis=2)
    forced = ~np.isfinite(best0)
    base = np.where(forced, best1, best0).sum(axis=1)
    n_forced = int(forced[0].sum())
    remaining = capacity - n_forced
    gains = np.where(~forced & np.isfinite(best1), best1 - best0, -np.inf)
    gains = np.maximum(gains, 0.0)
    if remaining > 0:
        top = np.sort(gains, axis=1)[:, ::-1][:, :remaining]
        base = base + top.sum(axis=1)
    return base


def _solve_knapsack(instance: PricingInstance, config: ExactConfig) -> SolveReport:
    deadline = _Deadline(config.time_limit)
    constraint = instance.constraints[0]
    if constraint.bound < 0:
        raise NoFeasibleSolutionError("knapsack bound is negative; nothing is feasible")
    capacity = int(math.floor(constraint.bound))
    marks = constraint.coefficients
    forced = int(np.all(marks == 1, axis=1).sum())
    if forced > capacity:
        raise NoFeasibleSolutionError(
            f"{forced} consumers have only marked candidates but capacity is {capacity}"
        )
    if instance.gamma == 0 or float(instance.uncertainty.delta.max(initial=0.0)) == 0.0:
        choice = _knapsack_pick(instance.revenue_terms(), marks, capacity)
        nu = float(instance.degradation_terms()[np.arange(len(choice)), choice].max(initial=0.0))
        return _finish(instance, choice, nu, 1, deadline.elapsed(), "exact-knapsack")

    nus = _breakpoints(instance)
    gamma = instance.gamma
    revenue = instance.revenue_terms()
    costs = instance.degradation_terms()
    best_value = -np.inf
    best_nu = 0.0
    for lo in range(0, len(nus), _CHUNK):
        block = nus[lo : lo + _CHUNK]
        values = revenue[None, :, :] - np.maximum(costs[None, :, :] - block[:, None, None], 0.0)
        totals = _knapsack_totals(values, marks, capacity) - gamma * block
        pos = int(np.argmax(totals))
        if totals[pos] > best_value:
            best_value = float(totals[pos])
            best_nu = float(block[pos])
        deadline.check()
    choice = _knapsack_pick(_candidate_values(instance, best_nu), marks, capacity)
    return _finish(instance, choice, best_nu, len(nus), deadline.elapsed(), "exact-knapsack")


def brute_force_oracle(instance: PricingInstance) -> SolveReport:
    """Enumerate every assignment, keep the feasible worst-case maximizer.

    Only meant for oracle-sized instances: requires |J| ** |I| <= 1e6.
    """
    n, m = instance.grid.shape
    total = m**n
    if total > BRUTE_FORCE_LIMIT:
        raise CapabilityError(f"brute force would enumerate {total} assignments")
    start = time.perf_counter()
    if n == 0:
        return _finish(instance, np.zeros(0, dtype=int), 0.0, 1, time.perf_counter() - start,
                       "brute-force")
    choices = np.indices((m,) * n).reshape(n, -1).T  # (m**n, n)
    rows = np.arange(n)
    feasible_mask = np.ones(total, dtype=bool)
    for constraint in instance.constraints:
        totals = constraint.coefficients[rows, choices].sum(axis=1)
        feasible_mask &= totals <= constraint.bound
    if not feasible_mask.any():
        raise NoFeasibleSolutionError("every assignment violates the constraints")
    choices = choices[feasible_mask]
    nominal = instance.revenue_terms()[rows, choices].sum(axis=1)
    costs = instance.degradation_terms()[rows, choices]
    cap = instance.gamma
    whole = int(math.floor(cap))
    frac = cap - whole
    ordered = np.sort(costs, axis=1)[:, ::-1]
    loss = ordered[:, :whole].sum(axis=1)
    if whole < n and frac > 0:
        loss = loss + frac * ordered[:, whole]
    values = nominal - loss
    best = int(np.argmax(values))
    choice = choices[best]
    # Certificate: the dual maximized over the chosen assignment's breakpoints.
    chosen_costs = instance.degradation_terms()[rows, choice]
    candidates = np.unique(np.concatenate([[0.0], chosen_costs]))
    assignment = PriceAssignment(choice)
    best_nu = max(candidates, key=lambda v: dual_value(assignment, instance, float(v))[0])
    return _finish(instance, choice, float(best_nu), len(values),
                   time.perf_counter() - start, "brute-force")
