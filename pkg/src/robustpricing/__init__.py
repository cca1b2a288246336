"""Robust personalized pricing under purchase-probability uncertainty.

A numpy/scipy library that trains a purchase-probability model, estimates
per-(consumer, price) prediction uncertainty by bootstrap, and assigns one
price per consumer so that revenue is protected against an adversary who may
degrade up to a budgeted number of predictions.  Includes an exact solver
(breakpoint enumeration), a scalable Lagrangian decomposition heuristic with
golden-section line search, synthetic probit demand models for counterfactual
evaluation, and a config-driven experiment harness.
"""

from .boosting import LabeledDataset, ProbabilityModel, TrainConfig, auc, predict_grid, train
from .bootstrap import (
    BootstrapConfig,
    UncertaintyEstimate,
    ensemble_stats,
    estimate_uncertainty,
    resample,
)
from .core import (
    AdversaryResponse,
    DualCertificate,
    LinearConstraint,
    PriceAssignment,
    PriceGrid,
    PredictionMatrix,
    PricingInstance,
    RobustBudget,
    SolveReport,
    UncertaintyMatrix,
    check_feasibility,
    dual_value,
    nominal_assignment,
    nominal_objective,
    price_change_limit,
    worst_case_objective,
)
from .errors import (
    CapabilityError,
    ConfigError,
    InputError,
    MetricUndefinedError,
    NoFeasibleSolutionError,
    PricingError,
    SolveTimeout,
)
from .exact import ExactConfig, brute_force_oracle, solve_exact
from .experiments import DatasetSource, ExperimentConfig, run_experiment
from .ingestion import TransactionSchema, load_dataset_csv
from .lagrangian import (
    GOLDEN_RATIO,
    HeuristicConfig,
    LagrangianState,
    consumer_subproblem,
    golden_section_search,
    heuristic_solve,
    relaxation_value,
    update_multipliers,
)
from .synthetic import (
    GeneratorSpec,
    PolicyEvaluation,
    candidate_prices,
    evaluate_policy,
    expected_revenue_at,
    generate_dataset,
    make_generator,
    optimal_assignment,
    true_purchase_probability,
)

__version__ = "0.1.0"
