"""Bounded-rational decision policies via soft, KL-regularized optimization.

The package solves finite decision problems where deviating from a default
policy has an information price: policies maximize expected utility minus a
temperature-weighted relative-entropy cost. The closed-form solutions are
exponentially tilted priors; their temperature limits recover the familiar
special cases (plain expected-utility maximization, risk-sensitive
certainty-equivalent choice, and worst-case minimax control), and the same
backup generalizes to finite decision trees with a soft value recursion
whose hard-max limit is the classic dynamic-programming recursion.
"""

from .model import (
    ARGMAX_TIE_TOL,
    NORMALIZATION_TOL,
    CyclicTree,
    DecisionTree,
    DomainError,
    DuplicateLabel,
    EmptySupport,
    FiniteDistribution,
    FreeUtilError,
    LabelMismatch,
    NegativeProbability,
    NotNormalized,
    SupportMismatch,
    Temperature,
    TemperatureSpec,
    TooLarge,
    TooManyOutcomes,
    TooManyPaths,
    TreeNode,
    TwoStageProblem,
    ControlProblem,
    UnknownAction,
    UnknownTemperatureTag,
    UnsupportedRegime,
    UtilityTable,
    entropy,
    expectation,
    kl_divergence,
    validate,
)
from .variational import (
    FreeUtilityReport,
    TiltResult,
    bounded_control,
    estimation_solution,
    exponential_tilt,
    free_utility,
    free_utility_difference,
    gibbs_measure,
    information_work,
    prob_from_utility_gain,
    utility_gain_from_prob,
)
from .sequential import (
    TreeValue,
    TwoStageSolution,
    bellman_backup,
    certainty_equivalent,
    inner_policy,
    minimax_solve,
    outer_policy,
    regime_label,
    risk_sensitive_argmax,
    solve_regime,
    taylor_ce_approx,
    two_stage_to_tree,
    value_recursion,
)
from .oracle import (
    OracleResult,
    enumerate_minimax,
    exhaustive_two_stage,
    path_enumeration,
    simplex_grid_search,
    two_stage_objective,
)
from .problemio import ProblemFile, dump, dumps, load, loads
from .verify import Certificate, run_suite, suite_names

__version__ = "0.1.0"

__all__ = [
    "ARGMAX_TIE_TOL",
    "NORMALIZATION_TOL",
    "Certificate",
    "ControlProblem",
    "CyclicTree",
    "DecisionTree",
    "DomainError",
    "DuplicateLabel",
    "EmptySupport",
    "FiniteDistribution",
    "FreeUtilError",
    "FreeUtilityReport",
    "LabelMismatch",
    "NegativeProbability",
    "NotNormalized",
    "OracleResult",
    "ProblemFile",
    "SupportMismatch",
    "Temperature",
    "TemperatureSpec",
    "TiltResult",
    "TooLarge",
    "TooManyOutcomes",
    "TooManyPaths",
    "TreeNode",
    "TreeValue",
    "TwoStageProblem",
    "TwoStageSolution",
    "UnknownAction",
    "UnknownTemperatureTag",
    "UnsupportedRegime",
    "UtilityTable",
    "bellman_backup",
    "bounded_control",
    "certainty_equivalent",
    "dump",
    "dumps",
    "entropy",
    "enumerate_minimax",
    "estimation_solution",
    "exhaustive_two_stage",
    "expectation",
    "exponential_tilt",
    "free_utility",
    "free_utility_difference",
    "gibbs_measure",
    "information_work",
    "inner_policy",
    "kl_divergence",
    "load",
    "loads",
    "minimax_solve",
    "outer_policy",
    "path_enumeration",
    "prob_from_utility_gain",
    "regime_label",
    "risk_sensitive_argmax",
    "run_suite",
    "simplex_grid_search",
    "solve_regime",
    "suite_names",
    "taylor_ce_approx",
    "two_stage_objective",
    "two_stage_to_tree",
    "utility_gain_from_prob",
    "validate",
    "value_recursion",
]
