"""Certainty-equivalent control of finite POMDPs with exact sub-optimality checks."""

from .abstraction import Abstraction, build_abstract_mdp
from .bounds import (BoundReport, BoundViolation, ais_residuals, ce_policy, compute_eta,
                     corollary_gap, explain, abstract_kernel_check, theorem_bound, verify_theorem)
from .estimators import Estimator
from .mdp import Mdp, backward_induction, evaluate_markov_policy
from .moduli import Modulus, fit_moduli
from .pomdp import HistoryTree, Pomdp, evaluate_history_policy, optimal_value
from .spaces import MetricSpace, StructureError, validate_metric
from .transport import w1

__all__ = [
    "Abstraction", "BoundReport", "BoundViolation", "Estimator", "HistoryTree", "Mdp",
    "MetricSpace", "Modulus", "Pomdp", "StructureError", "ais_residuals", "backward_induction",
    "build_abstract_mdp", "ce_policy", "compute_eta", "corollary_gap", "evaluate_history_policy",
    "evaluate_markov_policy", "explain", "fit_moduli", "abstract_kernel_check", "optimal_value",
    "theorem_bound", "validate_metric", "verify_theorem", "w1",
]
