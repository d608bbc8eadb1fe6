"""Selfish routing under bounded latency deviations.

Equilibrium computation, inducibility checks, worst-case cost-ratio
bounds, and generators for the instance families that attain them.
"""
from .core import (Arc, Commodity, Curve, Deviation, Flow, Instance,
                   ThresholdPair, enumerate_paths, path_latency, social_cost,
                   validate_deviation)
from .equilibrium import (EquilibriumResult, SolverConfig, relative_gap,
                          verify_nash, wardrop, worst_equilibrium_cost)
from .inducibility import (AuxGraph, build_aux_graph, check_path_inequalities,
                           is_inducible, oracle_inducible, recover_deviation)
from .alternating import (AltPathTree, XZPartition, bound_alpha_beta,
                          bound_general, build_alt_path_tree,
                          normalize_thresholds, partition_xz)
from .bounds import (SmoothnessQuery, bpoa_bound, bpoa_dr_gap,
                     heterogeneous_bound, mu_hat, path_deviation_bound,
                     pra_bound, pra_lower_even, stability_bound)
from .generators import (GeneratedCase, braess, braess_even, braess_odd,
                         fibonacci, hamiltonian_reduction,
                         remark_b1_counterexample, smoothness_tight,
                         smoothness_tight_best)
from .search import best_deviation, empirical_dr, worst_deviation
from . import errors

__all__ = [
    "Arc", "Commodity", "Curve", "Deviation", "Flow", "Instance",
    "ThresholdPair", "enumerate_paths", "path_latency", "social_cost",
    "validate_deviation",
    "EquilibriumResult", "SolverConfig", "relative_gap", "verify_nash",
    "wardrop", "worst_equilibrium_cost",
    "AuxGraph", "build_aux_graph", "check_path_inequalities", "is_inducible",
    "oracle_inducible", "recover_deviation",
    "AltPathTree", "XZPartition", "bound_alpha_beta", "bound_general",
    "build_alt_path_tree", "normalize_thresholds", "partition_xz",
    "SmoothnessQuery", "bpoa_bound", "bpoa_dr_gap", "heterogeneous_bound",
    "mu_hat", "path_deviation_bound", "pra_bound", "pra_lower_even",
    "stability_bound",
    "GeneratedCase", "braess", "braess_even", "braess_odd", "fibonacci",
    "hamiltonian_reduction", "remark_b1_counterexample", "smoothness_tight",
    "smoothness_tight_best",
    "best_deviation", "empirical_dr", "worst_deviation",
    "errors",
]

__version__ = "0.1.0"
