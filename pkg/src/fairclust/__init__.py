"""Socially fair (l_p, k)-clustering: LP rounding with at most k + m centers,
conversion to exactly k centers, the filtering baseline, and brute-force
oracles."""
from .convert import (ConversionConfig, MinMaxAssignmentProblem, best_k_subset, convert,
                      convert_with_beta_search, minmax_assign)
from .datasets import DatasetSpec, builtin_spec, load, load_dataset
from .estimator import SociallyFairKClustering
from .filtering import FilteringParams, abv_filtering
from .instance import (CostProfile, Group, Instance, InstanceError, OracleTooLarge,
                       brute_force_opt, evaluate)
from .rounding import PseudoSolution, iterative_round, solve_lp1
from .sparsify import cball_mass, enumerate_instances, fball, is_alpha_sparse

__all__ = [
    "ConversionConfig", "CostProfile", "DatasetSpec", "FilteringParams", "Group", "Instance",
    "InstanceError", "MinMaxAssignmentProblem", "OracleTooLarge", "PseudoSolution",
    "SociallyFairKClustering", "abv_filtering", "best_k_subset", "brute_force_opt",
    "builtin_spec", "cball_mass", "convert", "convert_with_beta_search", "enumerate_instances",
    "evaluate", "fball", "is_alpha_sparse", "iterative_round", "load", "load_dataset",
    "minmax_assign", "solve_lp1",
]
