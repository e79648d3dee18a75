"""Robustness certification of LSTM-family classifiers against programmable
string perturbations, via memoized prefix states and interval bounds."""

from .cert import (
    CertResult,
    SpaceTooLargeError,
    abstract_final,
    attack_search,
    certify,
    concrete_final,
    concrete_states,
    exhaustive_check,
    feasible_length,
    prefix_hulls,
)
from .interval import Box, Interval, alpha, arith, contains, join, matvec, monotone
from .model import ModelBundle, gen_random, load, save
from .perturbation import (
    PerturbationSpace,
    Transformation,
    decompose,
    enumerate_space,
    iter_space,
    reduce,
    space_metrics,
    subtract,
)
from .tree import Tree, certify_tree, enumerate_trees, parse_tree, tree_abstract_final

__version__ = "0.1.0"

__all__ = [
    "Box",
    "CertResult",
    "Interval",
    "ModelBundle",
    "PerturbationSpace",
    "SpaceTooLargeError",
    "Transformation",
    "Tree",
    "abstract_final",
    "alpha",
    "arith",
    "attack_search",
    "certify",
    "certify_tree",
    "concrete_final",
    "concrete_states",
    "contains",
    "decompose",
    "enumerate_space",
    "enumerate_trees",
    "exhaustive_check",
    "feasible_length",
    "gen_random",
    "iter_space",
    "join",
    "load",
    "matvec",
    "monotone",
    "parse_tree",
    "prefix_hulls",
    "reduce",
    "save",
    "space_metrics",
    "subtract",
    "tree_abstract_final",
]
