"""Constraint-based causal discovery with Shapley-value collider orientation."""

from .bif import DiscreteBayesNet, load_network, parse_bif, read_bif, sample_bn
from .citest import DSeparationOracle, FisherZ, PValueCache
from .graph import Dag, MixedGraph, build_dag, d_separated, dag_to_cpdag, meek_closure
from .metrics import evaluate, shd, sid
from .pc import PcRunResult, run_pc, skeleton_search
from .shapley import DecisionRule, SpcConfig, shapley_weight, siv, spc_decide
from .simulate import er_dag, simulate, standardize

__version__ = "0.1.0"

__all__ = [
    "Dag",
    "DecisionRule",
    "DiscreteBayesNet",
    "DSeparationOracle",
    "FisherZ",
    "MixedGraph",
    "PValueCache",
    "PcRunResult",
    "SpcConfig",
    "build_dag",
    "d_separated",
    "dag_to_cpdag",
    "er_dag",
    "evaluate",
    "load_network",
    "meek_closure",
    "parse_bif",
    "read_bif",
    "run_pc",
    "sample_bn",
    "shapley_weight",
    "shd",
    "sid",
    "simulate",
    "siv",
    "skeleton_search",
    "spc_decide",
    "standardize",
]
