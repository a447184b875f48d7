"""Stochastic incremental ADMM with gradient coding for decentralised least squares."""

from .admm import (HyperParams, Trace, run_csi_admm, run_dgd, run_extra, run_si_admm,
                   validate_params)
from .coding import EncodingPlan, build_encoding_matrix, decode, encode
from .data import Dataset, allocate, parse_libsvm, split_across_agents, synthesize_least_squares
from .experiments import RunConfig, build_setup, parse_config, run_experiment
from .metrics import relative_accuracy, solve_reference
from .simkernel import LatencyModel
from .topology import Graph, generate_graph, hamiltonian_cycle, shortest_path_cycle

__version__ = "0.1.0"
