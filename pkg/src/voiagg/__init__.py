"""Value-of-information aggregation of finite Markov chains.

A chain with transition matrix ``pi`` and stationary law ``gamma`` is reduced
to a smaller chain by a soft partition ``psi`` of its states, chosen to trade
the expected Kullback-Leibler distortion of the reduced model against the
mutual information between original and aggregated states.
"""

from __future__ import annotations

from .annealing import (
    CriticalBetaResult,
    SweepConfig,
    SweepReport,
    anneal,
    corrected_beta,
    find_critical_beta,
    split_bootstrap,
    stability_min_eig,
    sweep,
)
from .chain import (
    NcdSpec,
    StationaryDistribution,
    TransitionModel,
    generate_ncd,
    random_chain_from_limit,
    stationary,
    validate,
)
from .distortion import EnergyBreakdown, free_energy, mutual_information
from .errors import VoiError
from .joint import aggregate, lifting, reduce_chain, weight_matrix
from .ncd import block_aggregate, stationary_error_experiment
from .oracle import best_binary, enumerate_partitions
from .partition import (
    BinaryPartition,
    ProbabilisticPartition,
    coincident_columns,
    harden,
    permutation_equivalent,
)
from .solver import SolveReport, SolverConfig, solve

__version__ = "0.1.0"

__all__ = [
    "BinaryPartition",
    "CriticalBetaResult",
    "EnergyBreakdown",
    "NcdSpec",
    "ProbabilisticPartition",
    "SolveReport",
    "SolverConfig",
    "StationaryDistribution",
    "SweepConfig",
    "SweepReport",
    "TransitionModel",
    "VoiError",
    "aggregate",
    "anneal",
    "best_binary",
    "block_aggregate",
    "coincident_columns",
    "corrected_beta",
    "enumerate_partitions",
    "find_critical_beta",
    "free_energy",
    "generate_ncd",
    "harden",
    "lifting",
    "mutual_information",
    "permutation_equivalent",
    "random_chain_from_limit",
    "reduce_chain",
    "solve",
    "split_bootstrap",
    "stability_min_eig",
    "stationary",
    "stationary_error_experiment",
    "sweep",
    "validate",
    "weight_matrix",
]
