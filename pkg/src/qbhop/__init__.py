"""Quantum basin hopping: Grover statevector simulation, three-region
analytics, and the outer-loop hopper with classical baselines."""
from .analytics import (
    GroverAngles, OutOfRegimeError, RegionCounts, SubspaceState, angles_from_counts,
    closed_form_state, gamma_amplitude_lower_bound, optimal_rotation_count, recurrence_state,
    simplified_lower_bound,
)
from .hopper import (
    BasinProblem, HopperConfig, RunRecord, make_problem, multistart_baseline,
    pure_random_search_baseline, quantum_basin_hop,
)
from .kernels import BACKEND
from .localsearch import DescentConfig, ErrorModel, RegionPartition, classify_regions, descend
from .objective import BoxDomain, DomainGrid, ObjectiveSpec, OrdinateEncoding, evaluate, gradient
from .simulator import GbsConfig, OracleSpec, build_oracle, grover_iteration, perturbation_experiment, run_gbs

__version__ = "0.1.0"
