"""Shared-spectrum simulator and resource-allocation toolkit.

Two layers:

* operator-level sharing of a common subcarrier grid (:mod:`.interop`),
  with channel models in :mod:`.channel`;
* per-operator delay-constrained subcarrier and power allocation
  (:mod:`.intraop`), solved exactly by branch-and-bound over a convex
  relaxation and cross-checked by an exhaustive oracle.

:mod:`.harness` and :mod:`.cli` wrap both layers in reproducible
experiments.
"""

from .channel import (ChannelProfile, ChannelRealization, GridSpec, build_grid,
                      default_profile, sample_channel, subcarrier_rate)
from .interop import (ActivePriorities, Allocation, DemandReport,
                      FragmentationError, SharingPolicy, active_priorities,
                      allocate_fragments, allocate_subcarrier_gain,
                      compute_demand, min_fragment_from_guardband,
                      operator_throughput)
from .intraop import (InfeasibleProblem, IntraInstance, IntraSolution,
                      SolutionReport, SolverError, branch_and_bound,
                      build_instance, check_solution, linearize,
                      oracle_exhaustive, oracle_power_split, solve_relaxation,
                      waterfill_max_rate, waterfill_min_power)

__version__ = "0.1.0"

__all__ = [
    "ChannelProfile", "ChannelRealization", "GridSpec", "build_grid",
    "default_profile", "sample_channel", "subcarrier_rate",
    "ActivePriorities", "Allocation", "DemandReport", "FragmentationError",
    "SharingPolicy", "active_priorities", "allocate_fragments",
    "allocate_subcarrier_gain", "compute_demand", "min_fragment_from_guardband",
    "operator_throughput",
    "InfeasibleProblem", "IntraInstance", "IntraSolution", "SolutionReport",
    "SolverError", "branch_and_bound", "build_instance", "check_solution",
    "linearize", "oracle_exhaustive", "oracle_power_split", "solve_relaxation",
    "waterfill_max_rate", "waterfill_min_power",
    "__version__",
]
