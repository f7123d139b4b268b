"""Delay-constrained resource allocation inside one operator's spectrum."""

from .bnb import branch_and_bound
from .checks import SolutionReport, check_solution
from .model import ConvexMIModel, linearize
from .oracle import AssignmentSplit, oracle_exhaustive, oracle_power_split
from .problem import (InfeasibleProblem, IntraInstance, IntraSolution, SolverError,
                      SolverStats, build_instance, make_solution, ndc_sum_rate)
from .relax import FREE, RelaxedSolution, solve_relaxation
from .waterfill import waterfill_max_rate, waterfill_min_power

__all__ = [
    "AssignmentSplit",
    "ConvexMIModel",
    "FREE",
    "InfeasibleProblem",
    "IntraInstance",
    "IntraSolution",
    "RelaxedSolution",
    "SolutionReport",
    "SolverError",
    "SolverStats",
    "branch_and_bound",
    "build_instance",
    "check_solution",
    "linearize",
    "make_solution",
    "ndc_sum_rate",
    "oracle_exhaustive",
    "oracle_power_split",
    "solve_relaxation",
    "waterfill_max_rate",
    "waterfill_min_power",
]
