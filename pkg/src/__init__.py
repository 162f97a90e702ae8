"""
splitting-kit - invariant manifolds and exponential splittings for u' = A(t)u + f(t, u)

Contains the graph-transform solvers, splitting certification, roughness and
fine-structure tools, and the localized-large-diffusion parabolic application.
"""

__version__ = "0.1.0"

from .core import Generator, Nonlinearity, StateVector, TimeGrid, Trajectory, propagate_linear, propagate_semilinear
from .dichotomy import SplittingCertificate, estimate_splitting, nestedness_check, verify_splitting
from .errors import (
    BlowUpError,
    ContractionError,
    DegenerateGapError,
    GapConditionError,
    NestednessError,
    OutOfGridError,
    PullbackError,
    ResidualError,
    ScenarioError,
    SplittingKitError,
)
from .fine_structure import NestedManifolds, build_nested, tangency_ratio
from .graph_field import GraphField, eval_graph
from .graph_transform import (
    GridSpec,
    asymptotic_phase,
    project_sigma,
    project_theta,
    saddle_point,
    solve_sigma,
    solve_theta,
    verify_rates,
)
from .ledger import ConstantsLedger, constants_ledger, gap_condition
from .nonlinear import cutoff, shift_to_solution
from .roughness import PerturbedDichotomy, certify_perturbed, linear_graphs, perturbation_bound, perturbed_projection
from .scenario import Scenario

__all__ = [
    "__version__",
    # numerics
    "Generator",
    "Nonlinearity",
    "StateVector",
    "TimeGrid",
    "Trajectory",
    "GraphField",
    "propagate_linear",
    "propagate_semilinear",
    "eval_graph",
    # splittings
    "SplittingCertificate",
    "estimate_splitting",
    "verify_splitting",
    "nestedness_check",
    # graph transform
    "ConstantsLedger",
    "GridSpec",
    "gap_condition",
    "constants_ledger",
    "cutoff",
    "shift_to_solution",
    "solve_sigma",
    "solve_theta",
    "project_sigma",
    "project_theta",
    "asymptotic_phase",
    "saddle_point",
    "verify_rates",
    # roughness
    "PerturbedDichotomy",
    "perturbation_bound",
    "linear_graphs",
    "perturbed_projection",
    "certify_perturbed",
    # fine structure
    "NestedManifolds",
    "build_nested",
    "tangency_ratio",
    # scenarios
    "Scenario",
    # errors
    "SplittingKitError",
    "ScenarioError",
    "OutOfGridError",
    "GapConditionError",
    "DegenerateGapError",
    "ContractionError",
    "BlowUpError",
    "NestednessError",
    "PullbackError",
    "ResidualError",
]
