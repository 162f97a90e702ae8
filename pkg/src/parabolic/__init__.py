"""Scalar parabolic problem with localized large diffusion and its two-mode reductions."""

from .diffusion import DiffusionProfile, build_diffusion
from .galerkin import InertialReduction, ReducedSystem, galerkin_project, inertial_reduction, refinement_gap
from .hyperbolic import HyperbolicCandidate, HyperbolicityReport, find_hyperbolic_solutions, verify_hyperbolicity
from .limiting import Coupling, limiting_systems
from .reaction import BetaProfile, CubicReaction
from .spectrum import Spectrum, eigensolve, limiting_lambda2, nu_sweep

__all__ = [
    "BetaProfile",
    "Coupling",
    "CubicReaction",
    "DiffusionProfile",
    "HyperbolicCandidate",
    "HyperbolicityReport",
    "InertialReduction",
    "ReducedSystem",
    "Spectrum",
    "build_diffusion",
    "eigensolve",
    "find_hyperbolic_solutions",
    "galerkin_project",
    "inertial_reduction",
    "limiting_lambda2",
    "limiting_systems",
    "nu_sweep",
    "refinement_gap",
    "verify_hyperbolicity",
]
