"""Galerkin truncations of u_t = (a_nu u_x)_x + f(t, u) and the reduced-system type."""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np

from ..core import Generator, Nonlinearity, VectorField, integrate, lawson_rk4
from ..dichotomy import SplittingCertificate
from ..errors import ResidualError
from ..graph_field import GraphField
from ..graph_transform import GraphSolution, GridSpec, SplitSystem, reduced_field, solve_sigma
from ..ledger import ConstantsLedger, constants_ledger
from ..nonlinear import cutoff, jacobian
from .reaction import CubicReaction
from .spectrum import Spectrum

log = logging.getLogger(__name__)

VARIANTS = ("galerkin", "inertial", "limiting_uv", "limiting_z")
MASS_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ReducedSystem:
    """u' = matrix u + nonlinear(t, u) on a low-dimensional coordinate space."""

    variant: str
    matrix: np.ndarray
    nonlinear: VectorField
    reaction: CubicReaction
    coefficients: Dict[str, float] = field(default_factory=dict)
    exact_jacobian: Optional[Callable[[float, np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown reduced-system variant {self.variant!r}")

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def is_diagonal(self) -> bool:
        return bool(np.all(self.matrix == np.diag(np.diag(self.matrix))))

    def rhs(self, t: Any, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return u @ self.matrix.T + self.nonlinear(t, u)

    def jacobian(self, t: float, u: Any) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.exact_jacobian is not None:
            return self.exact_jacobian(t, u)
        return self.matrix + jacobian(self.nonlinear, t, u)[0]

    def integrate(self, u0: Any, t0: float, t1: float, h: float = 0.02, record: bool = False):
        """Lawson RK4 on diagonal (stiff) systems, classic RK4 otherwise."""
        if self.is_diagonal and t1 >= t0:
            return lawson_rk4(-np.diag(self.matrix), self.nonlinear, t0, t1, u0, h, record=record)
        return integrate(self.rhs, t0, t1, u0, h, record=record)


def galerkin_project(spectrum: Spectrum, n: int, reaction: CubicReaction) -> ReducedSystem:
    """Project onto the first n eigenfunctions; h_k = <f(t, sum_j u_j phi_j), phi_k> by discrete quadrature."""
    if n < 2:
        raise ValueError(f"Galerkin truncation needs n >= 2, got {n}")
    if n > spectrum.n_modes:
        raise ValueError(f"spectrum carries {spectrum.n_modes} modes, {n} requested")
    phis = spectrum.phis[:n]
    dx = spectrum.dx
    mass = dx * float(phis[0] @ phis[0])
    if abs(mass - 1.0) > MASS_TOL:
        raise ResidualError(f"quadrature mass of phi_1^2 is {mass:.12g}, expected 1")

    def h(t: Any, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        values = u @ phis
        return dx * reaction(t, values) @ phis.T

    def exact_jacobian(t: float, u: np.ndarray) -> np.ndarray:
        slope = reaction.derivative(t, np.asarray(u, dtype=float) @ phis)
        return -np.diag(spectrum.lambdas[:n]) + dx * (phis * slope) @ phis.T

    return ReducedSystem(
        variant="galerkin",
        matrix=-np.diag(spectrum.lambdas[:n]),
        nonlinear=h,
        reaction=reaction,
        coefficients={"nu": spectrum.profile.nu, "modes": float(n)},
        exact_jacobian=exact_jacobian,
    )


def spectral_certificate(rates: np.ndarray, rank: int, times: np.ndarray, h: float) -> SplittingCertificate:
    """Exact splitting of u' = diag(rates) u with Q onto the first ``rank`` coordinates.

    Rates must be sorted so that Im Q holds the slowest-decaying directions.
    """
    d = rates.size
    q = np.diag([1.0] * rank + [0.0] * (d - rank))
    spacing = float(times[1] - times[0]) if times.size > 1 else 1.0
    return SplittingCertificate(
        times=times,
        projections=np.broadcast_to(q, (times.size, d, d)),
        M=1.0,
        gamma=-float(np.max(rates[rank:])),
        rho=-float(np.min(rates[:rank])),
        rank=rank,
        window=spacing,
        h=h,
    )


@dataclass
class InertialReduction:
    system: ReducedSystem
    solution: GraphSolution
    certificate: SplittingCertificate
    ledger: ConstantsLedger

    @property
    def graph(self) -> GraphField:
        return self.solution.field

    def graph_size(self) -> float:
        return float(np.max(np.abs(self.graph.values), initial=0.0))


def inertial_reduction(
    spectrum: Spectrum,
    n: int,
    reaction: CubicReaction,
    grid_spec: GridSpec,
    radius: float = 0.1,
    width: float = 0.05,
    N: float = 1.0,
    alpha: float = 0.5,
    tol_fp: float = 1e-10,
) -> InertialReduction:
    """Sigma_loc over the first two modes of the n-mode truncation, and the flow on it.

    The "+u" of the reaction is moved into the linear part so the remaining
    nonlinearity is flat at the origin before the cut-off is applied. The
    cut-off radius is measured in modal coordinates; the cubic term has slope
    of order 3 beta R^2 sup(sum phi_k^2) there, which must stay small against
    lambda_3 - lambda_2 for the ledger to admit a Lipschitz bound.
    """
    if n < 3:
        raise ValueError(f"inertial reduction needs at least one mode beyond the first two, got n={n}")
    galerkin = galerkin_project(spectrum, n, reaction)
    rates = 1.0 - spectrum.lambdas[:n]
    gen = Generator.constant(np.diag(rates), name=f"galerkin{n}")
    h = galerkin.nonlinear

    def cubic(t: Any, u: np.ndarray) -> np.ndarray:
        return h(t, u) - np.asarray(u, dtype=float)

    base = Nonlinearity(func=cubic, lipschitz=reaction.slope_bound(radius + width), name="galerkin_cubic")
    times = grid_spec.time_grid.nodes
    f = cutoff(base, radius, width, n, times=times[:: max(1, times.size // 4)])
    step = min(grid_spec.h, 1.0 / float(np.max(np.abs(rates))))
    spec = dataclasses.replace(grid_spec, h=step)
    cert = spectral_certificate(rates, 2, times, step)
    ledger = constants_ledger(cert.M, cert.gamma, cert.rho, f.lipschitz, parabolic={"N": N, "alpha": alpha})
    log.info("inertial reduction: gap %.4g, ell %.4g, step %.3g", ledger.gap, f.lipschitz, step)
    solution = solve_sigma(gen, cert, f, ledger, spec, tol_fp=tol_fp)

    system = SplitSystem(gen, f, cert.frame)
    flow = reduced_field(system, solution.field)
    linear = np.diag(rates[:2])

    def on_manifold(t: Any, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return flow(t, xi) - xi @ linear.T

    reduced = ReducedSystem(
        variant="inertial",
        matrix=linear,
        nonlinear=on_manifold,
        reaction=reaction,
        coefficients={"nu": spectrum.profile.nu, "modes": float(n)},
    )
    return InertialReduction(system=reduced, solution=solution, certificate=cert, ledger=ledger)


def refinement_gap(
    spectrum: Spectrum,
    reaction: CubicReaction,
    u0: Any,
    t0: float,
    t1: float,
    coarse: int = 2,
    fine: int = 8,
    h: float = 0.02,
) -> float:
    """sup_t |u_coarse - first coarse modes of u_fine| / sup_t |first coarse modes of u_fine|.

    Both truncations start from the same data in the first ``coarse`` modes
    and zero above them.
    """
    if not coarse < fine:
        raise ValueError(f"refinement needs coarse < fine, got {coarse} and {fine}")
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (coarse,):
        raise ValueError(f"initial data has shape {u0.shape}, expected ({coarse},)")
    low = galerkin_project(spectrum, coarse, reaction)
    high = galerkin_project(spectrum, fine, reaction)
    start = np.zeros(fine)
    start[:coarse] = u0
    _, a = low.integrate(u0, t0, t1, h, record=True)
    _, b = high.integrate(start, t0, t1, h, record=True)
    leading = b[:, :coarse]
    gap = float(np.max(np.abs(a - leading))) / max(float(np.max(np.abs(leading))), 1e-300)
    log.info("Galerkin refinement %d -> %d modes: relative gap %.3e", coarse, fine, gap)
    return gap
