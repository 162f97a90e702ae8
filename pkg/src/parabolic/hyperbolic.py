"""Bounded global solutions of the symmetric z-system and their hyperbolicity."""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..checks import CheckList
from ..core import Generator, TimeGrid, Trajectory, integrate
from ..dichotomy import SplittingCertificate, SplittingReport, estimate_splitting, verify_splitting
from ..errors import DegenerateGapError, PullbackError
from .galerkin import ReducedSystem

log = logging.getLogger(__name__)

PULLBACK_TOL = 1e-8
MAX_DEPTH = 1024.0
MIN_MARGIN = 0.05
HYPERBOLIC_MARGIN = 0.05

# line name -> (z1, z2) direction and number of unstable directions of the linearisation
LINES: Dict[str, Tuple[Tuple[float, float], int]] = {"E1": ((1.0, 1.0), 0), "E2": ((1.0, -1.0), 1)}


@dataclass
class HyperbolicCandidate:
    line: str
    sign: int
    trajectory: Trajectory
    margin: float
    depth: float
    increments: List[float] = field(default_factory=list)

    @property
    def label(self) -> str:
        return f"{self.line}{'+' if self.sign > 0 else '-'}"

    @property
    def unstable_dim(self) -> int:
        return LINES[self.line][1]


def line_rate(system: ReducedSystem, line: str) -> float:
    """Linear rate c of the scalar equation z' = c z - beta(t) z^3 on the line."""
    a1, a2 = system.coefficients["a1"], system.coefficients["a2"]
    if not math.isclose(a1, a2, rel_tol=1e-12):
        raise ValueError(f"invariant lines need x* = 1/2 (equal couplings), got a1={a1}, a2={a2}")
    return 1.0 if line == "E1" else 1.0 - 2.0 * a1


def _pullback(system: ReducedSystem, c: float, seed: float, t_start: float, depth: float, h: float) -> float:
    beta = system.reaction.beta

    def scalar(t: Any, z: np.ndarray) -> np.ndarray:
        return c * z - beta(t) * z**3

    return float(integrate(scalar, t_start - depth, t_start, np.array([seed]), h)[0])


def find_hyperbolic_solutions(
    system: ReducedSystem,
    horizon: float = 20.0,
    pullback_depth: float = 8.0,
    t_start: float = 0.0,
    h: float = 0.02,
    tol: float = PULLBACK_TOL,
    margin: float = MIN_MARGIN,
) -> List[HyperbolicCandidate]:
    """Four sign-symmetric bounded solutions, two on each invariant line.

    Each is located by pullback from +-1 at t_start - depth, doubling the depth
    until the value at t_start settles, then continued over [t_start, t_start + horizon].
    """
    if system.variant != "limiting_z":
        raise ValueError(f"hyperbolic solutions are searched on the z-system, got {system.variant}")
    a = system.coefficients["a1"] * 2.0 * system.coefficients["x_star"]
    if not 1.0 / 3.0 < a < 0.5:
        log.warning("alpha0/beta0 = %.4g lies outside (1/3, 1/2)", a)
    beta = system.reaction.beta
    if beta.lower < 1.0 or beta.upper > 2.0:
        log.warning("beta range [%.4g, %.4g] leaves [1, 2]", beta.lower, beta.upper)
    if pullback_depth <= 0:
        raise ValueError(f"pullback depth must be positive, got {pullback_depth}")
    if 2.0 * pullback_depth > MAX_DEPTH:
        raise PullbackError(f"pullback depth {pullback_depth:g} leaves no room to double below {MAX_DEPTH:g}")

    candidates: List[HyperbolicCandidate] = []
    for line, (direction, _) in LINES.items():
        c = line_rate(system, line)
        for sign in (1, -1):
            depth = pullback_depth
            previous = _pullback(system, c, float(sign), t_start, depth, h)
            increments: List[float] = []
            while True:
                depth *= 2.0
                if depth > MAX_DEPTH:
                    raise PullbackError(
                        f"pullback on {line} did not settle within depth {MAX_DEPTH:g} "
                        f"(last increment {increments[-1]:.3e})"
                    )
                current = _pullback(system, c, float(sign), t_start, depth, h)
                increments.append(abs(current - previous))
                previous = current
                if increments[-1] <= tol:
                    break

            def scalar(t: Any, z: np.ndarray, c: float = c) -> np.ndarray:
                return c * z - beta(t) * z**3

            times, values = integrate(scalar, t_start, t_start + horizon, np.array([previous]), h, record=True)
            states = values[:, :1] * np.asarray(direction)[None, :]
            low = float(np.min(np.abs(values)))
            if low < margin:
                raise PullbackError(
                    f"{line} solution from seed {sign:+d} comes within {low:.3e} of zero (margin {margin:g}); "
                    f"linear rate on the line is {c:.4g}"
                )
            log.info("%s%s: z(%g) = %.10g after depth %g", line, "+" if sign > 0 else "-", t_start, previous, depth)
            candidates.append(
                HyperbolicCandidate(line, sign, Trajectory(times, states), low, depth, increments)
            )

    starts = np.array([cand.trajectory.states[0] for cand in candidates])
    separation = min(
        float(np.linalg.norm(starts[i] - starts[j])) for i in range(len(starts)) for j in range(i + 1, len(starts))
    )
    if separation <= 10.0 * tol:
        raise PullbackError(f"found fewer than 4 distinct candidates (closest pair {separation:.3e} apart)")
    return candidates


def linearization(system: ReducedSystem, candidate: HyperbolicCandidate, autonomous: bool = False) -> Generator:
    """Jacobian of the z-system along the candidate as a linear generator."""
    trajectory = candidate.trajectory
    if autonomous:
        return Generator.constant(system.jacobian(0.0, trajectory.states[0]), name=f"linearized {candidate.label}")

    def matrix(t: float) -> np.ndarray:
        return system.jacobian(t, trajectory(float(t)))

    return Generator(matrix=matrix, dim=system.dim, name=f"linearized {candidate.label}")


@dataclass
class HyperbolicityReport:
    label: str
    rank: int
    certificate: Optional[SplittingCertificate]
    verification: Optional[SplittingReport]
    dichotomy_rate: float
    checks: CheckList
    reason: str = ""

    @property
    def passed(self) -> bool:
        return self.certificate is not None and self.checks.passed

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"label": self.label, "rank": self.rank, "passed": self.passed}
        if self.certificate is not None:
            out.update(M=self.certificate.M, gamma=self.certificate.gamma, rho=self.certificate.rho)
        out["dichotomy_rate"] = self.dichotomy_rate
        if self.reason:
            out["reason"] = self.reason
        return out


def verify_hyperbolicity(
    candidate: HyperbolicCandidate,
    system: ReducedSystem,
    window: float = 4.0,
    nodes_per_window: int = 8,
    h: float = 0.02,
    margin: float = HYPERBOLIC_MARGIN,
    samples: int = 32,
    commutation_tol: float = 1e-3,
) -> HyperbolicityReport:
    """Certify an exponential dichotomy of the linearisation with the expected unstable rank."""
    trajectory = candidate.trajectory
    t0, t1 = float(trajectory.times[0]), float(trajectory.times[-1])
    if t1 - t0 < 3.0 * window:
        raise ValueError(f"candidate spans {t1 - t0:.4g}, need at least three windows ({3 * window:.4g})")
    # the estimator extends the grid by one window on each side
    spacing = window / nodes_per_window
    n_steps = int(math.floor((t1 - t0 - 2.0 * window) / spacing + 1e-9))
    grid = TimeGrid(t0 + window, t0 + window + n_steps * spacing, n_steps)
    gen = linearization(system, candidate, autonomous=system.reaction.beta.is_constant)
    rank = candidate.unstable_dim
    checks = CheckList()
    try:
        cert = estimate_splitting(gen, rank, window, grid, h=h)
    except DegenerateGapError as exc:
        log.warning("%s flagged non-hyperbolic: %s", candidate.label, exc)
        checks.add("dichotomy_rate", 0.0, margin, sense="ge")
        return HyperbolicityReport(candidate.label, rank, None, None, 0.0, checks, reason=str(exc))

    rate = cert.gamma if rank == 0 else min(cert.gamma, -cert.rho)
    report = verify_splitting(gen, cert, samples=samples, h=h, commutation_tol=commutation_tol)
    checks.add("dichotomy_rate", rate, margin, sense="ge")
    checks.extend(report.checks, prefix="splitting.")
    log.info("%s: rank %d, gamma %.4g, rho %.4g, dichotomy rate %.4g", candidate.label, rank, cert.gamma, cert.rho, rate)
    return HyperbolicityReport(candidate.label, rank, cert, report, rate, checks)
