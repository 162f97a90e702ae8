"""Persistence of an exponential dichotomy under a small linear perturbation B(t)."""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from .checks import CheckList
from .core import Generator, MatrixFunction, Nonlinearity, StateVector, TimeGrid
from .dichotomy import HEADER as CERT_HEADER
from .dichotomy import SplittingCertificate, SplittingReport, verify_splitting
from .errors import ContractionError, GapConditionError, ResidualError
from .graph_field import GraphField, eval_graph
from .graph_transform import GraphSolution, GridSpec, linearity_residual, solve_sigma, solve_theta
from .ledger import ConstantsLedger, constants_ledger

log = logging.getLogger(__name__)

THIN_MARGIN = 0.9
LINEARITY_TOL = 1e-8


@dataclass(frozen=True)
class BoundReport:
    passed: bool
    bound: float
    margin: float
    thin_margin: bool


def perturbation_bound(gamma: float, M: float, ell: float) -> BoundReport:
    """ell < 2 gamma / (3 M (M + 1))."""
    if not gamma > 0 or not M >= 1:
        raise ValueError(f"need gamma > 0 and M >= 1, got gamma={gamma}, M={M}")
    bound = 2.0 * gamma / (3.0 * M * (M + 1.0))
    return BoundReport(passed=ell < bound, bound=bound, margin=bound - ell, thin_margin=ell >= THIN_MARGIN * bound)


def sup_norm(b: MatrixFunction, times: np.ndarray) -> float:
    return max(float(np.linalg.norm(np.asarray(b(float(t)), dtype=float), 2)) for t in times)


@dataclass
class LinearGraphs:
    sigma: GraphSolution
    theta: GraphSolution
    ledger: ConstantsLedger
    linearity: float


def linear_graphs(
    gen: Generator,
    cert: SplittingCertificate,
    b: MatrixFunction,
    extent: float = 1.0,
    count: int = 5,
    h: float = 0.02,
    ell: Optional[float] = None,
    tol_fp: float = 1e-12,
) -> LinearGraphs:
    """Sigma* and Theta* of u' = (A + B)u with B treated as the nonlinearity."""
    times = cert.times
    measured = sup_norm(b, times)
    ell = measured if ell is None else ell
    if measured > ell * (1.0 + 1e-12):
        raise ValueError(f"sup |B(t)| = {measured:.6g} exceeds the declared ell {ell:.6g}")
    bound = perturbation_bound(cert.gamma, cert.M, ell)
    if not bound.passed:
        raise GapConditionError(f"ell={ell:.6g} violates the roughness bound {bound.bound:.6g}")
    ledger = constants_ledger(cert.M, cert.gamma, cert.rho, ell)
    f = Nonlinearity.linear(b, lipschitz=ell, name="B")
    spec = GridSpec(
        time_grid=TimeGrid(times[0], times[-1], max(1, cert.n_nodes - 1)),
        extents=(extent,),
        counts=(count,),
        h=h,
    )
    sigma = solve_sigma(gen, cert, f, ledger, spec, tol_fp=tol_fp)
    theta = solve_theta(gen, cert, f, ledger, spec, tol_fp=tol_fp)
    residual = max(linearity_residual(sigma.field), linearity_residual(theta.field))
    if residual > LINEARITY_TOL:
        raise ResidualError(f"linear perturbation produced non-linear graphs (superposition residual {residual:.3e})")
    return LinearGraphs(sigma=sigma, theta=theta, ledger=ledger, linearity=residual)


def perturbed_projection(
    sigma: GraphField,
    theta: GraphField,
    t: float,
    u: Any,
    tol_fp: float = 1e-14,
    max_iter: int = 200,
) -> StateVector:
    """Q_ell(t)u = P_Sigma(t) v_u, where v_u = u - Sigma*(t, v_u) - Theta*(t, v_u)."""
    frame = sigma.frame
    if frame is None:
        raise ValueError("graph field carries no split frame")
    cq, ck = frame.to_split(t, np.asarray(StateVector.of(u).coords))
    vq, vk = cq.copy(), ck.copy()
    scale = max(float(np.linalg.norm(cq)) + float(np.linalg.norm(ck)), 1e-300)
    last = math.inf
    for iteration in range(max_iter):
        new_vq = cq - eval_graph(theta, t, vk)
        new_vk = ck - eval_graph(sigma, t, vq)
        step = float(np.linalg.norm(new_vq - vq) + np.linalg.norm(new_vk - vk))
        vq, vk = new_vq, new_vk
        if step <= tol_fp * scale:
            break
        if step > last and iteration > 2:
            raise ContractionError(
                f"projection fixed point stalled at step {step:.3e}",
                measured_factor=step / last,
                nu_bound=2.0 * sigma.kappa,
            )
        last = step
    else:
        raise ContractionError(
            f"projection fixed point did not converge in {max_iter} iterations",
            measured_factor=math.nan,
            nu_bound=2.0 * sigma.kappa,
        )
    return StateVector(frame.from_split(t, vq, eval_graph(sigma, t, vq)))


def perturbed_projection_matrix(sigma: GraphField, theta: GraphField, t: float, tol_fp: float = 1e-14) -> np.ndarray:
    """Q_ell(t) as a matrix; columns are images of scaled basis vectors."""
    frame = sigma.frame
    if frame is None:
        raise ValueError("graph field carries no split frame")
    d = frame.dim
    reach = 0.5 * min(min(a[-1] for a in sigma.axes), min(a[-1] for a in theta.axes))
    columns = []
    for e in np.eye(d):
        q, p = frame.to_split(t, e)
        scale = reach / max(float(np.linalg.norm(q)), float(np.linalg.norm(p)), 1e-300)
        columns.append(np.asarray(perturbed_projection(sigma, theta, t, scale * e, tol_fp).coords) / scale)
    return np.stack(columns, axis=1)


@dataclass
class PerturbedDichotomy:
    certificate: SplittingCertificate
    kappa_ell: float
    distance: float
    distance_bound: float
    thin_margin: bool
    verification: SplittingReport
    checks: CheckList

    @property
    def projections(self) -> np.ndarray:
        return self.certificate.projections

    @property
    def M_ell(self) -> float:
        return self.certificate.M

    @property
    def gamma_ell(self) -> float:
        return self.certificate.gamma

    @property
    def passed(self) -> bool:
        return self.checks.passed

    def constants(self) -> Dict[str, float]:
        return {
            "kappa_ell": self.kappa_ell,
            "M_ell": self.M_ell,
            "gamma_ell": self.gamma_ell,
            "distance": self.distance,
            "distance_bound": self.distance_bound,
        }

    def to_text(self) -> str:
        cert = self.certificate
        block = [f"{key} = {format(float(value), '.17g')}" for key, value in self.constants().items()]
        lines = [CERT_HEADER] + cert.header_lines() + ["constants:"] + block + ["nodes:"] + cert.node_lines()
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


def perturbed_constants(M: float, gamma: float, ell: float, kappa: float) -> Dict[str, float]:
    if not kappa < 0.5:
        raise GapConditionError(f"perturbed constants need kappa < 1/2, got {kappa:.6g}")
    return {
        "M_ell": M * (1.0 + kappa) / (1.0 - 2.0 * kappa),
        "gamma_ell": gamma - ell * M * (1.0 + kappa),
        "distance_bound": 2.0 * kappa / (1.0 - 2.0 * kappa),
    }


def certify_perturbed(
    perturbed: Generator,
    cert: SplittingCertificate,
    projections: np.ndarray,
    ledger: ConstantsLedger,
    samples: int = 64,
    tol: float = 1e-6,
) -> PerturbedDichotomy:
    """Check the perturbed family against (M_ell, gamma_ell, -gamma_ell) and the distance bound."""
    kappa = ledger.kappa_minus
    constants = perturbed_constants(cert.M, cert.gamma, ledger.ell, kappa)
    if constants["gamma_ell"] <= 0:
        raise GapConditionError(f"perturbed exponent gamma_ell={constants['gamma_ell']:.6g} is not positive")
    new_cert = SplittingCertificate(
        times=cert.times,
        projections=projections,
        M=constants["M_ell"],
        gamma=constants["gamma_ell"],
        rho=-constants["gamma_ell"],
        rank=cert.rank,
        window=cert.window,
        h=cert.h,
    )
    report = verify_splitting(perturbed, new_cert, samples=samples, tol=tol, commutation_tol=tol)
    distance = float(max(np.linalg.norm(q - ql, 2) for q, ql in zip(cert.projections, projections)))
    bound = perturbation_bound(cert.gamma, cert.M, ledger.ell)
    if bound.thin_margin:
        log.warning("ell=%.4g is within %.0f%% of the roughness bound %.4g", ledger.ell, 100 * THIN_MARGIN, bound.bound)
    checks = CheckList()
    checks.extend(report.checks, prefix="perturbed.")
    checks.add("distance", distance, constants["distance_bound"], tol=tol)
    checks.add("idempotency", new_cert.residuals["idempotency"], tol)
    return PerturbedDichotomy(
        certificate=new_cert,
        kappa_ell=kappa,
        distance=distance,
        distance_bound=constants["distance_bound"],
        thin_margin=bound.thin_margin,
        verification=report,
        checks=checks,
    )
