"""Fast and slow sub-manifolds inside an invariant manifold.

Given a coarse splitting Q_c and a finer one Q_f with Im Q_f inside Im Q_c,
W_fast is the invariant manifold of the fine splitting and W_slow is the
stable manifold, inside the coarse manifold, of the reduced flow split by the
restricted fine projections.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, List, Optional, Sequence

import numpy as np

from .checks import CheckList
from .core import Generator, Nonlinearity, integrate
from .dichotomy import SplittingCertificate, nestedness_check
from .errors import NestednessError
from .frames import projection_bases
from .graph_field import GraphField, eval_graph
from .graph_transform import (
    AnyNonlinearity,
    GraphSolution,
    GridSpec,
    SplitSystem,
    reduced_field,
    solve_sigma,
    solve_theta,
)
from .ledger import ConstantsLedger, constants_ledger

log = logging.getLogger(__name__)

ON_MANIFOLD_TOL = 1e-6
MIN_RATIO_SAMPLES = 3


def delta_bar(M: float, gamma: float, rho: float, ell: float, kappa: float) -> float:
    gap = gamma - rho
    return gap - 2.0 * M * ell - 2.0 * M * M * ell * ell * (1.0 + kappa) * (1.0 + M) / (gap - ell * M * (1.0 + kappa))


@dataclass
class NestedManifolds:
    coarse: GraphSolution
    fast: GraphSolution
    slow: GraphSolution
    reduced_generator: Generator
    reduced_nonlinearity: Nonlinearity
    delta_bar: float
    M: float
    containment: float
    checks: CheckList

    @property
    def W_coarse(self) -> GraphField:
        return self.coarse.field

    @property
    def W_fast(self) -> GraphField:
        return self.fast.field

    @property
    def W_slow(self) -> GraphField:
        return self.slow.field

    @property
    def passed(self) -> bool:
        return self.checks.passed and self.coarse.report.passed and self.fast.report.passed and self.slow.report.passed


def _reduced_system(gen: Generator, f: AnyNonlinearity, coarse: GraphField, ell: float):
    """Flow on the coarse manifold in its Im-coordinates, split as linear part plus remainder."""
    frame = coarse.frame
    system = SplitSystem(gen.linear_part(), f, frame)
    k = frame.rank
    flow = reduced_field(system, coarse)
    autonomous = gen.autonomous and frame.is_constant

    def matrix(t: float) -> np.ndarray:
        return system.blocks(np.array([t]))[0, :k, :k]

    def remainder(t: Any, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        rows = np.atleast_2d(xi)
        s = np.broadcast_to(np.asarray(t, dtype=float), rows.shape[:1]).copy()
        linear = np.einsum("nij,nj->ni", system.blocks(s)[:, :k, :k], rows)
        out = flow(s, rows) - linear
        return out.reshape(xi.shape)

    reduced_gen = Generator(matrix=matrix, dim=k, autonomous=autonomous, name=f"{gen.name}|coarse")
    return reduced_gen, Nonlinearity(func=remainder, lipschitz=ell, name=f"{f.name}|coarse")


def build_nested(
    gen: Generator,
    coarse_cert: SplittingCertificate,
    fine_cert: SplittingCertificate,
    f: AnyNonlinearity,
    coarse_ledger: ConstantsLedger,
    fine_ledger: ConstantsLedger,
    grid_spec: GridSpec,
    tol_fp: float = 1e-10,
    tol_inv: float = 1e-4,
    nest_tol: float = 1e-8,
) -> NestedManifolds:
    nesting = nestedness_check(coarse_cert, fine_cert, tol=nest_tol)
    if not nesting.passed:
        raise NestednessError(
            f"splittings are not nested: image residual {nesting.image_residual:.3e}, "
            f"kernel residual {nesting.kernel_residual:.3e}"
        )
    if coarse_cert.rho < fine_cert.gamma - 1e-9 * max(1.0, abs(fine_cert.gamma)):
        raise NestednessError(
            f"need coarse rho >= fine gamma, got rho={coarse_cert.rho:.6g} < gamma*={fine_cert.gamma:.6g}"
        )

    coarse = solve_sigma(gen, coarse_cert, f, coarse_ledger, grid_spec, tol_fp=tol_fp, tol_inv=tol_inv)
    fast = solve_sigma(gen, fine_cert, f, fine_ledger, grid_spec, tol_fp=tol_fp, tol_inv=tol_inv)

    frame = coarse.field.frame
    kappa_c = coarse_ledger.kappa_chosen
    reduced_ell = f.lipschitz * (1.0 + kappa_c) + frame.leakage(gen.linear_part(), fine_cert.times) * kappa_c
    reduced_gen, reduced_f = _reduced_system(gen, f, coarse.field, reduced_ell)
    reduced_cert = SplittingCertificate(
        times=fine_cert.times,
        projections=frame.restrict(fine_cert.projections),
        M=fine_cert.M,
        gamma=fine_cert.gamma,
        rho=fine_cert.rho,
        rank=fine_cert.rank,
        window=fine_cert.window,
        h=fine_cert.h,
    )
    slow_ledger = constants_ledger(fine_cert.M, fine_cert.gamma, fine_cert.rho, reduced_ell)
    slow = solve_theta(reduced_gen, reduced_cert, reduced_f, slow_ledger, grid_spec, tol_fp=tol_fp, tol_inv=tol_inv)

    rate = delta_bar(fine_cert.M, fine_cert.gamma, fine_cert.rho, fine_ledger.ell, fine_ledger.kappa_chosen)
    containment = _containment(fast.field, coarse.field)
    checks = CheckList()
    checks.add("delta_bar", rate, 0.0, sense="ge")
    checks.add("containment", containment, tol_inv)
    log.info("nested manifolds built: delta_bar %.4g, containment %.2e", rate, containment)
    return NestedManifolds(
        coarse=coarse,
        fast=fast,
        slow=slow,
        reduced_generator=reduced_gen,
        reduced_nonlinearity=reduced_f,
        delta_bar=rate,
        M=fine_cert.M,
        containment=containment,
        checks=checks,
    )


def _containment(fast: GraphField, coarse: GraphField) -> float:
    """Distance of W_fast node points from W_coarse."""
    taus, q = fast.node_points()
    values = fast.values.reshape(taus.size, -1)
    states = fast.frame.from_split(taus, q, values)
    cq, ck = coarse.frame.to_split(taus, states)
    expected = eval_graph(coarse, taus, cq, clamp=True).reshape(taus.size, -1)
    return float(np.max(np.linalg.norm(ck - expected, axis=-1)))


def _lift_coarse(nested: NestedManifolds, t: float, xi: np.ndarray) -> np.ndarray:
    coarse = nested.W_coarse
    return coarse.frame.from_split(t, xi, eval_graph(coarse, t, xi, clamp=True))


def project_fast(nested: NestedManifolds, t: float, u: np.ndarray) -> np.ndarray:
    fast = nested.W_fast
    q, _ = fast.frame.to_split(t, u)
    return fast.frame.from_split(t, q, eval_graph(fast, t, q, clamp=True))


def project_slow(nested: NestedManifolds, t: float, u: np.ndarray) -> np.ndarray:
    """Along the fast coordinates of the restricted frame, inside the coarse manifold."""
    xi, _ = nested.W_coarse.frame.to_split(t, u)
    slow = nested.W_slow
    _, slow_part = slow.frame.to_split(t, xi)
    reduced = slow.frame.from_split(t, eval_graph(slow, t, slow_part, clamp=True), slow_part)
    return _lift_coarse(nested, t, reduced)


@dataclass
class TangencyResult:
    taus: np.ndarray
    ratios: np.ndarray
    angles: np.ndarray
    rate: float
    truncated: bool
    checks: CheckList

    @property
    def passed(self) -> bool:
        return self.checks.passed


def tangency_ratio(
    nested: NestedManifolds,
    gen: Generator,
    f: AnyNonlinearity,
    u0: Any,
    t: float,
    taus: Sequence[float],
    fine_cert: Optional[SplittingCertificate] = None,
    h: float = 0.02,
    tol: float = 0.05,
    rate_tol: float = 0.1,
    underflow: float = 1e-12,
) -> TangencyResult:
    """r(tau) = |(I - P_slow)w| / |(I - P_fast)w| along the backward orbit w = T(tau, t)u0."""
    u0 = np.asarray(u0, dtype=float)
    scale = max(1.0, float(np.linalg.norm(u0)))
    off_coarse = float(np.linalg.norm(u0 - _lift_coarse(nested, t, nested.W_coarse.frame.to_split(t, u0)[0])))
    if off_coarse > ON_MANIFOLD_TOL * scale:
        raise ValueError(f"start point is {off_coarse:.3e} away from the coarse manifold")
    if float(np.linalg.norm(u0 - project_fast(nested, t, u0))) <= ON_MANIFOLD_TOL * scale:
        raise ValueError("start point lies on the fast manifold; the ratio is undefined")

    taus = np.sort(np.asarray(taus, dtype=float))[::-1]
    if np.any(taus > t):
        raise ValueError(f"ratio samples need tau <= t = {t}")
    system = SplitSystem(gen.linear_part(), f, nested.W_coarse.frame)
    flow = reduced_field(system, nested.W_coarse)
    xi = nested.W_coarse.frame.to_split(t, u0)[0]

    def ratio_at(s: float, w: np.ndarray) -> tuple[float, float]:
        den = float(np.linalg.norm(w - project_fast(nested, s, w)))
        num = float(np.linalg.norm(w - project_slow(nested, s, w)))
        return num, den

    num0, den0 = ratio_at(t, u0)
    r_t = num0 / den0
    kept: List[float] = []
    ratios: List[float] = []
    angles: List[float] = []
    truncated = False
    current, x = t, xi
    for tau in taus:
        x = integrate(flow, current, tau, x, h) if tau != current else x
        current = tau
        w = _lift_coarse(nested, tau, x)
        num, den = ratio_at(tau, w)
        if den <= underflow * max(float(np.linalg.norm(w)), 1e-300):
            log.warning("ratio sequence truncated at tau=%.4g: orbit collapsed onto the fast manifold", tau)
            truncated = True
            break
        kept.append(tau)
        ratios.append(num / den)
        if fine_cert is not None:
            image, _ = projection_bases(fine_cert.frame.projection(tau), fine_cert.rank)
            cosine = float(np.linalg.norm(image.T @ w)) / max(float(np.linalg.norm(w)), 1e-300)
            angles.append(math.degrees(math.acos(min(1.0, cosine))))

    kept_arr = np.array(kept)
    ratio_arr = np.array(ratios)
    lags = t - kept_arr
    mask = ratio_arr > 0
    usable = int(np.count_nonzero(mask))
    if usable >= MIN_RATIO_SAMPLES:
        slope, _ = np.polyfit(lags[mask], np.log(ratio_arr[mask]), 1)
        rate = float(-slope)
    else:
        log.warning("only %d positive ratio samples, need %d for a rate", usable, MIN_RATIO_SAMPLES)
        rate = math.nan
    bound = nested.M**2 * np.exp(-nested.delta_bar * lags) * r_t * (1.0 + tol)
    checks = CheckList()
    worst = float(np.max(ratio_arr / bound)) if ratio_arr.size else math.nan
    checks.add("ratio_samples", float(usable), float(MIN_RATIO_SAMPLES), sense="ge")
    checks.add("ratio_bound", worst, 1.0)
    checks.add("ratio_rate", rate, nested.delta_bar * (1.0 - rate_tol), sense="ge")
    return TangencyResult(
        taus=kept_arr,
        ratios=ratio_arr,
        angles=np.array(angles),
        rate=rate,
        truncated=truncated,
        checks=checks,
    )
