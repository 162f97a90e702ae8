"""Closed-form constants of the graph-transform construction.

All formulas take the splitting constants (M, gamma, rho) and the Lipschitz
constant ell of the nonlinearity. ``kappa_chosen`` is always the smallest
admissible Lipschitz bound, kappa_minus.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional

from scipy.special import gamma as gamma_fn

from .errors import GapConditionError

log = logging.getLogger(__name__)


def gap_threshold(M: float) -> float:
    return max(M * M + 2.0 * M + math.sqrt(8.0 * M**3), 3.0 * M * M + 2.0 * M)


def _check_params(M: float, gamma: float, rho: float, ell: float) -> None:
    if not M >= 1.0:
        raise GapConditionError(f"splitting constant M must be >= 1, got {M}")
    if not gamma > rho:
        raise GapConditionError(f"need gamma > rho, got gamma={gamma}, rho={rho}")
    if not ell >= 0.0:
        raise GapConditionError(f"Lipschitz constant ell must be >= 0, got {ell}")


@dataclass(frozen=True)
class GapReport:
    passed: bool
    ratio: float
    threshold: float

    @property
    def margin(self) -> float:
        return self.ratio - self.threshold


def gap_condition(M: float, gamma: float, rho: float, ell: float) -> GapReport:
    """(gamma - rho) / ell against max{M^2+2M+sqrt(8M^3), 3M^2+2M}."""
    _check_params(M, gamma, rho, ell)
    ratio = math.inf if ell == 0.0 else (gamma - rho) / ell
    threshold = gap_threshold(M)
    return GapReport(passed=ratio > threshold, ratio=ratio, threshold=threshold)


def kappa_roots(M: float, ratio: float) -> tuple[float, float]:
    """Roots of 2M k^2 - (ratio - M^2 - 2M) k + M^2 = 0."""
    if math.isinf(ratio):
        return 0.0, math.inf
    b = ratio - M * M - 2.0 * M
    disc = b * b - 8.0 * M**3
    if disc < 0.0 or b <= 0.0:
        raise GapConditionError(f"no real Lipschitz bound: discriminant {disc:.6g} at gap ratio {ratio:.6g}")
    kappa_plus = (b + math.sqrt(disc)) / (4.0 * M)
    # product of the roots is M/2; avoids cancellation in the small root
    return 0.5 * M / kappa_plus, kappa_plus


@dataclass(frozen=True)
class ParabolicConstants:
    """Constants for a sectorial linear part with f: X^alpha -> X."""

    N: float
    alpha: float
    kappa_minus: float
    kappa_plus: float
    kappa_star: float
    kappa_chosen: float
    delta: float
    lipschitz_lhs: float
    contraction_lhs: float

    @property
    def admissible(self) -> bool:
        return (
            self.kappa_minus <= self.kappa_chosen < min(self.kappa_plus, self.kappa_star)
            and self.lipschitz_lhs <= self.kappa_chosen * (1.0 + 1e-12)
            and self.contraction_lhs < 1.0
        )


def parabolic_constants(M: float, gamma: float, rho: float, ell: float, N: float, alpha: float) -> ParabolicConstants:
    if not 0.0 <= alpha < 1.0:
        raise GapConditionError(f"fractional exponent alpha must lie in [0, 1), got {alpha}")
    if not N > 0.0:
        raise GapConditionError(f"parabolic constant N must be positive, got {N}")
    gap = gamma - rho
    g1a = float(gamma_fn(1.0 - alpha))
    power = 1.0 / (1.0 - alpha)
    growth = (2.0 * M * M * ell * g1a) ** power
    if ell == 0.0:
        kappa_star = kappa_plus = math.inf
    else:
        kappa_star = (gap - growth) / (2.0 * N * ell) - 1.0
        kappa_plus = 0.5 * (gap - growth) / (2.0 * N * ell) - 1.0
    kappa_minus = 2.0 ** (1.0 - alpha) * M * M * ell * g1a / (gap + growth) ** (1.0 - alpha)
    kappa = kappa_minus
    base = gap - 2.0 * ell * N * (1.0 + kappa)
    if base <= 0.0:
        raise GapConditionError(f"parabolic gap {gap:.6g} too small for ell={ell}, N={N}")
    lipschitz_lhs = ell * M * M * (1.0 + kappa) * g1a / base ** (1.0 - alpha)
    contraction_lhs = 2.0 * ell * M * M * g1a / base ** (1.0 - alpha)
    coupling = 1.0 + ell * (1.0 + 2.0 * M) * N * (1.0 + kappa) / base
    delta = base - (2.0 * g1a * ell * M * coupling) ** power
    return ParabolicConstants(
        N=N,
        alpha=alpha,
        kappa_minus=kappa_minus,
        kappa_plus=kappa_plus,
        kappa_star=kappa_star,
        kappa_chosen=kappa,
        delta=delta,
        lipschitz_lhs=lipschitz_lhs,
        contraction_lhs=contraction_lhs,
    )


@dataclass(frozen=True)
class ConstantsLedger:
    M: float
    gamma: float
    rho: float
    ell: float
    gap_threshold: float
    kappa_minus: float
    kappa_plus: float
    kappa_star: float
    kappa_chosen: float
    delta: float
    delta_hat: float
    nu: float
    stable_decay: float
    backward_growth: float
    phase_rate: float
    parabolic: Optional[ParabolicConstants] = None

    @property
    def gap(self) -> float:
        return self.gamma - self.rho

    @property
    def ratio(self) -> float:
        return math.inf if self.ell == 0.0 else self.gap / self.ell

    @property
    def lipschitz_lhs(self) -> float:
        """ell M^2 (1+k) / (gamma - rho - 2 ell M (1+k)); must not exceed kappa_chosen."""
        k = self.kappa_chosen
        return self.ell * self.M**2 * (1.0 + k) / (self.gap - 2.0 * self.ell * self.M * (1.0 + k))

    def tail_horizon(self, tol: float = 1e-8) -> float:
        """Length T with exp(-(gamma - rho - 2 M ell (1+k)) T) <= tol."""
        rate = self.gap - 2.0 * self.M * self.ell * (1.0 + self.kappa_chosen)
        return math.log(1.0 / tol) / rate

    def fixed_point_bound(self, tol_fp: float) -> float:
        return tol_fp * (1.0 + self.nu) / (1.0 - self.nu)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop("parabolic")
        if self.parabolic is not None:
            for key, value in asdict(self.parabolic).items():
                data[f"{key}_par" if key not in ("N", "alpha") else key] = value
        return data

    def to_lines(self) -> List[str]:
        return [f"{key} = {format(float(value), '.17g')}" for key, value in self.to_dict().items()]


def _plain_rates(M: float, gamma: float, rho: float, ell: float, kappa: float) -> Dict[str, float]:
    gap = gamma - rho
    inner = gap - ell * M * (1.0 + kappa)
    coupling = M * M * ell * ell * (1.0 + kappa) * (1.0 + M) / inner
    return {
        "delta": gamma - M * ell - coupling,
        "delta_hat": rho + M * ell + coupling,
        "nu": 2.0 * ell * M * M / (gap - 2.0 * ell * M * (1.0 + kappa)),
        "stable_decay": gamma - M * ell * (1.0 + kappa),
        "backward_growth": rho + ell * M * (1.0 + kappa),
        "phase_rate": gap - M * ell * (2.0 + kappa) - coupling,
    }


def constants_ledger(
    M: float,
    gamma: float,
    rho: float,
    ell: float,
    parabolic: Optional[Dict[str, float]] = None,
) -> ConstantsLedger:
    """Build the ledger; raises GapConditionError when no admissible kappa exists."""
    report = gap_condition(M, gamma, rho, ell)
    par = None
    if parabolic is not None:
        par = parabolic_constants(M, gamma, rho, ell, float(parabolic["N"]), float(parabolic["alpha"]))

    if report.passed:
        kappa_minus, kappa_plus = kappa_roots(M, report.ratio)
        kappa_star = math.inf if ell == 0.0 else (gamma - rho) / (2.0 * M * ell) - M - 1.0
        if not 0.0 <= kappa_minus < min(kappa_plus, kappa_star):
            raise GapConditionError(
                f"empty kappa interval: kappa_minus={kappa_minus:.6g}, "
                f"kappa_plus={kappa_plus:.6g}, kappa_star={kappa_star:.6g}"
            )
        kappa = kappa_minus
    elif par is not None and par.admissible:
        log.info("plain gap fails (ratio %.4g <= %.4g); using parabolic constants", report.ratio, report.threshold)
        kappa_minus, kappa_plus, kappa_star = par.kappa_minus, par.kappa_plus, par.kappa_star
        kappa = par.kappa_chosen
    else:
        raise GapConditionError(
            f"gap condition fails: (gamma - rho)/ell = {report.ratio:.6g} <= threshold {report.threshold:.6g}"
        )

    rates = _plain_rates(M, gamma, rho, ell, kappa)
    if not report.passed and par is not None:
        rates["delta"] = par.delta
    ledger = ConstantsLedger(
        M=M,
        gamma=gamma,
        rho=rho,
        ell=ell,
        gap_threshold=report.threshold,
        kappa_minus=kappa_minus,
        kappa_plus=kappa_plus,
        kappa_star=kappa_star,
        kappa_chosen=kappa,
        parabolic=par,
        **rates,
    )
    if ledger.delta <= 0.0:
        log.warning("attraction rate delta=%.6g is not positive; manifold is invariant but not inertial", ledger.delta)
    return ledger
