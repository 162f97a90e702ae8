"""Neumann eigenpairs of -(a_nu u')' by a conservative finite-difference scheme."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from ..errors import ResidualError
from .diffusion import VALLEY_POINTS, DiffusionProfile, build_diffusion

log = logging.getLogger(__name__)

ORTHONORMAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Ascending eigenvalues and eigenfunctions sampled at the cell centres.

    Eigenfunctions are orthonormal in the discrete inner product
    <u, v> = dx * sum(u * v), and phi_2(0) < 0.
    """

    profile: DiffusionProfile
    lambdas: np.ndarray
    phis: np.ndarray

    @property
    def n_modes(self) -> int:
        return int(self.lambdas.size)

    @property
    def mesh(self) -> np.ndarray:
        return self.profile.centers

    @property
    def dx(self) -> float:
        return self.profile.dx

    def inner(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.dx * np.sum(u * v, axis=-1)

    def orthonormality_residual(self) -> float:
        gram = self.dx * self.phis @ self.phis.T
        return float(np.max(np.abs(gram - np.eye(self.n_modes))))

    def gap(self, k: int) -> float:
        """lambda_{k+1} - lambda_k with 1-based k."""
        return float(self.lambdas[k] - self.lambdas[k - 1])


def operator_bands(profile: DiffusionProfile) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the symmetric matrix for -(a u')' with zero boundary flux."""
    a = profile.face_values
    n = profile.cells
    if a.size != n + 1 or not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise ResidualError("diffusion coefficient must be finite and positive on every face")
    dx2 = profile.dx**2
    right = a[1:] / dx2
    right[-1] = 0.0
    left = a[:-1] / dx2
    left[0] = 0.0
    diag = left + right
    upper = -right[:-1]
    lower = -left[1:]
    if not np.array_equal(upper, lower):
        raise ResidualError("finite-difference operator is not symmetric")
    return diag, upper


def eigensolve(profile: DiffusionProfile, n_modes: int = 4) -> Spectrum:
    if n_modes < 1:
        raise ValueError(f"need at least one mode, got {n_modes}")
    if profile.shape != "constant" and profile.valley_points() < VALLEY_POINTS:
        raise ValueError(
            f"mesh too coarse: {profile.valley_points()} cells inside the valley, need {VALLEY_POINTS}"
        )
    diag, off = operator_bands(profile)
    lambdas, vectors = eigh_tridiagonal(diag, off, select="i", select_range=(0, n_modes - 1))
    phis = vectors.T / np.sqrt(profile.dx)
    # the constant is the exact Neumann null vector; re-orthonormalise the rest against it
    phis[0] = 1.0
    lambdas[0] = 0.0
    for k in range(1, n_modes):
        phi = phis[k] - profile.dx * (phis[:k] @ phis[k]) @ phis[:k]
        phi /= np.sqrt(profile.dx * phi @ phi)
        phis[k] = -phi if phi[0] > 0 else phi
    spectrum = Spectrum(profile=profile, lambdas=lambdas, phis=phis)
    residual = spectrum.orthonormality_residual()
    if residual > ORTHONORMAL_TOL:
        raise ResidualError(f"eigenfunctions not orthonormal: residual {residual:.3e}")
    log.info("eigensolve nu=%g: lambda = %s", profile.nu, np.array2string(lambdas, precision=6))
    return spectrum


def limiting_lambda2(x_star: float, alpha0: float, beta0: float) -> float:
    """Limit of lambda_2 as nu -> 0: the two-compartment exchange rate alpha0 / (2 beta0 x* (1 - x*))."""
    if not 0.0 < x_star < 1.0:
        raise ValueError(f"x_star must lie in (0, 1), got {x_star}")
    return alpha0 / (2.0 * beta0 * x_star * (1.0 - x_star))


def nu_sweep(
    nus: Sequence[float],
    x_star: float = 0.5,
    alpha0: float = 1.0,
    beta0: float = 2.4,
    n_modes: int = 3,
    threads: Optional[int] = None,
) -> List[Spectrum]:
    """Independent eigensolves over nu, in input order."""

    def job(nu: float) -> Spectrum:
        return eigensolve(build_diffusion(nu, x_star, alpha0, beta0), n_modes)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(job, nus))


def trend_violations(spectra: Sequence[Spectrum], target: float) -> int:
    """Number of consecutive pairs along which |lambda_2 - target| fails to shrink."""
    distances = [abs(s.lambdas[1] - target) for s in spectra]
    return sum(1 for a, b in zip(distances, distances[1:]) if not b < a)
