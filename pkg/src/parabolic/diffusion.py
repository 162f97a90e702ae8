"""Diffusion coefficients a_nu(x) that are small near x* and large elsewhere."""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict

import numpy as np

from ..errors import ResidualError
from ..nonlinear import smoothstep_cutoff

log = logging.getLogger(__name__)

SHAPES = ("bands", "constant")
VALLEY_POINTS = 32
MIN_CELLS = 512


def mesh_size(nu: float, beta0: float) -> int:
    """Cell count putting at least VALLEY_POINTS cells across the valley."""
    return max(MIN_CELLS, math.ceil(VALLEY_POINTS / (2.0 * nu * beta0)))


@dataclass(frozen=True, eq=False)
class DiffusionProfile:
    """a_nu sampled on a cell-centred mesh of [0, 1].

    ``faces`` holds the n + 1 cell boundaries and ``face_values`` the
    coefficient there; ``centers`` are the n unknown locations.
    """

    nu: float
    x_star: float
    alpha0: float
    beta0: float
    alpha_nu: float
    beta_nu: float
    shape: str
    faces: np.ndarray
    face_values: np.ndarray

    @property
    def cells(self) -> int:
        return self.faces.size - 1

    @property
    def dx(self) -> float:
        return 1.0 / self.cells

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.faces[:-1] + self.faces[1:])

    def valley_points(self) -> int:
        return int(np.count_nonzero(np.abs(self.centers - self.x_star) < self.nu * self.beta0))

    def band_violations(self) -> Dict[str, float]:
        """Worst violation of each band inequality on the face points; zero when honoured."""
        if self.shape == "constant":
            return {"plateau": 0.0, "floor": 0.0, "valley": 0.0}
        x, a, nu = self.faces, self.face_values, self.nu
        gap = np.abs(x - self.x_star)
        outer = (gap > nu * self.beta_nu) & (x > 0) & (x < 1)
        middle = gap < nu * self.beta_nu
        inner = gap < nu * self.beta0
        return {
            "plateau": float(np.max(1.0 / nu - a[outer], initial=0.0)),
            "floor": float(np.max(nu * self.alpha0 - a[middle], initial=0.0)),
            "valley": float(np.max(a[inner] - nu * self.alpha_nu, initial=0.0)),
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "nu": self.nu,
            "x_star": self.x_star,
            "alpha0": self.alpha0,
            "beta0": self.beta0,
            "alpha_nu": self.alpha_nu,
            "beta_nu": self.beta_nu,
            "shape": self.shape,
            "cells": self.cells,
        }


def band_profile(x: np.ndarray, nu: float, x_star: float, alpha0: float, beta0: float, beta_nu: float) -> np.ndarray:
    """nu*alpha0 on |x - x*| <= nu*beta0, 1/nu beyond nu*beta_nu, C^1 ramp between."""
    low, high = nu * alpha0, 1.0 / nu
    ramp = 1.0 - smoothstep_cutoff(np.abs(x - x_star), nu * beta0, nu * (beta_nu - beta0))
    return low + (high - low) * ramp


def build_diffusion(
    nu: float,
    x_star: float = 0.5,
    alpha0: float = 1.0,
    beta0: float = 2.4,
    shape: str = "bands",
    alpha_nu: float | None = None,
    beta_nu: float | None = None,
    cells: int | None = None,
    value: float = 1.0,
) -> DiffusionProfile:
    """Build a_nu on a cell-centred mesh and check the band inequalities.

    ``shape="constant"`` gives a == value everywhere, for closed-form checks.
    """
    if shape not in SHAPES:
        raise ValueError(f"unknown profile shape {shape!r}; expected one of {SHAPES}")
    if not 0.0 < x_star < 1.0:
        raise ValueError(f"x_star must lie in (0, 1), got {x_star}")
    if nu <= 0 or alpha0 <= 0 or beta0 <= 0:
        raise ValueError(f"nu, alpha0 and beta0 must be positive, got {nu}, {alpha0}, {beta0}")
    alpha_nu = alpha0 if alpha_nu is None else alpha_nu
    beta_nu = 1.25 * beta0 if beta_nu is None else beta_nu
    if alpha_nu < alpha0 or beta_nu <= beta0:
        raise ValueError(f"need alpha_nu >= alpha0 and beta_nu > beta0, got {alpha_nu}, {beta_nu}")

    if shape == "constant":
        if value <= 0:
            raise ValueError(f"constant diffusion must be positive, got {value}")
        n = cells or MIN_CELLS
        faces = np.linspace(0.0, 1.0, n + 1)
        return DiffusionProfile(nu, x_star, alpha0, beta0, alpha_nu, beta_nu, shape, faces, np.full(n + 1, value))

    reach = nu * beta_nu
    if reach >= min(x_star, 1.0 - x_star):
        raise ValueError(
            f"bands overlap the boundary: nu*beta_nu = {reach:.4g} >= min(x*, 1 - x*) = {min(x_star, 1 - x_star):.4g}"
        )
    n = cells or mesh_size(nu, beta0)
    faces = np.linspace(0.0, 1.0, n + 1)
    values = band_profile(faces, nu, x_star, alpha0, beta0, beta_nu)
    profile = DiffusionProfile(nu, x_star, alpha0, beta0, alpha_nu, beta_nu, shape, faces, values)
    violations = profile.band_violations()
    if max(violations.values()) > 1e-12 * max(1.0, 1.0 / nu):
        raise ResidualError(f"diffusion profile breaks its bands: {violations}")
    log.info("diffusion nu=%g on %d cells (%d in the valley)", nu, n, profile.valley_points())
    return profile
