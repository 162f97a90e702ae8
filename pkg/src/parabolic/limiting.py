"""The two-compartment limit nu -> 0 in (u1, u2) and (z1, z2) coordinates."""

import math
from dataclasses import dataclass
from typing import Any, Dict

import numpy as np

from .galerkin import ReducedSystem
from .reaction import CubicReaction


@dataclass(frozen=True)
class Coupling:
    x_star: float
    a1: float
    a2: float
    k1: float

    @classmethod
    def of(cls, x_star: float, alpha0: float, beta0: float) -> "Coupling":
        if not 0.0 < x_star < 1.0:
            raise ValueError(f"x_star must lie in (0, 1), got {x_star}")
        if alpha0 <= 0 or beta0 <= 0:
            raise ValueError(f"alpha0 and beta0 must be positive, got {alpha0}, {beta0}")
        return cls(
            x_star=x_star,
            a1=alpha0 / (2.0 * beta0 * x_star),
            a2=alpha0 / (2.0 * beta0 * (1.0 - x_star)),
            k1=math.sqrt((1.0 - x_star) / x_star),
        )

    @property
    def lambda2(self) -> float:
        return self.a1 + self.a2

    def to_dict(self) -> Dict[str, float]:
        return {"x_star": self.x_star, "a1": self.a1, "a2": self.a2, "k1": self.k1, "lambda2": self.lambda2}

    def u_to_z_matrix(self) -> np.ndarray:
        """z1 = u1 - k1 u2, z2 = u1 + u2 / k1."""
        return np.array([[1.0, -self.k1], [1.0, 1.0 / self.k1]])

    def z_to_u_matrix(self) -> np.ndarray:
        """u1 = x* z1 + (1 - x*) z2, u2 = x* k1 (z2 - z1)."""
        x, k = self.x_star, self.k1
        return np.array([[x, 1.0 - x], [-x * k, x * k]])

    def u_to_z(self, u: Any) -> np.ndarray:
        return np.asarray(u, dtype=float) @ self.u_to_z_matrix().T

    def z_to_u(self, z: Any) -> np.ndarray:
        return np.asarray(z, dtype=float) @ self.z_to_u_matrix().T

    def round_trip_residual(self) -> float:
        return float(np.max(np.abs(self.z_to_u_matrix() @ self.u_to_z_matrix() - np.eye(2))))


def limiting_systems(x_star: float, alpha0: float, beta0: float, reaction: CubicReaction) -> Dict[str, ReducedSystem]:
    coupling = Coupling.of(x_star, alpha0, beta0)
    x, k, a1, a2 = coupling.x_star, coupling.k1, coupling.a1, coupling.a2
    to_z = coupling.u_to_z_matrix()

    def uv_nonlinear(t: Any, u: np.ndarray) -> np.ndarray:
        fz = reaction(t, np.asarray(u, dtype=float) @ to_z.T)
        f1, f2 = fz[..., 0], fz[..., 1]
        return np.stack([x * f1 + (1.0 - x) * f2, x * k * (f2 - f1)], axis=-1)

    def uv_jacobian(t: float, u: np.ndarray) -> np.ndarray:
        slope = reaction.derivative(t, np.asarray(u, dtype=float) @ to_z.T)
        return uv_matrix + coupling.z_to_u_matrix() @ np.diag(slope) @ to_z

    def z_nonlinear(t: Any, z: np.ndarray) -> np.ndarray:
        return reaction(t, z)

    def z_jacobian(t: float, z: np.ndarray) -> np.ndarray:
        return z_matrix + np.diag(reaction.derivative(t, z))

    uv_matrix = np.diag([0.0, -coupling.lambda2])
    z_matrix = np.array([[-a1, a1], [a2, -a2]])
    coefficients = coupling.to_dict()
    return {
        "uv": ReducedSystem("limiting_uv", uv_matrix, uv_nonlinear, reaction, coefficients, uv_jacobian),
        "z": ReducedSystem("limiting_z", z_matrix, z_nonlinear, reaction, coefficients, z_jacobian),
    }


def line_drift(system: ReducedSystem, z0: Any, line: str, t0: float, t1: float, h: float = 0.02) -> float:
    """Largest distance from E1 = {z1 = z2} or E2 = {z1 = -z2} along the orbit through z0."""
    sign = {"E1": -1.0, "E2": 1.0}[line]
    _, states = system.integrate(z0, t0, t1, h, record=True)
    return float(np.max(np.abs(states[:, 0] + sign * states[:, 1])) / math.sqrt(2.0))


def sign_flip(states: Any) -> np.ndarray:
    """(z1, z2) -> (-z1, -z2); conjugates solutions because the reaction is odd."""
    return -np.asarray(states, dtype=float)


def symmetry_residual(system: ReducedSystem, z0: Any, t0: float, t1: float, h: float = 0.02) -> float:
    _, plus = system.integrate(z0, t0, t1, h, record=True)
    _, minus = system.integrate(sign_flip(z0), t0, t1, h, record=True)
    return float(np.max(np.abs(sign_flip(plus) - minus)))
