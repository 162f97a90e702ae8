"""Nonlinearity preprocessing: radial cut-off and translation to a reference solution."""

import logging
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np

from .core import Generator, Nonlinearity, TimeGrid, Trajectory
from .errors import ResidualError

log = logging.getLogger(__name__)

LIPSCHITZ_INFLATION = 1.1


def fd_step(u: np.ndarray) -> np.ndarray:
    """Central-difference step 1e-5 (1 + |u|), one per row."""
    return 1e-5 * (1.0 + np.linalg.norm(u, axis=-1))


def jacobian(func, t: Any, points: np.ndarray) -> np.ndarray:
    """Central-difference Jacobians of f(t, .) at each row of ``points``; shape (n, d, d)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = points.shape
    step = fd_step(points)[:, None, None]
    offsets = np.eye(d)[None, :, :] * step
    plus = (points[:, None, :] + offsets).reshape(n * d, d)
    minus = (points[:, None, :] - offsets).reshape(n * d, d)
    times = np.repeat(np.broadcast_to(np.asarray(t, dtype=float), (n,)), d)
    diff = (np.asarray(func(times, plus)) - np.asarray(func(times, minus))).reshape(n, d, d)
    # diff[i, j] is the j-th column of J_i
    return np.swapaxes(diff / (2.0 * step), 1, 2)


def smoothstep_cutoff(r: np.ndarray, radius: float, width: float) -> np.ndarray:
    """C^1 radial ramp: 1 on [0, R], 0 beyond R + w."""
    s = np.clip((np.asarray(r, dtype=float) - radius) / width, 0.0, 1.0)
    return 1.0 - s * s * (3.0 - 2.0 * s)


def ball_samples(dim: int, radius: float, count: int, seed: int = 0) -> np.ndarray:
    """Axis points on the sphere, random sphere points and uniform interior points."""
    rng = np.random.default_rng(seed)
    axes = np.concatenate([np.eye(dim), -np.eye(dim)]) * radius
    directions = rng.standard_normal((count, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    shell = directions * radius
    interior = directions * radius * rng.uniform(0.0, 1.0, (count, 1)) ** (1.0 / dim)
    return np.concatenate([np.zeros((1, dim)), axes, shell, interior])


def sampled_lipschitz(
    func, dim: int, radius: float, times: Sequence[float] = (0.0,), count: int = 256, seed: int = 0
) -> float:
    worst = 0.0
    points = ball_samples(dim, radius, count, seed)
    for t in times:
        jac = jacobian(func, t, points)
        worst = max(worst, float(np.max(np.linalg.norm(jac, ord=2, axis=(1, 2)))))
    return worst


@dataclass(frozen=True, eq=False)
class CutoffNonlinearity:
    """chi(|u|) f(t, u): equal to f on the ball |u| <= R and zero beyond R + w."""

    base: Nonlinearity
    radius: float
    width: float
    effective_ell: float
    ramp_ell: float

    def __call__(self, t: Any, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        chi = smoothstep_cutoff(np.linalg.norm(u, axis=-1), self.radius, self.width)
        return chi[..., None] * self.base(t, u)

    @property
    def lipschitz(self) -> float:
        return self.effective_ell

    @property
    def name(self) -> str:
        return f"cutoff({self.base.name})"

    @property
    def vanishes_at_zero(self) -> bool:
        return self.base.vanishes_at_zero

    @property
    def is_zero(self) -> bool:
        return self.base.is_zero

    def as_nonlinearity(self) -> Nonlinearity:
        return Nonlinearity(func=self, lipschitz=self.effective_ell, name=self.name)


def cutoff(
    f: Nonlinearity,
    radius: float,
    width: float,
    dim: int,
    times: Sequence[float] = (0.0,),
    samples: int = 256,
    seed: int = 0,
) -> CutoffNonlinearity:
    """chi(|u|) f(t, u) with a sampled Lipschitz constant.

    ``effective_ell`` is LIPSCHITZ_INFLATION times the sampled Jacobian bound of f
    on the ball |u| <= R only. The ramp R < |u| < R + w is not covered by it; its
    sampled constant is kept as ``ramp_ell`` and a warning is logged when it is larger.
    """
    if radius <= 0 or width <= 0:
        raise ValueError(f"cut-off radius and width must be positive, got R={radius}, w={width}")
    if f.is_zero:
        return CutoffNonlinearity(base=f, radius=radius, width=width, effective_ell=0.0, ramp_ell=0.0)
    ball = sampled_lipschitz(f, dim, radius, times, samples, seed)
    partial = CutoffNonlinearity(base=f, radius=radius, width=width, effective_ell=0.0, ramp_ell=0.0)
    ramp = sampled_lipschitz(partial, dim, radius + width, times, samples, seed + 1)
    effective = LIPSCHITZ_INFLATION * ball
    log.info("cut-off R=%g w=%g: ell on ball %.6g (effective %.6g), ramp %.6g", radius, width, ball, effective, ramp)
    if ramp > effective:
        log.warning("ramp Lipschitz estimate %.6g exceeds the ball estimate %.6g", ramp, effective)
    return CutoffNonlinearity(base=f, radius=radius, width=width, effective_ell=effective, ramp_ell=ramp)


def solution_residual(gen: Generator, u_star: Trajectory, times: Optional[np.ndarray] = None) -> float:
    """sup |u*' - A(t) u* - f(t, u*)| over the sample times."""
    times = u_star.times if times is None else np.asarray(times, dtype=float)
    states = u_star(times)
    field = gen.field()
    worst = 0.0
    for t, u, du in zip(times, states, u_star.derivative(times)):
        worst = max(worst, float(np.linalg.norm(du - field(float(t), u))))
    return worst


def shift_to_solution(
    gen: Generator,
    u_star: Trajectory,
    grid: Optional[TimeGrid] = None,
    tol: float = 1e-6,
) -> Generator:
    """Move the reference solution u* to the origin.

    The result has linear part A(t) + f_u(t, u*(t)) and nonlinearity
    g(t, v) = f(t, u* + v) - f(t, u*) - f_u(t, u*) v.
    """
    if gen.nonlinearity is None:
        raise ValueError(f"{gen.name} has no nonlinearity to shift")
    if u_star.dim != gen.dim:
        raise ValueError(f"reference solution has dimension {u_star.dim}, generator {gen.dim}")
    if u_star.is_zero:
        return gen
    check_times = u_star.times if grid is None else grid.nodes
    residual = solution_residual(gen, u_star, check_times)
    if residual > tol:
        raise ResidualError(f"reference trajectory is not a solution: residual {residual:.3e} > {tol:g}")

    f = gen.nonlinearity
    autonomous = gen.autonomous and u_star.is_constant

    if autonomous:
        frozen = jacobian(f, 0.0, u_star.states[0])[0]

        def b_matrix(t: float) -> np.ndarray:
            return frozen

    else:

        def b_matrix(t: float) -> np.ndarray:
            return jacobian(f, t, u_star(float(t)))[0]

    def g(t: Any, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        ref = u_star(t) if np.ndim(t) else np.broadcast_to(u_star(float(t)), v.shape)
        return f(t, ref + v) - f(t, ref) - Nonlinearity.linear(b_matrix, lipschitz=0.0)(t, v)

    b_sup = max(float(np.linalg.norm(b_matrix(float(t)), 2)) for t in check_times)
    shifted = gen.perturbed(b_matrix, autonomous=autonomous).with_nonlinearity(
        Nonlinearity(func=g, lipschitz=f.lipschitz + b_sup, name=f"shifted({f.name})")
    )

    at_zero = max(float(np.linalg.norm(g(float(t), np.zeros(gen.dim)))) for t in check_times)
    slope = max(float(np.linalg.norm(jacobian(g, float(t), np.zeros(gen.dim))[0], 2)) for t in check_times)
    if at_zero > tol or slope > max(tol, 1e-4):
        raise ResidualError(f"shifted nonlinearity not flat at 0: |g(t,0)|={at_zero:.3e}, |g_v(t,0)|={slope:.3e}")
    log.info("shifted %s to reference solution (residual %.3e, sup |B| %.4g)", gen.name, residual, b_sup)
    return shifted
