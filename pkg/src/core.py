"""Time grids, state vectors, generators and fixed-step propagation.

Everything else in the package integrates through the helpers here:

* ``rk4_step`` / ``integrate`` - batched classical RK4 on arrays shaped ``(..., d)``
* ``propagate_linear`` / ``propagate_semilinear`` - L(t, tau) u0 and T(t, tau) u0
* ``propagator`` - the d x d matrix L(t, tau)
* ``lawson_rk4`` - integrating-factor RK4 for a diagonal stiff linear part
"""

import dataclasses
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline, make_interp_spline

from .errors import BlowUpError, OutOfGridError

log = logging.getLogger(__name__)

# f(t, u) with u shaped (..., d); t is a scalar or broadcasts against u[..., 0]
VectorField = Callable[[Any, np.ndarray], np.ndarray]
MatrixFunction = Callable[[float], np.ndarray]

DEFAULT_CEILING = 1e8
SUBSPACE_TOL = 1e-10


@dataclass(frozen=True)
class TimeGrid:
    t_min: float
    t_max: float
    n_steps: int

    def __post_init__(self):
        object.__setattr__(self, "t_min", float(self.t_min))
        object.__setattr__(self, "t_max", float(self.t_max))
        if int(self.n_steps) < 1:
            raise ValueError(f"TimeGrid needs n_steps >= 1, got {self.n_steps}")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        if not self.t_max > self.t_min:
            raise ValueError(f"TimeGrid needs t_max > t_min, got [{self.t_min}, {self.t_max}]")

    @property
    def h(self) -> float:
        return (self.t_max - self.t_min) / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.n_steps + 1)

    def contains(self, t: float) -> bool:
        slack = 1e-12 * max(1.0, abs(self.t_min), abs(self.t_max))
        return self.t_min - slack <= t <= self.t_max + slack

    def check(self, *times: float) -> None:
        for t in times:
            if not self.contains(t):
                raise OutOfGridError(f"time {t} outside grid [{self.t_min}, {self.t_max}]")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TimeGrid":
        return cls(t_min=data["t_min"], t_max=data["t_max"], n_steps=data["n_steps"])

    def to_dict(self) -> Dict[str, Any]:
        return {"t_min": self.t_min, "t_max": self.t_max, "n_steps": self.n_steps}


@dataclass(frozen=True, eq=False)
class StateVector:
    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float).reshape(-1)
        if not np.all(np.isfinite(coords)):
            raise ValueError(f"StateVector entries must be finite, got {coords}")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return int(self.coords.shape[0])

    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)

    def __len__(self) -> int:
        return self.dim

    def __getitem__(self, index):
        return self.coords[index]

    @classmethod
    def of(cls, value: Union["StateVector", Sequence[float], np.ndarray]) -> "StateVector":
        return value if isinstance(value, StateVector) else cls(np.asarray(value, dtype=float))


def apply_matrix_field(matrix: MatrixFunction, t: Any, u: np.ndarray) -> np.ndarray:
    """Apply M(t) to a batch of row vectors; ``t`` may be per-row."""
    u = np.asarray(u, dtype=float)
    if np.ndim(t) == 0:
        return u @ np.asarray(matrix(float(t)), dtype=float).T
    times = np.broadcast_to(np.asarray(t, dtype=float), u.shape[:-1])
    unique, inverse = np.unique(times, return_inverse=True)
    stack = np.stack([np.asarray(matrix(float(s)), dtype=float) for s in unique])
    return np.einsum("...ij,...j->...i", stack[inverse.reshape(times.shape)], u)


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """Vectorized f(t, u) with a declared global Lipschitz constant."""

    func: VectorField
    lipschitz: float
    vanishes_at_zero: bool = True
    name: str = "f"

    def __post_init__(self):
        if not self.lipschitz >= 0.0:
            raise ValueError(f"Lipschitz constant must be non-negative, got {self.lipschitz}")

    def __call__(self, t: Any, u: np.ndarray) -> np.ndarray:
        return np.asarray(self.func(t, np.asarray(u, dtype=float)), dtype=float)

    def check_zero(self, dim: int, times: Sequence[float] = (0.0,), tol: float = 1e-12) -> float:
        worst = max(float(np.linalg.norm(self(t, np.zeros(dim)))) for t in times)
        if self.vanishes_at_zero and worst > tol:
            raise ValueError(f"{self.name} is flagged f(t,0)=0 but |f(t,0)| = {worst:.3e}")
        return worst

    @classmethod
    def zero(cls) -> "Nonlinearity":
        return cls(func=lambda t, u: np.zeros_like(u), lipschitz=0.0, name="zero")

    @classmethod
    def linear(cls, matrix: MatrixFunction, lipschitz: Optional[float] = None, name: str = "B") -> "Nonlinearity":
        if lipschitz is None:
            lipschitz = float(np.linalg.norm(np.asarray(matrix(0.0), dtype=float), 2))
        return cls(func=lambda t, u: apply_matrix_field(matrix, t, u), lipschitz=lipschitz, name=name)

    @property
    def is_zero(self) -> bool:
        return self.name == "zero"


@dataclass(frozen=True, eq=False)
class Generator:
    """Time-dependent linear part A(t), optionally paired with a nonlinearity."""

    matrix: MatrixFunction
    dim: int
    nonlinearity: Optional[Nonlinearity] = None
    autonomous: bool = False
    name: str = "generator"

    @classmethod
    def constant(cls, a: Any, nonlinearity: Optional[Nonlinearity] = None, name: str = "constant") -> "Generator":
        a = np.array(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"generator matrix must be square, got shape {a.shape}")
        a.setflags(write=False)
        return cls(matrix=lambda t: a, dim=a.shape[0], nonlinearity=nonlinearity, autonomous=True, name=name)

    def eval(self, t: float) -> np.ndarray:
        a = np.asarray(self.matrix(float(t)), dtype=float)
        if a.shape != (self.dim, self.dim):
            raise ValueError(f"{self.name}: A({t}) has shape {a.shape}, expected {(self.dim, self.dim)}")
        return a

    def eval_many(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=float).reshape(-1)
        if self.autonomous:
            return np.broadcast_to(self.eval(0.0), (times.size, self.dim, self.dim))
        unique, inverse = np.unique(times, return_inverse=True)
        return np.stack([self.eval(t) for t in unique])[inverse]

    def linear_part(self) -> "Generator":
        return dataclasses.replace(self, nonlinearity=None)

    def with_nonlinearity(self, nonlinearity: Optional[Nonlinearity]) -> "Generator":
        return dataclasses.replace(self, nonlinearity=nonlinearity)

    def shifted(self, c: float) -> "Generator":
        """Generator of e^{c(t-tau)} L(t, tau)."""
        base = self.matrix
        eye = np.eye(self.dim)
        return dataclasses.replace(self, matrix=lambda t: np.asarray(base(t), dtype=float) + c * eye)

    def perturbed(self, b: MatrixFunction, autonomous: Optional[bool] = None) -> "Generator":
        base = self.matrix
        return dataclasses.replace(
            self,
            matrix=lambda t: np.asarray(base(t), dtype=float) + np.asarray(b(t), dtype=float),
            autonomous=self.autonomous if autonomous is None else autonomous,
            nonlinearity=None,
        )

    def linear_field(self) -> VectorField:
        return lambda t, u: apply_matrix_field(self.eval, t, u)

    def field(self) -> VectorField:
        if self.nonlinearity is None:
            return self.linear_field()
        f = self.nonlinearity
        return lambda t, u: apply_matrix_field(self.eval, t, u) + f(t, u)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled solution u(t_i); evaluation between samples is a cubic spline."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        states = np.array(self.states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        if states.shape[0] != times.size:
            raise ValueError(f"trajectory has {times.size} times but {states.shape[0]} states")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("trajectory times must be strictly increasing")
        if not np.all(np.isfinite(states)):
            raise ValueError("trajectory states must be finite")
        times.setflags(write=False)
        states.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @classmethod
    def constant(cls, u: Any, t_min: float, t_max: float) -> "Trajectory":
        u = np.asarray(u, dtype=float).reshape(-1)
        return cls(times=np.array([t_min, t_max]), states=np.stack([u, u]))

    @property
    def dim(self) -> int:
        return int(self.states.shape[1])

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.states == self.states[0]))

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.states == 0.0))

    @cached_property
    def _spline(self):
        if self.times.size < 3:
            return make_interp_spline(self.times, self.states, k=1)
        return CubicSpline(self.times, self.states, axis=0)

    def __call__(self, t: Any) -> np.ndarray:
        if self.is_constant:
            return np.broadcast_to(self.states[0], np.shape(t) + (self.dim,)).copy()
        return self._spline(np.asarray(t, dtype=float))

    def derivative(self, t: Any) -> np.ndarray:
        if self.is_constant:
            return np.zeros(np.shape(t) + (self.dim,))
        return self._spline.derivative()(np.asarray(t, dtype=float))

    def sup_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.states, axis=1)))


def rk4_step(rhs: VectorField, t: float, u: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(t, u)
    k2 = rhs(t + 0.5 * h, u + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, u + 0.5 * h * k2)
    k4 = rhs(t + h, u + h * k3)
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_count(t0: float, t1: float, h: float) -> int:
    if h <= 0:
        raise ValueError(f"step size must be positive, got {h}")
    return max(1, int(math.ceil(abs(t1 - t0) / h - 1e-9)))


def integrate(
    rhs: VectorField,
    t0: float,
    t1: float,
    u0: Any,
    h: float,
    ceiling: Optional[float] = None,
    record: bool = False,
) -> Union[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
    """RK4 from t0 to t1 (either direction) landing exactly on t1.

    With ``record`` the return value is ``(times, states)`` including both ends.
    """
    u = np.array(u0, dtype=float)
    if t1 == t0:
        return (np.array([t0]), u[None].copy()) if record else u
    n = step_count(t0, t1, h)
    step = (t1 - t0) / n
    times = t0 + step * np.arange(n + 1)
    times[-1] = t1
    states = np.empty((n + 1,) + u.shape) if record else None
    if states is not None:
        states[0] = u
    for i in range(n):
        u = rk4_step(rhs, times[i], u, step)
        if ceiling is not None:
            size = float(np.max(np.abs(u)))
            if not np.isfinite(size) or size > ceiling:
                raise BlowUpError(f"|u| exceeded ceiling {ceiling:g} at t={times[i + 1]:.6g}")
        if states is not None:
            states[i + 1] = u
    return (times, states) if record else u


def _restricted(field: VectorField, q: np.ndarray) -> VectorField:
    return lambda t, u: field(t, u) @ q.T


def propagate_linear(
    gen: Generator,
    tau: float,
    t: float,
    u0: Any,
    grid: TimeGrid,
    invertible: bool = False,
    h: Optional[float] = None,
    subspace: Optional[np.ndarray] = None,
) -> StateVector:
    """L(t, tau) u0.

    Backward requests need either ``invertible=True`` (the whole space) or
    ``subspace``, a constant projection Q whose image is invariant and carries
    u0. With ``subspace`` the field integrated is Q A(t) u, so the result stays
    in Im Q.
    """
    grid.check(tau, t)
    if t < tau and not invertible and subspace is None:
        raise ValueError(f"backward propagation from {tau} to {t} requires an invertible subspace")
    u0 = StateVector.of(u0)
    field = gen.linear_field()
    if subspace is not None:
        q = np.asarray(subspace, dtype=float)
        if q.shape != (gen.dim, gen.dim):
            raise ValueError(f"subspace projection has shape {q.shape}, expected {(gen.dim, gen.dim)}")
        off = float(np.linalg.norm(u0.coords - q @ u0.coords))
        if off > SUBSPACE_TOL * max(1.0, u0.norm()):
            raise ValueError(f"u0 lies {off:.3e} away from the image of the subspace projection")
        field = _restricted(field, q)
    if t == tau:
        return u0
    return StateVector(integrate(field, tau, t, u0.coords, h or grid.h))


def propagate_semilinear(
    gen: Generator,
    tau: float,
    t: float,
    u0: Any,
    grid: TimeGrid,
    h: Optional[float] = None,
    ceiling: float = DEFAULT_CEILING,
) -> StateVector:
    """T(t, tau) u0 for u' = A(t)u + f(t,u), forward only."""
    grid.check(tau, t)
    if t < tau:
        raise ValueError(f"semilinear propagation is forward only, got t={t} < tau={tau}")
    u0 = StateVector.of(u0)
    if t == tau:
        return u0
    return StateVector(integrate(gen.field(), tau, t, u0.coords, h or grid.h, ceiling=ceiling))


def propagator(gen: Generator, t: float, tau: float, h: float) -> np.ndarray:
    """The matrix L(t, tau) of the linear part."""
    rows = integrate(gen.linear_field(), tau, t, np.eye(gen.dim), h)
    return np.asarray(rows).T


def lawson_rk4(
    rates: np.ndarray,
    nonlinear: VectorField,
    t0: float,
    t1: float,
    u0: Any,
    h: float,
    record: bool = False,
) -> Union[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
    """Integrating-factor RK4 for u' = -diag(rates) u + N(t, u).

    The linear decay is applied exactly, so step size is limited by N only.
    """
    rates = np.asarray(rates, dtype=float)
    u = np.array(u0, dtype=float)
    n = step_count(t0, t1, h)
    step = (t1 - t0) / n
    full = np.exp(-rates * step)
    half = np.exp(-rates * 0.5 * step)
    times = t0 + step * np.arange(n + 1)
    times[-1] = t1
    states = np.empty((n + 1,) + u.shape) if record else None
    if states is not None:
        states[0] = u
    for i in range(n):
        t = times[i]
        k1 = nonlinear(t, u)
        k2 = nonlinear(t + 0.5 * step, half * (u + 0.5 * step * k1))
        k3 = nonlinear(t + 0.5 * step, half * u + 0.5 * step * k2)
        k4 = nonlinear(t + step, full * u + step * half * k3)
        u = full * u + (step / 6.0) * (full * k1 + 2.0 * half * (k2 + k3) + k4)
        if states is not None:
            states[i + 1] = u
    return (times, states) if record else u
