"""Built-in systems that scenarios refer to by id.

Each builder takes resolved parameters (defaults filled in) and returns a
``Model``. Oracles map state points lying on a computed graph to their
deviation from the known closed form.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np
from scipy.linalg import eig

from .core import Generator, MatrixFunction, Nonlinearity
from .parabolic.limiting import Coupling

log = logging.getLogger(__name__)

Oracle = Callable[[np.ndarray], np.ndarray]


@dataclass
class Model:
    name: str
    generator: Generator
    rank: int
    params: Dict[str, Any]
    oracles: Dict[str, Oracle] = field(default_factory=dict)
    expected: Dict[str, float] = field(default_factory=dict)
    perturbation: Optional[MatrixFunction] = None

    @property
    def dim(self) -> int:
        return self.generator.dim

    @property
    def nonlinearity(self) -> Nonlinearity:
        f = self.generator.nonlinearity
        return Nonlinearity.zero() if f is None else f

    def spectral_projection(self, matrix: Optional[np.ndarray] = None) -> np.ndarray:
        """Projection onto the ``rank`` eigen-directions of largest real part of a constant matrix."""
        a = self.generator.eval(0.0) if matrix is None else np.asarray(matrix, dtype=float)
        values, vectors = eig(a)
        order = np.argsort(-values.real, kind="stable")
        keep = np.zeros(values.size)
        keep[order[: self.rank]] = 1.0
        return np.real(vectors @ np.diag(keep) @ np.linalg.inv(vectors))


def _quadratic(params: Dict[str, Any]) -> Model:
    """x' = x, y' = -y + x^2; Sigma* is y = x^2/3 and Theta* is x = 0."""

    def func(t: Any, u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u)
        out[..., 1] = u[..., 0] ** 2
        return out

    reach = params["radius"] + params["width"]
    f = Nonlinearity(func=func, lipschitz=2.0 * reach, name="quadratic")
    gen = Generator.constant(np.diag([1.0, -1.0]), nonlinearity=f, name="quadratic")
    return Model(
        name="quadratic",
        generator=gen,
        rank=1,
        params=params,
        oracles={
            "sigma": lambda u: u[:, 1] - u[:, 0] ** 2 / 3.0,
            "theta": lambda u: u[:, 0],
        },
    )


def _mirrored(params: Dict[str, Any]) -> Model:
    """x' = x + y^2, y' = -y; Theta* is x = -y^2/3 and Sigma* is y = 0."""

    def func(t: Any, u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u)
        out[..., 0] = u[..., 1] ** 2
        return out

    reach = params["radius"] + params["width"]
    f = Nonlinearity(func=func, lipschitz=2.0 * reach, name="mirrored")
    gen = Generator.constant(np.diag([1.0, -1.0]), nonlinearity=f, name="mirrored")
    return Model(
        name="mirrored",
        generator=gen,
        rank=1,
        params=params,
        oracles={
            "sigma": lambda u: u[:, 1],
            "theta": lambda u: u[:, 0] + u[:, 1] ** 2 / 3.0,
        },
    )


def _diagonal(params: Dict[str, Any]) -> Model:
    rates = np.asarray(params["rates"], dtype=float)
    rank = int(params["rank"])
    order = np.sort(rates)[::-1]
    if not 0 <= rank <= rates.size:
        raise ValueError(f"rank {rank} outside [0, {rates.size}]")
    expected: Dict[str, float] = {}
    if 0 < rank < rates.size:
        expected = {"gamma": float(-order[rank]), "rho": float(-order[rank - 1])}
    gen = Generator.constant(np.diag(rates), name="diagonal")
    return Model(name="diagonal", generator=gen, rank=rank, params=params, expected=expected)


def _matrix(params: Dict[str, Any]) -> Model:
    a = np.asarray(params["matrix"], dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix literal must be square, got shape {a.shape}")
    return Model(name="matrix", generator=Generator.constant(a, name="matrix"), rank=int(params["rank"]), params=params)


def _swap(params: Dict[str, Any]) -> Model:
    """A = diag(1, -1) perturbed by B = eps * [[0, 1], [1, 0]]."""
    eps = float(params["eps"])
    b = eps * np.array([[0.0, 1.0], [1.0, 0.0]])
    gen = Generator.constant(np.diag([1.0, -1.0]), name="swap")
    return Model(name="swap", generator=gen, rank=1, params=params, perturbation=lambda t: b)


def _fine(params: Dict[str, Any]) -> Model:
    """diag(2, 1, -1) with the cubic coupling f = (0, 0, eps x1^3)."""
    eps = float(params["eps"])

    def func(t: Any, u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u)
        out[..., 2] = eps * u[..., 0] ** 3
        return out

    reach = params["radius"] + params["width"]
    f = Nonlinearity(func=func, lipschitz=3.0 * abs(eps) * reach**2, name="cubic_coupling")
    gen = Generator.constant(np.diag([2.0, 1.0, -1.0]), nonlinearity=f, name="fine")
    return Model(
        name="fine",
        generator=gen,
        rank=2,
        params=params,
        expected={"fast_coefficient": eps / 7.0},
    )


def _parabolic(params: Dict[str, Any]) -> Model:
    # the pde pipeline reads its parameters directly; the generator is the limiting z-coupling
    c = Coupling.of(params["x_star"], params["alpha0"], params["beta0"])
    gen = Generator.constant(np.array([[-c.a1, c.a1], [c.a2, -c.a2]]), name="z_linear")
    return Model(name="parabolic", generator=gen, rank=0, params=params)


# id -> (defaults, builder); every key a scenario may set appears in the defaults
MODELS: Dict[str, tuple[Dict[str, Any], Callable[[Dict[str, Any]], Model]]] = {
    "quadratic": ({"radius": 0.15, "width": 0.05, "oracle_radius": 0.05, "phase_start": [1e-4, 1e-3]}, _quadratic),
    "mirrored": ({"radius": 0.15, "width": 0.05, "oracle_radius": 0.05}, _mirrored),
    "diagonal": ({"rates": [2.0, 1.0, -1.0], "rank": 2, "fine_rank": 0}, _diagonal),
    "matrix": ({"matrix": [[1.0, 0.0], [0.0, -1.0]], "rank": 1}, _matrix),
    "swap": ({"eps": 0.05, "extent": 1.0, "count": 5}, _swap),
    "fine": (
        {"eps": 0.01, "radius": 1.0, "width": 0.5, "fine_rank": 1, "start": [0.5, 0.5], "lags": 8},
        _fine,
    ),
    "parabolic": (
        {
            "nu": 1e-3,
            "x_star": 0.5,
            "alpha0": 1.0,
            "beta0": 2.4,
            "shape": "bands",
            "beta": {"mean": 1.5, "amplitude": 0.5, "frequency": 1.0},
            "n_modes": 4,
            "galerkin_modes": 3,
            "sweep": [4e-2, 2e-2, 1e-2],
            "horizon": 20.0,
            "pullback_depth": 8.0,
            "window": 4.0,
            "refine_modes": 8,
            "inertial_radius": 0.1,
            "inertial_width": 0.05,
        },
        _parabolic,
    ),
}


def model_defaults(model_id: str) -> Dict[str, Any]:
    if model_id not in MODELS:
        raise ValueError(f"unknown model id {model_id!r}; known: {', '.join(sorted(MODELS))}")
    defaults, _ = MODELS[model_id]
    return {key: (list(value) if isinstance(value, list) else value) for key, value in defaults.items()}


def build_model(model_id: str, params: Dict[str, Any]) -> Model:
    defaults = model_defaults(model_id)
    unknown = sorted(set(params) - set(defaults))
    if unknown:
        raise ValueError(f"unknown parameter(s) for model {model_id!r}: {', '.join(unknown)}")
    resolved = {**defaults, **params}
    log.info("building model %s", model_id)
    return MODELS[model_id][1](resolved)
