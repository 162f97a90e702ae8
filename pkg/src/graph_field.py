"""Interpolated graph fields Sigma / Theta stored on a (t, q) tensor grid."""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .core import TimeGrid
from .errors import OutOfGridError
from .frames import SplitFrame

log = logging.getLogger(__name__)

ORIENTATIONS = ("sigma", "theta")
HEADER = "# splitting-kit graph field"


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def symmetric_axis(extent: float, count: int) -> np.ndarray:
    """Odd-count axis on [-extent, extent] that contains 0 as a node."""
    if count < 3 or count % 2 == 0:
        raise ValueError(f"axis node count must be odd and >= 3, got {count}")
    axis = np.linspace(-extent, extent, count)
    axis[count // 2] = 0.0
    return axis


@dataclass(frozen=True, eq=False)
class GraphField:
    time_grid: TimeGrid
    axes: Tuple[np.ndarray, ...]
    values: np.ndarray
    kappa: float
    orientation: str = "sigma"
    grid_slack: float = 0.05
    ledger: Dict[str, float] = field(default_factory=dict)
    frame: Optional[SplitFrame] = None

    def __post_init__(self):
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"orientation must be one of {ORIENTATIONS}, got {self.orientation!r}")
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        object.__setattr__(self, "axes", axes)
        values = np.array(self.values, dtype=float)
        expected = (self.time_grid.n_steps + 1,) + tuple(a.size for a in axes)
        if values.shape[:-1] != expected:
            raise ValueError(f"graph values have shape {values.shape}, expected {expected} + (m,)")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return self.time_grid.nodes

    @property
    def domain_dim(self) -> int:
        return len(self.axes)

    @property
    def value_dim(self) -> int:
        return int(self.values.shape[-1])

    @property
    def extents(self) -> List[Tuple[float, float]]:
        return [(float(a[0]), float(a[-1])) for a in self.axes]

    @cached_property
    def _interpolator(self) -> RegularGridInterpolator:
        return RegularGridInterpolator((self.times,) + self.axes, self.values, method="linear")

    def node_points(self) -> Tuple[np.ndarray, np.ndarray]:
        """All (t, q) nodes as flat arrays of shape (N,) and (N, k)."""
        mesh = np.meshgrid(self.times, *self.axes, indexing="ij")
        t = mesh[0].reshape(-1)
        q = np.stack([m.reshape(-1) for m in mesh[1:]], axis=-1)
        return t, q

    def with_values(self, values: np.ndarray, **changes: Any) -> "GraphField":
        params = dict(
            time_grid=self.time_grid,
            axes=self.axes,
            values=values,
            kappa=self.kappa,
            orientation=self.orientation,
            grid_slack=self.grid_slack,
            ledger=dict(self.ledger),
            frame=self.frame,
        )
        params.update(changes)
        return GraphField(**params)

    def lipschitz_estimate(self) -> float:
        """Largest finite-difference slope along any q-axis."""
        worst = 0.0
        for axis_index, axis in enumerate(self.axes):
            diff = np.diff(self.values, axis=axis_index + 1)
            spacing = np.diff(axis).reshape((1,) * (axis_index + 1) + (-1,) + (1,) * (self.domain_dim - axis_index))
            slopes = np.linalg.norm(diff / spacing, axis=-1)
            worst = max(worst, float(np.max(slopes)))
        return worst

    def lipschitz_ok(self) -> bool:
        return self.lipschitz_estimate() <= self.kappa * (1.0 + self.grid_slack) + 1e-12

    def zero_section(self) -> np.ndarray:
        index = (slice(None),) + tuple(a.size // 2 for a in self.axes)
        return self.values[index]

    def to_text(self) -> str:
        lines = [
            HEADER,
            f"orientation = {self.orientation}",
            f"kappa = {_fmt(self.kappa)}",
            f"grid_slack = {_fmt(self.grid_slack)}",
            f"time_grid = {_fmt(self.time_grid.t_min)} {_fmt(self.time_grid.t_max)} {self.time_grid.n_steps}",
            f"value_dim = {self.value_dim}",
        ]
        for i, axis in enumerate(self.axes):
            lines.append(f"axis.{i} = " + " ".join(_fmt(x) for x in axis))
        for key in sorted(self.ledger):
            lines.append(f"ledger.{key} = {_fmt(self.ledger[key])}")
        lines.append("records:")
        t, q = self.node_points()
        flat = self.values.reshape(-1, self.value_dim)
        for i in range(t.size):
            row = [t[i], *q[i], *flat[i]]
            lines.append(" ".join(_fmt(x) for x in row))
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def from_text(cls, text: str, frame: Optional[SplitFrame] = None) -> "GraphField":
        header: Dict[str, str] = {}
        records: List[List[float]] = []
        in_records = False
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if in_records:
                records.append([float(x) for x in line.split()])
            elif line == "records:":
                in_records = True
            else:
                key, _, value = line.partition("=")
                header[key.strip()] = value.strip()
        try:
            t_min, t_max, n_steps = header["time_grid"].split()
            axes = []
            while f"axis.{len(axes)}" in header:
                axes.append(np.array([float(x) for x in header[f"axis.{len(axes)}"].split()]))
            value_dim = int(header["value_dim"])
            grid = TimeGrid(float(t_min), float(t_max), int(n_steps))
            shape = (grid.n_steps + 1,) + tuple(a.size for a in axes) + (value_dim,)
            values = np.array(records)[:, 1 + len(axes) :].reshape(shape)
            ledger = {k[len("ledger.") :]: float(v) for k, v in header.items() if k.startswith("ledger.")}
            return cls(
                time_grid=grid,
                axes=tuple(axes),
                values=values,
                kappa=float(header["kappa"]),
                orientation=header["orientation"],
                grid_slack=float(header["grid_slack"]),
                ledger=ledger,
                frame=frame,
            )
        except (KeyError, ValueError, IndexError) as exc:
            raise ValueError(f"malformed graph field text: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path, frame: Optional[SplitFrame] = None) -> "GraphField":
        return cls.from_text(Path(path).read_text(encoding="utf-8"), frame=frame)


def eval_graph(field: GraphField, t: Any, q: Any, clamp: bool = False) -> np.ndarray:
    """Multilinear interpolation in q, linear in t.

    ``q`` has shape (k,) or (N, k); ``t`` is a scalar or shape (N,).
    Points outside the extents raise unless ``clamp`` is set.
    """
    q = np.asarray(q, dtype=float)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    if q.shape[-1] != field.domain_dim:
        raise ValueError(f"graph over {field.domain_dim} coordinates queried with {q.shape[-1]}")
    t = np.broadcast_to(np.asarray(t, dtype=float), q.shape[:1]).copy()
    lows = np.array([field.times[0]] + [a[0] for a in field.axes])
    highs = np.array([field.times[-1]] + [a[-1] for a in field.axes])
    points = np.column_stack([t, q])
    if clamp:
        points = np.clip(points, lows, highs)
    else:
        slack = 1e-12 * np.maximum(1.0, np.abs(highs - lows))
        outside = np.any((points < lows - slack) | (points > highs + slack), axis=1)
        if np.any(outside):
            bad = points[np.argmax(outside)]
            raise OutOfGridError(f"graph evaluated outside its extents at (t, q) = {bad.tolist()}")
        points = np.clip(points, lows, highs)
    out = field._interpolator(points)
    out[np.all(q == 0.0, axis=1)] = 0.0
    return out[0] if single else out


def zero_field(
    time_grid: TimeGrid,
    axes: Sequence[np.ndarray],
    value_dim: int,
    kappa: float,
    orientation: str = "sigma",
    grid_slack: float = 0.05,
    frame: Optional[SplitFrame] = None,
) -> GraphField:
    shape = (time_grid.n_steps + 1,) + tuple(len(a) for a in axes) + (value_dim,)
    return GraphField(
        time_grid=time_grid,
        axes=tuple(axes),
        values=np.zeros(shape),
        kappa=kappa,
        orientation=orientation,
        grid_slack=grid_slack,
        frame=frame,
    )
