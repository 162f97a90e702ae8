"""Invariant manifolds Sigma* and stable manifolds Theta* as graph-transform fixed points.

Both graphs are stored in the split coordinates c = V(t)^{-1} u of the
certificate frame, c = (xi, zeta) with xi spanning Im Q and zeta Ker Q.
Off-diagonal blocks of the split generator are carried with the
nonlinearity, so the coordinate flow is the exact flow of the system.

One sweep of the transform, for a graph over the "domain" block x with
values in the "value" block y:

1. the driver x' = G_xx x + N_x(s, x, graph(s, x)) is integrated from each
   node (tau, eta) away from tau, backward for Sigma and forward for Theta;
2. the source y' = G_yy y + N_y(s, x(s), graph(s, x(s))) is integrated
   back to tau from y = 0 at the far end of the horizon.

The value of y at tau is the new graph value at (tau, eta).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from .checks import CheckList
from .core import Generator, Nonlinearity, StateVector, TimeGrid, Trajectory, integrate, rk4_step, step_count
from .dichotomy import SplittingCertificate
from .errors import ContractionError, GapConditionError, PullbackError
from .frames import SplitFrame
from .graph_field import GraphField, eval_graph, symmetric_axis, zero_field
from .ledger import ConstantsLedger
from .nonlinear import CutoffNonlinearity

log = logging.getLogger(__name__)

AnyNonlinearity = Union[Nonlinearity, CutoffNonlinearity]

FLIGHT_STEPS = 5
STALL_STREAK = 3
MIN_FIT_SAMPLES = 3


@dataclass(frozen=True)
class GridSpec:
    time_grid: TimeGrid
    extents: Tuple[float, ...]
    counts: Tuple[int, ...]
    h: float = 0.02
    grid_slack: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "extents", tuple(float(e) for e in np.atleast_1d(self.extents)))
        object.__setattr__(self, "counts", tuple(int(c) for c in np.atleast_1d(self.counts)))
        if any(e <= 0 for e in self.extents):
            raise ValueError(f"graph extents must be positive, got {self.extents}")
        if self.h <= 0:
            raise ValueError(f"integration step must be positive, got {self.h}")
        if self.grid_slack < 0:
            raise ValueError(f"grid_slack must be non-negative, got {self.grid_slack}")

    def axes(self, dim: int) -> Tuple[np.ndarray, ...]:
        extents = self.extents if len(self.extents) == dim else self.extents * dim
        counts = self.counts if len(self.counts) == dim else self.counts * dim
        if len(extents) != dim or len(counts) != dim:
            raise ValueError(f"grid spec has {len(self.extents)} extents for a {dim}-dimensional graph domain")
        return tuple(symmetric_axis(e, c) for e, c in zip(extents, counts))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GridSpec":
        return cls(
            time_grid=TimeGrid.from_dict(data["time_grid"]),
            extents=tuple(data["extents"]),
            counts=tuple(data["counts"]),
            h=data.get("h", 0.02),
            grid_slack=data.get("grid_slack", 0.05),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "time_grid": self.time_grid.to_dict(),
            "extents": list(self.extents),
            "counts": list(self.counts),
            "h": self.h,
            "grid_slack": self.grid_slack,
        }


@dataclass
class SolveReport:
    orientation: str
    iterations: int
    history: List[float]
    fixed_point_residual: float
    contraction_factor: float
    tail_horizon: float
    invariance_residual: float
    lipschitz_estimate: float
    checks: CheckList = field(default_factory=CheckList)

    @property
    def passed(self) -> bool:
        return self.checks.passed

    def to_dict(self) -> Dict[str, Any]:
        return {
            "orientation": self.orientation,
            "iterations": self.iterations,
            "fixed_point_residual": self.fixed_point_residual,
            "contraction_factor": self.contraction_factor,
            "tail_horizon": self.tail_horizon,
            "invariance_residual": self.invariance_residual,
            "lipschitz_estimate": self.lipschitz_estimate,
        }


@dataclass
class GraphSolution:
    field: GraphField
    report: SolveReport


class SplitSystem:
    """u' = A(t)u + f(t,u) written in the split coordinates of a frame."""

    def __init__(self, gen: Generator, f: AnyNonlinearity, frame: SplitFrame):
        if gen.dim != frame.dim:
            raise ValueError(f"generator dimension {gen.dim} differs from frame dimension {frame.dim}")
        self.gen = gen
        self.f = f
        self.frame = frame
        self.rank = frame.rank

    def slices(self, orientation: str) -> Tuple[slice, slice]:
        """(domain, value) coordinate blocks of a graph with this orientation."""
        q, k = slice(0, self.rank), slice(self.rank, self.frame.dim)
        return (q, k) if orientation == "sigma" else (k, q)

    def blocks(self, times: np.ndarray) -> np.ndarray:
        return self.frame.blocks(self.gen, times)

    def nonlinear(self, times: np.ndarray, c: np.ndarray) -> np.ndarray:
        if self.f.is_zero:
            return np.zeros_like(c)
        u = self.frame.from_split(times, c[:, : self.rank], c[:, self.rank :])
        fq, fk = self.frame.to_split(times, self.f(times, u))
        return np.concatenate([fq, fk], axis=-1)

    def rhs(self, times: np.ndarray, c: np.ndarray) -> np.ndarray:
        g = self.blocks(times)
        return np.einsum("nij,nj->ni", g, c) + self.nonlinear(times, c)

    def state_field(self):
        linear = self.gen.linear_field()
        f = self.f
        return lambda t, u: linear(t, u) + f(t, u)


def _assemble(dim: int, dom: slice, val: slice, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    c = np.zeros(x.shape[:-1] + (dim,))
    c[..., dom] = x
    c[..., val] = y
    return c


def graph_sweep(
    system: SplitSystem,
    graph: GraphField,
    taus: np.ndarray,
    points: np.ndarray,
    horizon: float,
    h: float,
) -> np.ndarray:
    """One application of the graph transform at the rows (tau_i, eta_i); returns new values."""
    dom, val = system.slices(graph.orientation)
    d = system.frame.dim
    n = 2 * max(1, math.ceil(horizon / (2.0 * h) - 1e-9))
    step = horizon / n
    dt = -step if graph.orientation == "sigma" else step
    rows = taus.size

    def graph_at(s: np.ndarray, x: np.ndarray) -> np.ndarray:
        return eval_graph(graph, s, x, clamp=True).reshape(rows, -1)

    def full(s: np.ndarray, x: np.ndarray) -> np.ndarray:
        return system.rhs(s, _assemble(d, dom, val, x, graph_at(s, x)))

    def driver(s: np.ndarray, x: np.ndarray) -> np.ndarray:
        return full(s, x)[:, dom]

    def forcing(s: np.ndarray, x: np.ndarray) -> np.ndarray:
        y = graph_at(s, x)
        g = system.blocks(s)[:, val, val]
        return full(s, x)[:, val] - np.einsum("nij,nj->ni", g, y)

    xs = np.empty((n + 1, rows, points.shape[1]))
    xs[0] = points
    x = points
    for j in range(n):
        s = taus + j * dt
        k1 = driver(s, x)
        k2 = driver(s + 0.5 * dt, x + 0.5 * dt * k1)
        k3 = driver(s + 0.5 * dt, x + 0.5 * dt * k2)
        k4 = driver(s + dt, x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        xs[j + 1] = x

    phis = np.stack([forcing(taus + j * dt, xs[j]) for j in range(n + 1)])
    big = -2.0 * dt
    y = np.zeros((rows, phis.shape[2]))
    for j in range(n, 0, -2):
        g0 = system.blocks(taus + j * dt)[:, val, val]
        g1 = system.blocks(taus + (j - 1) * dt)[:, val, val]
        g2 = system.blocks(taus + (j - 2) * dt)[:, val, val]
        k1 = np.einsum("nij,nj->ni", g0, y) + phis[j]
        k2 = np.einsum("nij,nj->ni", g1, y + 0.5 * big * k1) + phis[j - 1]
        k3 = np.einsum("nij,nj->ni", g1, y + 0.5 * big * k2) + phis[j - 1]
        k4 = np.einsum("nij,nj->ni", g2, y + big * k3) + phis[j - 2]
        y = y + (big / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def _weighted_sup(delta: np.ndarray, eta: np.ndarray) -> float:
    """sup over eta != 0 of |delta| / |eta|."""
    norms = np.linalg.norm(eta, axis=-1)
    mask = norms > 0
    if not np.any(mask):
        return 0.0
    return float(np.max(np.linalg.norm(delta[mask], axis=-1) / norms[mask]))


def _domain_split(cert: SplittingCertificate, orientation: str) -> Tuple[int, int]:
    k, d = cert.rank, cert.dim
    if not 0 < k < d:
        raise ValueError(f"graph solvers need 0 < rank < dim, got rank {k} in dimension {d}")
    return (k, d - k) if orientation == "sigma" else (d - k, k)


def invariance_residual(
    system: SplitSystem, graph: GraphField, h: float, steps: int = FLIGHT_STEPS, inner: float = 0.5
) -> float:
    """Distance of short forward flights from the graph, started at inner nodes."""
    dom, val = system.slices(graph.orientation)
    times = graph.times
    usable = times[times + steps * h <= times[-1] + 1e-12]
    if usable.size == 0:
        usable = times[:1]
    axes = [a[np.abs(a) <= inner * a[-1] + 1e-15] for a in graph.axes]
    mesh = np.meshgrid(usable, *axes, indexing="ij")
    taus = mesh[0].reshape(-1)
    eta = np.stack([m.reshape(-1) for m in mesh[1:]], axis=-1)
    y0 = eval_graph(graph, taus, eta, clamp=True).reshape(taus.size, -1)
    c0 = _assemble(system.frame.dim, dom, val, eta, y0)
    u = system.frame.from_split(taus, c0[:, : system.rank], c0[:, system.rank :])
    field_fn = system.state_field()
    worst = 0.0
    s = taus.copy()
    for _ in range(steps):
        u = rk4_step(field_fn, s, u, h)
        s = s + h
        q, p = system.frame.to_split(s, u)
        c = np.concatenate([q, p], axis=-1)
        expected = eval_graph(graph, s, c[:, dom], clamp=True).reshape(taus.size, -1)
        worst = max(worst, float(np.max(np.linalg.norm(c[:, val] - expected, axis=-1))))
    return worst


def _solve_graph(
    orientation: str,
    gen: Generator,
    cert: SplittingCertificate,
    f: AnyNonlinearity,
    ledger: ConstantsLedger,
    grid_spec: GridSpec,
    tol_fp: float,
    horizon: Optional[float],
    max_iter: int,
    kappa: Optional[float],
    tol_inv: float,
    tol_tail: float,
) -> GraphSolution:
    domain_dim, value_dim = _domain_split(cert, orientation)
    if f.lipschitz > ledger.ell * (1.0 + 1e-12):
        raise GapConditionError(
            f"nonlinearity Lipschitz constant {f.lipschitz:.6g} exceeds ledger ell {ledger.ell:.6g}"
        )
    horizon = ledger.tail_horizon(tol_tail) if horizon is None else horizon
    kappa = ledger.kappa_chosen if kappa is None else kappa
    system = SplitSystem(gen.linear_part(), f, cert.frame)
    graph = zero_field(
        grid_spec.time_grid,
        grid_spec.axes(domain_dim),
        value_dim,
        kappa,
        orientation=orientation,
        grid_slack=grid_spec.grid_slack,
        frame=cert.frame,
    )
    recorded = {key: float(value) for key, value in ledger.to_dict().items()}
    recorded["tail_horizon"] = horizon
    graph = graph.with_values(graph.values, ledger=recorded)
    taus, eta = graph.node_points()
    zero_rows = np.all(eta == 0.0, axis=1)
    log.info(
        "solving %s on %d nodes (horizon %.4g, h %.4g, kappa %.4g)", orientation, taus.size, horizon, grid_spec.h, kappa
    )

    history: List[float] = []
    streak = 0
    for iteration in range(1, max_iter + 1):
        values = graph_sweep(system, graph, taus, eta, horizon, grid_spec.h)
        if f.vanishes_at_zero:
            values[zero_rows] = 0.0
        old = graph.values.reshape(taus.size, value_dim)
        residual = _weighted_sup(values - old, eta)
        graph = graph.with_values(values.reshape(graph.values.shape))
        streak = streak + 1 if history and residual > history[-1] else 0
        history.append(residual)
        log.debug("%s iteration %d: residual %.3e", orientation, iteration, residual)
        if residual <= tol_fp:
            break
        if streak >= STALL_STREAK:
            factor = history[-1] / history[-2]
            raise ContractionError(
                f"{orientation} iteration diverging: residual grew {STALL_STREAK} times in a row "
                f"(factor {factor:.4g}, bound nu={ledger.nu:.4g})",
                measured_factor=factor,
                nu_bound=ledger.nu,
            )
    else:
        factor = history[-1] / history[-2] if len(history) > 1 and history[-2] > 0 else math.nan
        raise ContractionError(
            f"{orientation} iteration did not reach {tol_fp:g} in {max_iter} sweeps (last {history[-1]:.3e})",
            measured_factor=factor,
            nu_bound=ledger.nu,
        )

    ratios = [b / a for a, b in zip(history, history[1:]) if a > 0 and b > 0]
    contraction = float(np.exp(np.mean(np.log(ratios)))) if ratios else 0.0
    inv = invariance_residual(system, graph, grid_spec.h)
    lip = graph.lipschitz_estimate()
    report = SolveReport(
        orientation=orientation,
        iterations=len(history),
        history=history,
        fixed_point_residual=history[-1],
        contraction_factor=contraction,
        tail_horizon=horizon,
        invariance_residual=inv,
        lipschitz_estimate=lip,
    )
    report.checks.add("fixed_point", history[-1], ledger.fixed_point_bound(tol_fp))
    report.checks.add("invariance", inv, tol_inv)
    report.checks.add("lipschitz", lip, kappa * (1.0 + grid_spec.grid_slack), tol=1e-12)
    report.checks.add("zero_section", float(np.max(np.abs(graph.zero_section()), initial=0.0)), 0.0)
    if not report.passed:
        log.warning("%s solve checks failed: %s", orientation, [c.name for c in report.checks.failed()])
    log.info("%s converged in %d sweeps (factor %.3g, invariance %.2e)", orientation, len(history), contraction, inv)
    return GraphSolution(field=graph, report=report)


def solve_sigma(
    gen: Generator,
    cert: SplittingCertificate,
    f: AnyNonlinearity,
    ledger: ConstantsLedger,
    grid_spec: GridSpec,
    tol_fp: float = 1e-10,
    t_back: Optional[float] = None,
    max_iter: int = 200,
    kappa: Optional[float] = None,
    tol_inv: float = 1e-4,
    tol_tail: float = 1e-8,
) -> GraphSolution:
    """Invariant manifold Sigma*: a graph over Im Q with values in Ker Q."""
    return _solve_graph("sigma", gen, cert, f, ledger, grid_spec, tol_fp, t_back, max_iter, kappa, tol_inv, tol_tail)


def solve_theta(
    gen: Generator,
    cert: SplittingCertificate,
    f: AnyNonlinearity,
    ledger: ConstantsLedger,
    grid_spec: GridSpec,
    tol_fp: float = 1e-10,
    t_fwd: Optional[float] = None,
    max_iter: int = 200,
    kappa: Optional[float] = None,
    tol_inv: float = 1e-4,
    tol_tail: float = 1e-8,
) -> GraphSolution:
    """Stable manifold Theta*: a graph over Ker Q with values in Im Q."""
    return _solve_graph("theta", gen, cert, f, ledger, grid_spec, tol_fp, t_fwd, max_iter, kappa, tol_inv, tol_tail)


def extend_graph(
    graph: GraphField,
    gen: Generator,
    f: AnyNonlinearity,
    t: Any,
    points: Any,
    h: float = 0.02,
    horizon: Optional[float] = None,
) -> np.ndarray:
    """Graph values at arbitrary (t, point) rows, by one transform sweep over the stored field."""
    if graph.frame is None:
        raise ValueError("graph field carries no split frame")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    taus = np.broadcast_to(np.asarray(t, dtype=float), points.shape[:1]).copy()
    if horizon is None:
        if "tail_horizon" not in graph.ledger:
            raise ValueError("graph ledger has no tail_horizon; pass an explicit horizon")
        horizon = graph.ledger["tail_horizon"]
    system = SplitSystem(gen.linear_part(), f, graph.frame)
    values = graph_sweep(system, graph, taus, points, horizon, h)
    values[np.all(points == 0.0, axis=1)] = 0.0
    return values


def extend_sigma(graph: GraphField, gen: Generator, f: AnyNonlinearity, t: Any, q: Any, h: float = 0.02) -> np.ndarray:
    if graph.orientation != "sigma":
        raise ValueError(f"extend_sigma needs a sigma graph, got {graph.orientation}")
    return extend_graph(graph, gen, f, t, q, h)


def _project(graph: GraphField, orientation: str, t: float, u: Any) -> StateVector:
    if graph.orientation != orientation:
        raise ValueError(f"expected a {orientation} graph, got {graph.orientation}")
    if graph.frame is None:
        raise ValueError("graph field carries no split frame")
    frame = graph.frame
    q, p = frame.to_split(t, np.asarray(u, dtype=float))
    if orientation == "sigma":
        p = eval_graph(graph, t, q)
    else:
        q = eval_graph(graph, t, p)
    return StateVector(frame.from_split(t, q, p))


def project_sigma(graph: GraphField, t: float, u: Any) -> StateVector:
    """P(t)u = Q(t)u + Sigma*(t, Q(t)u)."""
    return _project(graph, "sigma", t, u)


def project_theta(graph: GraphField, t: float, u: Any) -> StateVector:
    """P(t)u = (I - Q(t))u + Theta*(t, (I - Q(t))u)."""
    return _project(graph, "theta", t, u)


def linearity_residual(graph: GraphField) -> float:
    """Largest deviation of the node values from the best linear map, per time node."""
    _, eta = graph.node_points()
    n_t = graph.times.size
    per_time = eta.shape[0] // n_t
    values = graph.values.reshape(n_t, per_time, graph.value_dim)
    q = eta[:per_time]
    worst = 0.0
    for block in values:
        coef, *_ = np.linalg.lstsq(q, block, rcond=None)
        worst = max(worst, float(np.max(np.abs(q @ coef - block))))
    return worst


def reduced_field(system: SplitSystem, graph: GraphField):
    """Flow on the manifold, in the graph's domain coordinates."""
    dom, val = system.slices(graph.orientation)
    d = system.frame.dim

    def rhs(t: Any, x: np.ndarray) -> np.ndarray:
        x2 = np.atleast_2d(x)
        s = np.broadcast_to(np.asarray(t, dtype=float), x2.shape[:1]).copy()
        y = eval_graph(graph, s, x2, clamp=True).reshape(x2.shape[0], -1)
        out = system.rhs(s, _assemble(d, dom, val, x2, y))[:, dom]
        return out.reshape(np.shape(x))

    return rhs


def _worst(rates: Iterable[float], pick: Callable[..., Any]) -> float:
    """max or min over per-sample rates; NaN when there are none or any fit failed."""
    values = np.asarray(list(rates), dtype=float)
    if values.size == 0 or np.any(np.isnan(values)):
        return math.nan
    return float(pick(values))


def _fit_slope(times: np.ndarray, values: np.ndarray, floor: float = 1e-14) -> float:
    """Slope of log(values) against times; NaN with fewer than MIN_FIT_SAMPLES values above ``floor``."""
    mask = values > floor
    if np.count_nonzero(mask) < MIN_FIT_SAMPLES:
        log.warning("rate fit has %d usable samples, need %d", np.count_nonzero(mask), MIN_FIT_SAMPLES)
        return math.nan
    slope, _ = np.polyfit(times[mask], np.log(values[mask]), 1)
    return float(slope)


@dataclass
class PhaseResult:
    times: np.ndarray
    shadow: Trajectory
    distances: np.ndarray
    rate: float
    increments: List[float]
    checks: CheckList

    @property
    def passed(self) -> bool:
        return self.checks.passed


def asymptotic_phase(
    graph: GraphField,
    gen: Generator,
    f: AnyNonlinearity,
    u0: Any,
    tau: float,
    horizon: float,
    h: float = 0.02,
    n_pullbacks: int = 8,
    cauchy_tol: float = 1e-3,
    rate_tol: float = 0.1,
    ledger: Optional[ConstantsLedger] = None,
) -> PhaseResult:
    """In-manifold shadow q_bar of the solution through (tau, u0).

    q_bar(tau) is the limit of pullbacks along the manifold of Q-coordinates
    of T(t_n, tau)u0 as t_n grows.
    """
    if graph.orientation != "sigma" or graph.frame is None:
        raise ValueError("asymptotic phase needs a sigma graph with a split frame")
    delta = ledger.delta if ledger is not None else graph.ledger["delta"]
    if delta > 0 and horizon < 5.0 / delta * (1.0 - 1e-9):
        log.warning("phase horizon %.4g is shorter than 5/delta = %.4g", horizon, 5.0 / delta)
    system = SplitSystem(gen.linear_part(), f, graph.frame)
    u0 = np.asarray(StateVector.of(u0).coords)
    times, states = integrate(system.state_field(), tau, tau + horizon, u0, h, ceiling=1e8, record=True)
    q_states, _ = graph.frame.to_split(times, states)
    reduced = reduced_field(system, graph)

    marks = [int(round((len(times) - 1) * n / n_pullbacks)) for n in range(1, n_pullbacks + 1)]
    pullbacks = [integrate(reduced, times[m], tau, q_states[m], h) for m in marks]
    increments = [float(np.linalg.norm(b - a)) for a, b in zip(pullbacks, pullbacks[1:])]
    scale = max(float(np.linalg.norm(u0)), 1e-300)
    if increments and increments[-1] > cauchy_tol * scale:
        raise PullbackError(
            f"pullback sequence not Cauchy: last increment {increments[-1]:.3e} > {cauchy_tol:g} * |u0|"
        )
    q_bar0 = pullbacks[-1]
    _, q_bar = integrate(reduced, tau, tau + horizon, q_bar0, h, record=True)
    on_graph = extend_graph(graph, gen, f, times, q_bar, h)
    shadow_states = graph.frame.from_split(times, q_bar, on_graph)
    distances = np.linalg.norm(states - shadow_states, axis=1)
    rate = -_fit_slope(times - tau, distances)
    checks = CheckList()
    checks.add("phase_rate", rate, delta * (1.0 - rate_tol), sense="ge")
    if increments:
        checks.add("pullback_cauchy", increments[-1], cauchy_tol * scale)
    log.info("asymptotic phase: distance decays at %.4g (delta %.4g)", rate, delta)
    return PhaseResult(
        times=times,
        shadow=Trajectory(times, shadow_states),
        distances=distances,
        rate=rate,
        increments=increments,
        checks=checks,
    )


@dataclass
class RateReport:
    rates: Dict[str, float]
    bounds: Dict[str, float]
    checks: CheckList

    @property
    def passed(self) -> bool:
        return self.checks.passed


def _sample_nodes(graph: GraphField, samples: int, seed: int, inner: float) -> Tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    extents = np.array([a[-1] for a in graph.axes])
    points = rng.uniform(-1.0, 1.0, (samples, graph.domain_dim)) * extents * inner
    taus = rng.choice(graph.times[: max(1, graph.times.size // 2 + 1)], size=samples)
    return taus, points


def verify_rates(
    graph: GraphField,
    gen: Generator,
    f: AnyNonlinearity,
    ledger: ConstantsLedger,
    samples: int = 8,
    h: float = 0.02,
    flight: float = 2.0,
    offset: float = 0.2,
    rate_tol: float = 0.05,
    seed: int = 0,
) -> RateReport:
    """Fitted exponential rates on sampled trajectories against the ledger bounds.

    Sigma graphs get the in-manifold backward growth and off-manifold decay;
    Theta graphs get the stable decay and the separation from the stable set.
    """
    if graph.frame is None:
        raise ValueError("graph field carries no split frame")
    system = SplitSystem(gen.linear_part(), f, graph.frame)
    dom, val = system.slices(graph.orientation)
    d = system.frame.dim
    taus, eta = _sample_nodes(graph, samples, seed, inner=0.25)
    n = step_count(0.0, flight, h)
    step = flight / n
    offsets = np.linspace(0.0, flight, n + 1)
    rates: Dict[str, float] = {}
    bounds: Dict[str, float] = {}
    checks = CheckList()
    field_fn = system.state_field()

    def flow(start_taus: np.ndarray, c0: np.ndarray) -> np.ndarray:
        u = system.frame.from_split(start_taus, c0[:, : system.rank], c0[:, system.rank :])
        out = [system.frame.to_split(start_taus, u)]
        s = start_taus.copy()
        for _ in range(n):
            u = rk4_step(field_fn, s, u, step)
            s = s + step
            out.append(system.frame.to_split(s, u))
        return np.stack([np.concatenate(pair, axis=-1) for pair in out])

    y0 = eval_graph(graph, taus, eta, clamp=True).reshape(samples, -1)
    if graph.orientation == "sigma":
        reduced = reduced_field(system, graph)
        growth = []
        for tau, x0 in zip(taus, eta):
            if not np.any(x0):
                continue
            _, xs = integrate(reduced, tau, tau - flight, x0, h, record=True)
            growth.append(_fit_slope(offsets, np.linalg.norm(xs, axis=1)))
        rates["backward_growth"] = _worst(growth, np.max)
        bounds["backward_growth"] = ledger.backward_growth
        checks.add("backward_growth", rates["backward_growth"], ledger.backward_growth, tol=rate_tol)

        kick = np.zeros_like(y0)
        kick[:, 0] = offset * np.linalg.norm(eta, axis=1).clip(min=1e-3)
        traj = flow(taus, _assemble(d, dom, val, eta, y0 + kick))
        s_all = (taus[None, :] + offsets[:, None]).reshape(-1)
        x_all = traj[:, :, dom].reshape(-1, graph.domain_dim)
        on_graph = extend_graph(graph, gen, f, s_all, x_all, h).reshape(n + 1, samples, -1)
        dist = np.linalg.norm(traj[:, :, val] - on_graph, axis=-1)
        decay = _worst((-_fit_slope(offsets, dist[:, i]) for i in range(samples)), np.min)
        rates["off_manifold_decay"] = decay
        bounds["off_manifold_decay"] = ledger.delta
        checks.add("off_manifold_decay", decay, ledger.delta, sense="ge", tol=rate_tol)
    else:
        traj = flow(taus, _assemble(d, dom, val, eta, y0))
        norms = np.linalg.norm(traj[:, :, dom], axis=-1)
        decay = _worst((-_fit_slope(offsets, norms[:, i]) for i in range(samples)), np.min)
        rates["stable_decay"] = decay
        bounds["stable_decay"] = ledger.stable_decay
        checks.add("stable_decay", decay, ledger.stable_decay, sense="ge", tol=rate_tol)

        kick = np.zeros_like(y0)
        kick[:, 0] = offset * np.linalg.norm(eta, axis=1).clip(min=1e-3)
        traj = flow(taus, _assemble(d, dom, val, eta, y0 + kick))
        s_all = (taus[None, :] + offsets[:, None]).reshape(-1)
        x_all = traj[:, :, dom].reshape(-1, graph.domain_dim)
        on_graph = eval_graph(graph, s_all, x_all, clamp=True).reshape(n + 1, samples, -1)
        dist = np.linalg.norm(traj[:, :, val] - on_graph, axis=-1)
        growth = _worst((_fit_slope(offsets, dist[:, i]) for i in range(samples)), np.min)
        rates["separation_growth"] = growth
        bounds["separation_growth"] = -ledger.delta_hat
        checks.add("separation_growth", growth, -ledger.delta_hat, sense="ge", tol=rate_tol)
    if not checks.passed:
        log.warning("rate verification failed: %s", [c.name for c in checks.failed()])
    return RateReport(rates=rates, bounds=bounds, checks=checks)


@dataclass
class SaddlePoint:
    unstable: GraphSolution
    stable: GraphSolution
    rates: CheckList

    @property
    def passed(self) -> bool:
        return self.unstable.report.passed and self.stable.report.passed and self.rates.passed


def saddle_point(
    gen: Generator,
    cert: SplittingCertificate,
    f: AnyNonlinearity,
    ledger: ConstantsLedger,
    grid_spec: GridSpec,
    stable_grid: Optional[GridSpec] = None,
    tol_fp: float = 1e-10,
    rate_samples: int = 8,
) -> SaddlePoint:
    """Unstable and stable manifolds of the origin for a dichotomy certificate."""
    if not cert.gamma > 0 or abs(cert.gamma + cert.rho) > 1e-9 * max(1.0, cert.gamma):
        raise ValueError(f"saddle point needs a dichotomy (rho = -gamma > 0), got gamma={cert.gamma}, rho={cert.rho}")
    if ledger.delta <= 0:
        raise GapConditionError(f"attraction rate delta={ledger.delta:.6g} must be positive for a saddle point")
    unstable = solve_sigma(gen, cert, f, ledger, grid_spec, tol_fp=tol_fp)
    stable = solve_theta(gen, cert, f, ledger, stable_grid or grid_spec, tol_fp=tol_fp)
    rates = CheckList()
    rates.extend(verify_rates(unstable.field, gen, f, ledger, samples=rate_samples).checks, prefix="unstable.")
    rates.extend(verify_rates(stable.field, gen, f, ledger, samples=rate_samples).checks, prefix="stable.")
    return SaddlePoint(unstable=unstable, stable=stable, rates=rates)

