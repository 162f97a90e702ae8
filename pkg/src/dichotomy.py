"""Exponential splittings and dichotomies of a linear process.

Projections are estimated from windowed singular decompositions of the
propagator: Im Q(t) is the dominant left-singular subspace of L(t, t-W) and
Ker Q(t) the contracted right-singular subspace of L(t+W, t).
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .checks import CheckList
from .core import Generator, TimeGrid
from .errors import DegenerateGapError, NestednessError
from .frames import SplitFrame, projection_bases

log = logging.getLogger(__name__)

HEADER = "# splitting-kit splitting certificate"
TOL_PROJ = 1e-8


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def rk4_step_matrices(gen: Generator, starts: np.ndarray, h: float) -> np.ndarray:
    """One RK4 step of u' = A(t)u as a matrix, for every start time."""
    starts = np.asarray(starts, dtype=float)
    a0 = gen.eval_many(starts)
    ah = gen.eval_many(starts + 0.5 * h)
    a1 = gen.eval_many(starts + h)
    eye = np.eye(gen.dim)
    k1 = a0
    k2 = ah @ (eye + 0.5 * h * k1)
    k3 = ah @ (eye + 0.5 * h * k2)
    k4 = a1 @ (eye + h * k3)
    return eye + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def node_propagators(gen: Generator, nodes: np.ndarray, h: float) -> np.ndarray:
    """L(t_{i+1}, t_i) for consecutive nodes of a uniform node array."""
    spacing = float(nodes[1] - nodes[0])
    substeps = max(1, int(np.ceil(spacing / h - 1e-9)))
    step = spacing / substeps
    starts = nodes[:-1, None] + step * np.arange(substeps)[None, :]
    matrices = rk4_step_matrices(gen, starts.reshape(-1), step).reshape(len(nodes) - 1, substeps, gen.dim, gen.dim)
    out = np.empty((len(nodes) - 1, gen.dim, gen.dim))
    for i in range(len(nodes) - 1):
        acc = matrices[i, 0]
        for j in range(1, substeps):
            acc = matrices[i, j] @ acc
        out[i] = acc
    return out


def chain(steps: np.ndarray, start: int, stop: int) -> np.ndarray:
    """Product steps[stop-1] ... steps[start], i.e. L(t_stop, t_start)."""
    acc = np.eye(steps.shape[1])
    for j in range(start, stop):
        acc = steps[j] @ acc
    return acc


def backward_on_image(forward: np.ndarray, image_start: np.ndarray, q_end: np.ndarray) -> np.ndarray:
    """L(t_i, t_j) Q(t_j) given L(t_j, t_i) and an orthonormal basis of Im Q(t_i)."""
    if image_start.shape[1] == 0:
        return np.zeros_like(q_end)
    pushed = forward @ image_start
    return image_start @ np.linalg.pinv(pushed) @ q_end


@dataclass(frozen=True, eq=False)
class SplittingCertificate:
    times: np.ndarray
    projections: np.ndarray
    M: float
    gamma: float
    rho: float
    rank: int
    window: float
    h: float
    residuals: Dict[str, float] = field(default_factory=dict)
    exponents: Tuple[float, ...] = ()

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        projections = np.array(self.projections, dtype=float)
        if projections.ndim != 3 or projections.shape[0] != times.size:
            raise ValueError(f"need one projection per node, got {projections.shape} for {times.size} nodes")
        if self.M < 1.0:
            raise ValueError(f"splitting constant M must be >= 1, got {self.M}")
        if not self.gamma > self.rho:
            raise ValueError(f"splitting needs gamma > rho, got gamma={self.gamma}, rho={self.rho}")
        idem = float(max(np.linalg.norm(q @ q - q, 2) for q in projections))
        if idem > TOL_PROJ * max(1.0, float(np.max(np.abs(projections)))):
            raise ValueError(f"Q(t) is not a projection: max |Q^2 - Q| = {idem:.3e}")
        ranks = {int(round(float(np.trace(q)))) for q in projections}
        if ranks != {self.rank}:
            raise ValueError(f"projection rank varies across nodes or differs from {self.rank}: {sorted(ranks)}")
        times.setflags(write=False)
        projections.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "projections", projections)
        object.__setattr__(self, "residuals", dict(self.residuals, idempotency=idem))
        object.__setattr__(self, "exponents", tuple(float(x) for x in self.exponents))

    @property
    def dim(self) -> int:
        return int(self.projections.shape[1])

    @property
    def n_nodes(self) -> int:
        return int(self.times.size)

    @property
    def is_dichotomy(self) -> bool:
        return self.gamma > 0 and abs(self.gamma + self.rho) <= 1e-12 * max(1.0, abs(self.gamma))

    @cached_property
    def frame(self) -> SplitFrame:
        return SplitFrame.from_projections(self.times, self.projections, self.rank)

    def with_constants(self, M: float, gamma: float, rho: float) -> "SplittingCertificate":
        return SplittingCertificate(
            times=self.times,
            projections=self.projections,
            M=M,
            gamma=gamma,
            rho=rho,
            rank=self.rank,
            window=self.window,
            h=self.h,
            residuals=dict(self.residuals),
            exponents=self.exponents,
        )

    def with_projections(self, projections: np.ndarray) -> "SplittingCertificate":
        return SplittingCertificate(
            times=self.times,
            projections=projections,
            M=self.M,
            gamma=self.gamma,
            rho=self.rho,
            rank=self.rank,
            window=self.window,
            h=self.h,
            exponents=self.exponents,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "M": self.M,
            "gamma": self.gamma,
            "rho": self.rho,
            "rank": self.rank,
            "dim": self.dim,
            "n_nodes": self.n_nodes,
            "window": self.window,
            "h": self.h,
            "exponents": list(self.exponents),
            "residuals": dict(sorted(self.residuals.items())),
        }

    def header_lines(self) -> List[str]:
        return [
            f"M = {_fmt(self.M)}",
            f"gamma = {_fmt(self.gamma)}",
            f"rho = {_fmt(self.rho)}",
            f"rank = {self.rank}",
            f"dim = {self.dim}",
            f"n_nodes = {self.n_nodes}",
            f"window = {_fmt(self.window)}",
            f"h = {_fmt(self.h)}",
        ]

    def node_lines(self) -> List[str]:
        return [
            " ".join([_fmt(t)] + [_fmt(x) for x in q.reshape(-1)]) for t, q in zip(self.times, self.projections)
        ]

    def to_text(self) -> str:
        return "\n".join([HEADER] + self.header_lines() + ["nodes:"] + self.node_lines()) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def from_text(cls, text: str) -> "SplittingCertificate":
        header, rows = parse_sectioned_text(text, "nodes:")
        try:
            dim = int(header["dim"])
            data = np.array(rows, dtype=float).reshape(int(header["n_nodes"]), 1 + dim * dim)
            return cls(
                times=data[:, 0],
                projections=data[:, 1:].reshape(-1, dim, dim),
                M=float(header["M"]),
                gamma=float(header["gamma"]),
                rho=float(header["rho"]),
                rank=int(header["rank"]),
                window=float(header["window"]),
                h=float(header["h"]),
            )
        except (KeyError, ValueError) as exc:
            raise ValueError(f"malformed certificate text: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "SplittingCertificate":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def parse_sectioned_text(text: str, marker: str) -> Tuple[Dict[str, str], List[List[float]]]:
    header: Dict[str, str] = {}
    rows: List[List[float]] = []
    in_rows = False
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if in_rows:
            rows.append([float(x) for x in line.split()])
        elif line == marker:
            in_rows = True
        else:
            key, _, value = line.partition("=")
            header[key.strip()] = value.strip()
    return header, rows


def _inflate(raw: float, inflation: float) -> float:
    return max(1.0, 1.0 + (raw - 1.0) * (1.0 + inflation))


def _fit_rate(lags: List[float], norms: List[float]) -> float:
    lags_arr = np.asarray(lags)
    logs = np.log(np.maximum(np.asarray(norms), 1e-300))
    if np.ptp(lags_arr) == 0.0:
        return 0.0
    slope, _ = np.polyfit(lags_arr, logs, 1)
    return float(slope)


def estimate_splitting(
    gen: Generator,
    rank: int,
    window: float,
    grid: TimeGrid,
    h: Optional[float] = None,
    gap_threshold: float = 10.0,
    inflation: float = 0.05,
) -> SplittingCertificate:
    """Estimate Q(t) on the grid nodes and fit (M, gamma, rho)."""
    d = gen.dim
    if not 0 <= rank <= d:
        raise ValueError(f"rank must lie in [0, {d}], got {rank}")
    if window <= 0:
        raise ValueError(f"window must be positive, got {window}")
    h = h or min(grid.h, 0.01)
    spacing = grid.h
    w = max(1, int(np.ceil(window / spacing - 1e-9)))
    span = w * spacing
    nodes = grid.nodes
    ext = np.concatenate([nodes[0] - spacing * np.arange(w, 0, -1), nodes, nodes[-1] + spacing * np.arange(1, w + 1)])
    steps = node_propagators(gen, ext, h)
    log.info("estimating rank-%d splitting on %d nodes, window %.4g", rank, nodes.size, span)

    projections = np.empty((nodes.size, d, d))
    exponents = np.zeros(d)
    worst_gap = np.inf
    for i in range(nodes.size):
        e = i + w
        ahead = chain(steps, e, e + w)
        behind = chain(steps, e - w, e)
        _, s_ahead, vh_ahead = np.linalg.svd(ahead)
        u_behind, s_behind, _ = np.linalg.svd(behind)
        exponents += np.log(np.maximum(s_ahead, 1e-300)) / span
        if rank == 0:
            projections[i] = np.zeros((d, d))
        elif rank == d:
            projections[i] = np.eye(d)
        else:
            ratio = min(s_ahead[rank - 1] / s_ahead[rank], s_behind[rank - 1] / s_behind[rank])
            worst_gap = min(worst_gap, ratio)
            if ratio < gap_threshold:
                raise DegenerateGapError(
                    f"singular-value ratio {ratio:.4g} at the rank-{rank} cut is below {gap_threshold:g} "
                    f"at t={nodes[i]:.6g}; no splitting at this window",
                    ratio=ratio,
                )
            image = u_behind[:, :rank]
            rows = vh_ahead[:rank].T
            projections[i] = image @ np.linalg.solve(rows.T @ image, rows.T)
    exponents /= nodes.size

    fwd_lags: List[float] = []
    fwd_norms: List[float] = []
    bwd_lags: List[float] = []
    bwd_norms: List[float] = []
    commutation = 0.0
    eye = np.eye(d)
    images = [projection_bases(q, rank)[0] for q in projections]
    for i in range(nodes.size):
        acc = eye
        fwd_lags.append(0.0)
        fwd_norms.append(float(np.linalg.norm(eye - projections[i], 2)))
        bwd_lags.append(0.0)
        bwd_norms.append(float(np.linalg.norm(projections[i], 2)))
        for j in range(i + 1, min(i + w, nodes.size - 1) + 1):
            acc = steps[j + w - 1] @ acc
            lag = nodes[j] - nodes[i]
            fwd_lags.append(lag)
            fwd_norms.append(float(np.linalg.norm(acc @ (eye - projections[i]), 2)))
            bwd_lags.append(lag)
            bwd_norms.append(float(np.linalg.norm(backward_on_image(acc, images[i], projections[j]), 2)))
            commutation = max(commutation, float(np.linalg.norm(projections[j] @ acc - acc @ projections[i], 2)))

    if rank < d:
        gamma = -_fit_rate(fwd_lags, fwd_norms)
    if rank > 0:
        rho = _fit_rate(bwd_lags, bwd_norms)
    if rank == 0:
        rho = -gamma if gamma > 0 else gamma - 1.0
    elif rank == d:
        gamma = -rho if rho < 0 else rho + 1.0
    if not gamma > rho:
        raise DegenerateGapError(f"fitted rates gamma={gamma:.6g} <= rho={rho:.6g}; no splitting", ratio=1.0)

    raw = 1.0
    if rank < d:
        raw = max(raw, max(n * np.exp(gamma * s) for s, n in zip(fwd_lags, fwd_norms)))
    if rank > 0:
        raw = max(raw, max(n * np.exp(-rho * s) for s, n in zip(bwd_lags, bwd_norms)))
    M = _inflate(raw, inflation)
    log.info("fitted M=%.6g gamma=%.6g rho=%.6g (gap ratio %.4g)", M, gamma, rho, worst_gap)
    return SplittingCertificate(
        times=nodes,
        projections=projections,
        M=M,
        gamma=gamma,
        rho=rho,
        rank=rank,
        window=span,
        h=h,
        residuals={"commutation": commutation, "gap_ratio": float(worst_gap)},
        exponents=tuple(exponents),
    )


@dataclass
class SplittingReport:
    worst_forward: float
    worst_backward: float
    commutation: float
    max_lag: float
    checks: CheckList

    @property
    def passed(self) -> bool:
        return self.checks.passed


def verify_splitting(
    gen: Generator,
    cert: SplittingCertificate,
    samples: int = 64,
    h: Optional[float] = None,
    tol: float = 1e-6,
    commutation_tol: float = 1e-6,
    seed: int = 0,
) -> SplittingReport:
    """Check both estimates on node pairs within the certificate window."""
    if gen.dim != cert.dim:
        raise ValueError(f"process dimension {gen.dim} differs from certificate dimension {cert.dim}")
    nodes = cert.times
    steps = node_propagators(gen, nodes, h or cert.h)
    spacing = float(nodes[1] - nodes[0])
    w = max(1, int(round(cert.window / spacing)))
    starts = np.arange(nodes.size - 1)
    if samples < starts.size:
        starts = np.sort(np.random.default_rng(seed).choice(starts, size=samples, replace=False))
    eye = np.eye(cert.dim)
    images = [projection_bases(q, cert.rank)[0] for q in cert.projections]
    worst_fwd = worst_bwd = commutation = 0.0
    max_lag = 0.0
    for i in starts:
        acc = eye
        for j in range(i + 1, min(i + w, nodes.size - 1) + 1):
            acc = steps[j - 1] @ acc
            lag = nodes[j] - nodes[i]
            max_lag = max(max_lag, lag)
            q_i, q_j = cert.projections[i], cert.projections[j]
            fwd = np.linalg.norm(acc @ (eye - q_i), 2) * np.exp(cert.gamma * lag) / cert.M
            bwd = np.linalg.norm(backward_on_image(acc, images[i], q_j), 2) * np.exp(-cert.rho * lag) / cert.M
            worst_fwd = max(worst_fwd, float(fwd))
            worst_bwd = max(worst_bwd, float(bwd))
            commutation = max(commutation, float(np.linalg.norm(q_j @ acc - acc @ q_i, 2)))
    checks = CheckList()
    checks.add("forward_ratio", worst_fwd, 1.0, tol=tol)
    checks.add("backward_ratio", worst_bwd, 1.0, tol=tol)
    checks.add("commutation", commutation, commutation_tol)
    report = SplittingReport(worst_fwd, worst_bwd, commutation, max_lag, checks)
    if not report.passed:
        log.warning("splitting verification failed: %s", [c.name for c in checks.failed()])
    return report


@dataclass
class NestednessReport:
    image_residual: float
    kernel_residual: float
    checks: CheckList

    @property
    def passed(self) -> bool:
        return self.checks.passed


def nestedness_check(
    coarse: SplittingCertificate, fine: SplittingCertificate, tol: float = 1e-8
) -> NestednessReport:
    """Im Q_fine in Im Q_coarse and Ker Q_coarse in Ker Q_fine, node by node."""
    if fine.rank > coarse.rank:
        raise NestednessError(f"fine splitting has rank {fine.rank} > coarse rank {coarse.rank}")
    if not coarse.gamma > fine.gamma:
        raise NestednessError(
            f"nested splittings need coarse.gamma > fine.gamma, got {coarse.gamma:.6g} <= {fine.gamma:.6g}"
        )
    if coarse.n_nodes != fine.n_nodes or not np.allclose(coarse.times, fine.times):
        raise NestednessError("coarse and fine certificates are sampled on different nodes")
    eye = np.eye(coarse.dim)
    image = max(float(np.linalg.norm((eye - qc) @ qf, 2)) for qc, qf in zip(coarse.projections, fine.projections))
    kernel = max(float(np.linalg.norm(qf @ (eye - qc), 2)) for qc, qf in zip(coarse.projections, fine.projections))
    checks = CheckList()
    checks.add("image_nesting", image, tol)
    checks.add("kernel_nesting", kernel, tol)
    return NestednessReport(image, kernel, checks)


def to_dichotomy(gen: Generator, cert: SplittingCertificate) -> Tuple[Generator, SplittingCertificate]:
    """Shift the process by e^{c(t-tau)}, c=(gamma+rho)/2, into a dichotomy with the same projections."""
    c = 0.5 * (cert.gamma + cert.rho)
    half_gap = 0.5 * (cert.gamma - cert.rho)
    return gen.shifted(c), cert.with_constants(cert.M, half_gap, -half_gap)
