"""Split coordinates attached to a projection family.

A ``SplitFrame`` turns per-node projections Q(t_i) into a smooth basis
V(t) = [V_Q(t) | V_K(t)] with orthonormal blocks spanning Im Q and Ker Q.
Graph fields store values in these coordinates, so Sigma(t, u) = Sigma(t, Q u)
holds by representation.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Optional, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import orthogonal_procrustes

from .core import Generator

log = logging.getLogger(__name__)


def _canonical_block(block: np.ndarray) -> np.ndarray:
    """Rotate an orthonormal block towards the coordinate axes it is closest to."""
    if block.shape[1] == 0:
        return block
    weights = np.sum(block * block, axis=1)
    idx = np.sort(np.argsort(-weights, kind="stable")[: block.shape[1]])
    target = np.eye(block.shape[0])[:, idx]
    rotation, _ = orthogonal_procrustes(block, target)
    return block @ rotation


def projection_bases(q: np.ndarray, rank: int) -> Tuple[np.ndarray, np.ndarray]:
    """Orthonormal bases of Im Q and Ker Q."""
    u, _, vh = np.linalg.svd(q)
    return u[:, :rank], vh[rank:].T


@dataclass(frozen=True, eq=False)
class SplitFrame:
    times: np.ndarray
    bases: np.ndarray
    rank: int

    @classmethod
    def from_projections(cls, times: Any, projections: Any, rank: int) -> "SplitFrame":
        times = np.asarray(times, dtype=float)
        projections = np.asarray(projections, dtype=float)
        image, kernel = [], []
        for i, q in enumerate(projections):
            im_block, ker_block = projection_bases(q, rank)
            if i == 0:
                im_block, ker_block = _canonical_block(im_block), _canonical_block(ker_block)
            else:
                if rank:
                    im_block = im_block @ orthogonal_procrustes(im_block, image[-1])[0]
                if rank < q.shape[0]:
                    ker_block = ker_block @ orthogonal_procrustes(ker_block, kernel[-1])[0]
            image.append(im_block)
            kernel.append(ker_block)
        bases = np.concatenate([np.stack(image), np.stack(kernel)], axis=2)
        return cls(times=times, bases=bases, rank=rank)

    @classmethod
    def identity(cls, dim: int, rank: int) -> "SplitFrame":
        return cls(times=np.array([0.0, 1.0]), bases=np.stack([np.eye(dim)] * 2), rank=rank)

    @property
    def dim(self) -> int:
        return int(self.bases.shape[1])

    @property
    def complement(self) -> int:
        return self.dim - self.rank

    @cached_property
    def is_constant(self) -> bool:
        return bool(np.max(np.abs(self.bases - self.bases[0])) < 1e-13)

    @cached_property
    def _spline(self) -> Optional[CubicSpline]:
        if self.is_constant:
            return None
        return CubicSpline(self.times, self.bases, axis=0)

    def _clamped(self, t: Any) -> np.ndarray:
        return np.clip(np.asarray(t, dtype=float), self.times[0], self.times[-1])

    def basis(self, t: Any) -> np.ndarray:
        """V(t); shape (d, d) for scalar t, (..., d, d) otherwise. Constant outside the node window."""
        t = np.asarray(t, dtype=float)
        if self._spline is None:
            return np.broadcast_to(self.bases[0], t.shape + self.bases.shape[1:])
        return self._spline(self._clamped(t))

    def basis_derivative(self, t: Any) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self._spline is None:
            return np.zeros(t.shape + self.bases.shape[1:])
        inside = (t >= self.times[0]) & (t <= self.times[-1])
        deriv = self._spline.derivative()(self._clamped(t))
        return np.where(inside[..., None, None], deriv, 0.0)

    def projection(self, t: float) -> np.ndarray:
        v = self.basis(t)
        return v[:, : self.rank] @ np.linalg.inv(v)[: self.rank]

    def to_split(self, t: Any, u: Any) -> Tuple[np.ndarray, np.ndarray]:
        """Coordinates (q, p) of u, batched over leading axes."""
        u = np.asarray(u, dtype=float)
        v = self.basis(t)
        if v.ndim == 2 and u.ndim > 1:
            c = np.linalg.solve(v, u.reshape(-1, self.dim).T).T.reshape(u.shape)
        else:
            c = np.linalg.solve(v, u[..., None])[..., 0]
        return c[..., : self.rank], c[..., self.rank :]

    def from_split(self, t: Any, q: Any, p: Any) -> np.ndarray:
        c = np.concatenate([np.asarray(q, dtype=float), np.asarray(p, dtype=float)], axis=-1)
        v = self.basis(t)
        if v.ndim == 2:
            return c @ v.T
        return np.einsum("...ij,...j->...i", v, c)

    def blocks(self, gen: Generator, times: Any) -> np.ndarray:
        """Split-coordinate generator V^{-1}(A V - V') at each time, shape (n, d, d)."""
        times = np.asarray(times, dtype=float).reshape(-1)
        if gen.autonomous and self.is_constant:
            v = self.bases[0]
            g = np.linalg.solve(v, gen.eval(0.0) @ v)
            return np.broadcast_to(g, (times.size,) + g.shape)
        unique, inverse = np.unique(times, return_inverse=True)
        v = self.basis(unique)
        a = gen.eval_many(unique)
        g = np.linalg.solve(v, a @ v - self.basis_derivative(unique))
        return g[inverse.reshape(-1)]

    def leakage(self, gen: Generator, times: Any) -> float:
        """Largest off-diagonal block norm; zero when Q(t) is exactly invariant."""
        g = self.blocks(gen, times)
        k = self.rank
        if k in (0, self.dim):
            return 0.0
        upper = np.linalg.norm(g[:, :k, k:], ord=2, axis=(1, 2))
        lower = np.linalg.norm(g[:, k:, :k], ord=2, axis=(1, 2))
        return float(max(upper.max(), lower.max()))

    def restrict(self, projections: Any) -> np.ndarray:
        """A finer projection family written in this frame's Im-coordinates, node by node.

        Exact when each Im of the finer family lies in Im of this frame.
        """
        projections = np.asarray(projections, dtype=float)
        if projections.shape[0] != self.times.size:
            raise ValueError(f"need {self.times.size} projections, got {projections.shape[0]}")
        image = self.bases[:, :, : self.rank]
        return np.einsum("nji,njk,nkl->nil", image, projections, image)
