"""Vertical metrics, Kaplan's J-operator and the pointwise H-type defect."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import StepTwoAlgebra

__all__ = [
    "VerticalMetric",
    "j_matrix",
    "hs_norm",
    "op_norm",
    "h_type_defect",
    "orthonormal_vertical_basis",
]


@dataclass(frozen=True, eq=False)
class VerticalMetric:
    """Gram matrix ``G`` of the standard vertical basis: ``||t||_v^2 = t^T G t``."""

    G: np.ndarray

    def __post_init__(self):
        G = np.atleast_2d(np.array(self.G, dtype=float))
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ValueError(f"G must be square, got shape {G.shape}")
        if not np.all(np.isfinite(G)):
            raise ValueError("G has non-finite entries")
        scale = max(1.0, float(np.max(np.abs(G))))
        if np.max(np.abs(G - G.T)) > 1e-12 * scale:
            raise ValueError("G is not symmetric")
        G = 0.5 * (G + G.T)
        L = _cholesky(G)
        G.setflags(write=False)
        L.setflags(write=False)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "_L", L)

    @classmethod
    def identity(cls, m2: int) -> "VerticalMetric":
        return cls(np.eye(m2))

    @classmethod
    def from_cholesky(cls, L) -> "VerticalMetric":
        L = np.asarray(L, dtype=float)
        return cls(L @ L.T)

    @property
    def m2(self) -> int:
        return self.G.shape[0]

    @property
    def cholesky(self) -> np.ndarray:
        """Lower-triangular ``L`` with ``G = L L^T``."""
        return self._L

    def norm_sq(self, t) -> float:
        t = np.asarray(t, dtype=float)
        return float(t @ self.G @ t)

    def to_json(self) -> dict:
        return {"G": self.G.tolist()}

    @classmethod
    def from_json(cls, obj: dict | None, m2: int) -> "VerticalMetric":
        if obj is None or "G" not in obj:
            return cls.identity(m2)
        return cls(obj["G"])


def _cholesky(G: np.ndarray) -> np.ndarray:
    # pivot threshold is relative to the mean eigenvalue
    k = G.shape[0]
    thresh = 1e-12 * np.trace(G) / k
    L = np.zeros_like(G)
    for j in range(k):
        d = G[j, j] - L[j, :j] @ L[j, :j]
        if not d > thresh:
            raise ValueError(f"G is not positive definite (pivot {j + 1} = {d:.3g})")
        L[j, j] = np.sqrt(d)
        L[j + 1:, j] = (G[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def orthonormal_vertical_basis(metric: VerticalMetric) -> np.ndarray:
    """Columns ``E`` with ``E^T G E = Id`` (from the triangular factor)."""
    return np.linalg.inv(metric.cholesky).T


def _check(algebra: StepTwoAlgebra, metric: VerticalMetric, t):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if metric.m2 != algebra.m2:
        raise ValueError(f"metric is {metric.m2}-dimensional, algebra has m2={algebra.m2}")
    if t.shape != (algebra.m2,):
        raise ValueError(f"vertical vector must have length {algebra.m2}")
    return t


# sign fixed so that <J u, v> = [u, v]^T G t
_J_SIGN = -1.0


def j_matrix(algebra: StepTwoAlgebra, metric: VerticalMetric, t) -> np.ndarray:
    """Matrix of ``J_t`` in the orthonormal horizontal basis."""
    t = _check(algebra, metric, t)
    return _J_SIGN * np.einsum("q,qij->ij", metric.G @ t, algebra.B)


def hs_norm(M) -> float:
    return float(np.linalg.norm(np.asarray(M, dtype=float), "fro"))


def op_norm(M) -> float:
    return float(np.linalg.norm(np.asarray(M, dtype=float), 2))


def h_type_defect(algebra: StepTwoAlgebra, metric: VerticalMetric, t) -> float:
    """``|| J_t^2 + ||t||_v^2 Id ||_HS``; zero for every t exactly on H-type groups."""
    t = _check(algebra, metric, t)
    J = j_matrix(algebra, metric, t)
    return hs_norm(J @ J + metric.norm_sq(t) * np.eye(algebra.m))
