"""Horizontal calculus on step-two groups.

Scalar fields are evaluated as 2-jets (value, gradient, Hessian) in
exponential coordinates ``z = (x, t)``.  The horizontal frame is

    X_i = d/dx_i + 1/2 sum_q beta_i^q(x) d/dt_q,   beta_i^q(x) = -sum_j b_ij^q x_j,

so second horizontal derivatives only need the 2-jet:

    X_i X_j f = (F H F^T)_ij + 1/2 sum_q b_ij^q df/dt_q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np
from scipy.optimize import minimize

from .algebra import GroupPoint, StepTwoAlgebra
from .deviation import SolverConfig, _sphere_grid
from .metric import VerticalMetric, j_matrix, orthonormal_vertical_basis

__all__ = [
    "Jet2",
    "ScalarField",
    "DefectSample",
    "SupDefect",
    "coordinate_field",
    "b_field",
    "c_field",
    "a_field",
    "kaplan_field",
    "fd_field",
    "horizontal_frame",
    "horizontal_gradient",
    "norm_sq_horizontal_gradient",
    "horizontal_hessian",
    "sub_laplacian",
    "infinity_laplacian",
    "kaplan_norm",
    "eikonal_defect",
    "harmonic_defect",
    "scaled_harmonic_defect",
    "defect_sample",
    "sup_defect",
    "FD_TOL",
    "MIN_NORM",
]

FD_TOL = 1e-6      # declared relative tolerance of finite-difference jets
MIN_NORM = 1e-3    # defects are not evaluated closer than this to the origin


@dataclass(frozen=True, eq=False)
class Jet2:
    """Value, gradient and Hessian of a scalar at one point.

    ``error`` is the Richardson error estimate for finite-difference jets
    (``None`` for closed forms).
    """

    value: float
    grad: np.ndarray
    hess: np.ndarray
    error: float | None = None

    def __post_init__(self):
        g = np.asarray(self.grad, dtype=float)
        H = np.asarray(self.hess, dtype=float)
        if H.shape != (g.size, g.size):
            raise ValueError(f"hessian shape {H.shape} does not match gradient length {g.size}")
        scale = max(1.0, float(np.max(np.abs(H)))) if H.size else 1.0
        if H.size and np.max(np.abs(H - H.T)) > 1e-10 * scale:
            raise ValueError("hessian is not symmetric")
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "grad", g)
        object.__setattr__(self, "hess", 0.5 * (H + H.T))

    def __add__(self, other):
        if isinstance(other, Jet2):
            return Jet2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)
        return Jet2(self.value + other, self.grad, self.hess)

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, Jet2):
            return Jet2(self.value * other.value,
                        self.value * other.grad + other.value * self.grad,
                        self.value * other.hess + other.value * self.hess
                        + np.outer(self.grad, other.grad) + np.outer(other.grad, self.grad))
        return Jet2(self.value * other, self.grad * other, self.hess * other)

    __rmul__ = __mul__

    def compose(self, f0: float, f1: float, f2: float) -> "Jet2":
        """Jet of ``phi(self)`` given ``phi, phi', phi''`` at ``self.value``."""
        g = self.grad
        return Jet2(f0, f1 * g, f2 * np.outer(g, g) + f1 * self.hess)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A scalar function on the group with a 2-jet evaluator.

    ``values`` is the vectorized point-value map ``(k, d) -> (k,)``; it is
    what the finite-difference mode differentiates.
    """

    jet: Callable[[np.ndarray], Jet2]
    values: Callable[[np.ndarray], np.ndarray]
    mode: str = "closed_form"
    name: str = ""

    def __post_init__(self):
        if self.mode not in ("closed_form", "finite_difference"):
            raise ValueError(f"unknown mode {self.mode!r}")

    def __call__(self, p) -> Jet2:
        return self.jet(_coords(p))

    def value(self, p) -> float:
        return float(self.values(_coords(p)[None, :])[0])

    def power(self, alpha: float) -> "ScalarField":
        def jet(z):
            j = self.jet(z)
            v = j.value
            if v <= 0:
                raise ValueError(f"power of a non-positive value ({v})")
            return j.compose(v ** alpha, alpha * v ** (alpha - 1),
                             alpha * (alpha - 1) * v ** (alpha - 2))
        return ScalarField(jet, lambda Z: self.values(Z) ** alpha, self.mode,
                           f"({self.name})^{alpha:g}")

    def log(self) -> "ScalarField":
        def jet(z):
            j = self.jet(z)
            v = j.value
            if v <= 0:
                raise ValueError(f"log of a non-positive value ({v})")
            return j.compose(math.log(v), 1.0 / v, -1.0 / (v * v))
        return ScalarField(jet, lambda Z: np.log(self.values(Z)), self.mode,
                           f"log({self.name})")

    def as_finite_difference(self, rel_step: float = 1e-4) -> "ScalarField":
        return fd_field(self.values, rel_step=rel_step, name=self.name)


def _coords(p) -> np.ndarray:
    if isinstance(p, GroupPoint):
        return p.as_vector()
    return np.asarray(p, dtype=float)


# -- closed-form fields --------------------------------------------------------

def coordinate_field(algebra: StepTwoAlgebra, k: int) -> ScalarField:
    """The k-th exponential coordinate (0-based; ``k >= m`` are the t_q)."""
    d = algebra.dim
    if not 0 <= k < d:
        raise ValueError(f"coordinate index {k} out of range for dimension {d}")
    e = np.zeros(d)
    e[k] = 1.0
    zero = np.zeros((d, d))
    return ScalarField(lambda z: Jet2(z[k], e, zero), lambda Z: Z[:, k],
                       name=f"z{k + 1}")


def b_field(algebra: StepTwoAlgebra) -> ScalarField:
    """``b = ||x||^2``."""
    m, d = algebra.m, algebra.dim
    H = np.zeros((d, d))
    H[:m, :m] = 2 * np.eye(m)

    def jet(z):
        g = np.zeros(d)
        g[:m] = 2 * z[:m]
        return Jet2(z[:m] @ z[:m], g, H)
    return ScalarField(jet, lambda Z: np.sum(Z[:, :m] ** 2, axis=1), name="b")


def c_field(algebra: StepTwoAlgebra, metric: VerticalMetric) -> ScalarField:
    """``c_v = ||t||_v^2 = t^T G t``."""
    m, d = algebra.m, algebra.dim
    G = metric.G
    H = np.zeros((d, d))
    H[m:, m:] = 2 * G

    def jet(z):
        t = z[m:]
        g = np.zeros(d)
        g[m:] = 2 * G @ t
        return Jet2(t @ G @ t, g, H)
    return ScalarField(jet, lambda Z: np.einsum("ki,ij,kj->k", Z[:, m:], G, Z[:, m:]),
                       name="c_v")


def a_field(algebra: StepTwoAlgebra, metric: VerticalMetric) -> ScalarField:
    """``a_v = ||x||^4 + 16 ||t||_v^2``."""
    b, c = b_field(algebra), c_field(algebra, metric)

    def jet(z):
        jb = b.jet(z)
        return jb * jb + 16.0 * c.jet(z)
    return ScalarField(jet, lambda Z: b.values(Z) ** 2 + 16 * c.values(Z), name="a_v")


def kaplan_field(algebra: StepTwoAlgebra, metric: VerticalMetric | None = None) -> ScalarField:
    """Kaplan's quasinorm ``N_v = a_v^(1/4)`` with exact jets (singular at the origin)."""
    metric = metric or VerticalMetric.identity(algebra.m2)
    f = a_field(algebra, metric).power(0.25)
    return ScalarField(f.jet, f.values, name="N_v")


# -- finite differences --------------------------------------------------------

def _fd_once(values, z: np.ndarray, h: float):
    d = z.size
    E = np.eye(d) * h
    iu = np.triu_indices(d, k=1)
    pts = [z[None, :], z + E, z - E]
    if iu[0].size:
        Ei, Ej = E[iu[0]], E[iu[1]]
        pts += [z + Ei + Ej, z + Ei - Ej, z - Ei + Ej, z - Ei - Ej]
    f = values(np.vstack(pts))
    f0, fp, fm = f[0], f[1:1 + d], f[1 + d:1 + 2 * d]
    grad = (fp - fm) / (2 * h)
    H = np.diag((fp - 2 * f0 + fm) / (h * h))
    if iu[0].size:
        k = iu[0].size
        o = 1 + 2 * d
        fpp, fpm, fmp, fmm = (f[o + i * k:o + (i + 1) * k] for i in range(4))
        off = (fpp - fpm - fmp + fmm) / (4 * h * h)
        H[iu] = off
        H[iu[1], iu[0]] = off
    return f0, grad, H


def fd_field(values: Callable[[np.ndarray], np.ndarray], rel_step: float = 1e-4,
             name: str = "") -> ScalarField:
    """Finite-difference jets of a vectorized value map.

    Central differences with ``h = rel_step * (1 + ||z||)`` and one Richardson
    level (``h`` and ``h/2``).  ``Jet2.error`` is the size of the Richardson
    correction relative to ``max(1, |jet|)``.
    """
    def jet(z):
        h = rel_step * (1.0 + float(np.linalg.norm(z)))
        f0, g1, H1 = _fd_once(values, z, h)
        _, g2, H2 = _fd_once(values, z, h / 2)
        g = (4 * g2 - g1) / 3
        H = (4 * H2 - H1) / 3
        scale = max(1.0, float(np.max(np.abs(g))), float(np.max(np.abs(H))))
        err = max(float(np.max(np.abs(g - g2))), float(np.max(np.abs(H - H2)))) / scale
        return Jet2(f0, g, H, error=err)
    return ScalarField(jet, values, mode="finite_difference", name=name)


# -- horizontal operators --------------------------------------------------------

def horizontal_frame(algebra: StepTwoAlgebra, p) -> np.ndarray:
    """Rows are the coefficient vectors of ``X_1 .. X_m`` at ``p`` (length ``m + m2``)."""
    z = _coords(p)
    m = algebra.m
    beta = -np.einsum("qij,j->iq", algebra.B, z[:m])
    return np.hstack([np.eye(m), 0.5 * beta])


def horizontal_gradient(fld: ScalarField, algebra: StepTwoAlgebra, p) -> np.ndarray:
    return horizontal_frame(algebra, p) @ fld(p).grad


def norm_sq_horizontal_gradient(fld: ScalarField, algebra: StepTwoAlgebra, p) -> float:
    g = horizontal_gradient(fld, algebra, p)
    return float(g @ g)


def _hh(jet: Jet2, algebra: StepTwoAlgebra, F: np.ndarray):
    m = algebra.m
    main = F @ jet.hess @ F.T
    corr = 0.5 * np.einsum("qij,q->ij", algebra.B, jet.grad[m:])
    return main, corr


def horizontal_hessian(fld: ScalarField, algebra: StepTwoAlgebra, p) -> np.ndarray:
    """Matrix ``[X_i X_j f]`` (not symmetric in general)."""
    F = horizontal_frame(algebra, p)
    main, corr = _hh(fld(p), algebra, F)
    return main + corr


def sub_laplacian(fld: ScalarField, algebra: StepTwoAlgebra, p) -> float:
    """``sum_i X_i^2 f``."""
    F = horizontal_frame(algebra, p)
    jet = fld(p)
    main, corr = _hh(jet, algebra, F)
    # the first-order term is b_ii^q df/dt_q; it must vanish by skewness
    c = float(np.trace(corr))
    assert abs(c) <= 1e-12 * max(1.0, float(np.max(np.abs(jet.grad)))), c
    return float(np.trace(main))


def infinity_laplacian(fld: ScalarField, algebra: StepTwoAlgebra, p) -> float:
    """``1/2 <grad_0 ||grad_0 f||^2, grad_0 f> = sum_ij X_i f X_j f X_i X_j f``."""
    F = horizontal_frame(algebra, p)
    jet = fld(p)
    main, corr = _hh(jet, algebra, F)
    g = F @ jet.grad
    return float(g @ (main + corr) @ g)


# -- defects ----------------------------------------------------------------------

def kaplan_norm(algebra: StepTwoAlgebra, metric: VerticalMetric, p) -> float:
    z = _coords(p)
    x, t = z[:algebra.m], z[algebra.m:]
    return float((x @ x) ** 2 + 16 * metric.norm_sq(t)) ** 0.25


def _normalized(algebra, metric, p):
    z = _coords(p)
    N = kaplan_norm(algebra, metric, z)
    if not N >= MIN_NORM:
        raise ValueError(f"point too close to the origin (N = {N:.3g} < {MIN_NORM})")
    return z[:algebra.m] / N, z[algebra.m:] / N ** 2


def _vertical_sum(algebra: StepTwoAlgebra, metric: VerticalMetric) -> np.ndarray:
    """``sum_q (J_{e_q}^2 + Id)`` over a g_v-orthonormal basis ``e_q``."""
    E = orthonormal_vertical_basis(metric)
    P = np.eye(algebra.m) * algebra.m2
    for q in range(algebra.m2):
        J = j_matrix(algebra, metric, E[:, q])
        P += J @ J
    return P


def eikonal_defect(algebra: StepTwoAlgebra, metric: VerticalMetric, p) -> float:
    """``||x||^2/N^2 - ||grad_0 N||^2 = 16 <(J_t^2 + ||t||^2) x, x> / N^6``."""
    x, t = _normalized(algebra, metric, p)
    J = j_matrix(algebra, metric, t)
    return float(16 * (metric.norm_sq(t) * (x @ x) - (J @ x) @ (J @ x)))


def harmonic_defect(algebra: StepTwoAlgebra, metric: VerticalMetric, p) -> float:
    """``N L N - (Q-1) ||grad_0 N||^2``."""
    x, _ = _normalized(algebra, metric, p)
    P = _vertical_sum(algebra, metric)
    return (algebra.Q + 2) * eikonal_defect(algebra, metric, p) - 2 * float(x @ P @ x)


def scaled_harmonic_defect(algebra: StepTwoAlgebra, metric: VerticalMetric, p) -> float:
    """``N^Q L(N^(2-Q))``."""
    return (2 - algebra.Q) * harmonic_defect(algebra, metric, p)


@dataclass(frozen=True)
class DefectSample:
    point: GroupPoint
    eikonal: float
    harmonic: float
    scaled_harmonic: float


def defect_sample(algebra: StepTwoAlgebra, metric: VerticalMetric, p) -> DefectSample:
    if not isinstance(p, GroupPoint):
        p = GroupPoint.from_vector(p, algebra.m)
    h = harmonic_defect(algebra, metric, p)
    return DefectSample(p, eikonal_defect(algebra, metric, p), h, (2 - algebra.Q) * h)


# -- suprema over the slice ||t||_v = 1, ||x|| <= R_MAX ------------------------------

R_MAX = 4.0
_KINDS = ("eikonal", "harmonic", "scaled_harmonic")


@dataclass
class SupDefect:
    """Result of :func:`sup_defect`; unpacks as ``(sup, witness)``."""

    sup: float
    witness: GroupPoint
    kind: str
    samples: int
    interior: bool
    seed: int

    def __iter__(self) -> Iterator:
        return iter((self.sup, self.witness))

    def to_json(self) -> dict:
        return {"kind": self.kind, "sup": self.sup,
                "witness": {"x": self.witness.x.tolist(), "t": self.witness.t.tolist()},
                "samples": self.samples, "interior": self.interior, "seed": self.seed}


def _radial(r, kind, Q):
    """Coefficients ``(alpha, beta)`` with defect = ``<(alpha M_t - beta P) e, e>`` at ``x = r e``.

    Here ``M_t = J_t^2 + Id`` for a g_v-unit ``t`` and ``P`` is the vertical sum.
    """
    r = np.asarray(r, dtype=float)
    a4 = r ** 4 + 16.0
    alpha = 16 * r * r / a4 ** 1.5
    beta = 2 * r * r / np.sqrt(a4)
    if kind == "eikonal":
        return alpha, 0.0 * beta
    c = 1.0 if kind == "harmonic" else (2.0 - Q)
    return c * (Q + 2) * alpha, c * beta


def sup_defect(algebra: StepTwoAlgebra, metric: VerticalMetric | None = None,
               kind: str = "eikonal", sampler: SolverConfig | None = None) -> SupDefect:
    """Estimate ``sup |defect|`` over the group minus the origin.

    All defects are 0-homogeneous, so it suffices to search the slice
    ``||t||_v = 1``, ``||x|| <= 4`` (plus ``t = 0``).  For fixed ``t`` and
    ``r = ||x||`` the defect is a quadratic form in the unit vector
    ``x / r``, so the sup over directions is an extreme eigenvalue; ``t``
    and ``r`` are sampled (including ``r = 2^(3/4)`` and ``r = L_0``) and
    the best candidates polished by Nelder-Mead.
    """
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}, got {kind!r}")
    sampler = sampler or SolverConfig()
    metric = metric or VerticalMetric.identity(algebra.m2)
    m, m2, Q = algebra.m, algebra.m2, algebra.Q
    L = metric.cholesky
    Linv_T = np.linalg.inv(L).T
    P = _vertical_sum(algebra, metric)
    rng = np.random.default_rng([sampler.seed, 104729])

    L0 = 2 ** 0.75 * (m + 2) ** 0.25 / (Q + 2 + m2) ** 0.25
    radii = np.unique(np.concatenate([np.linspace(R_MAX / 64, R_MAX, 64),
                                      [2 ** 0.75, L0]]))

    def Mt(s):
        t = Linv_T @ (s / np.linalg.norm(s))
        J = j_matrix(algebra, metric, t)
        return J @ J + np.eye(m), t

    def best_at(s, r):
        M, t = Mt(s)
        a, b = _radial(r, kind, Q)
        w, V = np.linalg.eigh(a * M - b * P)
        k = 0 if abs(w[0]) >= abs(w[-1]) else m - 1
        return abs(float(w[k])), r * V[:, k], t

    S = _sphere_grid(m2, sampler, rng) if m2 > 1 else np.ones((1, 1))
    T = (S / np.linalg.norm(S, axis=1, keepdims=True)) @ Linv_T.T
    J = -np.einsum("kq,qij->kij", T @ metric.G, algebra.B)
    M = J @ J + np.eye(m)
    a, b = _radial(radii, kind, Q)
    A = a[None, :, None, None] * M[:, None] - b[None, :, None, None] * P
    w = np.linalg.eigvalsh(A)
    score = np.maximum(np.abs(w[..., 0]), np.abs(w[..., -1]))
    samples = int(score.size)
    # deterministic order: value, then sample index
    flat = np.argsort(-score.ravel(), kind="stable")
    cands = [(float(score.flat[i]), S[i // radii.size], float(radii[i % radii.size]))
             for i in flat[:50 * max(1, sampler.restarts)]]

    def neg(theta, s0):
        r = float(np.clip(theta[0], 0.0, R_MAX))
        s = s0 if m2 == 1 else theta[1:]
        if m2 > 1 and np.linalg.norm(s) == 0:
            return 0.0
        return -best_at(s, r)[0]

    best = None
    seen = []
    for val, s0, r0 in cands:
        if len(seen) >= sampler.restarts:
            break
        if any(abs(r0 - r1) < 1e-9 and abs(s0 @ s1) > 1 - 1e-3 for r1, s1 in seen):
            continue
        seen.append((r0, s0))
        theta0 = np.concatenate([[r0], s0]) if m2 > 1 else np.array([r0])
        res = minimize(neg, theta0, args=(s0,), method="Nelder-Mead",
                       options={"maxiter": sampler.max_iters * len(theta0),
                                "xatol": 1e-9, "fatol": sampler.tol * 1e-2})
        x_best = res.x if -res.fun >= val else theta0
        r = float(np.clip(x_best[0], 0.0, R_MAX))
        s = s0 if m2 == 1 else x_best[1:]
        v, x, t = best_at(s, r)
        if best is None or v > best[0] + 1e-15:
            best = (v, x, t, r)

    # t = 0 slice (x unit): every defect reduces to -2 <P e, e> / 1 for the harmonic kinds
    if kind != "eikonal":
        w, V = np.linalg.eigh(-2.0 * P * (1.0 if kind == "harmonic" else 2.0 - Q))
        k = 0 if abs(w[0]) >= abs(w[-1]) else m - 1
        samples += 1
        if abs(w[k]) > best[0] + 1e-15:
            best = (abs(float(w[k])), V[:, k], np.zeros(m2), 1.0)

    v, x, t, r = best
    interior = bool(r < R_MAX * (1 - 1e-6))
    return SupDefect(float(v), GroupPoint(x, t), kind, samples, interior, sampler.seed)
