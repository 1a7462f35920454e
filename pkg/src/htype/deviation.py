"""H-type deviation as a minimax problem over vertical metrics.

For a fixed metric ``G = L L^T`` the unit vertical sphere ``t^T G t = 1`` is
parametrized as ``t = L^{-T} s`` with ``|s| = 1``; then ``J_t = -sum_r s_r K_r``
where ``K_r = sum_q L[q, r] B[q]``.  The inner problem maximizes the quartic
``phi(s) = ||J_s^2 + Id||_HS^2`` over the Euclidean sphere.  The outer problem
minimizes the resulting value over the log-Cholesky parameters of ``L``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .algebra import StepTwoAlgebra
from .metric import VerticalMetric, h_type_defect, j_matrix

__all__ = [
    "SolverConfig",
    "DeviationReport",
    "deviation_at_metric",
    "deviation",
    "optimal_lambda_heis",
    "metric_scale",
    "eval_dgen",
    "dgen_metric",
    "dgen_direction",
    "generalized_s_matrix",
    "fibonacci_sphere",
    "metric_from_params",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    restarts: int = 3
    max_iters: int = 400
    tol: float = 1e-10
    seed: int = 0
    grid_density: int = 2000

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0 < self.tol <= 1e-2:
            raise ValueError("tol must lie in (0, 1e-2]")
        if self.grid_density < 1:
            raise ValueError("grid_density must be >= 1")

    def to_json(self) -> dict:
        return {
            "restarts": self.restarts,
            "max_iters": self.max_iters,
            "tol": self.tol,
            "seed": self.seed,
            "grid_density": self.grid_density,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SolverConfig":
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown solver fields: {sorted(unknown)}")
        return cls(**obj)


@dataclass
class DeviationReport:
    value: float
    witness_t: np.ndarray
    metric: VerticalMetric
    inner_converged: bool
    outer_converged: bool
    evaluations: int

    def to_json(self) -> dict:
        return {
            "value": float(self.value),
            "witness_t": [float(v) for v in self.witness_t],
            "metric": self.metric.to_json(),
            "inner_converged": bool(self.inner_converged),
            "outer_converged": bool(self.outer_converged),
            "evaluations": int(self.evaluations),
        }


# -- inner problem -------------------------------------------------------------

def fibonacci_sphere(k: int) -> np.ndarray:
    """``k`` nearly uniform points on the unit 2-sphere."""
    i = np.arange(k) + 0.5
    z = 1 - 2 * i / k
    r = np.sqrt(np.maximum(0.0, 1 - z * z))
    phi = np.pi * (1 + 5 ** 0.5) * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _sphere_grid(m2: int, cfg: SolverConfig, rng: np.random.Generator) -> np.ndarray:
    k = max(cfg.grid_density, 1)
    if m2 == 1:
        return np.ones((1, 1))
    if m2 == 2:
        th = np.pi * np.arange(k) / k
        return np.column_stack([np.cos(th), np.sin(th)])
    if m2 == 3:
        return fibonacci_sphere(k)
    S = rng.standard_normal((k, m2))
    S /= np.linalg.norm(S, axis=1, keepdims=True)
    return np.vstack([np.eye(m2), S])


class _Quartic:
    """``phi(s) = ||J_s^2 + Id||_HS^2`` with ``J_s = -sum_r s_r K_r``."""

    def __init__(self, K: np.ndarray):
        self.K = K
        self.m = K.shape[1]
        self.eye = np.eye(self.m)
        self.KK = np.einsum("rij,sjk->rsik", K, K)
        self.evals = 0

    def batch(self, S: np.ndarray) -> np.ndarray:
        J = -np.einsum("kr,rij->kij", S, self.K)
        M = J @ J + self.eye
        self.evals += len(S)
        return np.einsum("kij,kij->k", M, M)

    def derivs(self, s: np.ndarray):
        """Value, Euclidean gradient and Hessian at ``s``."""
        J = -np.einsum("r,rij->ij", s, self.K)
        M = J @ J + self.eye
        self.evals += 1
        g = -4.0 * np.einsum("ij,rji->r", M @ J, self.K)
        # dM_r = -(J K_r + K_r J)
        dM = -(np.einsum("ij,rjk->rik", J, self.K) + np.einsum("rij,jk->rik", self.K, J))
        H = 2.0 * np.einsum("rij,sij->rs", dM, dM) + 4.0 * np.einsum("ij,rsij->rs", M, self.KK)
        return float(np.sum(M * M)), g, 0.5 * (H + H.T)


def _tangent_basis(s: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(np.column_stack([s, np.eye(s.size)]))
    return q[:, 1:s.size]


def _armijo(f: _Quartic, s, val, d, slope, alpha):
    for _ in range(60):
        trial = (s + alpha * d) / np.linalg.norm(s + alpha * d)
        if f.batch(trial[None, :])[0] >= val + 1e-4 * alpha * slope:
            return trial
        alpha *= 0.5
    return None


def _polish(f: _Quartic, s0: np.ndarray, max_iters: int, tol: float):
    """Local maximization on the unit sphere.

    Saddle-free Newton steps (Hessian eigenvalues replaced by their
    magnitudes) with Armijo backtracking, falling back to projected
    gradient.  Stops when the tangential gradient is below ``sqrt(tol)`` (relative), which puts the
    value within about ``tol`` of the local maximum, or when a step gains
    less than ``tol`` (relative).
    """
    gtol = math.sqrt(tol)
    s = s0 / np.linalg.norm(s0)
    val, g, H = f.derivs(s)
    for _ in range(max_iters):
        U = _tangent_basis(s)
        gt = U.T @ g
        gn = float(np.linalg.norm(gt))
        if gn <= gtol * max(1.0, val):
            return s, val, True
        Ht = U.T @ (H - (g @ s) * np.eye(s.size)) @ U
        w, V = np.linalg.eigh(Ht)
        # saddle-free Newton direction (curvature magnitudes, floored so
        # flat directions along a degenerate maximum do not blow up)
        floor = 1e-8 * max(1.0, float(np.max(np.abs(w))))
        d_sf = U @ (V @ ((V.T @ gt) / np.maximum(np.abs(w), floor)))
        step = _armijo(f, s, val, d_sf, float(d_sf @ g), min(1.0, 0.5 / np.linalg.norm(d_sf)))
        if step is None:
            d = U @ gt
            step = _armijo(f, s, val, d, gn * gn, 1.0 / max(abs(w[0]), abs(w[-1]), 1e-12))
        if step is None:
            # no ascent step left above rounding: stationary
            return s, val, True
        s = step
        prev = val
        val, g, H = f.derivs(s)
        if val - prev <= tol * max(1.0, val):
            # creeping along a flat ridge: the value has settled
            return s, val, True
    gt = g - (g @ s) * s
    return s, val, bool(np.linalg.norm(gt) <= 10 * gtol * max(1.0, val))


def _canonical_sign(t: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(t) > 1e-14)
    if nz.size and t[nz[0]] < 0:
        return -t
    return t


def _inner(algebra: StepTwoAlgebra, metric: VerticalMetric, cfg: SolverConfig,
           branch: int = 0):
    """Maximize the defect over the g_v-unit sphere.

    Returns ``(phi_max, witness_t, converged, evaluations)``.
    """
    L = metric.cholesky
    K = np.einsum("qr,qij->rij", L, algebra.B)
    f = _Quartic(K)
    rng = np.random.default_rng([cfg.seed, branch])
    m2 = algebra.m2
    Linv_T = np.linalg.inv(L).T

    if m2 == 1:
        s = np.ones(1)
        val = f.batch(s[None, :])[0]
        return val, Linv_T @ s, True, f.evals

    grid = _sphere_grid(m2, cfg, rng)
    vals = f.batch(grid)
    order = np.argsort(-vals, kind="stable")
    starts = []
    for idx in order:
        cand = grid[idx]
        if all(abs(cand @ c) < 1 - 1e-3 for c in starts):
            starts.append(cand)
        if len(starts) >= cfg.restarts:
            break

    results = []
    for s0 in starts:
        s, val, ok = _polish(f, s0, cfg.max_iters, cfg.tol)
        results.append((val, s, ok))
    best = max(r[0] for r in results)
    near = [r for r in results if r[0] >= best - max(1e-9, cfg.tol) * max(1.0, best)]
    # deterministic tie-break: lexicographically largest |t|
    witnesses = [(_canonical_sign(Linv_T @ r[1]), r[2]) for r in near]
    witnesses.sort(key=lambda w: tuple(np.round(np.abs(w[0]), 9)), reverse=True)
    t, _ = witnesses[0]
    converged = all(r[2] for r in near)
    return best, t, converged, f.evals


def deviation_at_metric(algebra: StepTwoAlgebra, metric: VerticalMetric | None = None,
                        cfg: SolverConfig | None = None) -> DeviationReport:
    """``(1/sqrt(m)) sup { h_type_defect(t) : t^T G t = 1 }`` for a fixed metric."""
    cfg = cfg or SolverConfig()
    metric = metric or VerticalMetric.identity(algebra.m2)
    _, t, ok, evals = _inner(algebra, metric, cfg)
    t = t / math.sqrt(metric.norm_sq(t))
    value = h_type_defect(algebra, metric, t) / math.sqrt(algebra.m)
    return DeviationReport(value, t, metric, ok, True, evals)


# -- outer problem ---------------------------------------------------------------

def metric_from_params(theta, m2: int) -> VerticalMetric:
    """Log-Cholesky parameters (row-major lower triangle, log on the diagonal)."""
    L = np.zeros((m2, m2))
    L[np.tril_indices(m2)] = theta
    d = np.diag_indices(m2)
    L[d] = np.exp(L[d])
    return VerticalMetric.from_cholesky(L)


def _params_from_metric(metric: VerticalMetric) -> np.ndarray:
    L = metric.cholesky.copy()
    d = np.diag_indices(metric.m2)
    L[d] = np.log(L[d])
    return L[np.tril_indices(metric.m2)]


def deviation(algebra: StepTwoAlgebra, cfg: SolverConfig | None = None,
              start: VerticalMetric | None = None) -> DeviationReport:
    """Upper estimate of the H-type deviation: the best feasible metric found.

    Nelder-Mead on the log-Cholesky parameters from ``cfg.restarts`` seeded
    starts; the identity metric (or ``start``) is always the first start.
    """
    cfg = cfg or SolverConfig()
    m2 = algebra.m2
    npar = m2 * (m2 + 1) // 2
    rng = np.random.default_rng([cfg.seed, 7919])
    evals = 0
    cache: dict[bytes, float] = {}

    def objective(theta):
        nonlocal evals
        key = np.asarray(theta, dtype=float).tobytes()
        if key in cache:
            return cache[key]
        try:
            metric = metric_from_params(theta, m2)
        except ValueError:
            return np.inf
        phi, _, _, ne = _inner(algebra, metric, cfg)
        evals += ne
        val = math.sqrt(max(phi, 0.0) / algebra.m)
        cache[key] = val
        return val

    x0 = np.zeros(npar) if start is None else _params_from_metric(start)
    starts = [x0] + [x0 + rng.normal(0.0, 0.5, npar) for _ in range(cfg.restarts - 1)]
    best_x, best_f, best_ok = x0, objective(x0), False
    finals = []
    for x in starts:
        simplex = np.vstack([x, x + 0.25 * np.eye(npar)])
        res = minimize(objective, x, method="Nelder-Mead",
                       options={"initial_simplex": simplex,
                                "maxiter": cfg.max_iters, "maxfev": cfg.max_iters,
                                "xatol": 1e-6, "fatol": max(cfg.tol, 1e-9)})
        finals.append(float(res.fun))
        if res.fun < best_f or (res.fun == best_f and not best_ok):
            best_x, best_f, best_ok = res.x, float(res.fun), bool(res.success)
    log.debug("outer start values: %s", finals)

    metric = metric_from_params(best_x, m2)
    rep = deviation_at_metric(algebra, metric, cfg)
    rep.evaluations += evals
    rep.outer_converged = best_ok
    return rep


# -- closed-form helpers ---------------------------------------------------------

def optimal_lambda_heis(b) -> float:
    """Optimal vertical scale for the anisotropic Heisenberg group (uniform-mean norms)."""
    b = np.asarray(b, dtype=float)
    n2 = math.sqrt(np.mean(b ** 2))
    n4 = np.mean(b ** 4) ** 0.25
    return n2 / n4 ** 2


def metric_scale(metric: VerticalMetric) -> float:
    """For one vertical direction: the ``lambda`` with ``||T||_v = lambda`` (``G = lambda^2``)."""
    if metric.m2 != 1:
        raise ValueError("metric_scale is defined for one-dimensional vertical layers")
    return math.sqrt(metric.G[0, 0])


def eval_dgen(n: int, p: float, q: float, alpha: float, theta: float) -> float:
    """Normalized defect of the two-center family along direction ``theta``.

    ``q`` absorbs the bracket parameter ``eps``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not (p > 0 and q > 0):
        raise ValueError("p and q must be positive")
    c2 = math.cos(theta - alpha) ** 2
    ct2 = math.cos(theta) ** 2
    val = ((1 - p * p * c2) ** 2
           + (2.0 / n) * (2 * p * p * c2 - 1) * ct2 * q * q
           + (1.0 / n) * ct2 * ct2 * q ** 4)
    return math.sqrt(max(val, 0.0))


def _dgen_C(p, q, alpha, beta):
    return np.array([[p * math.cos(alpha), p * math.sin(alpha)],
                     [q * math.cos(beta), q * math.sin(beta)]])


def dgen_metric(p: float, q: float, alpha: float, beta: float = 0.0) -> VerticalMetric:
    """Gram matrix of ``(T, U)`` when their coordinates in an orthonormal basis are the rows of C."""
    C = _dgen_C(p, q, alpha, beta)
    return VerticalMetric(C @ C.T)


def dgen_direction(p: float, q: float, alpha: float, theta: float, beta: float = 0.0) -> np.ndarray:
    """Coordinates in the ``(T, U)`` basis of the g_v-unit vector at angle ``theta + beta``.

    With this direction the normalized defect on ``G_eps^n`` equals
    ``eval_dgen(n, p, q * eps, alpha - beta, theta)``.
    """
    C = _dgen_C(p, q, alpha, beta)
    s = np.array([math.cos(theta + beta), math.sin(theta + beta)])
    return np.linalg.solve(C.T, s)


def generalized_s_matrix(algebra: StepTwoAlgebra, metric: VerticalMetric | None = None):
    """Best common ``S`` with ``J_t^2 = -||t||_v^2 S`` over a fixed probe set.

    Returns ``(S, residual)``; the residual is the largest Hilbert-Schmidt
    distance between ``S`` and a probe's ``-J_t^2``.
    """
    metric = metric or VerticalMetric.identity(algebra.m2)
    m2 = algebra.m2
    probes = [np.eye(m2)[i] for i in range(m2)]
    for i in range(m2):
        for j in range(i + 1, m2):
            probes.append(np.eye(m2)[i] + np.eye(m2)[j])
            probes.append(np.eye(m2)[i] - np.eye(m2)[j])
    mats = []
    for t in probes:
        t = t / math.sqrt(metric.norm_sq(t))
        J = j_matrix(algebra, metric, t)
        mats.append(-(J @ J))
    mats = np.array(mats)
    S = mats.mean(axis=0)
    residual = float(max(np.linalg.norm(Mk - S) for Mk in mats))
    return S, residual
