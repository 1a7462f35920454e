"""Fundamental solution and infinity-Laplacian on H^n(1/2, 1, ..., 1).

Coordinates are ``(x_1, y_1, ..., x_n, y_n, t)`` with the frame

    X_1 = d/dx_1 - 1/2 y_1 d/dt,   Y_1 = d/dy_1 + 1/2 x_1 d/dt,
    X_j = d/dx_j - y_j d/dt,       Y_j = d/dy_j + x_j d/dt      (j >= 2),

i.e. brackets ``[X_1, Y_1] = T`` and ``[X_j, Y_j] = 2T`` (the algebra
``make_h_half(n, scaled=True)``).  With ``A = |z_1|^2/4``,
``B = A + ||z'||^2/2`` and ``C = sqrt(B^2 + t^2)``, the horizontal gradients
of ``A``, ``B`` and ``t`` are the vectors ``u``, ``v`` and ``w``; every
closed form below is a combination of these three, and inner products are
taken with their Gram matrix

    <v,v> = <w,w> = 2B - A,   <u,u> = <u,v> = A,   <u,w> = <v,w> = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.optimize import bisect, minimize_scalar

from .algebra import StepTwoAlgebra, make_h_half
from .calculus import (
    Jet2,
    ScalarField,
    fd_field,
    horizontal_frame,
    horizontal_gradient,
    infinity_laplacian,
    sub_laplacian,
)
from .deviation import SolverConfig

__all__ = [
    "AnisoPoint",
    "AbcFrame",
    "abc_frame",
    "group_algebra",
    "fundamental_u",
    "homogeneous_n",
    "normalized_u",
    "pqr",
    "grad_log_u",
    "normsq_grad_log_u",
    "g_coefficients",
    "divergence_identities",
    "grad_normsq_decomposition",
    "infinity_laplacian_log_u",
    "infinity_laplacian_n",
    "f3_closed",
    "f3_fit",
    "log_u_field",
    "n_field",
    "sample_points",
    "slice_point",
    "delta_sq",
    "conjecture_scan",
    "frame_identity_residual",
    "pqr_identity_residual",
    "verify_fundamental",
]


@dataclass(frozen=True, eq=False)
class AnisoPoint:
    """A point ``(z_1, z', t)``; ``z'`` holds ``x_2, y_2, ..., x_n, y_n``."""

    z1: np.ndarray
    zprime: np.ndarray
    t: float

    def __post_init__(self):
        z1 = np.array(self.z1, dtype=float).reshape(-1)
        zp = np.array(self.zprime, dtype=float).reshape(-1)
        if z1.shape != (2,):
            raise ValueError("z1 must be a pair (x1, y1)")
        if zp.size < 2 or zp.size % 2:
            raise ValueError("zprime must hold 2(n-1) >= 2 reals")
        t = float(self.t)
        if not (np.all(np.isfinite(z1)) and np.all(np.isfinite(zp)) and math.isfinite(t)):
            raise ValueError("point coordinates must be finite")
        z1.setflags(write=False)
        zp.setflags(write=False)
        object.__setattr__(self, "z1", z1)
        object.__setattr__(self, "zprime", zp)
        object.__setattr__(self, "t", t)

    @property
    def n(self) -> int:
        return 1 + self.zprime.size // 2

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.z1, self.zprime])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.z1, self.zprime, [self.t]])

    @classmethod
    def from_vector(cls, v) -> "AnisoPoint":
        v = np.asarray(v, dtype=float)
        return cls(v[:2], v[2:-1], v[-1])

    def dilate(self, lam: float) -> "AnisoPoint":
        if not lam > 0:
            raise ValueError(f"dilation factor must be positive, got {lam}")
        return AnisoPoint(lam * self.z1, lam * self.zprime, lam * lam * self.t)


def _point(n: int, p) -> AnisoPoint:
    if not isinstance(p, AnisoPoint):
        p = AnisoPoint.from_vector(p)
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if p.n != n:
        raise ValueError(f"point has n={p.n}, expected {n}")
    return p


def group_algebra(n: int) -> StepTwoAlgebra:
    """Structure constants matching the frame above."""
    return make_h_half(n, scaled=True)


@dataclass(frozen=True, eq=False)
class AbcFrame:
    A: float
    B: float
    C: float
    t: float
    uvec: np.ndarray
    vvec: np.ndarray
    wvec: np.ndarray

    def gram(self) -> np.ndarray:
        """Gram matrix of ``(v, w, u)``."""
        A, B = self.A, self.B
        return np.array([[2 * B - A, 0.0, A], [0.0, 2 * B - A, 0.0], [A, 0.0, A]])

    def vector(self, coeffs) -> np.ndarray:
        cv, cw, cu = coeffs
        return cv * self.vvec + cw * self.wvec + cu * self.uvec


def abc_frame(n: int, p) -> AbcFrame:
    p = _point(n, p)
    x1, y1 = p.z1
    zp = p.zprime
    A = 0.25 * (x1 * x1 + y1 * y1)
    B = A + 0.5 * float(zp @ zp)
    C = math.hypot(B, p.t)
    u = np.zeros(2 * n)
    u[:2] = 0.5 * p.z1
    v = np.concatenate([0.5 * p.z1, zp])
    # multiplication by i on each complex pair
    w = np.concatenate([[-0.5 * y1, 0.5 * x1], np.column_stack([-zp[1::2], zp[0::2]]).ravel()])
    return AbcFrame(A, B, C, p.t, u, v, w)


def _abc(n, p):
    f = abc_frame(n, p)
    if f.C == 0:
        raise ValueError("the origin is singular")
    return f


# -- u and N ------------------------------------------------------------------------


def fundamental_u(n: int, p) -> float:
    """``(B+C)^(1/2) / (C (A+C)^(n-1/2))``, a constant multiple of the fundamental solution."""
    f = _abc(n, p)
    return math.sqrt(f.B + f.C) / (f.C * (f.A + f.C) ** (n - 0.5))


def homogeneous_n(n: int, p) -> float:
    """Homogeneous norm normalized so that ``N(0, z', 0) = ||z'||``."""
    f = _abc(n, p)
    return (2 ** (0.5 + 0.25 / n) * f.C ** (0.5 / n) * (f.A + f.C) ** (0.5 - 0.25 / n)
            / (f.B + f.C) ** (0.25 / n))


def normalized_u(n: int, p) -> float:
    """The multiple of :func:`fundamental_u` equal to ``N^(2-Q)``, ``Q = 2n + 2``."""
    return 2.0 ** (-(n + 0.5)) * fundamental_u(n, p)


def pqr(n: int, p) -> tuple[float, float, float]:
    f = _abc(n, p)
    A, B, C, t = f.A, f.B, f.C, f.t
    P = (C - 2 * B) / (2 * C * C)
    Q = (C + 2 * B) * t / (2 * C * C * (C + B))
    R = 1.0 / (C + A)
    return P, Q, R


def _grad_log_u_coeffs(n, f: AbcFrame, P, Q, R, s):
    B, C, t = f.B, f.C, f.t
    return np.array([P - s * B / C * R, -(Q + s * t / C * R), -s * R])


def grad_log_u(n: int, p) -> np.ndarray:
    """``grad_0 u / u`` in the frame order ``(X_1, Y_1, ..., X_n, Y_n)``."""
    f = _abc(n, p)
    return f.vector(_grad_log_u_coeffs(n, f, *pqr(n, p), n - 0.5))


def g_coefficients(n: int, p) -> tuple[float, float, float]:
    """``(G_0, G_1, G_2)`` with ``||grad_0 u||^2/u^2 = G_0 + nb G_1 + nb^2 G_2``, ``nb = n - 1/2``."""
    f = _abc(n, p)
    A, B, C = f.A, f.B, f.C
    G0 = (2 * B - A) / (2 * C * (C + B))
    G1 = 2 * (A * B - A * C + B * C) / (C * C * (C + A))
    G2 = 2 * B / (C * (C + A))
    return G0, G1, G2


def normsq_grad_log_u(n: int, p, s: float | None = None) -> float:
    s = n - 0.5 if s is None else s
    G0, G1, G2 = g_coefficients(n, p)
    return G0 + s * G1 + s * s * G2


# -- first derivatives of P, Q, R and divergences --------------------------------------


def _grad_pqr_coeffs(f: AbcFrame):
    """Coefficients in ``(v, w, u)`` of grad_0 P, grad_0 Q, grad_0 R."""
    A, B, C, t = f.A, f.B, f.C, f.t
    C4 = C ** 4
    dP = np.array([(4 * B * B - B * C - 2 * C * C) / (2 * C4), t * (4 * B - C) / (2 * C4), 0.0])
    dQ = np.array([(C - 4 * B) * t / (2 * C4),
                   -(C ** 3 + 3 * B * C * C - 3 * B * B * C - 4 * B ** 3) / (2 * C4 * (C + B)),
                   0.0])
    k = 1.0 / (C + A) ** 2
    dR = np.array([-B / C * k, -t / C * k, -k])
    return dP, dQ, dR


def _grad_b_over_c(f):
    B, C, t = f.B, f.C, f.t
    return np.array([t * t, -B * t, 0.0]) / C ** 3


def _grad_t_over_c(f):
    B, C, t = f.B, f.C, f.t
    return np.array([-B * t, B * B, 0.0]) / C ** 3


def _div_grad_log_u(n, f, s):
    """Closed-form ``div_0(grad_0 u / u)`` for the exponent ``s``."""
    P, Q, R = _pqr_from(f)
    dP, dQ, dR = _grad_pqr_coeffs(f)
    B, C, t = f.B, f.C, f.t
    coef = np.array([P - s * B / C * R, -(Q + s * t / C * R), -s * R])
    dcoef = [dP - s * (R * _grad_b_over_c(f) + B / C * dR),
             -(dQ + s * (R * _grad_t_over_c(f) + t / C * dR)),
             -s * dR]
    # div_0 of (v, w, u) is (2n - 1, 0, 1)
    div = np.array([2 * n - 1.0, 0.0, 1.0])
    G = f.gram()
    return float(coef @ div + sum(dcoef[k] @ G[:, k] for k in range(3)))


def _pqr_from(f: AbcFrame):
    A, B, C, t = f.A, f.B, f.C, f.t
    return ((C - 2 * B) / (2 * C * C), (C + 2 * B) * t / (2 * C * C * (C + B)), 1.0 / (C + A))


# -- exact jets of A, B, t, C in coordinates (independent route via module calculus) -------


def _abc_jets(n: int, z: np.ndarray):
    d = 2 * n + 1
    zero = np.zeros((d, d))
    gA = np.zeros(d)
    gA[:2] = 0.5 * z[:2]
    HA = zero.copy()
    HA[0, 0] = HA[1, 1] = 0.5
    gB = gA.copy()
    gB[2:2 * n] = z[2:2 * n]
    HB = HA.copy()
    idx = np.arange(2, 2 * n)
    HB[idx, idx] = 1.0
    A = Jet2(0.25 * float(z[:2] @ z[:2]), gA, HA)
    B = Jet2(A.value + 0.5 * float(z[2:2 * n] @ z[2:2 * n]), gB, HB)
    et = np.zeros(d)
    et[-1] = 1.0
    t = Jet2(z[-1], et, zero)
    c2 = B * B + t * t
    cv = math.sqrt(c2.value)
    if cv == 0:
        raise ValueError("the origin is singular")
    C = c2.compose(cv, 0.5 / cv, -0.25 / cv ** 3)
    return A, B, t, C


def _log(j: Jet2) -> Jet2:
    return j.compose(math.log(j.value), 1.0 / j.value, -1.0 / j.value ** 2)


def _abc_values(n, Z):
    A = 0.25 * np.sum(Z[:, :2] ** 2, axis=1)
    B = A + 0.5 * np.sum(Z[:, 2:2 * n] ** 2, axis=1)
    C = np.hypot(B, Z[:, -1])
    return A, B, C


def log_u_field(n: int, s: float | None = None) -> ScalarField:
    """``log u_s = 1/2 log(B+C) - log C - s log(A+C)`` with exact jets (``s = n - 1/2`` gives log u)."""
    s = n - 0.5 if s is None else float(s)

    def jet(z):
        A, B, _, C = _abc_jets(n, z)
        return 0.5 * _log(B + C) + (-1.0) * _log(C) + (-s) * _log(A + C)

    def values(Z):
        A, B, C = _abc_values(n, Z)
        return 0.5 * np.log(B + C) - np.log(C) - s * np.log(A + C)
    return ScalarField(jet, values, name=f"log u_{s:g}")


def n_field(n: int) -> ScalarField:
    """The homogeneous norm ``N`` with exact jets."""
    k = 0.5 + 0.25 / n
    lu = log_u_field(n)

    def jet(z):
        j = lu.jet(z)
        # N = 2^k u^(-1/(2n)) = exp(k log 2 - log(u) / (2n))
        e = math.exp(k * math.log(2) - j.value / (2 * n))
        inner = Jet2(0.0, -j.grad / (2 * n), -j.hess / (2 * n))
        return inner.compose(e, e, e)

    def values(Z):
        return np.exp(k * math.log(2) - lu.values(Z) / (2 * n))
    return ScalarField(jet, values, name="N")


# -- residual report -----------------------------------------------------------------------


def _fd_horizontal(algebra, values, z):
    return horizontal_gradient(fd_field(values), algebra, z)


def _combo_values(n, which):
    """Vectorized components of v, w, u or of a scalar built from A, B, C, t."""
    def vvec(Z):
        out = Z[:, :2 * n].copy()
        out[:, :2] *= 0.5
        return out

    def wvec(Z):
        out = np.empty((len(Z), 2 * n))
        out[:, 0::2] = -Z[:, 1:2 * n:2]
        out[:, 1::2] = Z[:, 0:2 * n:2]
        out[:, :2] *= 0.5
        return out

    def uvec(Z):
        out = np.zeros((len(Z), 2 * n))
        out[:, :2] = 0.5 * Z[:, :2]
        return out
    return {"v": vvec, "w": wvec, "u": uvec}[which]


def _scalar_values(n, which):
    def P(Z):
        _, B, C = _abc_values(n, Z)
        return (C - 2 * B) / (2 * C * C)

    def Q(Z):
        _, B, C = _abc_values(n, Z)
        return (C + 2 * B) * Z[:, -1] / (2 * C * C * (C + B))

    def R(Z):
        A, _, C = _abc_values(n, Z)
        return 1.0 / (C + A)

    def G(Z):
        A, B, C = _abc_values(n, Z)
        s = n - 0.5
        return ((2 * B - A) / (2 * C * (C + B)) + s * 2 * (A * B - A * C + B * C) / (C * C * (C + A))
                + s * s * 2 * B / (C * (C + A)))

    def fA(Z):
        return _abc_values(n, Z)[0]

    def fB(Z):
        return _abc_values(n, Z)[1]

    def fC(Z):
        return _abc_values(n, Z)[2]

    def ft(Z):
        return Z[:, -1]
    return {"P": P, "Q": Q, "R": R, "G": G, "A": fA, "B": fB, "C": fC, "t": ft}[which]


def divergence_identities(n: int, p) -> dict:
    """Residuals of the derivative identities against finite differences.

    Keys ``grad_A, grad_B, grad_t, grad_C, grad_P, grad_Q, grad_R`` and
    ``div_u, div_v, div_w`` are max-abs errors of the closed forms against
    FD jets along the explicit frame; ``harmonic`` is ``N^2 |div_0(grad_0 u/u)
    + ||grad_0 u||^2/u^2|`` computed entirely from closed forms (``N^2`` makes
    it 0-homogeneous).
    """
    p = _point(n, p)
    f = _abc(n, p)
    z = p.as_vector()
    alg = group_algebra(n)
    dP, dQ, dR = _grad_pqr_coeffs(f)
    exact = {
        "grad_A": f.uvec, "grad_B": f.vvec, "grad_t": f.wvec,
        "grad_C": f.vector([f.B / f.C, f.t / f.C, 0.0]),
        "grad_P": f.vector(dP), "grad_Q": f.vector(dQ), "grad_R": f.vector(dR),
    }
    out = {}
    for key, val in exact.items():
        fd = _fd_horizontal(alg, _scalar_values(n, key.split("_")[1]), z)
        out[key] = float(np.max(np.abs(fd - val)))
    div_exact = {"u": 1.0, "v": 2 * n - 1.0, "w": 0.0}
    F = horizontal_frame(alg, z)
    for key, target in div_exact.items():
        comp = _combo_values(n, key)
        div = 0.0
        for i in range(2 * n):
            jet = fd_field(lambda Z, i=i: comp(Z)[:, i])(z)
            div += float(F[i] @ jet.grad)
        out[f"div_{key}"] = abs(div - target)
    s = n - 0.5
    N = homogeneous_n(n, p)
    out["harmonic"] = N * N * abs(_div_grad_log_u(n, f, s) + normsq_grad_log_u(n, p))
    return out


def frame_identity_residual(n: int, p) -> float:
    """Max violation of the norm and orthogonality relations of ``u, v, w``."""
    f = abc_frame(n, p)
    u, v, w = f.uvec, f.vvec, f.wvec
    target = 2 * f.B - f.A
    return float(max(abs(v @ v - target), abs(w @ w - target), abs(u @ u - f.A),
                     abs(u @ v - f.A), abs(v @ w), abs(u @ w)))


def pqr_identity_residual(n: int, p) -> float:
    """Max of ``|P^2 + Q^2 - 1/(2C(C+B))|`` and ``|tQ - BP - 1/2|``."""
    f = _abc(n, p)
    P, Q, _ = _pqr_from(f)
    return float(max(abs(P * P + Q * Q - 1 / (2 * f.C * (f.C + f.B))),
                     abs(f.t * Q - f.B * P - 0.5)))


# -- gradient of ||grad u||^2/u^2 and the infinity-Laplacian ------------------------------------


def _g_partials(f: AbcFrame):
    """Partials ``d/dA, d/dB, d/dC`` of ``G_0, G_1, G_2`` (rows) at fixed ``t``."""
    A, B, C = f.A, f.B, f.C
    BC, AC = B + C, A + C
    G0 = (-1 / (2 * C * BC),
          (A + 2 * C) / (2 * C * BC ** 2),
          (A - 2 * B) * (B + 2 * C) / (2 * C * C * BC ** 2))
    G1 = (-2 / AC ** 2,
          2 / C ** 2,
          -2 * (2 * A * A * B - A * A * C + 4 * A * B * C - 2 * A * C * C + 2 * B * C * C)
          / (C ** 3 * AC ** 2))
    G2 = (-2 * B / (C * AC ** 2),
          2 / (C * AC),
          -2 * B * (A + 2 * C) / (C * C * AC ** 2))
    return np.array([G0, G1, G2])


def grad_normsq_decomposition(n: int, p, s: float | None = None) -> tuple[float, float, float]:
    """``(E_v, E_w, E_u)`` with ``grad_0(||grad_0 u||^2/u^2) = E_v v + E_w t w + E_u u``."""
    s = n - 0.5 if s is None else s
    f = _abc(n, p)
    D = np.array([1.0, s, s * s]) @ _g_partials(f)
    dA, dB, dC = D
    return float(dB + f.B / f.C * dC), float(dC / f.C), float(dA)


def infinity_laplacian_log_u(n: int, p, s: float | None = None) -> float:
    """``L_inf(log u_s) = 1/2 <grad_0 G, grad_0 log u_s>`` from closed forms."""
    s = n - 0.5 if s is None else s
    f = _abc(n, p)
    Ev, Ew, Eu = grad_normsq_decomposition(n, p, s)
    e = np.array([Ev, Ew * f.t, Eu])
    g = _grad_log_u_coeffs(n, f, *_pqr_from(f), s)
    return 0.5 * float(e @ f.gram() @ g)


def infinity_laplacian_n(n: int, p) -> float:
    """``N L_inf N`` (0-homogeneous), via ``L_inf N / N^3 = -L_inf(log u)/(8n^3) + G^2/(16 n^4)``."""
    ratio = (-infinity_laplacian_log_u(n, p) / (8 * n ** 3)
             + normsq_grad_log_u(n, p) ** 2 / (16 * n ** 4))
    return homogeneous_n(n, p) ** 4 * ratio


# -- the leading coefficient F_3 ------------------------------------------------------------------


def f3_closed(n: int, p) -> float:
    f = _abc(n, p)
    A, B, C = f.A, f.B, f.C
    return (A * B * B + 2 * B * B * C - A * C * C) / (C ** 3 * (C + A) ** 2)


@dataclass
class F3Fit:
    """Unpacks as ``(f3, residual)``."""

    f3: float
    residual: float
    f3_closed: float
    identity_residual: float

    def __iter__(self) -> Iterator:
        return iter((self.f3, self.residual))


def f3_fit(n: int, p, exponents=(1, 2, 3, 4), check=(0, 5)) -> F3Fit:
    """Fit ``L_inf(log u_s)`` as a cubic in the free exponent ``s``.

    ``L_inf(log u_s)`` is evaluated with exact coordinate jets through
    :func:`htype.calculus.infinity_laplacian` (independent of the closed
    forms).  Four exponents determine the cubic, so ``residual`` is the
    prediction error at the ``check`` exponents.  ``identity_residual`` is
    ``|G_2^2 - 2 F_3 - 2 A t^2 / (C^3 (C+A)^2)|`` with the closed-form ``F_3``.
    """
    p = _point(n, p)
    alg = group_algebra(n)
    z = p.as_vector()

    def linf(s):
        return infinity_laplacian(log_u_field(n, s), alg, z)

    ex = np.asarray(exponents, dtype=float)
    coef = np.polyfit(ex, [linf(s) for s in ex], 3)
    residual = max((abs(np.polyval(coef, s) - linf(s)) for s in check), default=0.0)
    f = _abc(n, p)
    G2 = 2 * f.B / (f.C * (f.C + f.A))
    F3 = f3_closed(n, p)
    ident = abs(G2 * G2 - 2 * F3 - 2 * f.A * f.t ** 2 / (f.C ** 3 * (f.C + f.A) ** 2))
    return F3Fit(float(coef[0]), float(residual), F3, float(ident))


def verify_fundamental(n: int, samples: int = 100, seed: int = 0) -> dict:
    """Worst residuals of every closed form over seeded random points.

    ``harmonic`` is ``N^Q |L u|`` for the normalized ``u`` (closed forms);
    ``harmonic_jet`` is the same through exact jets on the frame; the rest
    compare closed forms with finite differences or exact identities.
    """
    alg = group_algebra(n)
    lu = log_u_field(n)
    Gvals = _scalar_values(n, "G")
    logu_vals = lu.values
    worst: dict[str, float] = {}

    def keep(key, val):
        worst[key] = max(worst.get(key, 0.0), float(val))

    for p in sample_points(n, samples, seed):
        z = p.as_vector()
        N = homogeneous_n(n, p)
        keep("normalization", abs(N - normalized_u(n, p) ** (-1 / (2 * n))) / N)
        keep("frame", frame_identity_residual(n, p))
        keep("pqr", pqr_identity_residual(n, p))
        for key, val in divergence_identities(n, p).items():
            keep(key, val)
        # L u / u = L(log u) + ||grad log u||^2, and N^Q u = N^2
        keep("harmonic_jet", N * N * abs(sub_laplacian(lu, alg, z) + normsq_grad_log_u(n, p)))
        keep("grad_log_u", np.max(np.abs(_fd_horizontal(alg, logu_vals, z) - grad_log_u(n, p))))
        f = abc_frame(n, p)
        Ev, Ew, Eu = grad_normsq_decomposition(n, p)
        keep("E_decomposition", np.max(np.abs(_fd_horizontal(alg, Gvals, z)
                                              - (Ev * f.vvec + Ew * f.t * f.wvec + Eu * f.uvec))))
        fit = f3_fit(n, p)
        keep("f3_fit", abs(fit.f3 - fit.f3_closed))
        keep("f3_residual", fit.residual)
        keep("f3_identity", fit.identity_residual)
    return worst


# -- sampling and the scan -------------------------------------------------------------------------


def sample_points(n: int, count: int, seed: int = 0, norm_range=(0.5, 2.0)) -> list[AnisoPoint]:
    """Seeded random points with ``N`` uniform in ``norm_range``."""
    rng = np.random.default_rng([seed, n, 31337])
    out = []
    for _ in range(count):
        p = AnisoPoint.from_vector(rng.standard_normal(2 * n + 1))
        target = rng.uniform(*norm_range)
        out.append(p.dilate(target / homogeneous_n(n, p)))
    return out


def slice_point(n: int, phi: float) -> AnisoPoint:
    """The point of the unit sphere on ``t = 0`` in direction ``(cos phi, 0, sin phi, 0, ...)``.

    Found by bisection of ``r -> N(r z, 0) - 1`` on ``[1e-3, 10]``.
    """
    def at(r):
        z1 = [r * math.cos(phi), 0.0]
        zp = np.zeros(2 * (n - 1))
        zp[0] = r * math.sin(phi)
        return AnisoPoint(z1, zp, 0.0)

    r = bisect(lambda r: homogeneous_n(n, at(r)) - 1.0, 1e-3, 10.0, xtol=1e-12)
    return at(r)


def delta_sq(n: int) -> float:
    """Square of the H-type deviation of this group."""
    return 9 * (n - 1) / (n * (16 * n - 15))


@dataclass
class ConjectureScan:
    """Unpacks as ``(sup, witness, delta_sq, ratio)``."""

    n: int
    sup: float
    witness: AnisoPoint
    delta_sq: float
    ratio: float
    samples: int
    symmetry_residual: float
    value_at_zprime: float

    def __iter__(self) -> Iterator:
        return iter((self.sup, self.witness, self.delta_sq, self.ratio))

    def to_json(self) -> dict:
        return {"n": self.n, "sup": self.sup, "delta_sq": self.delta_sq, "ratio": self.ratio,
                "witness": {"z1": self.witness.z1.tolist(), "zprime": self.witness.zprime.tolist(),
                            "t": self.witness.t},
                "samples": self.samples, "symmetry_residual": self.symmetry_residual,
                "value_at_zprime": self.value_at_zprime}


def _symmetry_residual(n: int, rng: np.random.Generator, trials: int = 4) -> float:
    """Max change of ``|N L_inf N|`` (exact jets on the frame) under random
    rotations of ``z_1`` and ``z'`` with ``|z_1|``, ``||z'||`` fixed, ``t = 0``."""
    alg = group_algebra(n)
    N = n_field(n)
    worst = 0.0
    for _ in range(trials):
        r1, rp = rng.uniform(0.2, 1.0, size=2)
        vals = []
        for _ in range(3):
            a = rng.standard_normal(2)
            b = rng.standard_normal(2 * (n - 1))
            z = np.concatenate([r1 * a / np.linalg.norm(a), rp * b / np.linalg.norm(b), [0.0]])
            vals.append(abs(N(z).value * infinity_laplacian(N, alg, z)))
        worst = max(worst, max(vals) - min(vals))
    return worst


def conjecture_scan(n: int, sampler: SolverConfig | None = None) -> ConjectureScan:
    """Estimate ``sup |N L_inf N|`` over the unit sphere intersected with ``t = 0``.

    The value there depends only on ``(|z_1|, ||z'||)`` (checked empirically
    first), so the scan runs over the angle ``phi`` with ``|z_1| = r cos phi``,
    ``||z'|| = r sin phi`` and ``r`` fixed by ``N = 1``; the best sample is
    polished by a bounded 1-D search.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    sampler = sampler or SolverConfig()
    rng = np.random.default_rng([sampler.seed, n, 2718])
    sym = _symmetry_residual(n, rng)

    def value(phi):
        return abs(infinity_laplacian_n(n, slice_point(n, phi)))

    k = max(sampler.grid_density, 3)
    phis = np.linspace(0.0, 0.5 * math.pi, k)
    vals = np.array([value(ph) for ph in phis])
    i = int(np.argmax(vals))
    best_phi, best = float(phis[i]), float(vals[i])
    lo, hi = phis[max(i - 1, 0)], phis[min(i + 1, k - 1)]
    if hi > lo:
        res = minimize_scalar(lambda ph: -value(ph), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12, "maxiter": sampler.max_iters})
        if -res.fun > best:
            best_phi, best = float(res.x), float(-res.fun)
    witness = slice_point(n, best_phi)
    d2 = delta_sq(n)
    at_zp = value(0.5 * math.pi)
    return ConjectureScan(n, best, witness, d2, best / d2, k, sym, at_zp)
