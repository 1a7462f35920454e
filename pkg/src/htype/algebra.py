"""Step-two stratified Lie algebras stored as structure constants.

An algebra is given by ``m2`` skew-symmetric ``m x m`` matrices ``B[q]`` with
``[X_i, X_j] = sum_q B[q, i, j] T_q``.  The stored horizontal basis
``X_1 .. X_m`` is always treated as orthonormal.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

__all__ = [
    "StepTwoAlgebra",
    "GroupPoint",
    "ValidationReport",
    "validate",
    "bracket",
    "dilate",
    "make_heisenberg_aniso",
    "make_free_step_two",
    "make_g_eps",
    "make_g_bar_eps",
    "make_h_half",
    "from_name",
    "from_json",
    "to_json",
    "load_group",
]


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StepTwoAlgebra:
    """Structure constants of a step-two algebra.

    ``B`` has shape ``(m2, m, m)``.  Construction only checks shapes; use
    :func:`validate` to check the algebraic invariants.
    """

    B: np.ndarray
    name: str = ""

    def __post_init__(self):
        B = np.array(self.B, dtype=float)
        if B.ndim != 3 or B.shape[1] != B.shape[2]:
            raise ValueError(f"B must have shape (m2, m, m), got {B.shape}")
        object.__setattr__(self, "B", _frozen(B))

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def m2(self) -> int:
        return self.B.shape[0]

    @property
    def Q(self) -> int:
        """Homogeneous dimension ``m + 2 m2``."""
        return self.m + 2 * self.m2

    @property
    def dim(self) -> int:
        return self.m + self.m2

    def __repr__(self):
        label = self.name or "StepTwoAlgebra"
        return f"<{label}: m={self.m}, m2={self.m2}>"


@dataclass(frozen=True, eq=False)
class GroupPoint:
    """Exponential coordinates ``(x, t)`` of a group element."""

    x: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.array(self.x, dtype=float))
        t = np.atleast_1d(np.array(self.t, dtype=float))
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(t))):
            raise ValueError("group point coordinates must be finite")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "t", _frozen(t))

    @classmethod
    def from_vector(cls, z, m: int) -> "GroupPoint":
        z = np.asarray(z, dtype=float)
        return cls(z[:m], z[m:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.t])

    def __eq__(self, other):
        if not isinstance(other, GroupPoint):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.t, other.t)

    def __repr__(self):
        return f"GroupPoint(x={self.x.tolist()}, t={self.t.tolist()})"


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def __iter__(self):
        return iter(self.violations)

    def __len__(self):
        return len(self.violations)


def _pair_matrix(B: np.ndarray) -> np.ndarray:
    m = B.shape[1]
    iu = np.triu_indices(m, k=1)
    return B[:, iu[0], iu[1]]


def validate(algebra: StepTwoAlgebra) -> ValidationReport:
    """List every violated invariant; an empty report means the algebra is valid.

    Indices in the messages are 1-based.
    """
    B = algebra.B
    m, m2 = algebra.m, algebra.m2
    out = []
    if m < 2:
        out.append(f"m={m} < 2")
    if m2 < 1:
        out.append(f"m2={m2} < 1")
    if m2 > m * (m - 1) // 2:
        out.append(f"m2={m2} > m(m-1)/2={m * (m - 1) // 2}")
    if not np.all(np.isfinite(B)):
        out.append("non-finite structure constants")
        return ValidationReport(out)
    for q in range(m2):
        bad = np.argwhere(B[q].T != -B[q])
        for i, j in bad:
            if i <= j:
                out.append(f"not skew-symmetric at (q={q + 1},i={i + 1},j={j + 1})")
    if m >= 2 and m2 >= 1:
        rank = int(np.linalg.matrix_rank(_pair_matrix(B)))
        if rank < m2:
            out.append(f"rank {rank} < m2={m2}")
    return ValidationReport(out)


def bracket(algebra: StepTwoAlgebra, u, v) -> np.ndarray:
    """Vertical vector ``[u, v]`` with components ``u^T B[q] v``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (algebra.m,) or v.shape != (algebra.m,):
        raise ValueError(f"expected horizontal vectors of length {algebra.m}")
    return np.einsum("i,qij,j->q", u, algebra.B, v)


def dilate(p: GroupPoint, lam: float) -> GroupPoint:
    if not lam > 0:
        raise ValueError(f"dilation factor must be positive, got {lam}")
    return GroupPoint(lam * p.x, lam * lam * p.t)


# -- catalog ---------------------------------------------------------------

def make_heisenberg_aniso(b) -> StepTwoAlgebra:
    """Anisotropic Heisenberg algebra with ``[X_j, Y_j] = b_j T``.

    Basis order is ``X_1, Y_1, ..., X_n, Y_n``.
    """
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if b.size == 0:
        raise ValueError("b must be non-empty")
    if np.any(~(b > 0)):
        raise ValueError("all b_j must be positive")
    n = b.size
    B = np.zeros((1, 2 * n, 2 * n))
    for j, bj in enumerate(b):
        B[0, 2 * j, 2 * j + 1] = bj
        B[0, 2 * j + 1, 2 * j] = -bj
    label = ",".join(f"{x:g}" for x in b)
    return StepTwoAlgebra(B, name=f"heis({label})")


def make_free_step_two(m: int) -> StepTwoAlgebra:
    """Free step-two algebra of rank ``m``; vertical pairs in lexicographic order."""
    if m < 2:
        raise ValueError(f"rank must be >= 2, got {m}")
    pairs = list(combinations(range(m), 2))
    B = np.zeros((len(pairs), m, m))
    for q, (i, j) in enumerate(pairs):
        B[q, i, j] = 1.0
        B[q, j, i] = -1.0
    return StepTwoAlgebra(B, name=f"free({m})")


def make_g_eps(n: int, eps: float) -> StepTwoAlgebra:
    """``[X_j, Y_j] = T`` for all j and ``[X_1, X_2] = eps U``.

    For ``eps == 0`` the second vertical direction is dropped.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    m2 = 1 if eps == 0 else 2
    B = np.zeros((m2, 2 * n, 2 * n))
    for j in range(n):
        B[0, 2 * j, 2 * j + 1] = 1.0
        B[0, 2 * j + 1, 2 * j] = -1.0
    if eps > 0:
        B[1, 0, 2] = eps
        B[1, 2, 0] = -eps
    return StepTwoAlgebra(B, name=f"geps({n},{eps:g})")


def make_g_bar_eps(n: int, eps: float) -> StepTwoAlgebra:
    """``[X_j, Y_j] = T`` for all j and ``[X_1, X_2] = eps T``, one vertical direction.

    The frame ``X_1, Y_1, ..., X_n, Y_n`` carrying these brackets is the
    orthonormal one.  (Rewriting in ``X_2 - eps Y_1`` would give back the
    isotropic Heisenberg brackets, i.e. a different Carnot group.)
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    B = make_g_eps(n, 0.0).B.copy()
    B[0, 0, 2] = eps
    B[0, 2, 0] = -eps
    return StepTwoAlgebra(B, name=f"gbar({n},{eps:g})")


def make_h_half(n: int, scaled: bool = False) -> StepTwoAlgebra:
    """The group with ``b = (1/2, 1, ..., 1)``; ``scaled=True`` gives ``b = (1, 2, ..., 2)``.

    The two are isomorphic as Carnot groups; the scaled form carries the
    explicit fundamental solution used in :mod:`htype.anisotropic`.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    b = np.ones(n)
    b[0] = 0.5
    if scaled:
        b = 2 * b
    alg = make_heisenberg_aniso(b)
    tag = "hhalf2" if scaled else "hhalf"
    return StepTwoAlgebra(alg.B, name=f"{tag}({n})")


# -- names and JSON ----------------------------------------------------------

_NAME_RE = re.compile(r"^\s*([a-z_0-9]+)\s*\(([^)]*)\)\s*$")


def _num(s: str) -> float:
    s = s.strip()
    if "/" in s:
        a, b = s.split("/")
        return float(a) / float(b)
    return float(s)


def from_name(name: str) -> StepTwoAlgebra:
    """Resolve ``heis(b1,...)``, ``free(m)``, ``geps(n,eps)``, ``gbar(n,eps)``,
    ``hhalf(n)`` or ``hhalf2(n)``."""
    mt = _NAME_RE.match(name)
    if not mt:
        raise KeyError(f"unknown group name: {name!r}")
    kind, args = mt.group(1), [a for a in mt.group(2).split(",") if a.strip()]
    try:
        vals = [_num(a) for a in args]
    except ValueError as exc:
        raise KeyError(f"bad arguments in group name {name!r}") from exc
    if kind == "heis":
        return make_heisenberg_aniso(vals)
    if len(vals) == 1 and kind in ("free", "hhalf", "hhalf2"):
        k = int(vals[0])
        if kind == "free":
            return make_free_step_two(k)
        return make_h_half(k, scaled=(kind == "hhalf2"))
    if len(vals) == 2 and kind in ("geps", "gbar"):
        n, eps = int(vals[0]), vals[1]
        return make_g_eps(n, eps) if kind == "geps" else make_g_bar_eps(n, eps)
    raise KeyError(f"unknown group name: {name!r}")


def from_json(obj: dict) -> StepTwoAlgebra:
    try:
        m, m2, B = int(obj["m"]), int(obj["m2"]), obj["B"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"group JSON needs keys m, m2, B: {exc}") from exc
    arr = np.array(B, dtype=float)
    if arr.shape != (m2, m, m):
        raise ValueError(f"B has shape {arr.shape}, expected {(m2, m, m)}")
    return StepTwoAlgebra(arr, name=obj.get("name", ""))


def to_json(algebra: StepTwoAlgebra) -> dict:
    return {"m": algebra.m, "m2": algebra.m2, "B": algebra.B.tolist()}


def load_group(spec: str) -> StepTwoAlgebra:
    """A catalog name or a path to a group JSON file."""
    if _NAME_RE.match(spec) and not Path(spec).exists():
        return from_name(spec)
    with open(spec) as fh:
        return from_json(json.load(fh))
