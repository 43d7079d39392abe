"""Finitely generated convex sets ``co(points) + cone(rays)`` and polyhedra.

Conversions between generator and halfspace form go through a
double-description enumeration of the extreme rays of ``{y : A y <= 0}``.
Redundant generators are removed with the simplex solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.stats import norm as _normal
from scipy.stats import qmc

from .numkernel import LP, solve_lp, solve_standard

MEMBER_TOL = 1e-9
ZERO_TOL = 1e-9
RAY_TOL = 1e-12


def _feas_tol(A: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    scale = np.abs(x).max(axis=-1, keepdims=True) if x.ndim > 1 else np.abs(x).max(initial=0.0)
    return 1e-12 * (1.0 + np.abs(b) + np.linalg.norm(A, axis=1) * scale)


# --------------------------------------------------------------------------
# Polyhedra
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Polyhedron:
    """``{y : A y <= b}``; rows flagged ``strict`` use ``<`` instead."""

    A: np.ndarray
    b: np.ndarray
    strict: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, float))
        b = np.atleast_1d(np.asarray(self.b, float))
        strict = np.asarray(self.strict, bool).reshape(-1)
        if strict.size == 0 and b.size:
            strict = np.zeros(b.size, bool)
        if A.shape[0] != b.size or strict.size != b.size:
            raise ValueError("inconsistent polyhedron arrays")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "strict", strict)

    @classmethod
    def whole(cls, n: int) -> "Polyhedron":
        return cls(np.zeros((0, n)), np.zeros(0), np.zeros(0, bool))

    @classmethod
    def from_constraints(cls, n: int, constraints: Iterable[tuple]) -> "Polyhedron":
        rows, rhs, flags = [], [], []
        for con in constraints:
            normal, offset = con[0], con[1]
            rows.append(np.asarray(normal, float).reshape(n))
            rhs.append(float(offset))
            flags.append(bool(con[2]) if len(con) > 2 else False)
        if not rows:
            return cls.whole(n)
        return cls(np.array(rows), np.array(rhs), np.array(flags))

    @classmethod
    def box(cls, lower, upper) -> "Polyhedron":
        lower = np.asarray(lower, float)
        upper = np.asarray(upper, float)
        n = lower.size
        eye = np.eye(n)
        return cls(np.vstack([eye, -eye]), np.concatenate([upper, -lower]), np.zeros(2 * n, bool))

    @classmethod
    def subspace(cls, basis: np.ndarray) -> "Polyhedron":
        """The linear span of the columns of ``basis`` as a pair of inequalities
        per orthogonal direction."""
        basis = np.atleast_2d(np.asarray(basis, float))
        n = basis.shape[0]
        if basis.size == 0:
            perp = np.eye(n)
        else:
            perp = scipy.linalg.null_space(basis.T).T
        if perp.size == 0:
            return cls.whole(n)
        k = perp.shape[0]
        return cls(np.vstack([perp, -perp]), np.zeros(2 * k), np.zeros(2 * k, bool))

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def n_constraints(self) -> int:
        return self.b.size

    def closure(self) -> "Polyhedron":
        return Polyhedron(self.A, self.b, np.zeros_like(self.strict))

    def intersect(self, other: "Polyhedron") -> "Polyhedron":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return Polyhedron(
            np.vstack([self.A, other.A]),
            np.concatenate([self.b, other.b]),
            np.concatenate([self.strict, other.strict]),
        )

    def translate(self, c: np.ndarray) -> "Polyhedron":
        """``P + c``."""
        return Polyhedron(self.A, self.b + self.A @ np.asarray(c, float), self.strict)

    def feasible(self, X: np.ndarray, closed: bool = False) -> np.ndarray:
        """Row-wise membership for a batch ``X`` of shape ``(k, n)``."""
        X = np.atleast_2d(X)
        if self.n_constraints == 0:
            return np.ones(X.shape[0], bool)
        lhs = X @ self.A.T - self.b
        tol = _feas_tol(self.A, self.b, X)
        ok = lhs <= tol
        if not closed and self.strict.any():
            ok = ok & ~(self.strict & (lhs >= -tol))
        return ok.all(axis=1)

    def contains(self, x: np.ndarray, closed: bool = False) -> bool:
        return bool(self.feasible(np.asarray(x, float)[None, :], closed)[0])

    def active(self, x: np.ndarray, tol: float = MEMBER_TOL) -> np.ndarray:
        return np.abs(self.A @ x - self.b) <= tol * (1.0 + np.abs(self.b))

    def max_slack_point(self) -> tuple[float, Optional[np.ndarray]]:
        """Chebyshev-style LP: largest ``r <= 1`` with ``a.z + r |a| <= b`` for
        every row. Returns ``(r, z)``; ``r = -inf`` when infeasible."""
        n = self.dim
        if self.n_constraints == 0:
            return 1.0, np.zeros(n)
        norms = np.linalg.norm(self.A, axis=1)
        cons = [(np.append(a, na), bi, "<=") for a, na, bi in zip(self.A, norms, self.b)]
        cons.append((np.append(np.zeros(n), 1.0), 1.0, "<="))
        cons.append((np.append(np.zeros(n), -1.0), 1.0, "<="))
        res = solve_lp(LP(np.append(np.zeros(n), 1.0), cons, "maximize"))
        if res.status != "optimal":
            return -math.inf, None
        return float(res.point[-1]), res.point[:n]

    def is_empty(self) -> bool:
        """Emptiness respecting strict rows: nonempty iff the closure is
        feasible and the strict rows can hold with positive slack."""
        if self.n_constraints == 0:
            return False
        n = self.dim
        cons = []
        for a, bi, s in zip(self.A, self.b, self.strict):
            cons.append((np.append(a, 1.0 if s else 0.0), bi, "<="))
        cons.append((np.append(np.zeros(n), 1.0), 1.0, "<="))
        res = solve_lp(LP(np.append(np.zeros(n), 1.0), cons, "maximize"))
        if res.status != "optimal":
            return True
        if self.strict.any():
            return res.point[-1] <= 1e-12
        return False

    def interior_margin(self, x: np.ndarray) -> float:
        """Smallest normalized slack of ``x``; ``inf`` without constraints."""
        if self.n_constraints == 0:
            return math.inf
        norms = np.linalg.norm(self.A, axis=1)
        norms[norms == 0] = 1.0
        return float(((self.b - self.A @ x) / norms).min())

    def implicit_equalities(self) -> np.ndarray:
        """Rows that hold with equality on all of the closure."""
        n = self.dim
        out = np.zeros(self.n_constraints, bool)
        cons = [(a, bi, "<=") for a, bi in zip(self.A, self.b)]
        for j, (a, bi) in enumerate(zip(self.A, self.b)):
            res = solve_lp(LP(a, cons, "minimize"))
            if res.status == "unbounded":
                continue
            if res.status != "optimal":
                return np.ones(self.n_constraints, bool)
            slack = bi - res.value  # largest slack of row j
            out[j] = slack <= 1e-10 * (1.0 + abs(bi) + np.linalg.norm(a))
        return out

    def relative_interior_radius(self) -> tuple[float, Optional[np.ndarray]]:
        """Chebyshev radius inside the affine hull: largest ``r <= 1`` with a
        ball of radius ``r`` in ``aff P`` contained in ``cl P``. ``-inf`` for an
        empty set, ``0`` when strict rows leave nothing."""
        n = self.dim
        if self.n_constraints == 0:
            return 1.0, np.zeros(n)
        eq = self.implicit_equalities()
        if eq.all() and self.is_empty():
            return -math.inf, None
        if (eq & self.strict).any():
            return 0.0, None
        norms = np.linalg.norm(self.A, axis=1)
        cons = []
        for a, na, bi, e in zip(self.A, norms, self.b, eq):
            cons.append((np.append(a, 0.0 if e else na), bi, "<="))
        cons.append((np.append(np.zeros(n), 1.0), 1.0, "<="))
        res = solve_lp(LP(np.append(np.zeros(n), 1.0), cons, "maximize"))
        if res.status != "optimal":
            return -math.inf, None
        return float(res.point[-1]), res.point[:n]

    def dedup(self) -> "Polyhedron":
        if self.n_constraints == 0:
            return self
        norms = np.linalg.norm(self.A, axis=1)
        keep = norms > 0
        trivially_false = (~keep) & ((self.b < 0) | (self.strict & (self.b <= 0)))
        if trivially_false.any():
            k = int(np.flatnonzero(trivially_false)[0])
            return Polyhedron(self.A[k : k + 1], self.b[k : k + 1], self.strict[k : k + 1])
        A = self.A[keep] / norms[keep, None]
        b = self.b[keep] / norms[keep]
        s = self.strict[keep]
        key = np.round(np.hstack([A, b[:, None], s[:, None]]), 12)
        _, idx = np.unique(key, axis=0, return_index=True)
        idx = np.sort(idx)
        return Polyhedron(A[idx], b[idx], s[idx])


# --------------------------------------------------------------------------
# Direction nets
# --------------------------------------------------------------------------


@lru_cache(maxsize=32)
def _net(n: int, size: int) -> np.ndarray:
    if n == 1:
        return np.array([[-1.0], [1.0]])
    if n == 2:
        ang = 2.0 * np.pi * (np.arange(size) + 0.5) / size
        U = np.column_stack([np.cos(ang), np.sin(ang)])
    elif n == 3:
        i = np.arange(size) + 0.5
        z = 1.0 - 2.0 * i / size
        r = np.sqrt(1.0 - z * z)
        phi = np.pi * (1.0 + 5.0**0.5) * i
        U = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    else:
        pts = qmc.Halton(d=n, scramble=False).random(size + 1)[1:]
        U = _normal.ppf(np.clip(pts, 1e-12, 1 - 1e-12))
        U /= np.linalg.norm(U, axis=1, keepdims=True)
    eye = np.eye(n)
    U = np.vstack([U, eye, -eye])
    U.setflags(write=False)
    return U


def direction_net(n: int, size: Optional[int] = None) -> np.ndarray:
    """Deterministic unit directions: ``{-1, +1}`` for ``n = 1``; otherwise a
    spherical Fibonacci (``n <= 3``) or Halton (``n >= 4``) net of ``32 n^2``
    points plus the signed coordinate axes."""
    if size is None:
        size = 32 * n * n
    return _net(n, size)


# --------------------------------------------------------------------------
# Double description
# --------------------------------------------------------------------------


def cone_generators(A: np.ndarray, tol: float = ZERO_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Extreme rays and a lineality basis of ``{y : A y <= 0}``.

    Both are returned as row arrays of unit vectors.
    """
    A = np.atleast_2d(np.asarray(A, float))
    d = A.shape[1]
    norms = np.linalg.norm(A, axis=1)
    A = A[norms > 1e-14] / norms[norms > 1e-14, None]
    if A.shape[0] == 0:
        return np.zeros((0, d)), np.eye(d)
    _, sv, Vt = np.linalg.svd(A)
    rank = int((sv > 1e-10 * sv[0]).sum())
    lineality = Vt[rank:]
    if rank == 0:
        return np.zeros((0, d)), lineality
    B = Vt[:rank].T  # d x rank, orthonormal basis of the row space
    Ar = A @ B
    Ar /= np.linalg.norm(Ar, axis=1, keepdims=True)
    m = Ar.shape[0]

    _, _, piv = scipy.linalg.qr(Ar.T, pivoting=True)
    init = list(piv[:rank])
    S = Ar[init]
    R = -np.linalg.inv(S).T  # rows are rays
    R /= np.linalg.norm(R, axis=1, keepdims=True)
    Z = np.zeros((rank, m), bool)
    for k in range(rank):
        for i, row in enumerate(init):
            if i != k:
                Z[k, row] = True
    processed = np.zeros(m, bool)
    processed[init] = True

    for i in range(m):
        if processed[i]:
            continue
        a = Ar[i]
        vals = R @ a
        pos = vals > tol
        neg = vals < -tol
        zero = ~(pos | neg)
        Z[zero, i] = True
        new_R, new_Z = [], []
        if pos.any() and neg.any():
            P = np.flatnonzero(pos)
            N = np.flatnonzero(neg)
            for p in P:
                for q in N:
                    common = Z[p] & Z[q]
                    if common.sum() < rank - 2:
                        continue
                    # combinatorial adjacency: no third ray shares the zero set
                    sup = Z[:, common].all(axis=1)
                    if sup.sum() > 2:
                        continue
                    r = vals[p] * R[q] - vals[q] * R[p]
                    nr = np.linalg.norm(r)
                    if nr < 1e-14:
                        continue
                    z = common.copy()
                    z[i] = True
                    new_R.append(r / nr)
                    new_Z.append(z)
        keep = ~pos
        R = R[keep]
        Z = Z[keep]
        if new_R:
            R = np.vstack([R, np.array(new_R)])
            Z = np.vstack([Z, np.array(new_Z)])
        processed[i] = True
        if R.shape[0] == 0:
            break

    rays = R @ B.T if R.shape[0] else np.zeros((0, d))
    if rays.shape[0]:
        rays /= np.linalg.norm(rays, axis=1, keepdims=True)
    return rays, lineality


def h_to_v(W: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Generators ``(points, rays)`` of ``{g : W g <= h}``; lines appear as
    opposite ray pairs. ``points`` is empty iff the polyhedron is."""
    W = np.atleast_2d(np.asarray(W, float))
    h = np.asarray(h, float).ravel()
    n = W.shape[1]
    C = np.vstack([np.hstack([W, -h[:, None]]), np.append(np.zeros(n), -1.0)[None, :]])
    rays, lin = cone_generators(C)
    pts, rr = [], []
    for y in rays:
        lam = y[-1]
        if lam > 1e-12:
            pts.append(y[:n] / lam)
        else:
            rr.append(y[:n])
    for y in lin:
        rr.append(y[:n])
        rr.append(-y[:n])
    points = np.array(pts) if pts else np.zeros((0, n))
    rr = [r / np.linalg.norm(r) for r in rr if np.linalg.norm(r) > 1e-12]
    R = np.array(rr) if rr else np.zeros((0, n))
    if points.shape[0] == 0:
        return np.zeros((0, n)), np.zeros((0, n))
    return points, R


def v_to_h(points: np.ndarray, rays: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Valid inequalities ``W g <= h`` describing ``co(points) + cone(rays)``
    exactly; equalities come as opposite pairs. Rows of ``W`` are unit."""
    points = np.atleast_2d(points)
    n = points.shape[1]
    rays = np.asarray(rays, float).reshape(-1, n)
    C = np.vstack(
        [
            np.hstack([points, -np.ones((points.shape[0], 1))]),
            np.hstack([rays, np.zeros((rays.shape[0], 1))]),
        ]
    )
    ext, lin = cone_generators(C)
    rows = list(ext) + [v for l in lin for v in (l, -l)]
    W, h = [], []
    for y in rows:
        w = y[:n]
        nw = np.linalg.norm(w)
        if nw < 1e-10:
            continue
        W.append(w / nw)
        h.append(y[n] / nw)
    if not W:
        return np.zeros((0, n)), np.zeros(0)
    return np.array(W), np.array(h)


# --------------------------------------------------------------------------
# Finitely generated sets
# --------------------------------------------------------------------------


def _lex_sort(X: np.ndarray) -> np.ndarray:
    if X.shape[0] <= 1:
        return X
    key = np.round(X, 10)
    order = np.lexsort(key.T[::-1])
    return X[order]


def _unique_rows(X: np.ndarray, decimals: int = 12) -> np.ndarray:
    if X.shape[0] <= 1:
        return X
    _, idx = np.unique(np.round(X, decimals), axis=0, return_index=True)
    return X[np.sort(idx)]


def _residual(points: np.ndarray, rays: np.ndarray, target: np.ndarray, convex: bool) -> float:
    """l1 distance from ``target`` to ``co(points) + cone(rays)`` (or to
    ``cone(rays)`` when ``convex`` is false and ``points`` is empty)."""
    n = target.size
    k = points.shape[0] if convex else 0
    r = rays.shape[0]
    nv = k + r + 2 * n
    A = np.zeros((n + (1 if convex else 0), nv))
    if k:
        A[:n, :k] = points.T
    if r:
        A[:n, k : k + r] = rays.T
    A[:n, k + r : k + r + n] = np.eye(n)
    A[:n, k + r + n :] = -np.eye(n)
    b = np.zeros(A.shape[0])
    b[:n] = target
    if convex:
        A[n, :k] = 1.0
        b[n] = 1.0
    c = np.zeros(nv)
    c[k + r :] = 1.0
    res = solve_standard(c, A, b)
    if res.status != "optimal":
        return math.inf
    return float(res.value)


@dataclass(frozen=True)
class GenSet:
    """``co(points) + cone(rays)``; no points means the empty set."""

    points: np.ndarray
    rays: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, float))
        dim = pts.shape[1]
        rays = np.asarray(self.rays, float).reshape(-1, dim)
        if pts.shape[0] == 0:
            rays = np.zeros((0, dim))
        pts.setflags(write=False)
        rays.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "rays", rays)

    # constructors
    @classmethod
    def empty_set(cls, n: int) -> "GenSet":
        return cls(np.zeros((0, n)), np.zeros((0, n)))

    @classmethod
    def point(cls, p) -> "GenSet":
        p = np.atleast_1d(np.asarray(p, float))
        return cls(p[None, :], np.zeros((0, p.size)))

    @classmethod
    def origin(cls, n: int) -> "GenSet":
        return cls.point(np.zeros(n))

    @classmethod
    def cone(cls, rays, n: int) -> "GenSet":
        return cls(np.zeros((1, n)), np.asarray(rays, float).reshape(-1, n))

    @classmethod
    def build(cls, points, rays=None, canonical: bool = True) -> "GenSet":
        points = np.atleast_2d(np.asarray(points, float))
        n = points.shape[1]
        rays = np.zeros((0, n)) if rays is None else np.asarray(rays, float).reshape(-1, n)
        s = cls(points, rays)
        return canonical_form(s) if canonical else s

    # queries
    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def empty(self) -> bool:
        return self.points.shape[0] == 0

    @property
    def bounded(self) -> bool:
        return self.rays.shape[0] == 0

    def supports(self, U: np.ndarray) -> np.ndarray:
        U = np.atleast_2d(U)
        if self.empty:
            return np.full(U.shape[0], -math.inf)
        val = (U @ self.points.T).max(axis=1)
        if self.rays.shape[0]:
            unb = (U @ self.rays.T).max(axis=1) > RAY_TOL
            val = np.where(unb, math.inf, val)
        return val

    def __str__(self) -> str:
        if self.empty:
            return "∅"
        if self.bounded and self.points.shape[0] == 1 and not self.points.any():
            return "{θ}"
        fmt = lambda v: "(" + ", ".join(f"{c:.6g}" for c in v) + ")"
        pts = ", ".join(fmt(p) for p in self.points)
        if self.bounded:
            return f"co{{{pts}}}"
        rs = ", ".join(fmt(r) for r in self.rays)
        return f"co{{{pts}}} + cone{{{rs}}}"

    def to_json(self) -> dict:
        return {
            "empty": self.empty,
            "points": self.points.tolist(),
            "rays": self.rays.tolist(),
        }

    @classmethod
    def from_json(cls, d: dict, n: int) -> "GenSet":
        if d.get("empty") or not d.get("points"):
            return cls.empty_set(n)
        return cls(np.array(d["points"], float), np.array(d.get("rays") or [], float))


def canonical_form(A: GenSet, tol: float = MEMBER_TOL) -> GenSet:
    """Drop redundant generators (checked by LP) and sort the rest."""
    if A.empty:
        return A
    n = A.dim
    R = A.rays
    if R.shape[0]:
        norms = np.linalg.norm(R, axis=1)
        R = R[norms > 1e-12]
        norms = norms[norms > 1e-12]
        renorm = np.abs(norms - 1.0) > 4e-16
        R = R.copy()
        R[renorm] /= norms[renorm, None]
        R = _lex_sort(_unique_rows(R))
        keep = np.ones(R.shape[0], bool)
        for i in range(R.shape[0]):
            others = R[keep & (np.arange(R.shape[0]) != i)]
            if others.shape[0] and _residual(np.zeros((0, n)), others, R[i], False) <= tol:
                keep[i] = False
        R = R[keep]
    P = A.points.copy()
    P[np.abs(P) < 1e-13] = 0.0
    if R.shape[0]:
        R[np.abs(R) < 1e-14] = 0.0
    P = _lex_sort(_unique_rows(P))
    if P.shape[0] > 1:
        # points that uniquely maximize a net direction are extreme already
        U = direction_net(n, 8 * n) if n > 1 else direction_net(1)
        extreme = np.zeros(P.shape[0], bool)
        if R.shape[0]:
            U = U[(U @ R.T).max(axis=1) <= 0] if U.shape[0] else U
        if U.shape[0]:
            S = P @ U.T
            mx = S.max(axis=0)
            for j in range(U.shape[0]):
                hit = np.flatnonzero(S[:, j] >= mx[j] - 1e-12 * (1 + abs(mx[j])))
                if hit.size == 1:
                    extreme[hit[0]] = True
        keep = np.ones(P.shape[0], bool)
        for i in range(P.shape[0]):
            if extreme[i]:
                continue
            others = P[keep & (np.arange(P.shape[0]) != i)]
            if not others.shape[0]:
                continue
            if _residual(others, R, P[i], True) <= tol * max(1.0, np.abs(P[i]).max()):
                keep[i] = False
        P = P[keep]
    return GenSet(P, R)


def hull_union(sets: Sequence[GenSet], n: Optional[int] = None) -> GenSet:
    """Closed convex hull of a union of finitely generated sets."""
    live = [s for s in sets if not s.empty]
    if not live:
        if n is None:
            n = sets[0].dim if sets else 1
        return GenSet.empty_set(n)
    pts = np.vstack([s.points for s in live])
    rays = np.vstack([s.rays for s in live])
    return canonical_form(GenSet(pts, rays))


def minkowski_sum(A: GenSet, B: GenSet) -> GenSet:
    if A.dim != B.dim:
        raise ValueError("dimension mismatch")
    if A.empty or B.empty:
        return GenSet.empty_set(A.dim)
    pts = (A.points[:, None, :] + B.points[None, :, :]).reshape(-1, A.dim)
    return canonical_form(GenSet(pts, np.vstack([A.rays, B.rays])))


def support(A: GenSet, u) -> float:
    return float(A.supports(np.atleast_1d(np.asarray(u, float))[None, :])[0])


def normal_cone(P: Polyhedron, x, tol: float = MEMBER_TOL) -> GenSet:
    """Normal cone of the closure of ``P`` at ``x``; empty off the closure."""
    x = np.asarray(x, float)
    n = P.dim
    if P.n_constraints == 0:
        return GenSet.origin(n)
    slack = P.A @ x - P.b
    if np.any(slack > tol * (1.0 + np.abs(P.b))):
        return GenSet.empty_set(n)
    act = P.active(x, tol)
    if not act.any():
        return GenSet.origin(n)
    return canonical_form(GenSet.cone(P.A[act], n))


def containment_slack(A: GenSet, B: GenSet) -> float:
    """Largest l1 residual of a generator of ``B`` against ``A`` (points
    against ``A``, rays against the recession cone of ``A``)."""
    if A.dim != B.dim:
        raise ValueError("dimension mismatch")
    if B.empty:
        return 0.0
    if A.empty:
        return math.inf
    worst = 0.0
    for p in B.points:
        worst = max(worst, _residual(A.points, A.rays, p, True) / max(1.0, np.abs(p).max()))
    for r in B.rays:
        if A.rays.shape[0] == 0:
            return math.inf
        worst = max(worst, _residual(np.zeros((0, A.dim)), A.rays, r, False))
    return worst


def contains(A: GenSet, B: GenSet, tol: float = 1e-7) -> bool:
    return containment_slack(A, B) <= tol


def recession_equal(A: GenSet, B: GenSet, tol: float = 1e-7) -> bool:
    ca = GenSet.cone(A.rays, A.dim)
    cb = GenSet.cone(B.rays, B.dim)
    return contains(ca, cb, tol) and contains(cb, ca, tol)


def hausdorff_gap(A: GenSet, B: GenSet, net: Optional[np.ndarray] = None) -> float:
    """Largest support discrepancy over a direction net, restricted to
    directions where both supports are finite. Mismatched recession cones
    give ``inf``."""
    if A.dim != B.dim:
        raise ValueError("dimension mismatch")
    if A.empty and B.empty:
        return 0.0
    if A.empty or B.empty:
        return math.inf
    if not recession_equal(A, B):
        return math.inf
    U = direction_net(A.dim) if net is None else net
    sa, sb = A.supports(U), B.supports(U)
    fin = np.isfinite(sa) & np.isfinite(sb)
    if not fin.any():
        return 0.0
    return float(np.abs(sa[fin] - sb[fin]).max())


def halfspaces(A: GenSet) -> tuple[np.ndarray, np.ndarray]:
    return v_to_h(A.points, A.rays)


def intersect_sets(sets: Sequence[GenSet], slack: float = 0.0) -> GenSet:
    """Intersection; with ``slack > 0`` sets that miss each other only by
    rounding (offsets within ``slack (1 + |h|)``) meet in the relaxed system."""
    if not sets:
        raise ValueError("intersect_sets needs at least one set")
    n = sets[0].dim
    if any(s.empty for s in sets):
        return GenSet.empty_set(n)
    if len(sets) == 1:
        return canonical_form(sets[0])
    Ws, hs = [], []
    for s in sets:
        W, h = halfspaces(s)
        Ws.append(W)
        hs.append(h)
    W = np.vstack(Ws)
    h = np.concatenate(hs)
    if W.shape[0] == 0:
        return GenSet.build(np.zeros((1, n)), np.vstack([np.eye(n), -np.eye(n)]))
    pts, rays = h_to_v(W, h)
    if pts.shape[0] == 0 and slack > 0:
        pts, rays = h_to_v(W, h + slack * (1.0 + np.abs(h)))
    if pts.shape[0] == 0:
        return GenSet.empty_set(n)
    return canonical_form(GenSet(pts, rays))


def polyhedron_generators(P: Polyhedron) -> GenSet:
    """Generators of the closure of ``P``."""
    if P.n_constraints == 0:
        return GenSet.build(np.zeros((1, P.dim)), np.vstack([np.eye(P.dim), -np.eye(P.dim)]))
    pts, rays = h_to_v(P.A, P.b)
    if pts.shape[0] == 0:
        return GenSet.empty_set(P.dim)
    return canonical_form(GenSet(pts, rays))
