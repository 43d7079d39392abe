"""Convex functions on R^n as immutable expression trees.

Values are extended reals carried as Python floats; ``+inf`` marks points
outside the domain and ``(+inf) + (-inf)`` is taken to be ``+inf``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import recon
from .numkernel import EvaluationError, minimize_scalar, minimize_scalar_batch, quotient_noise
from .setgeom import (
    GenSet,
    Polyhedron,
    canonical_form,
    direction_net,
    hull_union,
    minkowski_sum,
    normal_cone,
)

ACTIVE_TOL = 1e-9
CONT_MARGIN = 1e-9


def ext_add(a: float, b: float) -> float:
    """Extended-real addition with ``(+inf) + (-inf) = +inf``."""
    if math.isinf(a) and math.isinf(b) and a != b:
        return math.inf
    return a + b


class ConvexFunc:
    """Base node. Subclasses implement :meth:`values` on a batch of points."""

    dim: int

    def values(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x) -> float:
        return eval_at(self, x)

    def children(self) -> Sequence["ConvexFunc"]:
        return ()


@dataclass(frozen=True, eq=False)
class Affine(ConvexFunc):
    a: np.ndarray
    b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", np.atleast_1d(np.asarray(self.a, float)))
        object.__setattr__(self, "b", float(self.b))

    @property
    def dim(self) -> int:
        return self.a.size

    def values(self, X):
        return X @ self.a + self.b


@dataclass(frozen=True, eq=False)
class Quad(ConvexFunc):
    """``0.5 x'Qx + a'x + b`` with ``Q`` symmetric positive semidefinite."""

    Q: np.ndarray
    a: np.ndarray
    b: float = 0.0

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, float))
        if Q.shape[0] != Q.shape[1] or not np.allclose(Q, Q.T, atol=1e-12):
            raise ValueError("Quad matrix must be square and symmetric")
        ev = np.linalg.eigvalsh(Q)
        if ev.min() < -1e-10 * max(1.0, abs(ev).max()):
            raise ValueError(f"Quad matrix is not PSD (min eigenvalue {ev.min():.3g})")
        a = np.atleast_1d(np.asarray(self.a, float))
        if a.size != Q.shape[0]:
            raise ValueError("Quad linear term has wrong dimension")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))

    @property
    def dim(self) -> int:
        return self.a.size

    def values(self, X):
        return 0.5 * np.einsum("ki,ij,kj->k", X, self.Q, X) + X @ self.a + self.b


@dataclass(frozen=True, eq=False)
class Norm(ConvexFunc):
    kind: object  # 1, 2 or "inf"
    scale: float
    n: int

    def __post_init__(self):
        kind = self.kind
        if kind in (math.inf, "inf", np.inf):
            kind = "inf"
        elif kind in (1, 2):
            kind = int(kind)
        else:
            raise ValueError(f"unsupported norm kind {self.kind!r}")
        if self.scale < 0:
            raise ValueError("norm scale must be nonnegative")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "scale", float(self.scale))

    @property
    def dim(self) -> int:
        return self.n

    @property
    def order(self):
        return np.inf if self.kind == "inf" else self.kind

    def values(self, X):
        return self.scale * np.linalg.norm(X, ord=self.order, axis=1)


@dataclass(frozen=True, eq=False)
class Indicator(ConvexFunc):
    P: Polyhedron

    @property
    def dim(self) -> int:
        return self.P.dim

    def values(self, X):
        return np.where(self.P.feasible(X), 0.0, math.inf)


@dataclass(frozen=True, eq=False)
class MaxFinite(ConvexFunc):
    items: tuple

    def __post_init__(self):
        items = tuple(self.items)
        if not items:
            raise ValueError("MaxFinite needs at least one child")
        if len({c.dim for c in items}) != 1:
            raise ValueError("children dimensions disagree")
        object.__setattr__(self, "items", items)

    @property
    def dim(self) -> int:
        return self.items[0].dim

    def children(self):
        return self.items

    def values(self, X):
        return np.max([c.values(X) for c in self.items], axis=0)


@dataclass(frozen=True, eq=False)
class Sum(ConvexFunc):
    items: tuple

    def __post_init__(self):
        items = tuple(self.items)
        if not items:
            raise ValueError("Sum needs at least one child")
        if len({c.dim for c in items}) != 1:
            raise ValueError("children dimensions disagree")
        object.__setattr__(self, "items", items)

    @property
    def dim(self) -> int:
        return self.items[0].dim

    def children(self):
        return self.items

    def values(self, X):
        # children never take -inf, so float addition already follows ext_add
        return np.sum([c.values(X) for c in self.items], axis=0)


@dataclass(frozen=True, eq=False)
class Shifted(ConvexFunc):
    """``x -> child(x - translate)``."""

    child: ConvexFunc
    translate: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.translate, float))
        if t.size != self.child.dim:
            raise ValueError("translate has wrong dimension")
        object.__setattr__(self, "translate", t)

    @property
    def dim(self) -> int:
        return self.child.dim

    def children(self):
        return (self.child,)

    def values(self, X):
        return self.child.values(X - self.translate)


@dataclass(frozen=True, eq=False)
class Truncated(ConvexFunc):
    """``max{child, floor}``."""

    child: ConvexFunc
    floor: float

    def __post_init__(self):
        object.__setattr__(self, "floor", float(self.floor))

    @property
    def dim(self) -> int:
        return self.child.dim

    def children(self):
        return (self.child,)

    def values(self, X):
        return np.maximum(self.child.values(X), self.floor)


def max_of(*fs: ConvexFunc) -> MaxFinite:
    return MaxFinite(tuple(fs))


def sum_of(*fs: ConvexFunc) -> Sum:
    return Sum(tuple(fs))


# --------------------------------------------------------------------------
# structural helpers
# --------------------------------------------------------------------------


def _check_point(phi: ConvexFunc, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, float))
    if x.shape != (phi.dim,):
        raise ValueError(f"point has dimension {x.size}, function has {phi.dim}")
    return x


def eval_at(phi: ConvexFunc, x) -> float:
    x = _check_point(phi, x)
    return float(phi.values(x[None, :])[0])


def eval_many(phi: ConvexFunc, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, float))
    if X.shape[1] != phi.dim:
        raise ValueError("dimension mismatch")
    return phi.values(X)


def walk(phi: ConvexFunc):
    yield phi
    for c in phi.children():
        yield from walk(c)


def dom_polyhedron(phi: ConvexFunc) -> Polyhedron:
    """``dom phi`` as a polyhedron (strict rows kept)."""
    n = phi.dim
    if isinstance(phi, Indicator):
        return phi.P
    if isinstance(phi, Shifted):
        return dom_polyhedron(phi.child).translate(phi.translate)
    P = Polyhedron.whole(n)
    for c in phi.children():
        P = P.intersect(dom_polyhedron(c))
    return P


def has_strict(phi: ConvexFunc) -> bool:
    return any(isinstance(node, Indicator) and node.P.strict.any() for node in walk(phi))


def closed(phi: ConvexFunc) -> ConvexFunc:
    """Same tree with every strict constraint relaxed."""
    if isinstance(phi, Indicator):
        return Indicator(phi.P.closure()) if phi.P.strict.any() else phi
    if isinstance(phi, MaxFinite):
        return MaxFinite(tuple(closed(c) for c in phi.items))
    if isinstance(phi, Sum):
        return Sum(tuple(closed(c) for c in phi.items))
    if isinstance(phi, Shifted):
        return Shifted(closed(phi.child), phi.translate)
    if isinstance(phi, Truncated):
        return Truncated(closed(phi.child), phi.floor)
    return phi


def scaled(phi: ConvexFunc, c: float) -> ConvexFunc:
    """``c * phi`` for ``c > 0``."""
    if c <= 0:
        raise ValueError("scale must be positive")
    if isinstance(phi, Affine):
        return Affine(c * phi.a, c * phi.b)
    if isinstance(phi, Quad):
        return Quad(c * phi.Q, c * phi.a, c * phi.b)
    if isinstance(phi, Norm):
        return Norm(phi.kind, c * phi.scale, phi.n)
    if isinstance(phi, Indicator):
        return phi
    if isinstance(phi, MaxFinite):
        return MaxFinite(tuple(scaled(ch, c) for ch in phi.items))
    if isinstance(phi, Sum):
        return Sum(tuple(scaled(ch, c) for ch in phi.items))
    if isinstance(phi, Shifted):
        return Shifted(scaled(phi.child, c), phi.translate)
    if isinstance(phi, Truncated):
        return Truncated(scaled(phi.child, c), c * phi.floor)
    raise TypeError(type(phi).__name__)


def is_polyhedral(phi: ConvexFunc) -> bool:
    for node in walk(phi):
        if isinstance(node, Quad) and np.any(node.Q):
            return False
        if isinstance(node, Norm) and node.kind == 2 and node.scale > 0 and node.n > 1:
            return False
    return True


def continuous_at(phi: ConvexFunc, x) -> bool:
    """True when ``phi`` has no domain constraint near ``x``."""
    x = np.asarray(x, float)
    P = dom_polyhedron(phi)
    return P.n_constraints == 0 or P.interior_margin(x) > CONT_MARGIN


# --------------------------------------------------------------------------
# subdifferentials
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SubdiffResult:
    set: GenSet
    exact: bool = True

    @property
    def empty(self) -> bool:
        return self.set.empty


class _Fallback(Exception):
    pass


def _norm_subdiff(node: Norm, x: np.ndarray) -> tuple[GenSet, bool]:
    n, c = node.n, node.scale
    if c == 0:
        return GenSet.origin(n), True
    if node.kind == 2:
        nx = np.linalg.norm(x)
        if nx > 0:
            return GenSet.point(c * x / nx), True
        if n == 1:
            return GenSet.build([[-c], [c]]), True
        # unit ball: polytope with the same support on the direction net
        return GenSet(c * direction_net(n), np.zeros((0, n))), False
    if node.kind == 1:
        zero = np.abs(x) <= 1e-15
        base = np.sign(x)
        idx = np.flatnonzero(zero)
        pts = []
        for signs in itertools.product((-1.0, 1.0), repeat=idx.size):
            v = base.copy()
            v[idx] = signs
            pts.append(c * v)
        return GenSet.build(np.array(pts), canonical=False), True
    # infinity norm: dual ball is the l1 ball
    ax = np.abs(x)
    m = ax.max()
    if m == 0:
        eye = np.eye(n)
        return GenSet.build(c * np.vstack([eye, -eye]), canonical=False), True
    idx = np.flatnonzero(ax >= m * (1 - 1e-15))
    pts = np.zeros((idx.size, n))
    pts[np.arange(idx.size), idx] = c * np.sign(x[idx])
    return GenSet.build(pts, canonical=False), True


def _subdiff(node: ConvexFunc, x: np.ndarray) -> tuple[GenSet, bool]:
    n = node.dim
    if not math.isfinite(eval_at(node, x)):
        return GenSet.empty_set(n), True
    if isinstance(node, Affine):
        return GenSet.point(node.a), True
    if isinstance(node, Quad):
        return GenSet.point(node.Q @ x + node.a), True
    if isinstance(node, Norm):
        return _norm_subdiff(node, x)
    if isinstance(node, Indicator):
        # a non-closed domain is handled through its closure
        return normal_cone(node.P.closure(), x), True
    if isinstance(node, Shifted):
        return _subdiff(node.child, x - node.translate)
    if isinstance(node, Truncated):
        v = eval_at(node.child, x)
        tol = ACTIVE_TOL * (1.0 + abs(node.floor))
        if v > node.floor + tol:
            return _subdiff(node.child, x)
        if v < node.floor - tol:
            return GenSet.origin(n), True
        s, ex = _subdiff(node.child, x)
        return hull_union([s, GenSet.origin(n)]), ex
    if isinstance(node, MaxFinite):
        if not all(continuous_at(c, x) for c in node.items):
            raise _Fallback
        vals = np.array([eval_at(c, x) for c in node.items])
        top = vals.max()
        act = [c for c, v in zip(node.items, vals) if v >= top - ACTIVE_TOL * (1.0 + abs(top))]
        parts = [_subdiff(c, x) for c in act]
        return hull_union([p[0] for p in parts]), all(p[1] for p in parts)
    if isinstance(node, Sum):
        rough = [c for c in node.items if not continuous_at(c, x)]
        if len(rough) > 1 and not all(is_polyhedral(c) for c in rough):
            raise _Fallback
        acc, exact = None, True
        for c in node.items:
            s, ex = _subdiff(c, x)
            exact &= ex
            acc = s if acc is None else minkowski_sum(acc, s)
            if acc.empty:
                break
        return acc, exact
    raise TypeError(type(node).__name__)


def subdiff(phi: ConvexFunc, x) -> SubdiffResult:
    """Fenchel subdifferential at ``x``.

    Composite nodes use the max and sum rules when a qualification holds and
    fall back to support-function reconstruction otherwise.
    """
    x = _check_point(phi, x)
    try:
        s, exact = _subdiff(phi, x)
        return SubdiffResult(canonical_form(s), exact)
    except _Fallback:
        form = polyhedral_form(phi)
        if form is not None:
            return SubdiffResult(_polyhedral_eps_set(*form, x, 0.0), True)
        res = recon.reconstruct_subdiff(lambda X: phi.values(X), x, phi.dim)
        return SubdiffResult(res.set, False)


# --------------------------------------------------------------------------
# directional derivatives and epsilon-subdifferentials
# --------------------------------------------------------------------------


def directional_derivatives(phi: ConvexFunc, x, U: np.ndarray) -> np.ndarray:
    """``phi'(x; u)`` for each row of ``U``: Richardson limits of difference
    quotients on the steps ``2^-1 .. 2^-40``."""
    x = _check_point(phi, x)
    return recon.quotient_limits(lambda X: phi.values(X), x, np.atleast_2d(U))


def eps_subdiff_support(phi: ConvexFunc, x, eps: float, u) -> float:
    """Support function of the eps-subdifferential in direction ``u``:
    ``inf_{s>0} (phi(x+su) - phi(x) + eps) / s``."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    x = _check_point(phi, x)
    u = np.atleast_1d(np.asarray(u, float))
    f0 = eval_at(phi, x)
    if not math.isfinite(f0):
        return -math.inf
    if eps == 0.0:
        return float(directional_derivatives(phi, x, u[None, :])[0])

    def g(s: float) -> float:
        # the rounding bound keeps the value an upper bound when eps is tiny
        v = eval_at(phi, x + s * u)
        return (v - f0 + eps) / s + float(quotient_noise(f0, np.array(v), np.array(s)))

    try:
        return float(minimize_scalar(g, (0.0, math.inf)).value)
    except EvaluationError:
        return math.inf


def eps_support_many(phi: ConvexFunc, x, eps: float, U: np.ndarray) -> np.ndarray:
    """:func:`eps_subdiff_support` for every row of ``U`` in one vectorized
    sweep."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    x = _check_point(phi, x)
    U = np.atleast_2d(np.asarray(U, float))
    f0 = eval_at(phi, x)
    if not math.isfinite(f0):
        return np.full(U.shape[0], -math.inf)
    if eps == 0.0:
        return directional_derivatives(phi, x, U)
    n = phi.dim

    def G(S):
        X = x[None, None, :] + S[:, :, None] * U[:, None, :]
        F = phi.values(X.reshape(-1, n)).reshape(S.shape)
        return (F - f0 + eps) / S + quotient_noise(f0, F, S)

    return minimize_scalar_batch(G, U.shape[0])


MAX_PIECES = 4096


def polyhedral_form(phi: ConvexFunc):
    """``(G, c, P)`` with ``phi(y) = max_i (G_i . y + c_i) + I_P(y)``, or
    ``None`` when ``phi`` is not polyhedral."""
    n = phi.dim
    whole = Polyhedron.whole(n)
    if isinstance(phi, Affine):
        return phi.a[None, :], np.array([phi.b]), whole
    if isinstance(phi, Quad):
        if np.any(phi.Q):
            return None
        return phi.a[None, :], np.array([phi.b]), whole
    if isinstance(phi, Norm):
        if phi.scale == 0:
            return np.zeros((1, n)), np.zeros(1), whole
        if phi.kind == 1:
            G = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
        elif phi.kind == "inf" or n == 1:
            G = np.vstack([np.eye(n), -np.eye(n)])
        else:
            return None
        return phi.scale * G, np.zeros(G.shape[0]), whole
    if isinstance(phi, Indicator):
        return np.zeros((1, n)), np.zeros(1), phi.P
    if isinstance(phi, Shifted):
        inner = polyhedral_form(phi.child)
        if inner is None:
            return None
        G, c, P = inner
        return G, c - G @ phi.translate, P.translate(phi.translate)
    if isinstance(phi, Truncated):
        inner = polyhedral_form(phi.child)
        if inner is None:
            return None
        G, c, P = inner
        return np.vstack([G, np.zeros((1, n))]), np.append(c, phi.floor), P
    if isinstance(phi, (MaxFinite, Sum)):
        parts = [polyhedral_form(ch) for ch in phi.items]
        if any(p is None for p in parts):
            return None
        P = whole
        for p in parts:
            P = P.intersect(p[2])
        if isinstance(phi, MaxFinite):
            G = np.vstack([p[0] for p in parts])
            c = np.concatenate([p[1] for p in parts])
        else:
            G, c = parts[0][0], parts[0][1]
            for Gi, ci, _ in parts[1:]:
                if G.shape[0] * Gi.shape[0] > MAX_PIECES:
                    return None
                G = (G[:, None, :] + Gi[None, :, :]).reshape(-1, n)
                c = (c[:, None] + ci[None, :]).reshape(-1)
        key = np.round(np.hstack([G, c[:, None]]), 13)
        _, idx = np.unique(key, axis=0, return_index=True)
        idx = np.sort(idx)
        return G[idx], c[idx], P
    return None


def _polyhedral_eps_set(G: np.ndarray, c: np.ndarray, P: Polyhedron, x: np.ndarray, eps: float) -> GenSet:
    """``∂_eps`` of ``max_i (G_i . y + c_i) + I_P`` at ``x`` in ``cl P``.

    By LP duality this is ``{sum l_i G_i + sum m_j a_j : l in simplex, m >= 0,
    sum l_i d_i + sum m_j s_j <= eps}`` with piece gaps ``d`` and constraint
    slacks ``s``; its generators are the vertices of that polyhedron cut by
    the budget constraint.
    """
    n = x.size
    v = G @ x + c
    top = v.max()
    d = top - v
    d[d <= ACTIVE_TOL * (1.0 + abs(top))] = 0.0
    Pc = P.closure().dedup()
    A, b = Pc.A, Pc.b
    s = b - A @ x
    act_c = s <= ACTIVE_TOL * (1.0 + np.abs(b))
    s = np.where(act_c, 0.0, s)
    inside = d <= eps
    pts = [G[inside]]
    outside = ~inside
    if eps > 0:
        for i in np.flatnonzero(inside & (d < eps)):
            if outside.any():
                lam = (eps - d[i]) / (d[outside] - d[i])
                pts.append(G[i] + lam[:, None] * (G[outside] - G[i]))
            if (~act_c).any():
                pts.append(G[i] + ((eps - d[i]) / s[~act_c])[:, None] * A[~act_c])
    return canonical_form(GenSet(np.vstack(pts), A[act_c]))


def eps_subdiff_set(phi: ConvexFunc, x, eps: float) -> SubdiffResult:
    """The eps-subdifferential. Polyhedral trees have a closed form; other
    trees get the outer polyhedral approximation cut out by the support
    function on the direction net."""
    x = _check_point(phi, x)
    n = phi.dim
    if not math.isfinite(eval_at(phi, x)):
        return SubdiffResult(GenSet.empty_set(n), True)
    form = polyhedral_form(phi)
    if form is not None:
        return SubdiffResult(_polyhedral_eps_set(*form, x, eps), True)
    if eps == 0.0:
        return subdiff(phi, x)
    net = direction_net(n)
    res = recon.outer_approx(lambda U: eps_support_many(phi, x, eps, U), n, net, "curved")
    return SubdiffResult(res.set, False)


def lsc_envelope_value(phi: ConvexFunc, x) -> float:
    """``(cl phi)(x)``: the strict-relaxed tree on the closure of a nonempty
    domain, ``+inf`` everywhere when the domain is empty."""
    x = _check_point(phi, x)
    if not has_strict(phi):
        return eval_at(phi, x)
    if dom_polyhedron(phi).is_empty():
        return math.inf
    return eval_at(closed(phi), x)
