"""Compactly indexed families of convex functions and their supremum.

A family is indexed either by a finite list of labels (one ConvexFunc per
label) or by a box ``T`` in ``R^m`` with ``m <= 2``, in which case the
members come from a template whose numeric leaves are polynomials in ``t``.
Suprema over a box are computed by branch and bound with interval bounds
derived from the polynomial coefficient tables.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import convexfn as cf
from .convexfn import ConvexFunc
from .setgeom import Polyhedron

log = logging.getLogger(__name__)

TOL_SUP = 1e-10
TOL_ACTIVE = 1e-10
MAX_CELLS = 40_000


# --------------------------------------------------------------------------
# polynomial coefficients
# --------------------------------------------------------------------------


def _ipow(lo: np.ndarray, hi: np.ndarray, e: int) -> tuple[np.ndarray, np.ndarray]:
    if e == 0:
        return np.ones_like(lo), np.ones_like(hi)
    a, b = lo**e, hi**e
    if e % 2:
        return a, b
    low = np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(a, b))
    return low, np.maximum(a, b)


def _imul(alo, ahi, blo, bhi):
    with np.errstate(invalid="ignore"):
        c = np.stack([alo * blo, alo * bhi, ahi * blo, ahi * bhi])
    c = np.nan_to_num(c, nan=0.0)
    return c.min(axis=0), c.max(axis=0)


@dataclass(frozen=True, eq=False)
class Poly:
    """``sum_k vals[k] * prod_j t_j ** exps[k, j]``; ``vals`` may carry a
    trailing array shape (vector or matrix coefficients)."""

    exps: np.ndarray
    vals: np.ndarray

    def __post_init__(self):
        exps = np.atleast_2d(np.asarray(self.exps, int))
        vals = np.asarray(self.vals, float)
        if vals.shape[0] != exps.shape[0]:
            raise ValueError("one coefficient per exponent row required")
        if (exps < 0).any():
            raise ValueError("exponents must be nonnegative")
        object.__setattr__(self, "exps", exps)
        object.__setattr__(self, "vals", vals)

    @classmethod
    def const(cls, value, m: int) -> "Poly":
        value = np.asarray(value, float)
        return cls(np.zeros((1, m), int), value[None, ...])

    @property
    def m(self) -> int:
        return self.exps.shape[1]

    @property
    def shape(self) -> tuple:
        return self.vals.shape[1:]

    @property
    def is_const(self) -> bool:
        return not self.exps.any()

    def monomials(self, T: np.ndarray) -> np.ndarray:
        T = np.atleast_2d(T)
        return np.prod(T[:, None, :] ** self.exps[None, :, :], axis=2)  # (k, K)

    def at(self, T: np.ndarray) -> np.ndarray:
        """Values at each row of ``T``: shape ``(k, *shape)``."""
        return np.tensordot(self.monomials(T), self.vals, axes=(1, 0))

    def at_one(self, t) -> np.ndarray:
        return self.at(np.atleast_1d(np.asarray(t, float))[None, :])[0]

    def mono_bounds(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        B = lo.shape[0]
        mlo = np.ones((B, self.exps.shape[0]))
        mhi = np.ones((B, self.exps.shape[0]))
        for j in range(self.m):
            for k, e in enumerate(self.exps[:, j]):
                if e:
                    a, b = _ipow(lo[:, j], hi[:, j], int(e))
                    mlo[:, k], mhi[:, k] = _imul(mlo[:, k], mhi[:, k], a, b)
        return mlo, mhi

    def bounds(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Interval enclosure over each box ``[lo_b, hi_b]``."""
        mlo, mhi = self.mono_bounds(lo, hi)
        V = self.vals.reshape(self.vals.shape[0], -1)  # (K, s)
        pos = np.clip(V, 0, None)
        neg = np.clip(V, None, 0)
        low = mlo @ pos + mhi @ neg
        high = mhi @ pos + mlo @ neg
        return low.reshape((-1,) + self.shape), high.reshape((-1,) + self.shape)

    def contract(self, x: np.ndarray) -> "Poly":
        """Coefficientwise product with a vector along the last axis."""
        return Poly(self.exps, self.vals @ x)

    def quad_form(self, x: np.ndarray) -> "Poly":
        return Poly(self.exps, np.einsum("kij,i,j->k", self.vals, x, x))

    def scale(self, c: float) -> "Poly":
        return Poly(self.exps, c * self.vals)

    def __add__(self, other: "Poly") -> "Poly":
        return Poly(np.vstack([self.exps, other.exps]), np.concatenate([self.vals, other.vals]))

    def __neg__(self) -> "Poly":
        return Poly(self.exps, -self.vals)


def poly_sum(polys: Sequence[Poly]) -> Poly:
    out = polys[0]
    for p in polys[1:]:
        out = out + p
    return out


# --------------------------------------------------------------------------
# templates
# --------------------------------------------------------------------------


class Template:
    """Node of a parametric ConvexFunc skeleton."""

    dim: int

    def instantiate(self, t) -> ConvexFunc:
        raise NotImplementedError

    def values_t(self, T: np.ndarray, X: np.ndarray) -> np.ndarray:
        """``f_{T[i]}(X[i])`` for paired rows."""
        raise NotImplementedError

    def bounds(self, lo, hi, xlo, xhi) -> tuple[np.ndarray, np.ndarray]:
        """Enclosure of ``f_t(y)`` over ``t`` in each box and ``y`` in the
        box ``[xlo, xhi]`` (shared across t-boxes)."""
        raise NotImplementedError

    def closed(self) -> "Template":
        return self

    def children(self):
        return ()

    @property
    def certified(self) -> bool:
        """Interval bounds available (polynomial coefficients)."""
        return all(c.certified for c in self.children())


def _pt(x_lo, x_hi) -> bool:
    return np.array_equal(x_lo, x_hi)


def _x_interval_dot(vlo, vhi, xlo, xhi):
    """Enclosure of ``v . x`` with ``v`` in ``[vlo, vhi]`` (shape (B, n))."""
    plo, phi = _imul(vlo, vhi, xlo[None, :], xhi[None, :])
    return plo.sum(axis=-1), phi.sum(axis=-1)


@dataclass(frozen=True, eq=False)
class TAffine(Template):
    a: Poly
    b: Poly

    @property
    def dim(self):
        return self.a.shape[0]

    def instantiate(self, t):
        return cf.Affine(self.a.at_one(t), float(self.b.at_one(t)))

    def values_t(self, T, X):
        return np.einsum("kn,kn->k", self.a.at(T), X) + self.b.at(T)

    def bounds(self, lo, hi, xlo, xhi):
        if _pt(xlo, xhi):
            return (self.a.contract(xlo) + self.b).bounds(lo, hi)
        alo, ahi = self.a.bounds(lo, hi)
        plo, phi = _x_interval_dot(alo, ahi, xlo, xhi)
        blo, bhi = self.b.bounds(lo, hi)
        return plo + blo, phi + bhi


@dataclass(frozen=True, eq=False)
class TQuad(Template):
    Q: Poly
    a: Poly
    b: Poly

    @property
    def dim(self):
        return self.a.shape[0]

    def instantiate(self, t):
        return cf.Quad(self.Q.at_one(t), self.a.at_one(t), float(self.b.at_one(t)))

    def values_t(self, T, X):
        Q = self.Q.at(T)
        return 0.5 * np.einsum("ki,kij,kj->k", X, Q, X) + np.einsum("kn,kn->k", self.a.at(T), X) + self.b.at(T)

    def bounds(self, lo, hi, xlo, xhi):
        if _pt(xlo, xhi):
            return (self.Q.quad_form(xlo).scale(0.5) + self.a.contract(xlo) + self.b).bounds(lo, hi)
        Qlo, Qhi = self.Q.bounds(lo, hi)
        n = self.dim
        qlo = np.zeros(lo.shape[0])
        qhi = np.zeros(lo.shape[0])
        for i in range(n):
            for j in range(n):
                if i == j:
                    plo, phi = _ipow(xlo[i], xhi[i], 2)
                else:
                    plo, phi = _imul(xlo[i], xhi[i], xlo[j], xhi[j])
                rlo, rhi = _imul(Qlo[:, i, j], Qhi[:, i, j], plo, phi)
                qlo += rlo
                qhi += rhi
        qlo = np.maximum(qlo, 0.0)  # PSD forms are nonnegative
        alo, ahi = self.a.bounds(lo, hi)
        plo, phi = _x_interval_dot(alo, ahi, xlo, xhi)
        blo, bhi = self.b.bounds(lo, hi)
        return 0.5 * qlo + plo + blo, 0.5 * qhi + phi + bhi


@dataclass(frozen=True, eq=False)
class TNorm(Template):
    kind: object
    scale: Poly
    n: int

    @property
    def dim(self):
        return self.n

    def _ord(self):
        return np.inf if self.kind in ("inf", math.inf) else int(self.kind)

    def instantiate(self, t):
        return cf.Norm(self.kind, float(self.scale.at_one(t)), self.n)

    def values_t(self, T, X):
        return self.scale.at(T) * np.linalg.norm(X, ord=self._ord(), axis=1)

    def bounds(self, lo, hi, xlo, xhi):
        mig = np.where((xlo <= 0) & (xhi >= 0), 0.0, np.minimum(np.abs(xlo), np.abs(xhi)))
        mag = np.maximum(np.abs(xlo), np.abs(xhi))
        nlo = np.linalg.norm(mig, ord=self._ord())
        nhi = np.linalg.norm(mag, ord=self._ord())
        slo, shi = self.scale.bounds(lo, hi)
        return _imul(slo, shi, nlo, nhi)


@dataclass(frozen=True, eq=False)
class TIndicator(Template):
    """Constraints ``normals(t) . y <= offsets(t)`` (``<`` where strict)."""

    normals: Poly  # shape (r, n)
    offsets: Poly  # shape (r,)
    strict: tuple

    @property
    def dim(self):
        return self.normals.shape[1]

    def instantiate(self, t):
        return cf.Indicator(Polyhedron(self.normals.at_one(t), self.offsets.at_one(t), np.array(self.strict, bool)))

    def closed(self):
        return TIndicator(self.normals, self.offsets, tuple(False for _ in self.strict))

    def values_t(self, T, X):
        A = self.normals.at(T)  # (k, r, n)
        b = self.offsets.at(T)  # (k, r)
        lhs = np.einsum("krn,kn->kr", A, X) - b
        tol = 1e-12 * (1.0 + np.abs(b) + np.linalg.norm(A, axis=2) * np.abs(X).max(axis=1, keepdims=True))
        ok = lhs <= tol
        strict = np.array(self.strict, bool)
        if strict.any():
            ok &= ~(strict[None, :] & (lhs >= -tol))
        return np.where(ok.all(axis=1), 0.0, math.inf)

    def bounds(self, lo, hi, xlo, xhi):
        if _pt(xlo, xhi):
            glo, ghi = (self.normals.contract(xlo) + (-self.offsets)).bounds(lo, hi)
        else:
            Alo, Ahi = self.normals.bounds(lo, hi)
            plo, phi = _imul(Alo, Ahi, xlo[None, None, :], xhi[None, None, :])
            olo, ohi = self.offsets.bounds(lo, hi)
            glo, ghi = plo.sum(axis=-1) - ohi, phi.sum(axis=-1) - olo
        tol = 1e-12 * (1.0 + np.maximum(np.abs(glo), np.abs(ghi)))
        strict = np.array(self.strict, bool)[None, :]
        sure_in = np.where(strict, ghi < -tol, ghi <= tol).all(axis=1)
        sure_out = np.where(strict, glo >= -tol, glo > tol).any(axis=1)
        low = np.where(sure_out, math.inf, 0.0)
        high = np.where(sure_in, 0.0, math.inf)
        return low, high


@dataclass(frozen=True, eq=False)
class TMax(Template):
    items: tuple

    @property
    def dim(self):
        return self.items[0].dim

    def children(self):
        return self.items

    def instantiate(self, t):
        return cf.MaxFinite(tuple(c.instantiate(t) for c in self.items))

    def closed(self):
        return TMax(tuple(c.closed() for c in self.items))

    def values_t(self, T, X):
        return np.max([c.values_t(T, X) for c in self.items], axis=0)

    def bounds(self, lo, hi, xlo, xhi):
        bs = [c.bounds(lo, hi, xlo, xhi) for c in self.items]
        return np.max([b[0] for b in bs], axis=0), np.max([b[1] for b in bs], axis=0)


@dataclass(frozen=True, eq=False)
class TSum(Template):
    items: tuple

    @property
    def dim(self):
        return self.items[0].dim

    def children(self):
        return self.items

    def instantiate(self, t):
        return cf.Sum(tuple(c.instantiate(t) for c in self.items))

    def closed(self):
        return TSum(tuple(c.closed() for c in self.items))

    def values_t(self, T, X):
        return np.sum([c.values_t(T, X) for c in self.items], axis=0)

    def bounds(self, lo, hi, xlo, xhi):
        bs = [c.bounds(lo, hi, xlo, xhi) for c in self.items]
        return np.sum([b[0] for b in bs], axis=0), np.sum([b[1] for b in bs], axis=0)


@dataclass(frozen=True, eq=False)
class TShifted(Template):
    child: Template
    translate: Poly  # shape (n,)

    @property
    def dim(self):
        return self.child.dim

    def children(self):
        return (self.child,)

    def instantiate(self, t):
        return cf.Shifted(self.child.instantiate(t), self.translate.at_one(t))

    def closed(self):
        return TShifted(self.child.closed(), self.translate)

    def values_t(self, T, X):
        return self.child.values_t(T, X - self.translate.at(T))

    def bounds(self, lo, hi, xlo, xhi):
        # one shared y-box for all t-boxes: widen by the translate range
        tlo, thi = self.translate.bounds(lo, hi)
        return self.child.bounds(lo, hi, xlo - thi.max(axis=0), xhi - tlo.min(axis=0))


@dataclass(frozen=True, eq=False)
class TTruncated(Template):
    child: Template
    floor: Poly  # scalar

    @property
    def dim(self):
        return self.child.dim

    def children(self):
        return (self.child,)

    def instantiate(self, t):
        return cf.Truncated(self.child.instantiate(t), float(self.floor.at_one(t)))

    def closed(self):
        return TTruncated(self.child.closed(), self.floor)

    def values_t(self, T, X):
        return np.maximum(self.child.values_t(T, X), self.floor.at(T))

    def bounds(self, lo, hi, xlo, xhi):
        clo, chi = self.child.bounds(lo, hi, xlo, xhi)
        flo, fhi = self.floor.bounds(lo, hi)
        return np.maximum(clo, flo), np.maximum(chi, fhi)


@dataclass(frozen=True, eq=False)
class TCallable(Template):
    """Arbitrary ``t -> ConvexFunc`` map; no interval bounds, sampled only."""

    fn: Callable[[np.ndarray], ConvexFunc]
    n: int
    name: str = "callable"

    @property
    def dim(self):
        return self.n

    @property
    def certified(self) -> bool:
        return False

    def instantiate(self, t):
        return self.fn(np.atleast_1d(np.asarray(t, float)))

    def closed(self):
        return TCallable(lambda t: cf.closed(self.fn(t)), self.n, self.name)

    def values_t(self, T, X):
        return np.array([float(self.instantiate(t).values(x[None, :])[0]) for t, x in zip(T, X)])

    def bounds(self, lo, hi, xlo, xhi):
        raise NotImplementedError("callable templates have no interval bounds")


def lift(phi: ConvexFunc, m: int) -> Template:
    """A t-independent template reproducing ``phi``."""
    C = lambda v: Poly.const(v, m)  # noqa: E731
    if isinstance(phi, cf.Affine):
        return TAffine(C(phi.a), C(phi.b))
    if isinstance(phi, cf.Quad):
        return TQuad(C(phi.Q), C(phi.a), C(phi.b))
    if isinstance(phi, cf.Norm):
        return TNorm(phi.kind, C(phi.scale), phi.n)
    if isinstance(phi, cf.Indicator):
        return TIndicator(C(phi.P.A), C(phi.P.b), tuple(bool(s) for s in phi.P.strict))
    if isinstance(phi, cf.MaxFinite):
        return TMax(tuple(lift(c, m) for c in phi.items))
    if isinstance(phi, cf.Sum):
        return TSum(tuple(lift(c, m) for c in phi.items))
    if isinstance(phi, cf.Shifted):
        return TShifted(lift(phi.child, m), C(phi.translate))
    if isinstance(phi, cf.Truncated):
        return TTruncated(lift(phi.child, m), C(phi.floor))
    raise TypeError(type(phi).__name__)


# --------------------------------------------------------------------------
# index sets and families
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FiniteIndex:
    labels: tuple

    def __post_init__(self):
        if not self.labels:
            raise ValueError("finite index set must be nonempty")
        object.__setattr__(self, "labels", tuple(self.labels))


@dataclass(frozen=True, eq=False)
class BoxIndex:
    lower: np.ndarray
    upper: np.ndarray
    base_resolution: int = 256

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, float))
        hi = np.atleast_1d(np.asarray(self.upper, float))
        if lo.shape != hi.shape or (lo > hi).any():
            raise ValueError("index box needs lower <= upper")
        if lo.size > 2:
            raise ValueError("index boxes are limited to m <= 2")
        if self.base_resolution < 256:
            raise ValueError("base_resolution must be at least 256")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def m(self) -> int:
        return self.lower.size

    @property
    def min_width(self) -> np.ndarray:
        # finest refinement: 2^-16 of the range in 1-D, 2^-10 per side in 2-D
        k = 16 if self.m == 1 else 10
        return (self.upper - self.lower) * 2.0**-k

    def grid(self, per_dim: int) -> np.ndarray:
        axes = [np.linspace(l, u, per_dim) for l, u in zip(self.lower, self.upper)]
        return np.array(list(itertools.product(*axes)))

    def base_cells(self) -> tuple[np.ndarray, np.ndarray]:
        per = self.base_resolution if self.m == 1 else int(math.ceil(math.sqrt(self.base_resolution)))
        edges = [np.linspace(l, u, per + 1) for l, u in zip(self.lower, self.upper)]
        if self.m == 1:
            return edges[0][:-1, None], edges[0][1:, None]
        lo = np.array([[a, b] for a in edges[0][:-1] for b in edges[1][:-1]])
        hi = np.array([[a, b] for a in edges[0][1:] for b in edges[1][1:]])
        return lo, hi


@dataclass(frozen=True, eq=False)
class Family:
    """Either ``members`` (finite index) or ``template`` (box index)."""

    index: Union[FiniteIndex, BoxIndex]
    members: tuple = ()
    template: Optional[Template] = None
    domain_hint: Optional[Polyhedron] = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if isinstance(self.index, FiniteIndex):
            if len(self.members) != len(self.index.labels):
                raise ValueError("one member per label required")
            if len({f.dim for f in self.members}) != 1:
                raise ValueError("member dimensions disagree")
            object.__setattr__(self, "members", tuple(self.members))
        elif self.template is None:
            raise ValueError("box-indexed family needs a template")
        else:
            # instantiate on a coarse grid so PSD and shape errors surface early
            for t in self.index.grid(5):
                self.template.instantiate(t)

    @classmethod
    def finite(cls, members: Sequence[ConvexFunc], labels=None, domain_hint=None) -> "Family":
        labels = tuple(labels) if labels is not None else tuple(range(1, len(members) + 1))
        return cls(FiniteIndex(labels), tuple(members), None, domain_hint)

    @classmethod
    def box(cls, lower, upper, template: Template, base_resolution: int = 256, domain_hint=None) -> "Family":
        return cls(BoxIndex(lower, upper, base_resolution), (), template, domain_hint)

    @property
    def is_finite(self) -> bool:
        return isinstance(self.index, FiniteIndex)

    @property
    def dim(self) -> int:
        return self.members[0].dim if self.is_finite else self.template.dim

    def member(self, t) -> ConvexFunc:
        """``f_t`` for a label (finite) or a point of the index box."""
        if self.is_finite:
            return self.members[self.index.labels.index(t)]
        t = np.atleast_1d(np.asarray(t, float))
        if (t < self.index.lower - 1e-12).any() or (t > self.index.upper + 1e-12).any():
            raise ValueError(f"index {t} outside the index box")
        return self.template.instantiate(t)

    def sup_function(self) -> Optional[ConvexFunc]:
        """The supremum as a single tree (finite families only)."""
        if not self.is_finite:
            return None
        return self.members[0] if len(self.members) == 1 else cf.MaxFinite(self.members)

    def values(self, X: np.ndarray) -> np.ndarray:
        """Supremum at each row of ``X``."""
        X = np.atleast_2d(np.asarray(X, float))
        if X.shape[1] != self.dim:
            raise ValueError("dimension mismatch")
        if self.is_finite:
            return np.max([f.values(X) for f in self.members], axis=0)
        return _box_sup_many(self, X)

    def __call__(self, x) -> float:
        return sup_eval(self, x)


# --------------------------------------------------------------------------
# branch and bound over an index box
# --------------------------------------------------------------------------


def _cell_samples(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Centers and corners of each cell: shape (B, s, m)."""
    m = lo.shape[1]
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=m)))
    fr = np.vstack([np.full((1, m), 0.5), corners])
    return lo[:, None, :] + fr[None, :, :] * (hi - lo)[:, None, :]


def _sample(F: Family, x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    S = _cell_samples(lo, hi)
    B, s, m = S.shape
    T = S.reshape(-1, m)
    X = np.broadcast_to(x, (T.shape[0], x.size))
    V = F.template.values_t(T, X).reshape(B, s)
    return V, S


def _split(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    j = np.argmax(hi - lo, axis=1)
    mid = 0.5 * (lo[np.arange(lo.shape[0]), j] + hi[np.arange(lo.shape[0]), j])
    lo2, hi1 = lo.copy(), hi.copy()
    hi1[np.arange(lo.shape[0]), j] = mid
    lo2[np.arange(lo.shape[0]), j] = mid
    return np.vstack([lo, lo2]), np.vstack([hi1, hi])


@dataclass(frozen=True)
class SupResult:
    value: float
    argmax: np.ndarray
    upper: float
    certified: bool


def _box_sup(F: Family, x: np.ndarray) -> SupResult:
    idx = F.index
    tmpl = F.template
    lo, hi = idx.base_cells()
    V, S = _sample(F, x, lo, hi)
    k = np.unravel_index(np.argmax(V), V.shape)
    best, arg = float(V[k]), S[k]
    if not tmpl.certified:
        return _sampled_refine(F, x, best, arg)
    minw = idx.min_width
    upper = best
    for _ in range(64):
        if best == math.inf:
            break
        _, U = tmpl.bounds(lo, hi, x, x)
        keep = U > best + TOL_SUP * max(1.0, abs(best))
        if not keep.any():
            break
        lo, hi = lo[keep], hi[keep]
        fine = ((hi - lo) <= minw + 1e-300).all(axis=1)
        if fine.all() or lo.shape[0] > MAX_CELLS:
            upper = max(upper, float(U[keep].max()))
            break
        lo, hi = _split(lo[~fine], hi[~fine]) if (~fine).any() else (lo, hi)
        V, S = _sample(F, x, lo, hi)
        k = np.unravel_index(np.argmax(V), V.shape)
        if V[k] > best:
            best, arg = float(V[k]), S[k]
    return SupResult(best, arg, max(upper, best), True)


def _sampled_refine(F: Family, x: np.ndarray, best: float, arg: np.ndarray) -> SupResult:
    """Dense sampling plus local zoom for templates without bounds."""
    idx = F.index
    per = 4097 if idx.m == 1 else 65
    T = idx.grid(per)
    V = F.template.values_t(T, np.broadcast_to(x, (T.shape[0], x.size)))
    i = int(np.argmax(V))
    if V[i] > best:
        best, arg = float(V[i]), T[i]
    width = (idx.upper - idx.lower) / (per - 1)
    for _ in range(6):
        lo = np.maximum(idx.lower, arg - width)
        hi = np.minimum(idx.upper, arg + width)
        T = np.array(list(itertools.product(*[np.linspace(a, b, 33) for a, b in zip(lo, hi)])))
        V = F.template.values_t(T, np.broadcast_to(x, (T.shape[0], x.size)))
        i = int(np.argmax(V))
        if V[i] > best:
            best, arg = float(V[i]), T[i]
        width = width / 16
    return SupResult(best, arg, best, False)


def _box_sup_many(F: Family, X: np.ndarray) -> np.ndarray:
    """Supremum at many points: one shared base-grid pass, then branch and
    bound only where the base pass leaves a gap."""
    idx = F.index
    lo, hi = idx.base_cells()
    S = _cell_samples(lo, hi).reshape(-1, idx.m)
    S = np.unique(S, axis=0)
    P, n = X.shape
    T = np.tile(S, (P, 1))
    XX = np.repeat(X, S.shape[0], axis=0)
    V = F.template.values_t(T, XX).reshape(P, S.shape[0])
    out = V.max(axis=1)
    if not F.template.certified:
        return np.array([_box_sup(F, x).value for x in X])
    for p in range(P):
        if out[p] == math.inf:
            continue
        _, U = F.template.bounds(lo, hi, X[p], X[p])
        if U.max() > out[p] + TOL_SUP * max(1.0, abs(out[p])):
            out[p] = _box_sup(F, X[p]).value
    return out


# --------------------------------------------------------------------------
# public operations
# --------------------------------------------------------------------------


def sup_eval(F: Family, x) -> float:
    """``f(x) = sup_t f_t(x)``."""
    x = np.atleast_1d(np.asarray(x, float))
    if x.size != F.dim:
        raise ValueError(f"point has dimension {x.size}, family has {F.dim}")
    if F.is_finite:
        return float(F.values(x[None, :])[0])
    return _box_sup(F, x).value


def sup_result(F: Family, x) -> SupResult:
    x = np.atleast_1d(np.asarray(x, float))
    if F.is_finite:
        vals = np.array([cf.eval_at(f, x) for f in F.members])
        i = int(np.argmax(vals))
        return SupResult(float(vals[i]), np.array([i]), float(vals[i]), True)
    return _box_sup(F, x)


class UndefinedActiveSet(ValueError):
    """The supremum is not finite at the query point."""


@dataclass(frozen=True)
class ActiveSet:
    """``T_eps(x)``: labels for a finite index, a cover by boxes otherwise."""

    epsilon: float
    value: float
    labels: Optional[tuple] = None
    boxes: Optional[np.ndarray] = None  # (B, 2, m): lower, upper corners
    slack: float = 0.0
    certified: bool = True

    @property
    def is_finite(self) -> bool:
        return self.labels is not None

    def samples(self) -> np.ndarray:
        """Centers and corners of the cover boxes, deduplicated."""
        if self.boxes is None or self.boxes.shape[0] == 0:
            return np.zeros((0, 0))
        S = _cell_samples(self.boxes[:, 0], self.boxes[:, 1]).reshape(-1, self.boxes.shape[2])
        return np.unique(S, axis=0)

    def intervals(self) -> list[tuple]:
        """Human-readable boxes as ``((lo...), (hi...))`` tuples."""
        if self.boxes is None:
            return []
        return [(tuple(b[0]), tuple(b[1])) for b in self.boxes]

    def covers(self, t, tol: float = 0.0) -> bool:
        if self.labels is not None:
            return t in self.labels
        t = np.atleast_1d(np.asarray(t, float))
        return bool(((self.boxes[:, 0] - tol <= t) & (t <= self.boxes[:, 1] + tol)).all(axis=1).any())

    def describe(self) -> str:
        if self.labels is not None:
            return "{" + ", ".join(str(l) for l in self.labels) + "}"
        parts = []
        for lo, hi in self.intervals():
            if len(lo) == 1:
                parts.append(f"[{lo[0]:.6g}, {hi[0]:.6g}]")
            else:
                parts.append("[" + ", ".join(f"{a:.6g}..{b:.6g}" for a, b in zip(lo, hi)) + "]")
        return " U ".join(parts) if parts else "{}"


def _merge_1d(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    order = np.argsort(lo[:, 0])
    out = []
    for a, b in zip(lo[order, 0], hi[order, 0]):
        if out and a <= out[-1][1] + 1e-15:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return np.array([[[a], [b]] for a, b in out])


def active_set(F: Family, x, eps: float = 0.0) -> ActiveSet:
    """``T_eps(x) = {t : f_t(x) >= f(x) - eps}``."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    x = np.atleast_1d(np.asarray(x, float))
    fx = sup_eval(F, x)
    if not math.isfinite(fx):
        raise UndefinedActiveSet(f"active set undefined: f(x) = {fx}")
    thr = fx - eps - TOL_ACTIVE * max(1.0, abs(fx))
    if F.is_finite:
        vals = np.array([cf.eval_at(f, x) for f in F.members])
        labels = tuple(l for l, v in zip(F.index.labels, vals) if v >= thr)
        return ActiveSet(eps, fx, labels=labels)
    idx, tmpl = F.index, F.template
    lo, hi = idx.base_cells()
    if not tmpl.certified:
        return _sampled_cover(F, x, fx, thr, eps)
    minw = idx.min_width
    inside_lo, inside_hi = [], []
    slack = 0.0
    for _ in range(64):
        L, U = tmpl.bounds(lo, hi, x, x)
        keep = U >= thr
        sure = keep & (L >= thr)
        inside_lo.append(lo[sure])
        inside_hi.append(hi[sure])
        und = keep & ~sure
        lo, hi = lo[und], hi[und]
        if lo.shape[0] == 0:
            break
        fine = ((hi - lo) <= minw + 1e-300).all(axis=1)
        if fine.any():
            inside_lo.append(lo[fine])
            inside_hi.append(hi[fine])
            slack = max(slack, float((U[und][fine] - L[und][fine]).max()))
        lo, hi = lo[~fine], hi[~fine]
        if lo.shape[0] == 0:
            break
        if lo.shape[0] > MAX_CELLS:
            inside_lo.append(lo)
            inside_hi.append(hi)
            slack = math.inf
            break
        lo, hi = _split(lo, hi)
    clo = np.vstack(inside_lo) if inside_lo else np.zeros((0, idx.m))
    chi = np.vstack(inside_hi) if inside_hi else np.zeros((0, idx.m))
    if idx.m == 1 and clo.shape[0]:
        boxes = _merge_1d(clo, chi)
    else:
        boxes = np.stack([clo, chi], axis=1) if clo.shape[0] else np.zeros((0, 2, idx.m))
    return ActiveSet(eps, fx, boxes=boxes, slack=slack)


def _sampled_cover(F: Family, x: np.ndarray, fx: float, thr: float, eps: float) -> ActiveSet:
    idx = F.index
    per = 4096 if idx.m == 1 else 128
    edges = [np.linspace(l, u, per + 1) for l, u in zip(idx.lower, idx.upper)]
    lo = np.array(list(itertools.product(*[e[:-1] for e in edges])))
    hi = lo + (idx.upper - idx.lower) / per
    V, _ = _sample(F, x, lo, hi)
    keep = V.max(axis=1) >= thr
    if idx.m == 1 and keep.any():
        boxes = _merge_1d(lo[keep], hi[keep])
    else:
        boxes = np.stack([lo[keep], hi[keep]], axis=1)
    return ActiveSet(eps, fx, boxes=boxes, slack=math.nan, certified=False)


def index_samples(F: Family, act: ActiveSet) -> list:
    """Indices used to realize a union over ``act``: labels, or box centers
    and corners."""
    if act.is_finite:
        return list(act.labels)
    return [t for t in act.samples()]


# --------------------------------------------------------------------------
# domain of the supremum
# --------------------------------------------------------------------------


def family_domain(F: Family) -> Polyhedron:
    """``dom f`` as the intersection of member domains (and the hint).

    Box families intersect the domains at a grid of indices; a warning is
    logged when these domains depend on ``t``.
    """
    if "domain" in F._cache:
        return F._cache["domain"]
    n = F.dim
    if F.is_finite:
        P = Polyhedron.whole(n)
        for f in F.members:
            P = P.intersect(cf.dom_polyhedron(f))
    else:
        per = 17 if F.index.m == 1 else 9
        distinct = {}
        for t in F.index.grid(per):
            d = cf.dom_polyhedron(F.template.instantiate(t))
            distinct.setdefault((d.A.tobytes(), d.b.tobytes(), d.strict.tobytes()), d)
        if len(distinct) > 1:
            log.warning("member domains depend on t; dom f is approximated on a grid of indices")
        P = Polyhedron.whole(n)
        for d in distinct.values():
            P = P.intersect(d)
        F._cache["t_dependent_domain"] = len(distinct) > 1
    if F.domain_hint is not None:
        P = P.intersect(F.domain_hint)
    P = P.dedup()
    F._cache["domain"] = P
    return P


def domain_is_t_dependent(F: Family) -> bool:
    family_domain(F)
    return bool(F._cache.get("t_dependent_domain", False))


# --------------------------------------------------------------------------
# closure condition, truncation, upper semicontinuity
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeVerdict:
    point: tuple
    closure_of_sup: float
    sup_of_closures: float
    holds: bool
    gap: float


@dataclass(frozen=True)
class ClosureReport:
    probes: tuple

    @property
    def holds(self) -> bool:
        return all(p.holds for p in self.probes)


def _closed_family(F: Family) -> Family:
    if F.is_finite:
        return Family.finite([cf.closed(f) for f in F.members], F.index.labels)
    return Family.box(F.index.lower, F.index.upper, F.template.closed(), F.index.base_resolution)


def closure_value_of_sup(F: Family, z) -> float:
    """``(cl f)(z)``: the supremum has polyhedral domain, so its closure is
    the relaxed supremum on the closed domain, or ``+inf`` everywhere when
    the domain is empty."""
    z = np.atleast_1d(np.asarray(z, float))
    if family_domain(F).is_empty():
        return math.inf
    return sup_eval(_closed_family(F), z)


def closure_condition_check(F: Family, probes: Sequence) -> ClosureReport:
    """Compare ``cl f`` with ``sup_t cl f_t`` at each probe."""
    G = _closed_family(F)
    out = []
    for z in probes:
        z = np.atleast_1d(np.asarray(z, float))
        lhs = closure_value_of_sup(F, z)
        if F.is_finite:
            rhs = max(cf.lsc_envelope_value(f, z) for f in F.members)
        else:
            # members of a box family are taken to have nonempty domains
            rhs = sup_eval(G, z)
        if lhs == rhs:
            gap = 0.0
        elif math.isinf(lhs) or math.isinf(rhs):
            gap = math.inf
        else:
            gap = abs(lhs - rhs)
        holds = gap <= 1e-12 * max(1.0, abs(rhs) if math.isfinite(rhs) else 1.0)
        out.append(ProbeVerdict(tuple(float(v) for v in z), lhs, rhs, holds, gap))
    return ClosureReport(tuple(out))


def truncate_family(F: Family, x0, c: float) -> Family:
    """The family ``l_t = max{f_t, f(x0) - c}``."""
    if c <= 0:
        raise ValueError("c must be positive")
    f0 = sup_eval(F, x0)
    if not math.isfinite(f0):
        raise ValueError("f(x0) is not finite")
    floor = f0 - c
    if F.is_finite:
        return Family.finite([cf.Truncated(f, floor) for f in F.members], F.index.labels, F.domain_hint)
    m = F.index.m
    return Family.box(
        F.index.lower,
        F.index.upper,
        TTruncated(F.template, Poly.const(floor, m)),
        F.index.base_resolution,
        F.domain_hint,
    )


def scale_family(F: Family, c: float) -> Family:
    """The family ``c f_t`` for ``c > 0``."""
    if F.is_finite:
        return Family.finite([cf.scaled(f, c) for f in F.members], F.index.labels, F.domain_hint)
    return Family.box(F.index.lower, F.index.upper, _scale_template(F.template, c), F.index.base_resolution, F.domain_hint)


def _scale_template(t: Template, c: float) -> Template:
    if isinstance(t, TAffine):
        return TAffine(t.a.scale(c), t.b.scale(c))
    if isinstance(t, TQuad):
        return TQuad(t.Q.scale(c), t.a.scale(c), t.b.scale(c))
    if isinstance(t, TNorm):
        return TNorm(t.kind, t.scale.scale(c), t.n)
    if isinstance(t, TIndicator):
        return t
    if isinstance(t, TMax):
        return TMax(tuple(_scale_template(x, c) for x in t.items))
    if isinstance(t, TSum):
        return TSum(tuple(_scale_template(x, c) for x in t.items))
    if isinstance(t, TShifted):
        return TShifted(_scale_template(t.child, c), t.translate)
    if isinstance(t, TTruncated):
        return TTruncated(_scale_template(t.child, c), t.floor.scale(c))
    if isinstance(t, TCallable):
        return TCallable(lambda s: cf.scaled(t.fn(s), c), t.n, t.name)
    raise TypeError(type(t).__name__)


@dataclass(frozen=True)
class UscReport:
    status: str  # "certified-by-construction" | "verified" | "violated"
    witness: Optional[dict] = None


def usc_check(F: Family, z, T_sub: Optional[ActiveSet] = None, tol: float = 1e-8) -> UscReport:
    """Upper semicontinuity of ``t -> f_t(z)`` at the tested indices.

    Finite index sets (discrete topology) and polynomial templates are
    continuous by construction. Other templates are probed with sequences
    ``t +- 2^-k`` converging to each tested index.
    """
    if F.is_finite or F.template.certified:
        return UscReport("certified-by-construction")
    z = np.atleast_1d(np.asarray(z, float))
    idx = F.index
    if T_sub is not None and T_sub.boxes is not None and T_sub.boxes.shape[0]:
        tested = T_sub.samples()
    else:
        tested = idx.grid(257 if idx.m == 1 else 17)
    dirs = np.vstack([np.eye(idx.m), -np.eye(idx.m)])
    ks = 2.0 ** -np.arange(4, 31)
    for t in tested:
        ft = cf.eval_at(F.template.instantiate(t), z)
        for d in dirs:
            seq = t[None, :] + ks[:, None] * d[None, :]
            ok = ((seq >= idx.lower) & (seq <= idx.upper)).all(axis=1)
            if not ok.any():
                continue
            seq = seq[ok]
            vals = F.template.values_t(seq, np.broadcast_to(z, (seq.shape[0], z.size)))
            tail = vals[-8:]
            limsup = float(tail.max())
            if limsup > ft + tol * max(1.0, abs(ft)):
                return UscReport(
                    "violated",
                    {
                        "index": [float(v) for v in t],
                        "value": ft,
                        "sequence": [[float(v) for v in s] for s in seq[-8:]],
                        "limsup": limsup,
                    },
                )
    return UscReport("verified")
