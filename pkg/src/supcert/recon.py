"""Rebuild a closed convex polyhedral set from its support function.

The set is ``S = Q + K°`` where ``K`` is the cone of directions with finite
support. ``K`` is learned from a membership test by bisecting towards its
facets; the bounded part ``Q`` is grown quickhull-style: every facet normal
of the current hull is checked against the support oracle and, when the
oracle exceeds the hull, the exposed point is recovered as the gradient of
the support function next to that normal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .numkernel import extrapolate_to_zero, quotient_noise
from .setgeom import GenSet, canonical_form, cone_generators, direction_net, v_to_h

SupportFn = Callable[[np.ndarray], np.ndarray]
MemberFn = Callable[[np.ndarray], np.ndarray]

FACE_TOL = 1e-9
LIN_TOL = 1e-9
MAX_ROUNDS = 60
MAX_POINTS_PER_DIM = 24
QUOTIENT_STEPS = 2.0 ** -np.arange(1, 41)


@dataclass(frozen=True)
class ReconResult:
    set: GenSet
    exact: bool
    rounds: int = 0
    notes: tuple = field(default_factory=tuple)


# --------------------------------------------------------------------------
# oracles built from function values only
# --------------------------------------------------------------------------


def quotient_limits(
    fvals: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    U: np.ndarray,
    steps: np.ndarray = QUOTIENT_STEPS,
    member: MemberFn | None = None,
) -> np.ndarray:
    """Limits of ``(f(x + s u) - f(x)) / s`` as ``s -> 0`` per row of ``U``.

    ``+inf`` for directions outside the cone of feasible directions (decided
    by ``member``, see :func:`domain_member`), ``-inf`` when ``f`` drops
    below ``f(x)`` by a jump (``f`` not lsc at ``x``).
    """
    U = np.atleast_2d(np.asarray(U, float))
    if member is None:
        member = domain_member(fvals, x)
    feasible = member(U)
    n = x.size
    f0 = float(fvals(x[None, :])[0])
    k = steps.size
    X = (x[None, None, :] + steps[None, :, None] * U[:, None, :]).reshape(-1, n)
    F = np.asarray(fvals(X), float).reshape(U.shape[0], k)
    out = np.empty(U.shape[0])
    with np.errstate(all="ignore"):
        Q = (F - f0) / steps[None, :]
    noise = quotient_noise(f0, np.where(np.isfinite(F), F, 0.0), steps[None, :])
    jump = 1e-7 * (1.0 + abs(f0))
    for i in range(U.shape[0]):
        fin = np.isfinite(F[i])
        if not (fin[-1] and feasible[i]):
            out[i] = math.inf
            continue
        if F[i, -1] - f0 < -jump:
            out[i] = -math.inf
            continue
        # finite tail: feasibility persists once reached as s decreases
        start = k - 1
        while start > 0 and fin[start - 1]:
            start -= 1
        out[i] = extrapolate_to_zero(steps[start:], Q[i, start:], noise[i, start:])
    return out


def domain_member(
    fvals: Callable[[np.ndarray], np.ndarray], x: np.ndarray, step: float | None = None
) -> MemberFn:
    """Membership test for the cone of feasible directions at ``x``.

    A probe at a coarse step resolves the cone boundary sharply; when an
    inactive constraint is close enough to change the answer on the net, a
    finer step is used instead.
    """
    n = x.size

    def at(s: float) -> MemberFn:
        def member(U):
            U = np.atleast_2d(U)
            return np.isfinite(fvals(x[None, :] + s * U))

        return member

    if step is not None:
        return at(step)
    net = direction_net(n)
    coarse, fine = 2.0**-6, 2.0**-16
    if np.array_equal(at(coarse)(net), at(fine)(net)):
        return at(coarse)
    for s in (2.0**-10, 2.0**-13):
        if np.array_equal(at(s)(net), at(fine)(net)):
            return at(s)
    return at(fine)


# --------------------------------------------------------------------------
# cone of finite support
# --------------------------------------------------------------------------


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _bisect(member: MemberFn, inside: np.ndarray, outside: np.ndarray, rounds: int = 13) -> np.ndarray:
    """Boundary points on segments from members to non-members, by 16-way
    sections; returns the last member along each segment."""
    B, n = inside.shape
    D = outside - inside
    lo = np.zeros(B)
    hi = np.ones(B)
    fr = np.arange(1, 16) / 16.0
    for _ in range(rounds):
        lam = lo[:, None] + (hi - lo)[:, None] * fr[None, :]
        P = inside[:, None, :] + lam[..., None] * D[:, None, :]
        m = member(P.reshape(-1, n)).reshape(B, fr.size)
        # membership along a segment of a convex cone is an interval [0, lam*]
        first_out = np.where(m.all(axis=1), fr.size, np.argmin(m, axis=1))
        new_lo = np.where(first_out > 0, lam[np.arange(B), np.maximum(first_out - 1, 0)], lo)
        new_hi = np.where(first_out < fr.size, lam[np.arange(B), np.minimum(first_out, fr.size - 1)], hi)
        lo, hi = new_lo, new_hi
    return inside + lo[:, None] * D


def _facet_normals(member: MemberFn, c: np.ndarray, boundary: np.ndarray) -> list[np.ndarray]:
    """Outward normal of the facet of ``K`` through each boundary point,
    fitted through the origin from nearby boundary points."""
    n = c.size
    out = []
    for b in boundary:
        o = b - c
        # orthonormal basis of the complement of b
        _, _, Vt = np.linalg.svd(b[None, :])
        V = Vt[1:]
        found = None
        for delta in (0.25, 0.05, 0.01, 2e-3, 4e-4, 8e-5):
            starts = (b + c) / 2 + delta * V
            ends = b + o / 2 + delta * V
            if not member(starts).all() or member(ends).any():
                continue
            pts = np.vstack([b, _bisect(member, starts, ends)])
            _, sv, Wt = np.linalg.svd(pts)
            if sv[-1] > 1e-9 * sv[0]:
                continue
            w = Wt[-1]
            if w @ c > 0:
                w = -w
            # the fitted plane must separate near-boundary probes correctly
            probe_in = b - 1e-3 * w + 1e-4 * o
            probe_out = b + 1e-3 * w
            if member(probe_in[None, :])[0] and not member(probe_out[None, :])[0]:
                found = w / np.linalg.norm(w)
                break
        if found is not None:
            out.append(found)
    return out


def _spread(U: np.ndarray, k: int) -> np.ndarray:
    """Farthest-point subsample of rows."""
    if U.shape[0] <= k:
        return U
    idx = [0]
    d = np.linalg.norm(U - U[0], axis=1)
    while len(idx) < k:
        j = int(np.argmax(d))
        idx.append(j)
        d = np.minimum(d, np.linalg.norm(U - U[j], axis=1))
    return U[idx]


@dataclass
class _Cone:
    normals: np.ndarray  # rows w with K = {u : w.u <= 0}
    interior: np.ndarray | None  # a direction deep inside K
    full: bool  # K has nonempty interior
    exact: bool


def learn_cone(member: MemberFn, n: int, net: np.ndarray) -> _Cone:
    inside = member(net)
    if inside.all():
        return _Cone(np.zeros((0, n)), net[0] * 0 + _unit(np.ones(n)), True, True)
    if not inside.any():
        return _Cone(np.zeros((0, n)), None, False, False)
    c = _unit(net[inside].mean(axis=0)) if np.linalg.norm(net[inside].mean(axis=0)) > 1e-8 else net[inside][0]
    probes = c + 1e-3 * np.vstack([np.eye(n), -np.eye(n)])
    if not member(c[None, :])[0] or not member(probes).all():
        return _Cone(np.zeros((0, n)), None, False, False)

    normals: list[np.ndarray] = []
    witnesses = net[~inside]
    exact = True
    for _ in range(40):
        if witnesses.shape[0] == 0:
            break
        batch = _spread(witnesses, 4 * n)
        bnd = _bisect(member, np.broadcast_to(c, batch.shape).copy(), batch)
        added = 0
        for w in _facet_normals(member, c, bnd):
            if all(np.linalg.norm(w - v) > 1e-5 for v in normals):  # refits of one facet
                normals.append(w)
                added += 1
        W = np.array(normals) if normals else np.zeros((0, n))
        out_net = net[~inside]
        if W.shape[0]:
            out_net = out_net[(out_net @ W.T).max(axis=1) <= 1e-9]
        if out_net.shape[0] == 0 and W.shape[0]:
            rays, lin = cone_generators(W)
            cand = np.vstack([rays, lin, -lin]) if lin.shape[0] else rays
            # generators sit on the learned boundary; test them just inside
            probe = _unit(cand + 1e-7 * c) if cand.shape[0] else cand
            bad = cand[~member(probe)] if cand.shape[0] else cand
            out_net = bad
        if out_net.shape[0] and added == 0:
            exact = False
            break
        witnesses = out_net
    W = np.array(normals) if normals else np.zeros((0, n))
    return _Cone(W, c, True, exact and witnesses.shape[0] == 0)


# --------------------------------------------------------------------------
# bounded part
# --------------------------------------------------------------------------


class _Support:
    """Support oracle restricted to K, nudging boundary directions inward."""

    def __init__(self, h: SupportFn, cone: _Cone):
        self.h = h
        self.cone = cone

    def __call__(self, U: np.ndarray) -> np.ndarray:
        U = np.atleast_2d(U)
        v = np.asarray(self.h(U), float)
        bad = ~np.isfinite(v)
        if bad.any() and self.cone.interior is not None:
            W = self.cone.normals
            near = np.ones(U.shape[0], bool) if W.shape[0] == 0 else (U @ W.T).max(axis=1) <= 1e-7
            fix = np.flatnonzero(bad & near)
            c = self.cone.interior
            for eta in (1e-10, 1e-8, 1e-6):
                if fix.size == 0:
                    break
                # h is linear along w + t c for small t: extrapolate to t = 0
                v1 = np.asarray(self.h(U[fix] + eta * c), float)
                v2 = np.asarray(self.h(U[fix] + 2 * eta * c), float)
                ok = np.isfinite(v1) & np.isfinite(v2)
                v[fix[ok]] = 2 * v1[ok] - v2[ok]
                fix = fix[~ok]
        return v


def _gradient(sup: _Support, u: np.ndarray, delta: float) -> np.ndarray | None:
    """Gradient of the support function at ``u`` by a least-squares fit on a
    stencil, accepted only where the support is linear on the stencil."""
    n = u.size
    E = np.eye(n)
    extra = _unit(np.cos(np.arange(1, n + 1)[:, None] * np.arange(1, n + 1)[None, :] + 0.3))
    for d in (delta, delta / 8, delta / 64):
        stencil = np.vstack([u, u + d * E, u - d * E, u + 0.5 * d * extra])
        hv = sup.h(stencil)
        if not np.all(np.isfinite(hv)):
            continue
        g, *_ = np.linalg.lstsq(stencil, hv, rcond=None)
        resid = np.abs(stencil @ g - hv).max()
        if resid <= LIN_TOL * (1.0 + np.abs(hv).max()):
            return g
    return None


def _xi(n: int) -> np.ndarray:
    return _unit(np.sin(1.0 + 2.0 * np.arange(n)))


def _expose(sup: _Support, w: np.ndarray, sigma: float, hw: float):
    """A point of the set beyond the hull facet ``<w, .> = sigma``.

    Returns ``(point, True)`` when one is found, ``(None, True)`` when the
    gradients next to ``w`` only reproduce hull points and the excess is
    within rounding of the nudged support, ``(None, False)`` otherwise.
    """
    n = w.size
    tol = FACE_TOL * (1.0 + abs(hw))
    c = sup.cone.interior
    seen_old = False
    for eta in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6):
        for shift in (_xi(n), c if c is not None else _xi(n)):
            u = _unit(w + eta * shift)
            g = _gradient(sup, u, eta / 4)
            if g is None:
                continue
            if g @ w > sigma + tol / 2 and g @ w <= hw + tol:
                return g, True
            seen_old = True
    if seen_old and hw - sigma <= 1e-6 * (1.0 + abs(sigma)):
        return None, True
    return None, False


def _densify(member: MemberFn, n: int, net: np.ndarray) -> np.ndarray:
    """Add feasible directions from denser nets when the net misses a thin
    cone of feasible directions entirely."""
    if member(net).any():
        return net
    for size in (2**12, 2**16):
        D = direction_net(n, size)
        hit = D[member(D)]
        if hit.shape[0]:
            return np.vstack([net, _spread(hit, 8 * n)])
    return net


def reconstruct(h: SupportFn, member: MemberFn, n: int, net: np.ndarray | None = None) -> ReconResult:
    """Closed convex set with support function ``h`` (polyhedral for an
    exact answer)."""
    if n == 1:
        return _reconstruct_line(h)
    net = direction_net(n) if net is None else net
    net = _densify(member, n, net)
    cone = learn_cone(member, n, net)
    if not cone.full:
        return outer_approx(h, n, net, "cone of finite support has empty interior")
    sup = _Support(h, cone)
    R = cone.normals
    notes = []
    exact = cone.exact
    if not cone.exact:
        notes.append("cone facets incomplete")

    h_net = sup(net)
    if np.any(h_net == -math.inf):
        return ReconResult(GenSet.empty_set(n), True, 0, ("support is -inf",))
    fin = np.isfinite(h_net)

    # seed with the exposed point of the most interior direction
    points = []
    seeds = [cone.interior] + list(net[fin][np.argsort(-(net[fin] @ cone.interior))][:8])
    for u in seeds:
        for eta in (1e-2, 1e-4, 1e-6):
            g = _gradient(sup, _unit(u + eta * _xi(n)), eta / 4)
            if g is not None:
                points.append(g)
                break
        if points:
            break
    if not points:
        return outer_approx(h, n, net, "no exposed point found")

    rounds = 0
    skip: list[np.ndarray] = []
    checked_net = False
    while rounds < MAX_ROUNDS:
        if len(points) > MAX_POINTS_PER_DIM * n:
            exact = False
            notes.append("point cap reached (curved boundary)")
            break
        rounds += 1
        P = np.array(points)
        W, beta = v_to_h(P, R)
        if W.shape[0]:
            hw = sup(W)
            gap = hw - beta
            bad = np.flatnonzero(gap > FACE_TOL * (1.0 + np.abs(beta)))
        else:
            bad = np.zeros(0, int)
            hw = np.zeros(0)
        bad = [i for i in bad if not any(np.linalg.norm(W[i] - s) < 1e-12 for s in skip)]
        new = []
        for i in bad:
            if not math.isfinite(hw[i]):
                skip.append(W[i])
                exact = False
                notes.append("facet normal outside the learned cone")
                continue
            g, fine = _expose(sup, W[i], beta[i], hw[i])
            if g is None:
                skip.append(W[i])
                if fine:
                    continue
                exact = False
                notes.append(f"exposed point not recovered {W[i]} {hw[i]} {beta[i]}")
                continue
            if all(np.linalg.norm(g - p) > 1e-10 * (1 + np.linalg.norm(p)) for p in points + new):
                new.append(g)
        if new:
            points.extend(new)
            checked_net = False
            continue
        if checked_net:
            break
        # final safety net: the whole direction net inside K
        S = GenSet(np.array(points), R)
        sig = S.supports(net[fin])
        miss = np.flatnonzero(h_net[fin] > sig + FACE_TOL * (1.0 + np.abs(sig)))
        checked_net = True
        for i in miss:
            u = net[fin][i]
            g, fine = _expose(sup, u, sig[i], h_net[fin][i])
            if g is not None:
                points.append(g)
                checked_net = False
            elif not fine:
                exact = False
        if checked_net:
            break
    if rounds >= MAX_ROUNDS:
        exact = False
        notes.append("round cap reached")

    S = canonical_form(GenSet(np.array(points), R))
    over = S.supports(net[fin]) - h_net[fin]
    if over.size and over.max() > 1e-7 * (1.0 + np.abs(h_net[fin]).max()):
        exact = False
        notes.append("reconstruction exceeds the support oracle")
    return ReconResult(S, exact, rounds, tuple(notes))


def _reconstruct_line(h: SupportFn) -> ReconResult:
    hp, hm = np.asarray(h(np.array([[1.0], [-1.0]])), float)
    if hp == -math.inf or hm == -math.inf:
        return ReconResult(GenSet.empty_set(1), True, 0, ("support is -inf",))
    if math.isfinite(hp) and math.isfinite(hm):
        if -hm > hp + FACE_TOL * (1 + abs(hp)):
            return ReconResult(GenSet.empty_set(1), True)
        return ReconResult(canonical_form(GenSet(np.array([[-hm], [hp]]), np.zeros((0, 1)))), True)
    if math.isfinite(hp):
        return ReconResult(GenSet(np.array([[hp]]), np.array([[-1.0]])), True)
    if math.isfinite(hm):
        return ReconResult(GenSet(np.array([[-hm]]), np.array([[1.0]])), True)
    return ReconResult(GenSet(np.array([[0.0]]), np.array([[1.0], [-1.0]])), True)


def outer_approx(h: SupportFn, n: int, net: np.ndarray, why: str) -> ReconResult:
    from .setgeom import h_to_v

    hv = np.asarray(h(net), float)
    if np.any(hv == -math.inf):
        return ReconResult(GenSet.empty_set(n), True, 0, ("support is -inf",))
    fin = np.isfinite(hv)
    if not fin.any():
        eye = np.eye(n)
        return ReconResult(GenSet(np.zeros((1, n)), np.vstack([eye, -eye])), False, 0, (why,))
    pts, rays = h_to_v(net[fin], hv[fin])
    if pts.shape[0] == 0:
        return ReconResult(GenSet.empty_set(n), False, 0, (why,))
    return ReconResult(canonical_form(GenSet(pts, rays)), False, 0, (why,))


def reconstruct_subdiff(
    fvals: Callable[[np.ndarray], np.ndarray], x: np.ndarray, n: int, net: np.ndarray | None = None
) -> ReconResult:
    """Subdifferential at ``x`` of the function with batched values ``fvals``,
    from closed directional derivatives."""
    x = np.asarray(x, float)
    if not math.isfinite(float(fvals(x[None, :])[0])):
        return ReconResult(GenSet.empty_set(n), True, 0, ("x outside the domain",))
    member = domain_member(fvals, x)
    return reconstruct(lambda U: quotient_limits(fvals, x, U, member=member), member, n, net)
