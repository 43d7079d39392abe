"""Right-hand sides of the subdifferential formulas for a supremum and their
certification against the brute-force oracle.

Every builder returns a :class:`~supcert.setgeom.GenSet`. Unions over a
continuum of active indices are realized on sample indices of the active
set cover, refined until the support function of the union settles.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from . import convexfn as cf
from . import family as fm
from .family import Family
from .oracle import OracleConfig, oracle_subdiff
from .setgeom import (
    GenSet,
    Polyhedron,
    containment_slack,
    direction_net,
    hausdorff_gap,
    hull_union,
    intersect_sets,
    minkowski_sum,
    normal_cone,
)

DEFAULT_EPS_GRID = tuple(2.0**-k for k in range(13))
CERT_TOL = 1e-7
REFINE_TOL = 1e-8
FINEST_FRACTION = 2.0**-12  # finest sample spacing, relative to the index box
MAX_SAMPLES = 4096


class TheoremId(str, Enum):
    compact0 = "compact0"
    compact1 = "compact1"
    compact = "compact"
    rqq = "rqq"
    spe1 = "spe1"
    sep2 = "sep2"
    sep2_strong = "sep2_strong"
    sep2b = "sep2b"
    corcompcont = "corcompcont"
    valadier_final = "valadier_final"
    valadier_classic = "valadier_classic"


VERIFIED = "verified"
BY_CONSTRUCTION = "certified-by-construction"
UNVERIFIED = "unverified"
VIOLATED = "violated"


@dataclass(frozen=True)
class Options:
    eps_grid: tuple = DEFAULT_EPS_GRID
    subspaces: tuple = ()  # basis matrices (n, k); R^n is always added
    eps0: float = 1.0
    tol: float = CERT_TOL
    refine_tol: float = REFINE_TOL
    probes: tuple = ()  # extra points for the closure and usc checks
    oracle: OracleConfig = field(default_factory=OracleConfig)


# --------------------------------------------------------------------------
# unions over active indices
# --------------------------------------------------------------------------


def _check_subspaces(subspaces, x: np.ndarray, skip: bool = False) -> list[np.ndarray]:
    """Bases of the subspaces; ``skip`` drops those not containing ``x``
    instead of raising."""
    out = []
    for B in subspaces:
        B = np.asarray(B, float).reshape(x.size, -1)
        if B.shape[1]:
            coef, *_ = np.linalg.lstsq(B, x, rcond=None)
            resid = np.linalg.norm(B @ coef - x)
        else:
            resid = np.linalg.norm(x)
        if resid > 1e-12 * (1.0 + np.linalg.norm(x)):
            if skip:
                continue
            raise ValueError(f"x is not in the subspace spanned by {B.tolist()}")
        out.append(B)
    return out


def _refined_samples(boxes: np.ndarray, level: int) -> np.ndarray:
    """Nodes of a ``2^level`` subdivision of every cover box."""
    m = boxes.shape[2]
    k = 2**level
    out = []
    for lo, hi in boxes:
        axes = [np.linspace(lo[i], hi[i], k + 1) for i in range(m)]
        out.append(np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, m))
    return np.unique(np.vstack(out), axis=0)


@dataclass
class _Union:
    set: GenSet
    exact: bool
    samples: int


def _active_union(
    F: Family,
    x: np.ndarray,
    term: Callable[[cf.ConvexFunc], tuple[GenSet, bool]],
    refine_tol: float = REFINE_TOL,
    closed: bool = False,
) -> _Union:
    """``co U_{t in T(x)} term(f_t)``; with ``closed`` the members are
    replaced by their closures and ``T(x)`` by ``{t : (cl f_t)(x) = f(x)}``."""
    n = F.dim
    fx = fm.sup_eval(F, x)
    if not math.isfinite(fx):
        return _Union(GenSet.empty_set(n), True, 0)
    thr = fx - 1e-9 * max(1.0, abs(fx))
    cache: dict = {}

    def member(t) -> Optional[cf.ConvexFunc]:
        f = F.member(t)
        if closed:
            if cf.lsc_envelope_value(f, x) < thr:
                return None
            return cf.closed(f)
        return f if cf.eval_at(f, x) >= thr else None

    def part(t):
        key = t if F.is_finite else tuple(np.round(np.asarray(t, float), 15))
        if key not in cache:
            f = member(t)
            cache[key] = None if f is None else term(f)
        return cache[key]

    if F.is_finite:
        parts = [p for p in (part(l) for l in F.index.labels) if p is not None]
        if not parts:
            return _Union(GenSet.empty_set(n), True, 0)
        return _Union(hull_union([p[0] for p in parts], n), all(p[1] for p in parts), len(parts))

    G = fm._closed_family(F) if closed else F
    act = fm.active_set(G, x, 0.0)
    arg = fm.sup_result(G, x).argmax
    idx = F.index
    net = direction_net(n)
    finest = FINEST_FRACTION * (idx.upper - idx.lower).max()
    prev = None
    level = 1
    while True:
        T = _refined_samples(act.boxes, level) if act.boxes.shape[0] else np.zeros((0, idx.m))
        T = np.vstack([T, np.atleast_2d(arg)])
        parts = [p for p in (part(t) for t in T) if p is not None]
        cur = hull_union([p[0] for p in parts], n) if parts else GenSet.empty_set(n)
        ex = all(p[1] for p in parts)
        width = (act.boxes[:, 1] - act.boxes[:, 0]).max() / 2**level if act.boxes.shape[0] else 0.0
        if prev is not None:
            if cur.empty and prev.empty:
                break
            if not (cur.empty or prev.empty) and hausdorff_gap(cur, prev, net) <= refine_tol:
                break
        if width <= finest or T.shape[0] * 2**idx.m > MAX_SAMPLES:
            break
        prev = cur
        level += 1
    return _Union(cur, ex, len(parts))


def _subdiff_term(f: cf.ConvexFunc, x: np.ndarray, P: Optional[Polyhedron]) -> tuple[GenSet, bool]:
    g = f if P is None or P.n_constraints == 0 else cf.Sum((f, cf.Indicator(P)))
    r = cf.subdiff(g, x)
    return r.set, r.exact


def _domain(F: Family) -> Polyhedron:
    return fm.family_domain(F)


# --------------------------------------------------------------------------
# right-hand sides
# --------------------------------------------------------------------------


def rhs_compact0(F: Family, x, refine_tol: float = REFINE_TOL) -> GenSet:
    """``co U_{t in T(x)} ∂(f_t + I_{dom f})(x)``."""
    return _rhs_compact0(F, np.atleast_1d(np.asarray(x, float)), refine_tol).set


def _rhs_compact0(F, x, refine_tol=REFINE_TOL) -> _Union:
    D = _domain(F)
    return _active_union(F, x, lambda f: _subdiff_term(f, x, D), refine_tol)


def rhs_with_subspaces(
    F: Family, x, subspaces: Sequence = (), variant: str = "compact", refine_tol: float = REFINE_TOL
) -> GenSet:
    """``∩_L co U_t ∂(f_t + I_{L ∩ dom f})(x)`` over the listed subspaces and
    ``R^n``. Variant ``rqq`` uses ``cl f_t``, the closed sets ``cl(L ∩ dom f)``
    and the indices with ``(cl f_t)(x) = f(x)``."""
    return _rhs_with_subspaces(F, np.atleast_1d(np.asarray(x, float)), subspaces, variant, refine_tol).set


def _rhs_with_subspaces(F, x, subspaces, variant, refine_tol=REFINE_TOL) -> _Union:
    if variant not in ("compact1", "compact", "rqq"):
        raise ValueError(f"unknown variant {variant!r}")
    n = F.dim
    D = _domain(F)
    closed = variant == "rqq"
    terms, exact, count = [], True, 0
    for B in [np.eye(n)] + _check_subspaces(subspaces, x, skip=True):
        P = Polyhedron.subspace(B).intersect(D) if B.shape[1] < n else D
        if closed:
            P = P.closure()
        u = _active_union(F, x, lambda f, P=P: _subdiff_term(f, x, P), refine_tol, closed)
        terms.append(u.set)
        exact &= u.exact
        count = max(count, u.samples)
    return _Union(intersect_sets(terms), exact, count)


def _eps_terms(F: Family, x: np.ndarray, eps_grid, subspaces, refine_tol) -> list[tuple[float, GenSet, bool]]:
    """One set ``co U_t (∂_eps f_t(x) + N_{L ∩ dom f}(x))`` per (eps, L)."""
    n = F.dim
    D = _domain(F)
    out = []
    Ls = [None] + list(subspaces)
    for eps in eps_grid:
        if eps <= 0:
            raise ValueError("eps grid must be positive")
        for B in Ls:
            P = D if B is None or B.shape[1] == n else Polyhedron.subspace(B).intersect(D)
            N = normal_cone(P.closure(), x)

            def term(f, eps=eps, N=N):
                r = cf.eps_subdiff_set(f, x, eps)
                return minkowski_sum(r.set, N), r.exact

            u = _active_union(F, x, term, refine_tol)
            out.append((eps, u.set, u.exact))
    return out


def rhs_spe1(
    F: Family, x, eps_grid=DEFAULT_EPS_GRID, subspaces: Sequence = (), trace: Optional[list] = None
) -> GenSet:
    """``∩_{eps, L} co U_{t in T(x)} (∂_eps f_t(x) + N_{L ∩ dom f}(x))``.

    ``trace`` (a list) receives the running intersection after each term.
    """
    x = np.atleast_1d(np.asarray(x, float))
    subs = _check_subspaces(subspaces, x)
    return _intersect_running(_eps_terms(F, x, eps_grid, subs, REFINE_TOL), F.dim, trace)[0]


def rhs_sep2b(F: Family, x, eps_grid=DEFAULT_EPS_GRID, trace: Optional[list] = None) -> GenSet:
    """``∩_eps co U_{t in T(x)} (∂_eps f_t(x) + N_{dom f}(x))``."""
    x = np.atleast_1d(np.asarray(x, float))
    return _intersect_running(_eps_terms(F, x, eps_grid, [], REFINE_TOL), F.dim, trace)[0]


def _intersect_running(terms, n: int, trace: Optional[list]) -> tuple[GenSet, bool]:
    acc, exact = None, True
    for _, S, ex in terms:
        exact &= ex
        # nested terms shrink to a point as eps -> 0; rounding must not empty them
        acc = S if acc is None else intersect_sets([acc, S], slack=1e-9)
        if trace is not None:
            trace.append(acc)
    return (acc if acc is not None else GenSet.empty_set(n)), exact


def rhs_sep2(F: Family, x, strong: bool = False) -> GenSet:
    """``co U_t ∂(f_t + I_{dom f})(x)``, or with ``strong`` the form
    ``co U_t ∂f_t(x) + N_{dom f}(x)``."""
    x = np.atleast_1d(np.asarray(x, float))
    return (_rhs_corcompcont(F, x) if strong else _rhs_compact0(F, x)).set


def rhs_corcompcont(F: Family, x) -> GenSet:
    """``N_{dom f}(x) + co U_{t in T(x)} ∂f_t(x)`` (no closure taken)."""
    return _rhs_corcompcont(F, np.atleast_1d(np.asarray(x, float))).set


def _rhs_corcompcont(F, x, refine_tol=REFINE_TOL) -> _Union:
    u = _rhs_valadier(F, x, refine_tol)
    if u.set.empty:
        return u
    N = normal_cone(_domain(F).closure(), x)
    return _Union(minkowski_sum(N, u.set), u.exact, u.samples)


def rhs_valadier(F: Family, x) -> GenSet:
    """``co U_{t in T(x)} ∂f_t(x)``."""
    return _rhs_valadier(F, np.atleast_1d(np.asarray(x, float))).set


def _rhs_valadier(F, x, refine_tol=REFINE_TOL) -> _Union:
    return _active_union(F, x, lambda f: _subdiff_term(f, x, None), refine_tol)


def breve_subdiff_estimate(phi: cf.ConvexFunc, x, eps: float, samples: int = 64) -> cf.SubdiffResult:
    """Subgradients ``y* in ∂phi(y)`` gathered at points ``y`` with
    ``|y - x| <= eps``, ``|phi(y) - phi(x)| <= eps`` and ``|<y*, y - x>| <= eps``.

    The sample holds ``x`` itself, points on the coordinate axes through
    ``x`` and a Halton sequence in the ball. The result is an inner
    approximation of the enlarged subdifferential.
    """
    x = np.atleast_1d(np.asarray(x, float))
    n = x.size
    f0 = cf.eval_at(phi, x)
    if not math.isfinite(f0):
        return cf.SubdiffResult(GenSet.empty_set(n), False)
    eye = np.eye(n)
    radii = eps * np.array([0.5, 0.1, 0.01])
    axis = (np.vstack([eye, -eye])[:, None, :] * radii[None, :, None]).reshape(-1, n)
    h = qmc.Halton(d=n + 1, scramble=False).random(samples + 1)[1:]
    dirs = h[:, :n] - 0.5
    dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-300)
    ball = dirs * (eps * h[:, n:] ** (1.0 / n))
    Y = x + np.vstack([np.zeros((1, n)), axis, ball])
    FY = phi.values(Y)
    pts, rays = [], []
    for y, fy in zip(Y, FY):
        if not math.isfinite(fy) or abs(fy - f0) > eps:
            continue
        S = cf.subdiff(phi, y).set
        if S.empty:
            continue
        d = y - x
        dn = np.linalg.norm(d)
        for p in S.points:
            if abs(p @ d) <= eps:
                pts.append(p)
        for r in S.rays:
            if abs(r @ d) <= 1e-12 * dn:
                rays.append(r)
    if not pts:
        return cf.SubdiffResult(GenSet.empty_set(n), False)
    return cf.SubdiffResult(GenSet.build(np.array(pts), np.array(rays) if rays else None), False)


# --------------------------------------------------------------------------
# hypotheses
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Hypothesis:
    name: str
    status: str
    detail: str = ""

    def to_json(self) -> dict:
        return {"name": self.name, "status": self.status, "detail": self.detail}


def _domain_probes(F: Family, x: np.ndarray, extra) -> list[np.ndarray]:
    pts = [x]
    r, c = _domain(F).closure().max_slack_point()
    if c is not None:
        pts += [c, 0.5 * (x + c)]
    pts += [np.atleast_1d(np.asarray(p, float)) for p in extra]
    out = []
    for p in pts:
        if not any(np.array_equal(p, q) for q in out):
            out.append(p)
    return out


def _compactness(F: Family, usc_status: str) -> Hypothesis:
    name = "(i) T_eps0(x) compact"
    if F.is_finite:
        return Hypothesis(name, BY_CONSTRUCTION, "finite index set")
    if F.template.certified:
        return Hypothesis(name, BY_CONSTRUCTION, "closed subset of a compact index box; t -> f_t(x) continuous")
    if usc_status in (VERIFIED, BY_CONSTRUCTION):
        return Hypothesis(name, VERIFIED, "closed by sampled usc of t -> f_t(x)")
    return Hypothesis(name, UNVERIFIED, "closedness of the active set not established")


def _usc(F: Family, x: np.ndarray, eps0: float, probes, closed: bool, full_index: bool = False) -> Hypothesis:
    name = "(ii) t -> (cl f_t)(z) usc" if closed else "(ii) t -> f_t(z) usc"
    G = fm._closed_family(F) if closed else F
    if F.is_finite:
        return Hypothesis(name, BY_CONSTRUCTION, "finite index set (discrete topology)")
    if F.template.certified:
        return Hypothesis(name, BY_CONSTRUCTION, "polynomial coefficients in t")
    fx = fm.sup_eval(F, x)
    T_sub = None
    if not full_index and math.isfinite(fx):
        T_sub = fm.active_set(F, x, eps0)
    for z in probes:
        if not math.isfinite(fm.sup_eval(G, z)):
            continue
        rep = fm.usc_check(G, z, T_sub)
        if rep.status == "violated":
            return Hypothesis(name, VIOLATED, f"at z={_fmt(z)}: {rep.witness}")
    return Hypothesis(name, VERIFIED, "sampled sequences t +- 2^-k")


def _closure_condition(F: Family, probes) -> Hypothesis:
    name = "closure condition cl f = sup cl f_t"
    rep = fm.closure_condition_check(F, probes)
    for p in rep.probes:
        if not p.holds:
            return Hypothesis(
                name,
                VIOLATED,
                f"at z={_fmt(p.point)}: cl f = {p.closure_of_sup!r}, sup cl f_t = {p.sup_of_closures!r}",
            )
    return Hypothesis(name, VERIFIED, f"{len(rep.probes)} probes")


def _ri_nonempty(F: Family) -> Hypothesis:
    name = "ri(dom f) nonempty"
    r, _ = _domain(F).relative_interior_radius()
    if r > 1e-12:
        return Hypothesis(name, VERIFIED, f"relative Chebyshev radius {r:.6g}")
    return Hypothesis(name, VIOLATED, "dom f is empty")


def _continuity_on_ri(F: Family, ri: Hypothesis) -> Hypothesis:
    name = "f|aff(dom f) continuous on ri(dom f)"
    if ri.status == VIOLATED:
        return Hypothesis(name, VIOLATED, "ri(dom f) is empty")
    if F.is_finite or F.template.certified:
        return Hypothesis(name, BY_CONSTRUCTION, "convex and finite on the relatively open set ri(dom f)")
    return Hypothesis(name, UNVERIFIED, "finiteness of the supremum on dom f not established")


def _lsc_members(F: Family) -> Hypothesis:
    name = "f_t proper and lsc"
    if F.is_finite:
        members = list(zip(F.index.labels, F.members))
    else:
        per = 17 if F.index.m == 1 else 9
        members = [(tuple(t), F.template.instantiate(t)) for t in F.index.grid(per)]
    for label, f in members:
        D = cf.dom_polyhedron(f)
        if D.is_empty():
            return Hypothesis(name, VIOLATED, f"f_{label} has empty domain")
        if _has_missing_boundary(D):
            return Hypothesis(name, VIOLATED, f"f_{label} has a domain that is not closed")
    status = VERIFIED if F.is_finite or F.template.certified else UNVERIFIED
    return Hypothesis(name, status, "domains closed and nonempty")


def _has_missing_boundary(D: Polyhedron) -> bool:
    """Some strict row of ``D`` touches its closure."""
    C = D.closure()
    for j in np.flatnonzero(D.strict):
        face = C.intersect(Polyhedron(-D.A[j : j + 1], -D.b[j : j + 1], np.zeros(1, bool)))
        if not face.is_empty():
            return True
    return False


def _strong_a(F: Family, x: np.ndarray) -> Hypothesis:
    name = "(a) ri(dom f_t) meets dom f for t in T(x)"
    D = _domain(F)
    fx = fm.sup_eval(F, x)
    if not math.isfinite(fx):
        return Hypothesis(name, UNVERIFIED, "T(x) undefined")
    act = fm.active_set(F, x, 0.0)
    for t in fm.index_samples(F, act):
        Dt = cf.dom_polyhedron(F.member(t))
        if not _ri_meets(Dt, D):
            return Hypothesis(name, VIOLATED, f"at t={_fmt(t)}")
    return Hypothesis(name, VERIFIED if F.is_finite else UNVERIFIED, "LP on sampled active indices")


def _ri_meets(Dt: Polyhedron, D: Polyhedron) -> bool:
    n = D.dim
    if Dt.n_constraints == 0:
        return not D.is_empty()
    eq = Dt.implicit_equalities()
    rows = Polyhedron(Dt.A[eq], Dt.b[eq], np.zeros(int(eq.sum()), bool)) if eq.any() else Polyhedron.whole(n)
    strict_rows = Polyhedron(Dt.A[~eq], Dt.b[~eq], np.ones(int((~eq).sum()), bool))
    return not rows.intersect(strict_rows).intersect(D).is_empty()


def _continuous_somewhere(F: Family) -> Hypothesis:
    name = "f finite and continuous somewhere"
    r, _ = _domain(F).max_slack_point()
    if r > 1e-12:
        return Hypothesis(name, VERIFIED, f"interior ball of radius {r:.6g} in dom f")
    return Hypothesis(name, VIOLATED, "dom f has empty interior")


def _continuous_at(F: Family, x: np.ndarray) -> Hypothesis:
    name = "f finite and continuous at x"
    fx = fm.sup_eval(F, x)
    if not math.isfinite(fx):
        return Hypothesis(name, VIOLATED, "f(x) is not finite")
    margin = _domain(F).interior_margin(x)
    if margin > cf.CONT_MARGIN:
        return Hypothesis(name, VERIFIED, f"interior margin {margin:.6g}")
    return Hypothesis(name, VIOLATED, f"x is within {margin:.3g} of the boundary of dom f")


def check_hypotheses(F: Family, x, theorem: TheoremId, opts: Options = Options()) -> list[Hypothesis]:
    theorem = TheoremId(theorem)
    x = np.atleast_1d(np.asarray(x, float))
    probes = _domain_probes(F, x, opts.probes)
    T = TheoremId
    hyps: list[Hypothesis] = []
    closed_usc = theorem not in (T.compact0, T.compact1, T.valadier_final, T.valadier_classic)
    full_index = theorem == T.valadier_classic
    usc = _usc(F, x, opts.eps0, probes, closed_usc, full_index)
    if theorem == T.valadier_classic:
        hyps.append(Hypothesis("T compact", BY_CONSTRUCTION, "finite set or compact box"))
    else:
        hyps.append(_compactness(F, usc.status))
    hyps.append(usc)
    if theorem in (T.compact0, T.compact, T.rqq, T.spe1, T.sep2, T.sep2_strong, T.sep2b):
        hyps.append(_closure_condition(F, probes))
    if theorem == T.compact1:
        hyps.append(_lsc_members(F))
    if theorem in (T.compact0, T.sep2, T.sep2_strong, T.sep2b):
        ri = _ri_nonempty(F)
        hyps.append(ri)
        if theorem != T.sep2b:
            hyps.append(_continuity_on_ri(F, ri))
    if theorem == T.sep2_strong:
        hyps.append(_strong_a(F, x))
        hyps.append(Hypothesis("(b) f_t|aff(dom f_t) continuous on ri(dom f_t)", BY_CONSTRUCTION, "convex, finite on ri"))
    if theorem == T.corcompcont:
        hyps.append(_continuous_somewhere(F))
    if theorem in (T.valadier_final, T.valadier_classic):
        hyps.append(_continuous_at(F, x))
    return hyps


# --------------------------------------------------------------------------
# certification
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Inclusion:
    holds: bool
    slack: float
    allowance: float = 0.0  # grid truncation estimate added to the tolerance

    def to_json(self) -> dict:
        return {"holds": bool(self.holds), "slack": _num(self.slack), "allowance": _num(self.allowance)}


@dataclass(frozen=True)
class CertReport:
    theorem: str
    point: tuple
    verdict: str  # PASS | FAIL | HYPOTHESIS-UNMET
    lhs: GenSet
    rhs: GenSet
    lhs_in_rhs: Inclusion
    rhs_in_lhs: Inclusion
    gap: float
    hypotheses: tuple
    lhs_exact: bool
    rhs_exact: bool
    status: str = ""
    timing: dict = field(default_factory=dict)

    def to_json(self, timing: bool = True) -> dict:
        d = {
            "theorem": self.theorem,
            "point": list(self.point),
            "verdict": self.verdict,
            "status": self.status,
            "lhs": self.lhs.to_json(),
            "rhs": self.rhs.to_json(),
            "lhs_exact": self.lhs_exact,
            "rhs_exact": self.rhs_exact,
            "inclusion_lhs_in_rhs": self.lhs_in_rhs.to_json(),
            "inclusion_rhs_in_lhs": self.rhs_in_lhs.to_json(),
            "gap": _num(self.gap),
            "hypotheses": [h.to_json() for h in self.hypotheses],
        }
        if timing:
            d["timing"] = dict(self.timing)
        return d


def _num(v: float):
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


def _fmt(z) -> str:
    return "(" + ", ".join(f"{float(v):.6g}" for v in np.atleast_1d(z)) + ")"


def build_rhs(F: Family, x, theorem: TheoremId, opts: Options = Options()) -> tuple[GenSet, bool]:
    """The right-hand side of ``theorem`` at ``x`` and whether it is exact."""
    S, exact, _ = _build_rhs(F, x, theorem, opts)
    return S, exact


def _eps_tail(terms, n: int) -> float:
    """Estimated distance from the finest running intersection to its limit
    as eps -> 0: the geometric tail of the last per-level changes, with the
    ratio read off the last two changes (capped at 0.9)."""
    levels = sorted({e for e, _, _ in terms}, reverse=True)
    if len(levels) < 2:
        return 0.0
    runs = [_intersect_running([t for t in terms if t[0] >= e], n, None)[0] for e in levels[-3:]]
    if any(S.empty for S in runs):
        return 0.0
    d = [containment_slack(b, a) for a, b in zip(runs, runs[1:])]
    d = [max(v, 0.0) for v in d]
    r = 0.5
    if len(d) == 2 and d[0] > 0:
        r = min(max(d[1] / d[0], 0.5), 0.9)
    return d[-1] * r / (1.0 - r)


def _build_rhs(F: Family, x, theorem: TheoremId, opts: Options) -> tuple[GenSet, bool, float]:
    theorem = TheoremId(theorem)
    x = np.atleast_1d(np.asarray(x, float))
    n = F.dim
    if not math.isfinite(fm.sup_eval(F, x)):
        return GenSet.empty_set(n), True, 0.0
    T = TheoremId
    rt = opts.refine_tol
    if theorem in (T.compact0, T.sep2):
        u = _rhs_compact0(F, x, rt)
    elif theorem in (T.compact1, T.compact, T.rqq):
        u = _rhs_with_subspaces(F, x, opts.subspaces, theorem.value, rt)
    elif theorem in (T.spe1, T.sep2b):
        subs = _check_subspaces(opts.subspaces, x, skip=True) if theorem == T.spe1 else []
        terms = _eps_terms(F, x, opts.eps_grid, subs, rt)
        S, ex = _intersect_running(terms, n, None)
        return S, ex, _eps_tail(terms, n)
    elif theorem in (T.sep2_strong, T.corcompcont):
        u = _rhs_corcompcont(F, x, rt)
    else:
        u = _rhs_valadier(F, x, rt)
    return u.set, u.exact, 0.0


def certify(F: Family, x, theorem: TheoremId, opts: Options = Options()) -> CertReport:
    """Compare the oracle's ``∂f(x)`` with the theorem's right-hand side."""
    theorem = TheoremId(theorem)
    x = np.atleast_1d(np.asarray(x, float))
    t0 = time.perf_counter()
    lhs = oracle_subdiff(F, x, opts.oracle)
    t1 = time.perf_counter()
    rhs, rhs_exact, tail = _build_rhs(F, x, theorem, opts)
    t2 = time.perf_counter()
    hyps = tuple(check_hypotheses(F, x, theorem, opts))
    t3 = time.perf_counter()

    s_lr = containment_slack(rhs, lhs.set)
    s_rl = containment_slack(lhs.set, rhs)
    gap = hausdorff_gap(lhs.set, rhs, opts.oracle.net(F.dim))
    lr = Inclusion(s_lr <= opts.tol, s_lr)
    # an eps grid stops short of the limit, so its intersection is an outer
    # approximation; the reverse inclusion is allowed the last-step change
    rl = Inclusion(s_rl <= opts.tol + tail, s_rl, tail)
    status = ""
    if lhs.set.empty and rhs.empty:
        status = "subdifferential empty on both sides"
    elif not math.isfinite(fm.sup_eval(F, x)):
        status = "f(x) is not finite"
    if any(h.status == VIOLATED for h in hyps):
        verdict = "HYPOTHESIS-UNMET"
    elif lr.holds and rl.holds:
        verdict = "PASS"
    else:
        verdict = "FAIL"
    timing = {"oracle_s": t1 - t0, "rhs_s": t2 - t1, "hypotheses_s": t3 - t2, "total_s": time.perf_counter() - t0}
    return CertReport(
        theorem.value,
        tuple(float(v) for v in x),
        verdict,
        lhs.set,
        rhs,
        lr,
        rl,
        gap,
        hyps,
        lhs.exact,
        rhs_exact,
        status,
        timing,
    )
