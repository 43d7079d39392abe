"""Kelley cutting planes for ``min_{x in box} sup_t f_t(x)``.

Each iterate adds the cut ``f(x) >= f_{t_k}(x_k) + <g_k, x - x_k>`` with
``t_k`` a maximizing index and ``g_k`` a subgradient of ``f_{t_k}``; points
outside ``dom f`` get a separating domain cut instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import convexfn as cf
from . import family as fm
from .family import Family
from .numkernel import LP, solve_lp
from .setgeom import Polyhedron


class MalformedProblem(ValueError):
    """The bounding box is empty or unbounded."""


@dataclass(frozen=True)
class SIPProblem:
    family: Family
    box: Polyhedron
    target_tol: float = 1e-6

    def __post_init__(self):
        if self.box.dim != self.family.dim:
            raise MalformedProblem("box and family dimensions differ")
        if self.target_tol < 0:
            raise MalformedProblem("target_tol must be nonnegative")
        n = self.box.dim
        cons = [(a, b, "<=") for a, b in zip(self.box.A, self.box.b)]
        for i in range(n):
            for s in (1.0, -1.0):
                res = solve_lp(LP(s * np.eye(n)[i], cons, "maximize"))
                if res.status == "infeasible":
                    raise MalformedProblem("the box is empty")
                if res.status != "optimal":
                    raise MalformedProblem(f"the box is unbounded along coordinate {i}")


@dataclass(frozen=True)
class Cut:
    t: object  # index label or index point
    g: np.ndarray  # zero for domain cuts
    offset: float  # cut is  z >= <g, x> + offset  (or  <a, x> <= b  for domain cuts)
    kind: str = "value"  # "value" | "domain"

    def to_json(self) -> dict:
        t = self.t.tolist() if isinstance(self.t, np.ndarray) else self.t
        return {"t": t, "g": [float(v) for v in self.g], "offset": float(self.offset), "kind": self.kind}


@dataclass(frozen=True)
class SIPResult:
    x: np.ndarray
    value: float
    iterations: int
    cuts: tuple
    status: str  # converged | iteration-limit
    lower: float
    lower_history: tuple = field(default_factory=tuple)
    upper_history: tuple = field(default_factory=tuple)

    def to_json(self) -> dict:
        return {
            "x": [float(v) for v in self.x],
            "value": _num(self.value),
            "lower_bound": _num(self.lower),
            "iterations": self.iterations,
            "status": self.status,
            "cut_history": [c.to_json() for c in self.cuts],
        }


def _num(v: float):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def _lex_smallest(P: np.ndarray) -> np.ndarray:
    order = np.lexsort(P.T[::-1])
    return P[order[0]]


def _domain_cut(F: Family, x: np.ndarray):
    D = fm.family_domain(F).closure()
    if D.n_constraints == 0:
        return None
    viol = D.A @ x - D.b
    j = int(np.argmax(viol))
    if viol[j] <= 0:
        return None
    return D.A[j], D.b[j]


def solve(P: SIPProblem, max_iter: int = 500) -> SIPResult:
    """Kelley's method; stops when the best value found is within
    ``target_tol`` of the master lower bound."""
    F, box = P.family, P.box
    n = F.dim
    base = [(np.append(a, 0.0), b, "<=") for a, b in zip(box.A, box.b)]
    r, x = box.max_slack_point()
    if x is None:
        raise MalformedProblem("the box is empty")
    cons: list = []
    cuts: list[Cut] = []
    best_x, best = None, math.inf
    lower = -math.inf
    lows, ups = [], []
    status = "iteration-limit"
    it = 0
    for it in range(1, max_iter + 1):
        sr = fm.sup_result(F, x)
        fx = sr.value
        cut = None
        if math.isfinite(fx):
            if fx < best:
                best, best_x = fx, x.copy()
            t = F.index.labels[int(sr.argmax[0])] if F.is_finite else np.asarray(sr.argmax, float)
            S = cf.subdiff(F.member(t), x).set
            if not S.empty:
                g = _lex_smallest(S.points)
                cut = Cut(t, g, fx - float(g @ x))
                cons.append((np.append(g, -1.0), -cut.offset, "<="))
        if cut is None:
            dc = _domain_cut(F, x)
            if dc is None:
                raise MalformedProblem(f"no cut separates {x.tolist()} (f = {fx})")
            cut = Cut(None, dc[0], float(dc[1]), "domain")
            cons.append((np.append(dc[0], 0.0), float(dc[1]), "<="))
        cuts.append(cut)
        has_value_cut = any(c.kind == "value" for c in cuts)
        if has_value_cut:
            res = solve_lp(LP(np.append(np.zeros(n), 1.0), base + cons, "minimize"))
        else:
            res = solve_lp(LP(np.zeros(n + 1), base + cons, "minimize"))
        if res.status == "infeasible":
            raise MalformedProblem("dom f does not meet the box")
        if res.status != "optimal":
            raise MalformedProblem("master problem unbounded")
        x = res.point[:n]
        if has_value_cut:
            lower = max(lower, float(res.value))
        lows.append(lower)
        ups.append(best)
        if best - lower <= P.target_tol:
            status = "converged"
            break
    if best_x is None:
        best_x = x
    return SIPResult(best_x, best, it, tuple(cuts), status, lower, tuple(lows), tuple(ups))


def cut_slack(result: SIPResult, F: Family, box: Polyhedron, probes: int = 1000, seed: int = 0) -> float:
    """Smallest ``f(y) - cut(y)`` over value cuts and random ``y`` in the box
    (points outside ``dom f`` are skipped)."""
    n = F.dim
    lo, hi = _bounds(box)
    rng = np.random.default_rng(seed)
    Y = lo + (hi - lo) * rng.random((probes * 4, n))
    Y = Y[box.feasible(Y, closed=True)][:probes]
    FY = F.values(Y)
    fin = np.isfinite(FY)
    worst = math.inf
    for c in result.cuts:
        if c.kind != "value":
            continue
        s = FY[fin] - (Y[fin] @ c.g + c.offset)
        if s.size:
            worst = min(worst, float(s.min()))
    return worst


def _bounds(box: Polyhedron) -> tuple[np.ndarray, np.ndarray]:
    n = box.dim
    cons = [(a, b, "<=") for a, b in zip(box.A, box.b)]
    lo, hi = np.empty(n), np.empty(n)
    for i in range(n):
        e = np.eye(n)[i]
        hi[i] = solve_lp(LP(e, cons, "maximize")).value
        lo[i] = solve_lp(LP(e, cons, "minimize")).value
    return lo, hi
