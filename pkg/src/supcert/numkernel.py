"""Dense numeric substrate: a two-phase simplex LP solver with Bland's rule,
a bracketing scalar minimizer, and a limit extrapolator for difference
quotients.

Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

FEAS_TOL = 1e-10
OPT_TOL = 1e-10
PIVOT_TOL = 1e-12
TOL_SCALAR = 1e-12

EPS = np.finfo(float).eps


class MalformedLPError(ValueError):
    """Raised when an LP has inconsistent dimensions or unknown senses."""


class EvaluationError(ArithmeticError):
    """Raised when a scalar function is non-finite at every probe."""


@dataclass(frozen=True)
class LP:
    """``goal`` ``objective . x`` subject to ``(normal . x) sense offset``.

    Variables are free. ``sense`` is one of ``"<="``, ``"="`` or ``">="``.
    """

    objective: np.ndarray
    constraints: Sequence[tuple] = ()
    goal: str = "minimize"

    def __post_init__(self):
        object.__setattr__(self, "objective", np.atleast_1d(np.asarray(self.objective, float)))


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    point: Optional[np.ndarray] = None
    value: Optional[float] = None
    iterations: int = 0


@dataclass(frozen=True)
class ScalarMin:
    s: float
    value: float
    at_limit: Optional[str] = None  # "left" | "right" | None


# --------------------------------------------------------------------------
# Simplex
# --------------------------------------------------------------------------


def _pivot(T: np.ndarray, basis: list, r: int, j: int) -> None:
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])
    basis[r] = j


def _run_simplex(T: np.ndarray, basis: list, n_cols: int, max_iter: int) -> tuple[str, int]:
    """Iterate on tableau ``T`` whose last row holds reduced costs and whose
    last column holds the right-hand side. Only the first ``n_cols`` columns
    may enter the basis."""
    m = T.shape[0] - 1
    for it in range(max_iter):
        cost = T[-1, :n_cols]
        candidates = np.flatnonzero(cost < -OPT_TOL)
        if candidates.size == 0:
            return "optimal", it
        j = int(candidates[0])  # Bland: lowest index
        col = T[:m, j]
        pos = col > PIVOT_TOL
        if not pos.any():
            return "unbounded", it
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / col[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-13 * max(1.0, abs(best)))
        r = min(ties, key=lambda i: basis[i])  # Bland: lowest basic index leaves
        _pivot(T, basis, int(r), j)
    raise RuntimeError("simplex iteration limit reached")


def solve_standard(
    c: np.ndarray, A: np.ndarray, b: np.ndarray, max_iter: int = 50_000
) -> LPResult:
    """Minimize ``c @ z`` subject to ``A @ z == b`` and ``z >= 0``."""
    c = np.asarray(c, float)
    A = np.atleast_2d(np.asarray(A, float))
    b = np.asarray(b, float).ravel()
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise MalformedLPError(f"shapes c{c.shape} A{A.shape} b{b.shape} disagree")
    if m == 0:
        if np.any(c < -OPT_TOL):
            return LPResult("unbounded")
        return LPResult("optimal", np.zeros(n), 0.0)

    sign = np.where(b < 0, -1.0, 1.0)
    A = A * sign[:, None]
    b = b * sign
    scale = max(1.0, float(np.abs(b).max()))

    # phase 1: artificial basis
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    _, it1 = _run_simplex(T, basis, n + m, max_iter)
    if -T[-1, -1] > FEAS_TOL * scale * m:
        return LPResult("infeasible", iterations=it1)

    # drive remaining artificials out of the basis
    keep = []
    for i in range(m):
        if basis[i] >= n:
            nz = np.flatnonzero(np.abs(T[i, :n]) > 1e-9)
            if nz.size:
                _pivot(T, basis, i, int(nz[0]))
                keep.append(i)
        else:
            keep.append(i)
    rows = keep + [m]
    T = np.hstack([T[rows][:, :n], T[rows][:, -1:]])
    basis = [basis[i] for i in keep]

    # phase 2
    T[-1, :] = 0.0
    T[-1, :n] = c
    for i, j in enumerate(basis):
        if c[j] != 0.0:
            T[-1] -= c[j] * T[i]
    status, it2 = _run_simplex(T, basis, n, max_iter)
    if status == "unbounded":
        return LPResult("unbounded", iterations=it1 + it2)
    z = np.zeros(n)
    for i, j in enumerate(basis):
        z[j] = T[i, -1]
    z = np.maximum(z, 0.0)
    return LPResult("optimal", z, float(c @ z), it1 + it2)


def solve_lp(problem: LP) -> LPResult:
    """Solve an LP over free variables by splitting ``x = x+ - x-`` and adding
    slacks for inequality rows."""
    c = problem.objective
    n = c.size
    if problem.goal not in ("minimize", "maximize"):
        raise MalformedLPError(f"unknown goal {problem.goal!r}")
    rows, rhs, senses = [], [], []
    for k, con in enumerate(problem.constraints):
        normal, offset, sense = con
        normal = np.atleast_1d(np.asarray(normal, float))
        if normal.shape != (n,):
            raise MalformedLPError(f"constraint {k} has dimension {normal.size}, objective has {n}")
        if sense == ">=":
            normal, offset, sense = -normal, -offset, "<="
        if sense not in ("<=", "="):
            raise MalformedLPError(f"constraint {k}: unknown sense {sense!r}")
        rows.append(normal)
        rhs.append(float(offset))
        senses.append(sense)
    m = len(rows)
    n_slack = senses.count("<=")
    A = np.zeros((m, 2 * n + n_slack))
    k = 0
    for i, (row, sense) in enumerate(zip(rows, senses)):
        A[i, :n] = row
        A[i, n : 2 * n] = -row
        if sense == "<=":
            A[i, 2 * n + k] = 1.0
            k += 1
    sgn = 1.0 if problem.goal == "minimize" else -1.0
    cc = np.concatenate([sgn * c, -sgn * c, np.zeros(n_slack)])
    res = solve_standard(cc, A, np.array(rhs))
    if res.status != "optimal":
        return LPResult(res.status, iterations=res.iterations)
    x = res.point[:n] - res.point[n : 2 * n]
    return LPResult("optimal", x, float(c @ x), res.iterations)


# --------------------------------------------------------------------------
# Scalar minimization
# --------------------------------------------------------------------------


def _safe(g: Callable[[float], float], s: float) -> float:
    try:
        v = float(g(s))
    except (OverflowError, ZeroDivisionError, FloatingPointError):
        return math.inf
    return v if not math.isnan(v) else math.inf


def _golden(g, lo: float, hi: float, tol: float) -> tuple[float, float]:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    gc, gd = _safe(g, c), _safe(g, d)
    while b - a > tol * max(1.0, abs(a) + abs(b)):
        if gc <= gd:
            b, d, gd = d, c, gc
            c = b - invphi * (b - a)
            gc = _safe(g, c)
        else:
            a, c, gc = c, d, gd
            d = a + invphi * (b - a)
            gd = _safe(g, d)
    return (c, gc) if gc <= gd else (d, gd)


def minimize_scalar(
    g: Callable[[float], float],
    interval: tuple[float, float] = (0.0, math.inf),
    tol: float = TOL_SCALAR,
) -> ScalarMin:
    """Minimize a unimodal ``g`` over ``(a, b]``.

    A geometric sweep ``s = 2**k * s0`` brackets the minimum, golden-section
    search refines it. When the sweep is still decreasing at the smallest
    (largest) probe the infimum is a limit and ``at_limit`` says which end.
    """
    a, b = interval
    if math.isinf(b):
        grid = [2.0**k for k in range(-52, 53)]
    else:
        grid = [b * 2.0**-k for k in range(0, 53)][::-1]
    grid = [s for s in grid if s > a]
    if not grid:
        raise ValueError(f"empty interval {interval}")
    vals = [_safe(g, s) for s in grid]
    if all(math.isinf(v) for v in vals):
        raise EvaluationError("objective non-finite at every probe")
    i = int(np.argmin(vals))
    if i == 0 and (a == 0.0 or grid[0] / 2 > a):
        # still decreasing towards the left end
        return ScalarMin(grid[0], vals[0], "left")
    if i == len(grid) - 1 and math.isinf(b):
        return ScalarMin(grid[-1], vals[-1], "right")
    lo = grid[i - 1] if i > 0 else max(a, grid[0] / 2)
    hi = grid[i + 1] if i < len(grid) - 1 else grid[i]
    s, v = _golden(g, lo, hi, tol)
    if vals[i] <= v:
        s, v = grid[i], vals[i]
    at = "right" if (not math.isinf(b) and s == grid[-1]) else None
    return ScalarMin(s, v, at)


# --------------------------------------------------------------------------
# Limits of difference quotients
# --------------------------------------------------------------------------


def extrapolate_to_zero(steps: np.ndarray, q: np.ndarray, noise: np.ndarray) -> float:
    """Limit of ``q(s)`` as ``s -> 0`` from samples on a decreasing geometric
    grid with ratio 1/2.

    Richardson values ``2 q(s/2) - q(s)`` are exact for quotients affine in
    ``s`` (piecewise-linear or quadratic data along a ray). The first run of
    three agreeing Richardson values, within the rounding noise, is returned.
    """
    q = np.asarray(q, float)
    noise = np.asarray(noise, float)
    k = q.size
    if k == 1:
        return float(q[0])
    r = 2.0 * q[1:] - q[:-1]
    rn = 3.0 * np.maximum(noise[1:], noise[:-1]) + 1e-15 * (1.0 + np.abs(r))
    for j in range(r.size - 2):
        t1 = max(rn[j], rn[j + 1])
        t2 = max(rn[j + 1], rn[j + 2])
        if abs(r[j] - r[j + 1]) <= t1 and abs(r[j + 1] - r[j + 2]) <= t2:
            return float(r[j + 1])
    ok = noise < 1e-7
    if ok.any():
        return float(q[ok].min())
    return float(q[-1])


def quotient_noise(f0: float, values: np.ndarray, steps: np.ndarray) -> np.ndarray:
    """Rounding-noise estimate of ``(values - f0) / steps``."""
    return 8.0 * EPS * (abs(f0) + np.abs(values) + 1.0) / steps


def minimize_scalar_batch(
    G: Callable[[np.ndarray], np.ndarray],
    count: int,
    tol: float = TOL_SCALAR,
) -> np.ndarray:
    """Vectorized :func:`minimize_scalar` over ``(0, inf)`` for ``count``
    independent unimodal functions.

    ``G(S)`` maps an array of step sizes with shape ``(count, k)`` to values
    of the same shape. Returns the minimal values; rows that are non-finite
    at every probe give ``+inf``.
    """
    grid = 2.0 ** np.arange(-52, 53, dtype=float)
    S = np.broadcast_to(grid, (count, grid.size))
    with np.errstate(all="ignore"):
        V = np.asarray(G(np.array(S)), float)
    V = np.where(np.isnan(V), np.inf, V)
    best = V.min(axis=1)
    i = V.argmin(axis=1)
    lo = grid[np.maximum(i - 1, 0)]
    hi = grid[np.minimum(i + 1, grid.size - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo.copy(), hi.copy()
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)

    def ev(s):
        with np.errstate(all="ignore"):
            v = np.asarray(G(s[:, None]), float)[:, 0]
        return np.where(np.isnan(v), np.inf, v)

    gc, gd = ev(c), ev(d)
    for _ in range(200):
        if np.all(b - a <= tol * np.maximum(1.0, np.abs(a) + np.abs(b))):
            break
        left = gc <= gd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        nc = np.where(left, b - invphi * (b - a), d)
        nd = np.where(left, c, a + invphi * (b - a))
        gnew = ev(np.where(left, nc, nd))
        gc, gd = np.where(left, gnew, gd), np.where(left, gc, gnew)
        c, d = nc, nd
    return np.minimum(best, np.minimum(gc, gd))
