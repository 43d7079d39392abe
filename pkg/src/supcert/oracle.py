"""Brute-force subdifferentials of a supremum function from its values.

Nothing here looks at the structure of the members: the supremum is only
evaluated, difference quotients give the support function of the
subdifferential, and the set is rebuilt from that support function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import recon
from .convexfn import is_polyhedral
from .family import Family
from .numkernel import minimize_scalar_batch, quotient_noise
from .setgeom import GenSet, direction_net, v_to_h


@dataclass(frozen=True)
class OracleConfig:
    direction_net_size: Optional[int] = None  # None: 32 n^2 (+ 2n axes)
    quotient_steps: tuple = tuple(float(s) for s in recon.QUOTIENT_STEPS)
    reconstruction_tol: float = 1e-7

    def __post_init__(self):
        if self.direction_net_size is not None and self.direction_net_size <= 0:
            raise ValueError("direction_net_size must be positive")
        s = np.asarray(self.quotient_steps, float)
        if s.size == 0 or (s <= 0).any() or (np.diff(s) >= 0).any():
            raise ValueError("quotient_steps must be positive and strictly decreasing")
        if self.reconstruction_tol <= 0:
            raise ValueError("reconstruction_tol must be positive")

    def net(self, n: int) -> np.ndarray:
        return direction_net(n, self.direction_net_size)


@dataclass(frozen=True)
class OracleResult:
    set: GenSet
    exact: bool
    notes: tuple = ()


def _values(F: Family):
    return lambda X: F.values(np.asarray(X, float))


def support_derivatives(F: Family, x, U: np.ndarray, cfg: OracleConfig = OracleConfig()) -> np.ndarray:
    """``f'(x; u)`` for each row of ``U`` (closed directional derivative)."""
    x = np.atleast_1d(np.asarray(x, float))
    fv = _values(F)
    return recon.quotient_limits(fv, x, np.atleast_2d(U), np.asarray(cfg.quotient_steps, float))


def oracle_subdiff(F: Family, x, cfg: OracleConfig = OracleConfig()) -> OracleResult:
    """``∂f(x)`` rebuilt from directional derivatives of ``f = sup_t f_t``.

    A jump of ``f`` below ``f(x)`` along some direction (``f`` not lsc at
    ``x``) makes the support ``-inf`` there and the answer empty.
    """
    x = np.atleast_1d(np.asarray(x, float))
    n = F.dim
    fv = _values(F)
    if not math.isfinite(float(fv(x[None, :])[0])):
        return OracleResult(GenSet.empty_set(n), True, ("x outside dom f",))
    steps = np.asarray(cfg.quotient_steps, float)
    member = recon.domain_member(fv, x)
    res = recon.reconstruct(
        lambda U: recon.quotient_limits(fv, x, U, steps, member=member), member, n, cfg.net(n)
    )
    return OracleResult(res.set, res.exact, res.notes)


def oracle_eps_support(F: Family, x, eps: float, U: np.ndarray) -> np.ndarray:
    """``inf_{s>0} (f(x+su) - f(x) + eps) / s`` for each row of ``U``."""
    x = np.atleast_1d(np.asarray(x, float))
    U = np.atleast_2d(np.asarray(U, float))
    n = x.size
    f0 = float(F.values(x[None, :])[0])
    if not math.isfinite(f0):
        return np.full(U.shape[0], -math.inf)

    def G(S):
        X = x[None, None, :] + S[:, :, None] * U[:, None, :]
        V = F.values(X.reshape(-1, n)).reshape(S.shape)
        return (V - f0 + eps) / S + quotient_noise(f0, V, S)

    return minimize_scalar_batch(G, U.shape[0])


def oracle_eps_subdiff(F: Family, x, eps: float, cfg: OracleConfig = OracleConfig()) -> OracleResult:
    """``∂_eps f(x)`` rebuilt from its support function."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0:
        return oracle_subdiff(F, x, cfg)
    x = np.atleast_1d(np.asarray(x, float))
    n = F.dim
    fv = _values(F)
    if not math.isfinite(float(fv(x[None, :])[0])):
        return OracleResult(GenSet.empty_set(n), True, ("x outside dom f",))
    member = recon.domain_member(fv, x)
    res = recon.reconstruct(lambda U: oracle_eps_support(F, x, eps, U), member, n, cfg.net(n))
    return OracleResult(res.set, res.exact, res.notes)


# --------------------------------------------------------------------------
# definitional spot checks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CrossValidation:
    vertices_checked: int
    vertex_failures: list = field(default_factory=list)  # (g, y, lhs, rhs)
    ray_failures: list = field(default_factory=list)  # (r, y, <r, y-x>)
    inflated_checked: int = 0
    inflated_missed: list = field(default_factory=list)  # points with no witness
    vacuous: bool = False

    @property
    def passed(self) -> bool:
        return not (self.vertex_failures or self.ray_failures or self.inflated_missed)

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "vacuous": self.vacuous,
            "vertices_checked": self.vertices_checked,
            "vertex_failures": len(self.vertex_failures),
            "ray_failures": len(self.ray_failures),
            "inflated_checked": self.inflated_checked,
            "inflated_missed": len(self.inflated_missed),
        }


def _probe_points(x: np.ndarray, n_probes: int, extra_dirs: np.ndarray, seed: int) -> np.ndarray:
    n = x.size
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((n_probes, n))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    r = 10.0 ** rng.uniform(-4, 1, n_probes)
    dirs = np.vstack([np.eye(n), -np.eye(n), extra_dirs]) if extra_dirs.size else np.vstack([np.eye(n), -np.eye(n)])
    scales = 10.0 ** np.arange(-4, 2)
    axis = (dirs[:, None, :] * scales[None, :, None]).reshape(-1, n)
    return x + np.vstack([r[:, None] * U, axis])


def cross_validate(A: GenSet, F: Family, x, n_probes: int = 200, seed: int = 0) -> CrossValidation:
    """Check ``A ⊆ ∂f(x)`` on probe points and, for polyhedral data, that
    points just outside ``A`` are refuted by some probe."""
    x = np.atleast_1d(np.asarray(x, float))
    n = x.size
    f0 = float(F.values(x[None, :])[0])
    if A.empty:
        return CrossValidation(0, vacuous=not math.isfinite(f0))
    if not math.isfinite(f0):
        return CrossValidation(0, [(A.points[0], x, math.inf, math.inf)])
    W = np.zeros((0, n))
    if A.points.shape[0]:
        W, beta = v_to_h(A.points, A.rays)
    Y = _probe_points(x, n_probes, W, seed)
    FY = F.values(Y)
    fin = np.isfinite(FY)
    D = Y - x
    vfail, rfail = [], []
    for g in A.points:
        lhs = FY - f0
        rhs = D @ g
        bad = np.flatnonzero(fin & (lhs < rhs - 1e-8 * (1.0 + np.abs(rhs))))
        if bad.size:
            i = bad[0]
            vfail.append((g, Y[i], float(lhs[i]), float(rhs[i])))
    for r in A.rays:
        pr = D @ r
        bad = np.flatnonzero(fin & (pr > 1e-8 * (1.0 + np.linalg.norm(D, axis=1))))
        if bad.size:
            i = bad[0]
            rfail.append((r, Y[i], float(pr[i])))
    # inflation: push each vertex 1e-3 along the normals of its facets
    missed, checked = [], 0
    if F.is_finite and all(is_polyhedral(f) for f in F.members) and W.shape[0]:
        for g in A.points:
            act = np.abs(W @ g - beta) <= 1e-9 * (1.0 + np.abs(beta))
            for w in W[act]:
                gg = g + 1e-3 * w
                checked += 1
                viol = fin & (FY - f0 < D @ gg - 1e-12)
                if not viol.any():
                    missed.append(gg)
    return CrossValidation(A.points.shape[0], vfail, rfail, checked, missed)

