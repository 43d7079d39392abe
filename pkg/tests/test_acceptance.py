"""Acceptance criteria, each at its stated tolerance. Every test prints one
PASS/FAIL line, also when the assertion fails."""

import json
import math
import time

import numpy as np
import pytest
from scipy.optimize import linprog

import gen
from supcert import cli
from supcert import convexfn as cf
from supcert import family as fm
from supcert import scenario as sc
from supcert import sipsolve as sp
from supcert import theorems as th
from supcert.cli import FIXTURES
from supcert.oracle import oracle_eps_subdiff, oracle_subdiff
from supcert.setgeom import Polyhedron, canonical_form, contains, direction_net, hausdorff_gap


@pytest.fixture
def verdict(capsys):
    """``verdict(n, ok, detail)`` prints the criterion line and asserts."""

    def report(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return report


def _fixture(name):
    (path,) = FIXTURES.rglob(f"{name}.json")
    return sc.load(path)


def test_1_compact0_batch(verdict):
    start = time.perf_counter()
    worst, eligible, bad = 0.0, 0, []
    for seed in range(200):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        P = np.round(rng.uniform(-1, 1, (3, n)), 3)
        F = gen.polyhedral_family_at(rng, n, P, size=int(rng.integers(1, 9)))
        for x in P:
            r = th.certify(F, x, "compact0")
            if r.verdict == "HYPOTHESIS-UNMET":
                continue
            eligible += 1
            worst = max(worst, r.gap)
            if r.verdict != "PASS" or not r.gap <= 1e-7:
                bad.append((seed, x.tolist(), r.verdict, r.gap))
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 120.0
    verdict(1, ok, f"compact0 on {eligible} instances, max gap {worst:.2e}, {elapsed:.1f} s, failures {bad[:3]}")


def _vertices_match(A, B, tol):
    P, Q = canonical_form(A).points, canonical_form(B).points
    if P.shape != Q.shape:
        return False
    D = np.linalg.norm(P[:, None, :] - Q[None, :, :], axis=2)
    return bool(D.min(axis=1).max() <= tol and D.min(axis=0).max() <= tol)


def test_2_corcompcont_full_domain(verdict):
    worst, bad = 0.0, []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 4))
        x = np.round(rng.uniform(-1, 1, n), 3)
        F = gen.tied_family(rng, n, x, int(rng.integers(1, 6)))
        r = th.certify(F, x, "corcompcont")
        worst = max(worst, r.gap)
        if not (r.gap <= 1e-7 and _vertices_match(r.lhs, r.rhs, 1e-8) and r.rhs.rays.shape[0] == 0):
            bad.append((seed, r.verdict, r.gap))
    verdict(2, not bad, f"corcompcont on 100 full-domain families, max gap {worst:.2e}, failures {bad[:3]}")


def test_3_eps_formula(verdict):
    grid = tuple(2.0**-k for k in range(13))
    worst, far, nonmono = 0.0, [], []
    for seed in range(50):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 4))
        x = np.round(rng.uniform(-1, 1, n), 3)
        F = gen.polyhedral_family_at(rng, n, x, size=int(rng.integers(2, 6)), indicators=0.6)
        if fm.family_domain(F).n_constraints == 0:
            F = fm.Family.finite(list(F.members) + [cf.Sum((gen.affine(rng, n), gen.box_indicator(rng, n, x)))])
        trace = []
        S = th.rhs_sep2b(F, x, grid, trace=trace)
        if not all(contains(a, b, 1e-9) for a, b in zip(trace, trace[1:])):
            nonmono.append(seed)
        g = hausdorff_gap(S, oracle_subdiff(F, x).set)
        worst = max(worst, g)
        if not g <= 1e-5:
            far.append(seed)
    verdict(
        3,
        not far and not nonmono,
        f"sep2b to 2^-12 on 50 families: {50 - len(far)}/50 within 1e-5 (max gap {worst:.2e}), "
        f"monotone on {50 - len(nonmono)}/50",
    )


def test_4_sandwich(verdict):
    worst = math.inf
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 4))
        phi = gen.convex_func(rng, n)
        x = np.round(rng.uniform(-1, 1, n), 3)
        U = direction_net(n)
        low = cf.subdiff(phi, x).set.supports(U)
        for eps in (0.5, 0.1, 0.01):
            mid = th.breve_subdiff_estimate(phi, x, eps).set.supports(U)
            high = cf.eps_support_many(phi, x, 2 * eps, U)
            worst = min(worst, float((mid - low).min()), float((high - mid).min()))
    verdict(4, worst >= -1e-8, f"sandwich on 100 functions x 3 eps, min slack {worst:.2e}")


def test_5_truncation(verdict):
    bad, done = [], 0
    seed = 0
    while done < 50:
        rng = np.random.default_rng(10_000 + seed)
        seed += 1
        n = int(rng.integers(1, 4))
        x0 = np.round(rng.uniform(-1, 1, n), 3)
        F = gen.polyhedral_family_at(rng, n, x0)
        D = oracle_subdiff(F, x0).set
        if D.empty:
            continue
        done += 1
        f0 = fm.sup_eval(F, x0)
        X = x0 + rng.uniform(-3, 3, (1000, n))
        for c in (0.5, 2.0):
            L = fm.truncate_family(F, x0, c)
            if not np.array_equal(L.values(X), np.maximum(F.values(X), f0 - c)):
                bad.append((seed, c, "i"))
            for eps in (0.0, c / 4, c / 2):
                if fm.active_set(L, x0, eps).labels != fm.active_set(F, x0, eps).labels:
                    bad.append((seed, c, "iii", eps))
            if not hausdorff_gap(oracle_subdiff(L, x0).set, D) <= 1e-7:
                bad.append((seed, c, "iv"))
    verdict(5, not bad, f"truncation (i), (iii), (iv) on 50 families x c in {{0.5, 2}}, failures {bad[:3]}")


def test_6_closure_violation(verdict):
    s = _fixture("closure_violation")
    F = sc.build_family(s)
    r = th.certify(F, s.points[0], "compact", sc.build_options(s))
    ok = r.verdict == "HYPOTHESIS-UNMET" and r.rhs_in_lhs.holds
    verdict(6, ok, f"compact on the closure-violation fixture: {r.verdict}, RHS in LHS {r.rhs_in_lhs.holds}")


def test_7_continuum_index(verdict):
    s = _fixture("linear_box")
    F = sc.build_family(s)
    gaps = {t: th.certify(F, [0.0], t).gap for t in ("compact0", "valadier_classic")}
    ok = all(g <= 1e-6 for g in gaps.values())
    verdict(7, ok, f"t x on [0, 1] at 0: gaps {gaps}")


def _chebyshev_reference(k=14):
    # min z  s.t.  |a + b t - t^2| <= z  on the grid t = j 2^-k
    t = np.arange(2**k + 1) / 2**k
    ones = np.ones_like(t)
    A = np.vstack([np.column_stack([ones, t, -ones]), np.column_stack([-ones, -t, -ones])])
    b = np.concatenate([t**2, -(t**2)])
    res = linprog([0, 0, 1], A_ub=A, b_ub=b, bounds=[(-10, 10), (-10, 10), (None, None)], method="highs")
    return float(res.fun)


def test_8_sip_chebyshev(verdict):
    s = _fixture("sip_chebyshev")
    F = sc.build_family(s)
    ref = _chebyshev_reference()
    start = time.perf_counter()
    r = sp.solve(sp.SIPProblem(F, Polyhedron.box(s.sip.lower, s.sip.upper), s.sip.target_tol), 200)
    elapsed = time.perf_counter() - start
    ok = (
        r.status == "converged"
        and abs(r.value - 0.125) <= 1e-4
        and abs(r.value - ref) <= 1e-4
        and r.iterations <= 200
        and elapsed < 5.0
    )
    verdict(8, ok, f"value {r.value:.8f} (grid LP {ref:.8f}), {r.iterations} iterations, {elapsed:.2f} s")


def test_9_eps_subdiff_abs(verdict):
    phi = cf.Norm(1, 1.0, 1)
    F = fm.Family.finite([phi])
    worst = 0.0
    for eps in (0.5, 1.0, 3.0):
        ref = np.array(gen.grid_eps_interval(phi, 1.0, eps))
        assert np.abs(ref - [max(-1.0, 1.0 - eps), 1.0]).max() <= 1e-7
        for S in (cf.eps_subdiff_set(phi, [1.0], eps).set, oracle_eps_subdiff(F, [1.0], eps).set):
            got = np.array([S.points.min(), S.points.max()]) if S.rays.shape[0] == 0 else np.array([np.nan, np.nan])
            worst = max(worst, float(np.abs(got - ref).max()))
    verdict(9, worst <= 1e-7, f"eps-subdifferential of |.| at 1, max deviation {worst:.2e}")


def test_10_determinism(verdict, capsys):
    def run(*extra):
        cli.main(["certify", "--scenario", str(FIXTURES), "--format", "json", *extra])
        return cli.strip_timing(json.loads(capsys.readouterr().out))

    a, b, c = run(), run(), run("--jobs", "2")
    n = sum(len(sec["certificates"]) for sec in a["scenarios"])
    verdict(10, a == b == c, f"three certify runs over the corpus ({n} certificates) identical modulo timing")
