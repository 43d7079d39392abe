import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import gen
from supcert import convexfn as cf
from supcert import family as fm
from supcert import scenario as sc
from supcert import sipsolve as sp
from supcert.cli import FIXTURES
from supcert.numkernel import LP, solve_lp
from supcert.setgeom import Polyhedron


def _fixture(name):
    return sc.build_family(sc.load(FIXTURES / "extra" / f"{name}.json"))


def test_abs_pair_minimum():
    F = fm.Family.finite([cf.Affine([1.0]), cf.Affine([-1.0])])
    r = sp.solve(sp.SIPProblem(F, Polyhedron.box([-3.0], [5.0])))
    assert r.status == "converged"
    assert r.value == pytest.approx(0.0, abs=1e-9)
    assert r.lower <= r.value


def test_chebyshev_fixture():
    # the best linear approximation of t^2 on [0, 1] is t - 1/8 with error 1/8
    F = _fixture("sip_chebyshev")
    r = sp.solve(sp.SIPProblem(F, Polyhedron.box([-10.0, -10.0], [10.0, 10.0])), 200)
    assert r.status == "converged"
    assert r.value == pytest.approx(0.125, abs=1e-6)
    assert r.x == pytest.approx([-0.125, 1.0], abs=1e-4)


def test_iteration_limit_fixture():
    F = _fixture("sip_iteration_limit")
    r = sp.solve(sp.SIPProblem(F, Polyhedron.box([-1.0], [2.7]), 0.0), 25)
    assert r.status == "iteration-limit"
    assert r.iterations == 25
    # still a valid bracket around the true minimum of x^2 - 0.6x, namely -0.09 at 0.3
    assert r.lower <= -0.09 + 1e-12 <= r.value + 1e-12


def test_domain_cut_moves_into_domain():
    # f = x + I_{x >= 1}; the first iterate at the box centre 0 lies outside dom f
    F = fm.Family.finite([cf.Sum((cf.Affine([1.0]), cf.Indicator(Polyhedron.from_constraints(1, [([-1.0], -1.0)]))))])
    r = sp.solve(sp.SIPProblem(F, Polyhedron.box([-2.0], [2.0])))
    assert r.cuts[0].kind == "domain"
    assert r.status == "converged" and r.value == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize(
    "box",
    [
        Polyhedron.from_constraints(1, [([1.0], 1.0)]),  # unbounded below
        Polyhedron.from_constraints(1, [([1.0], -1.0), ([-1.0], -1.0)]),  # empty
    ],
)
def test_malformed_box(box):
    F = fm.Family.finite([cf.Affine([1.0])])
    with pytest.raises(sp.MalformedProblem):
        sp.SIPProblem(F, box)


def test_dimension_mismatch():
    with pytest.raises(sp.MalformedProblem):
        sp.SIPProblem(fm.Family.finite([cf.Affine([1.0])]), Polyhedron.box([0, 0], [1, 1]))


def test_cut_history_json():
    F = fm.Family.finite([cf.Affine([1.0]), cf.Affine([-1.0])])
    d = sp.solve(sp.SIPProblem(F, Polyhedron.box([-3.0], [5.0]))).to_json()
    assert d["status"] == "converged"
    assert {"t", "g", "offset", "kind"} <= set(d["cut_history"][0])


@settings(max_examples=10)
@given(st.integers(0, 10_000))
def test_cuts_stay_below_f(seed):
    rng = np.random.default_rng(seed)
    F = gen.box_affine_family(rng, 2)
    box = Polyhedron.box([-2.0, -2.0], [2.0, 2.0])
    r = sp.solve(sp.SIPProblem(F, box, 1e-6), 30)
    assert sp.cut_slack(r, F, box, probes=300, seed=seed) >= -1e-9


@given(st.integers(0, 10_000))
def test_bounds_monotone_and_bracketing(seed):
    rng = np.random.default_rng(seed)
    n = 2
    F = fm.Family.finite([gen.affine(rng, n) for _ in range(int(rng.integers(2, 7)))])
    box = Polyhedron.box([-1.0] * n, [1.0] * n)
    r = sp.solve(sp.SIPProblem(F, box, 1e-9), 100)
    lo, up = np.array(r.lower_history), np.array(r.upper_history)
    assert (np.diff(lo) >= -1e-12).all() and (np.diff(up) <= 1e-12).all()
    # derived: the finite minimax problem is an LP in (x, z)
    cons = [(np.append(f.a, -1.0), -f.b, "<=") for f in F.members]
    cons += [(np.append(a, 0.0), b, "<=") for a, b in zip(box.A, box.b)]
    ref = solve_lp(LP(np.append(np.zeros(n), 1.0), cons, "minimize")).value
    assert lo[-1] <= ref + 1e-9 <= up[-1] + 2e-9
    if r.status == "converged":
        assert r.value == pytest.approx(ref, abs=1e-8)
