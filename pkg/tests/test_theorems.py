import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import gen
from supcert import convexfn as cf
from supcert import family as fm
from supcert import theorems as th
from supcert.oracle import oracle_subdiff
from supcert.setgeom import GenSet, Polyhedron, contains, direction_net, hausdorff_gap

ABS_PAIR = fm.Family.finite([cf.Affine([1.0]), cf.Affine([-1.0])])
HALF_LINE = fm.Family.finite([cf.Indicator(Polyhedron.from_constraints(1, [([-1.0], 0.0)]))])
T_X = fm.Family.box([0.0], [1.0], fm.TAffine(fm.Poly(np.array([[1]]), np.array([[1.0]])), fm.Poly.const(0.0, 1)))
LEFT = cf.Indicator(Polyhedron.from_constraints(1, [([1.0], 0.0)]))  # x <= 0
RESTRICTED = fm.Family.finite([cf.Sum((cf.Affine([1.0]), LEFT)), cf.Sum((cf.Affine([-1.0]), LEFT))])
OPEN_PAIR = fm.Family.finite(
    [
        cf.Indicator(Polyhedron.from_constraints(1, [([-1.0], 0.0, True), ([1.0], 1.0)])),
        cf.Indicator(Polyhedron.from_constraints(1, [([1.0], 0.0, True), ([-1.0], 1.0)])),
    ]
)


def interval(S):
    return sorted(S.points.ravel().tolist()), S.rays.ravel().tolist()


# right-hand sides ---------------------------------------------------------------------


def test_compact0_abs_pair():
    assert interval(th.rhs_compact0(ABS_PAIR, [0.0])) == ([-1.0, 1.0], [])


def test_compact0_linear_box():
    # frozen oracle value: the directional derivatives of max(x, 0) at 0 give [0, 1]
    assert interval(oracle_subdiff(T_X, [0.0]).set)[0] == pytest.approx([0.0, 1.0], abs=1e-9)
    assert interval(th.rhs_compact0(T_X, [0.0])) == ([0.0, 1.0], [])


def test_compact0_half_line():
    assert interval(th.rhs_compact0(HALF_LINE, [0.0])) == ([0.0], [-1.0])


def test_subspaces_only_whole_space_equals_compact0():
    for F, x in ((ABS_PAIR, [0.0]), (HALF_LINE, [0.0]), (T_X, [0.0])):
        assert hausdorff_gap(th.rhs_with_subspaces(F, x, [], "compact"), th.rhs_compact0(F, x)) == 0.0


@given(st.integers(0, 10_000))
def test_smaller_subspace_gives_superset(seed):
    # derived: oracle comparison on random affine families in the plane
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, 2)
    F = fm.Family.finite([gen.affine(rng, 2) for _ in range(int(rng.integers(1, 5)))])
    L = x.reshape(2, 1)
    whole = th.rhs_with_subspaces(F, x, [], "compact")
    from supcert.theorems import _active_union, _subdiff_term

    P = Polyhedron.subspace(L)
    only_L = _active_union(F, x, lambda f: _subdiff_term(f, x, P), th.REFINE_TOL).set
    assert contains(only_L, whole)
    both = th.rhs_with_subspaces(F, x, [L], "compact")
    assert hausdorff_gap(both, oracle_subdiff(F, x).set) <= 1e-7


def test_compact1_equals_compact_on_lsc_family():
    for F, x in ((ABS_PAIR, [0.0]), (HALF_LINE, [0.0]), (RESTRICTED, [0.0])):
        a = th.rhs_with_subspaces(F, x, [], "compact1")
        b = th.rhs_with_subspaces(F, x, [], "compact")
        assert hausdorff_gap(a, b) == 0.0


def test_spe1_affine_family_collapses():
    rng = np.random.default_rng(0)
    F = fm.Family.finite([gen.affine(rng, 2) for _ in range(3)])
    x = np.zeros(2)
    assert hausdorff_gap(th.rhs_spe1(F, x), th.rhs_compact0(F, x)) <= 1e-12


def test_spe1_abs_every_term():
    trace = []
    S = th.rhs_spe1(fm.Family.finite([cf.Norm(1, 1.0, 1)]), [0.0], trace=trace)
    assert interval(S) == ([-1.0, 1.0], [])
    assert all(interval(T) == ([-1.0, 1.0], []) for T in trace)


def test_sep2b_full_domain_and_half_line():
    assert interval(th.rhs_sep2b(ABS_PAIR, [0.0])) == ([-1.0, 1.0], [])
    assert interval(th.rhs_sep2b(HALF_LINE, [0.0])) == ([0.0], [-1.0])


@given(st.integers(0, 10_000))
def test_sep2b_random_polyhedral_fine_grid(seed):
    # the intersection over eps converges to the subdifferential; an inactive
    # constraint at distance s leaves eps/s behind, so the grid runs to 2^-40
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    x = rng.uniform(-1, 1, n)
    F = gen.polyhedral_family(rng, n, x, size=int(rng.integers(1, 5)))
    grid = tuple(2.0**-k for k in range(41))
    assert hausdorff_gap(th.rhs_sep2b(F, x, eps_grid=grid), oracle_subdiff(F, x).set) <= 1e-6


def test_corcompcont_linear_box():
    assert interval(th.rhs_corcompcont(T_X, [0.0])) == ([0.0, 1.0], [])


def test_corcompcont_restricted_pair():
    # derived: the oracle gives [-1, inf) for |x| + I_{x <= 0} at 0
    assert interval(oracle_subdiff(RESTRICTED, [0.0]).set) == ([-1.0], [1.0])
    assert interval(th.rhs_corcompcont(RESTRICTED, [0.0])) == ([-1.0], [1.0])


def test_valadier_smooth_singleton():
    F = fm.Family.finite([cf.Quad(np.eye(2), [1.0, 0.0])])
    S = th.rhs_corcompcont(F, [1.0, 2.0])
    assert S.points.tolist() == [[2.0, 2.0]] and S.rays.shape[0] == 0


# breve estimate ---------------------------------------------------------------------------


def test_breve_abs():
    # the sandwich forces [-1, 1]: both neighbours equal [-1, 1]
    assert interval(cf.subdiff(cf.Norm(1, 1.0, 1), [0.0]).set)[0] == [-1.0, 1.0]
    assert interval(cf.eps_subdiff_set(cf.Norm(1, 1.0, 1), [0.0], 0.2).set)[0] == [-1.0, 1.0]
    assert interval(th.breve_subdiff_estimate(cf.Norm(1, 1.0, 1), [0.0], 0.1).set) == ([-1.0, 1.0], [])


@given(st.integers(0, 1000), st.floats(0.01, 1))
def test_breve_affine(seed, eps):
    f = gen.affine(np.random.default_rng(seed), 2)
    S = th.breve_subdiff_estimate(f, [0.3, -0.2], eps).set
    assert S.points.tolist() == [f.a.tolist()]


def test_breve_half_square():
    S = th.breve_subdiff_estimate(cf.Quad([[1.0]], [0.0]), [1.0], 0.1).set
    lo, hi = S.points.min(), S.points.max()
    assert 0.9 <= lo <= 1.0 <= hi <= 1.1


# certification ------------------------------------------------------------------------------


def test_certify_valadier_abs():
    r = th.certify(ABS_PAIR, [0.0], "valadier_classic")
    assert r.verdict == "PASS" and r.gap <= 1e-9


def test_certify_closure_violation():
    r = th.certify(OPEN_PAIR, [0.0], "compact")
    assert r.verdict == "HYPOTHESIS-UNMET"
    assert r.rhs_in_lhs.holds
    assert r.status == "subdifferential empty on both sides"
    assert any(h.name.startswith("closure") and h.status == th.VIOLATED for h in r.hypotheses)


@given(st.integers(0, 10_000))
def test_certify_random_polyhedral_compact0(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, 2)
    r = th.certify(gen.polyhedral_family(rng, 2, x), x, "compact0")
    assert r.verdict == "PASS" and r.gap <= 1e-7


def test_report_json_fields():
    d = th.certify(ABS_PAIR, [0.0], "compact0").to_json()
    assert set(d) >= {"theorem", "lhs", "rhs", "inclusion_lhs_in_rhs", "inclusion_rhs_in_lhs", "gap", "hypotheses", "timing"}
    assert "timing" not in th.certify(ABS_PAIR, [0.0], "compact0").to_json(timing=False)


def test_every_theorem_has_a_checklist():
    for t in th.TheoremId:
        hyps = th.check_hypotheses(ABS_PAIR, [0.0], t)
        assert hyps and all(h.status in (th.VERIFIED, th.BY_CONSTRUCTION, th.UNVERIFIED) for h in hyps)


def test_continuity_hypothesis_flags_boundary():
    hyps = th.check_hypotheses(RESTRICTED, [0.0], "valadier_final")
    assert any(h.status == th.VIOLATED for h in hyps)


# invariants -------------------------------------------------------------------------------------


@given(st.integers(0, 10_000), st.sampled_from(["compact0", "valadier_classic", "corcompcont"]))
def test_rhs_inside_lhs_even_when_unmet(seed, theorem):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, 2)
    F = gen.polyhedral_family(rng, 2, x)
    r = th.certify(F, x, theorem)
    assert r.rhs_in_lhs.holds


@given(st.integers(0, 10_000), st.sampled_from([0.5, 0.1, 0.01]))
def test_sandwich(seed, eps):
    rng = np.random.default_rng(seed)
    phi = gen.convex_func(rng, 2)
    x = rng.uniform(-1, 1, 2)
    U = direction_net(2)
    low = cf.subdiff(phi, x).set.supports(U)
    mid = th.breve_subdiff_estimate(phi, x, eps).set.supports(U)
    high = cf.eps_support_many(phi, x, 2 * eps, U)
    assert (mid - low >= -1e-8).all()
    assert (high - mid >= -1e-8).all()


@given(st.integers(0, 10_000))
def test_monotone_refinement(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, 2)
    F = gen.polyhedral_family(rng, 2, x, size=int(rng.integers(1, 5)))
    coarse = th.rhs_spe1(F, x, eps_grid=(1.0, 0.25))
    fine = th.rhs_spe1(F, x, eps_grid=(1.0, 0.25, 0.0625))
    assert contains(coarse, fine, 1e-9)
    L = [x.reshape(2, 1)]
    assert contains(th.rhs_with_subspaces(F, x, [], "compact"), th.rhs_with_subspaces(F, x, L, "compact"), 1e-9)


@given(st.integers(0, 10_000))
def test_rqq_matches_compact_on_lsc_family(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, 2)
    F = gen.polyhedral_family(rng, 2, x)
    a = th.rhs_with_subspaces(F, x, [], "compact")
    b = th.rhs_with_subspaces(F, x, [], "rqq")
    assert hausdorff_gap(a, b) <= 1e-9


@given(st.integers(0, 10_000))
def test_corcompcont_equals_valadier_inside(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, 2)
    F = fm.Family.finite([gen.polyhedral_func(rng, 2) for _ in range(3)])
    assert hausdorff_gap(th.rhs_corcompcont(F, x), th.rhs_valadier(F, x)) == 0.0
