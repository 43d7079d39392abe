import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from supcert.numkernel import LP, solve_lp
from supcert.setgeom import (
    GenSet,
    Polyhedron,
    canonical_form,
    contains,
    direction_net,
    hausdorff_gap,
    hull_union,
    intersect_sets,
    minkowski_sum,
    normal_cone,
    support,
)


def seg(a, b):
    return GenSet.build(np.array([[a], [b]]))


def ray(p, r):
    return GenSet.build(np.array([[p]]), np.array([[r]]))


EMPTY = GenSet.empty_set(1)


def random_set(seed, n=2, rays=True):
    rng = np.random.default_rng(seed)
    P = np.round(rng.uniform(-2, 2, (int(rng.integers(1, 7)), n)), 3)
    R = np.round(rng.standard_normal((int(rng.integers(0, 2)) if rays else 0, n)), 3)
    return GenSet.build(P, R if R.shape[0] else None)


# hull_union -----------------------------------------------------------------------


def test_hull_of_two_points():
    H = hull_union([GenSet.point([1.0]), GenSet.point([-1.0])])
    assert sorted(H.points.ravel().tolist()) == [-1.0, 1.0]


def test_hull_absorbs_point_on_ray():
    H = hull_union([ray(0.0, -1.0), GenSet.point([0.0])])
    assert H.points.tolist() == [[0.0]] and H.rays.tolist() == [[-1.0]]


def test_hull_of_nothing_is_empty():
    assert hull_union([], 1).empty
    assert hull_union([EMPTY, EMPTY]).empty


# minkowski_sum ----------------------------------------------------------------------


def test_sum_of_segments():
    S = minkowski_sum(seg(0, 1), seg(0, 1))
    assert sorted(S.points.ravel().tolist()) == [0.0, 2.0]


def test_sum_with_ray():
    S = minkowski_sum(GenSet.point([0.0]), GenSet.cone([[-1.0]], 1))
    assert S.points.tolist() == [[0.0]] and S.rays.tolist() == [[-1.0]]


def test_sum_with_empty():
    assert minkowski_sum(EMPTY, seg(0, 1)).empty
    assert minkowski_sum(seg(0, 1), EMPTY).empty


# support ----------------------------------------------------------------------------


def test_support_values():
    assert support(seg(-1, 1), [1.0]) == 1.0
    assert support(ray(0.0, -1.0), [-1.0]) == math.inf
    assert support(EMPTY, [1.0]) == -math.inf


# normal_cone -------------------------------------------------------------------------


def test_normal_cone_half_line():
    N = normal_cone(Polyhedron.from_constraints(1, [([-1.0], 0.0)]), [0.0])
    assert N.points.tolist() == [[0.0]] and N.rays.tolist() == [[-1.0]]


def test_normal_cone_interior_is_origin():
    N = normal_cone(Polyhedron.whole(1), [3.0])
    assert not N.empty and N.points.tolist() == [[0.0]] and N.rays.shape[0] == 0


def test_normal_cone_outside_is_empty():
    assert normal_cone(Polyhedron.from_constraints(1, [([-1.0], 0.0)]), [-1.0]).empty


def test_origin_and_empty_print_differently():
    assert GenSet.origin(1).to_json() != EMPTY.to_json()


# containment and distance ---------------------------------------------------------------


def test_contains_and_gap():
    A, B = seg(-1, 1), seg(0, 1)
    assert contains(A, B) and not contains(B, A)
    assert hausdorff_gap(A, B) == pytest.approx(1.0)


def test_gap_identity_with_rays():
    assert hausdorff_gap(ray(0.0, -1.0), ray(0.0, -1.0)) == 0.0


def test_gap_recession_mismatch():
    assert hausdorff_gap(seg(0, 1), ray(0.0, -1.0)) == math.inf


# intersect_sets ----------------------------------------------------------------------------


def test_intersection_of_segments():
    S = intersect_sets([seg(-1, 1), seg(0, 2)])
    assert sorted(S.points.ravel().tolist()) == pytest.approx([0.0, 1.0])


def test_intersection_single():
    A = seg(-1, 1)
    assert hausdorff_gap(intersect_sets([A]), A) == 0.0


def test_intersection_disjoint():
    assert intersect_sets([seg(0, 1), seg(2, 3)]).empty


# properties ------------------------------------------------------------------------------


@given(st.integers(0, 100_000))
def test_canonical_idempotent(seed):
    A = random_set(seed)
    B = canonical_form(A)
    C = canonical_form(B)
    assert np.array_equal(B.points, C.points) and np.array_equal(B.rays, C.rays)


@given(st.integers(0, 100_000), st.integers(0, 100_000))
def test_hull_support_is_max(s1, s2):
    A, B = random_set(s1), random_set(s2)
    U = direction_net(2)
    H = hull_union([A, B])
    expect = np.maximum(A.supports(U), B.supports(U))
    got = H.supports(U)
    fin = np.isfinite(expect)
    assert np.array_equal(np.isfinite(got), fin)
    assert np.allclose(got[fin], expect[fin], rtol=0, atol=1e-12)


@given(st.integers(0, 100_000), st.integers(0, 100_000))
def test_sum_support_is_sum(s1, s2):
    A, B = random_set(s1), random_set(s2)
    U = direction_net(2)
    S = minkowski_sum(A, B)
    expect = A.supports(U) + B.supports(U)
    got = S.supports(U)
    fin = np.isfinite(expect)
    assert np.array_equal(np.isfinite(got), fin)
    assert np.allclose(got[fin], expect[fin], rtol=0, atol=1e-11)


@given(st.integers(0, 100_000), st.integers(0, 100_000), st.booleans())
def test_mutual_containment_iff_zero_gap(s1, s2, same):
    A = random_set(s1)
    B = canonical_form(GenSet.build(np.vstack([A.points, A.points.mean(axis=0)]), A.rays if A.rays.shape[0] else None)) if same else random_set(s2)
    both = contains(A, B, 1e-9) and contains(B, A, 1e-9)
    assert both == (hausdorff_gap(A, B) <= 1e-9)


@given(st.integers(0, 100_000))
def test_caratheodory(seed):
    # every hull generator is a convex combination of at most n + 1 inputs
    rng = np.random.default_rng(seed)
    n = 3
    sets = [GenSet.build(np.round(rng.uniform(-1, 1, (3, n)), 3)) for _ in range(3)]
    H = hull_union(sets)
    G = np.vstack([s.points for s in sets])
    for p in H.points:
        # minimize the number of nonzero weights via vertices of {w >= 0, sum w = 1, G'w = p}
        cons = [(G[:, j], p[j], "=") for j in range(n)] + [(np.ones(len(G)), 1.0, "=")]
        cons += [(np.eye(len(G))[i], 0.0, ">=") for i in range(len(G))]
        res = solve_lp(LP(np.zeros(len(G)), cons))
        assert res.status == "optimal"
        assert np.count_nonzero(res.point > 1e-12) <= n + 1
