import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import gen
from supcert import convexfn as cf
from supcert import family as fm
from supcert.oracle import (
    OracleConfig,
    cross_validate,
    oracle_eps_subdiff,
    oracle_subdiff,
    support_derivatives,
)
from supcert.setgeom import GenSet, Polyhedron, hausdorff_gap

ABS_PAIR = fm.Family.finite([cf.Affine([1.0]), cf.Affine([-1.0])])
HALF_LINE = fm.Family.finite([cf.Indicator(Polyhedron.from_constraints(1, [([-1.0], 0.0)]))])
T_X = fm.Family.box([0.0], [1.0], fm.TAffine(fm.Poly(np.array([[1]]), np.array([[1.0]])), fm.Poly.const(0.0, 1)))


def grid_subdiff_interval(values, x, eps=0.0):
    """1-D ``{g : f(y) - f(x) + eps >= g (y - x)}`` over a dense grid of y."""
    far = np.geomspace(5.0, 1e8, 300)
    Y = np.concatenate([x - far[::-1], np.linspace(x - 5, x + 5, 200_001), x + far])
    Y = Y[np.abs(Y - x) > 1e-12]
    q = (values(Y[:, None]) - values(np.array([[x]]))[0] + eps) / (Y - x)
    return float(q[Y < x].max()), float(q[Y > x].min())


def test_abs_pair():
    assert sorted(oracle_subdiff(ABS_PAIR, [0.0]).set.points.ravel().tolist()) == pytest.approx([-1.0, 1.0], abs=1e-12)


def test_half_line_normal_cone():
    S = oracle_subdiff(HALF_LINE, [0.0]).set
    assert S.points.tolist() == [[0.0]] and S.rays.tolist() == [[-1.0]]


def test_linear_box_family():
    # frozen: grid sup over t of t*y, then the grid interval of subgradients at 0
    lo, hi = grid_subdiff_interval(lambda Y: np.maximum(Y[:, 0], 0.0), 0.0)
    assert (lo, hi) == pytest.approx((0.0, 1.0), abs=1e-9)
    S = oracle_subdiff(T_X, [0.0]).set
    assert sorted(S.points.ravel().tolist()) == pytest.approx([0.0, 1.0], abs=1e-9)


def test_eps_abs_at_one():
    lo, hi = grid_subdiff_interval(lambda Y: np.abs(Y[:, 0]), 1.0, 0.5)
    assert (lo, hi) == pytest.approx((0.5, 1.0), abs=1e-4)
    S = oracle_eps_subdiff(ABS_PAIR, [1.0], 0.5).set
    assert sorted(S.points.ravel().tolist()) == pytest.approx([0.5, 1.0], abs=1e-7)


def test_eps_zero_is_subdiff():
    A = oracle_eps_subdiff(ABS_PAIR, [0.0], 0.0).set
    assert hausdorff_gap(A, oracle_subdiff(ABS_PAIR, [0.0]).set) <= 1e-7


@given(st.integers(0, 10_000), st.floats(0, 5))
def test_eps_affine_is_singleton(seed, eps):
    rng = np.random.default_rng(seed)
    f = gen.affine(rng, 2)
    S = oracle_eps_subdiff(fm.Family.finite([f]), rng.uniform(-1, 1, 2), eps).set
    assert S.rays.shape[0] == 0
    assert np.abs(S.points - f.a).max() <= 1e-7


def test_config_validation():
    with pytest.raises(ValueError):
        OracleConfig(quotient_steps=(0.1, 0.2))
    with pytest.raises(ValueError):
        OracleConfig(direction_net_size=0)


def test_uses_values_only(monkeypatch):
    def boom(*a, **k):
        raise AssertionError("oracle must not call structural subdifferentials")

    monkeypatch.setattr(cf, "subdiff", boom)
    monkeypatch.setattr(cf, "eps_subdiff_set", boom)
    rng = np.random.default_rng(3)
    F = gen.polyhedral_family(rng, 2, np.zeros(2), size=4)
    oracle_subdiff(F, np.zeros(2))


def test_nonlsc_point_gives_empty():
    # f = I_{x<0} + I_{x>-1}; at the missing boundary f(0) = inf, at -1 also inf
    F = fm.Family.finite([cf.Indicator(Polyhedron.from_constraints(1, [([1.0], 0.0, True)]))])
    assert oracle_subdiff(F, [0.0]).set.empty


# cross validation --------------------------------------------------------------------


def test_cross_validate_accepts_oracle_output():
    rep = cross_validate(oracle_subdiff(ABS_PAIR, [0.0]).set, ABS_PAIR, [0.0])
    assert rep.passed and rep.vertices_checked == 2


def test_cross_validate_finds_inflation():
    A = GenSet.build(np.array([[-1.0], [1.1]]))
    rep = cross_validate(A, ABS_PAIR, [0.0])
    assert not rep.passed
    g, y, lhs, rhs = rep.vertex_failures[0]
    assert g.tolist() == [1.1] and y[0] > 0 and lhs < rhs


def test_cross_validate_vacuous():
    F = fm.Family.finite([cf.Indicator(Polyhedron.from_constraints(1, [([-1.0], 0.0)]))])
    rep = cross_validate(GenSet.empty_set(1), F, [-1.0])
    assert rep.passed and rep.vacuous


# properties -------------------------------------------------------------------------


@given(st.integers(0, 10_000))
def test_support_consistency(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-0.5, 0.5, 2)
    F = gen.polyhedral_family(rng, 2, x, size=int(rng.integers(1, 5)))
    cfg = OracleConfig()
    S = oracle_subdiff(F, x, cfg).set
    U = cfg.net(2)
    d = support_derivatives(F, x, U, cfg)
    assert (S.supports(U) <= d + cfg.reconstruction_tol * (1 + np.abs(np.where(np.isfinite(d), d, 0)))).all()


@given(st.integers(0, 10_000), st.sampled_from([2.0, 10.0]))
def test_scale_equivariance(seed, c):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-0.5, 0.5, 2)
    F = gen.polyhedral_family(rng, 2, x, size=int(rng.integers(1, 5)))
    A = oracle_subdiff(fm.scale_family(F, c), x).set
    B = oracle_subdiff(F, x).set
    B = GenSet.build(c * B.points, B.rays if B.rays.shape[0] else None)
    assert hausdorff_gap(A, B) <= 1e-8
