import json

import numpy as np
import pytest
from pydantic import ValidationError

from supcert import family as fm
from supcert import scenario as sc
from supcert.cli import FIXTURES

ALL = sorted(FIXTURES.rglob("*.json"))

BASE = {
    "name": "pair",
    "dim": 1,
    "index": {"kind": "finite"},
    "members": [{"type": "affine", "a": [1.0]}, {"type": "affine", "a": [-1.0]}],
    "points": [[0.0]],
}


@pytest.mark.parametrize("path", ALL, ids=lambda p: p.stem)
def test_fixture_round_trip(path):
    s = sc.load(path)
    again = sc.parse(json.loads(sc.dump(s)))
    assert again == s
    assert sc.dump(again) == sc.dump(s)
    sc.build_family(s)


def test_defaults():
    s = sc.parse(BASE)
    assert s.eps0 == 1.0 and s.tolerances.cert == 1e-7 and s.seed == 0
    assert sc.build_options(s).tol == 1e-7


def test_builds_family():
    F = sc.build_family(sc.parse(BASE))
    assert fm.sup_eval(F, [-2.0]) == 2.0


def test_unknown_field_rejected():
    with pytest.raises(ValidationError):
        sc.parse({**BASE, "colour": "red"})
    bad = {**BASE, "members": [{"type": "affine", "a": [1.0], "slope": 2}]}
    with pytest.raises(ValidationError):
        sc.parse(bad)


def test_unknown_node_type_rejected():
    with pytest.raises(ValidationError):
        sc.parse({**BASE, "members": [{"type": "cubic", "a": [1.0]}]})


def test_table_rejected_for_finite_members():
    data = {**BASE, "members": [{"type": "affine", "a": {"table": [{"exponent": [1], "value": [1.0]}]}}]}
    with pytest.raises(sc.ScenarioError):
        sc.build_family(sc.parse(data))


def test_dimension_mismatch():
    with pytest.raises(ValidationError):
        sc.parse({**BASE, "points": [[0.0, 1.0]]})
    with pytest.raises(sc.ScenarioError):
        sc.build_family(sc.parse({**BASE, "members": [{"type": "affine", "a": [1.0, 2.0]}]}))


def test_box_needs_template():
    with pytest.raises(ValidationError):
        sc.parse({**BASE, "index": {"kind": "box", "lower": [0.0], "upper": [1.0]}})


def test_box_bounds_ordered():
    data = {**BASE, "members": None, "template": {"type": "affine", "a": [1.0]},
            "index": {"kind": "box", "lower": [1.0], "upper": [0.0]}}
    with pytest.raises(ValidationError):
        sc.parse(data)


def test_resolution_floor():
    data = {**BASE, "members": None, "template": {"type": "affine", "a": [1.0]},
            "index": {"kind": "box", "lower": [0.0], "upper": [1.0], "base_resolution": 128}}
    with pytest.raises(ValidationError):
        sc.parse(data)


def test_nonpositive_grid_rejected():
    with pytest.raises(ValidationError):
        sc.parse({**BASE, "eps_grid": [1.0, 0.0]})


def test_subspace_bases_become_columns():
    s = sc.parse({**BASE, "dim": 1, "subspaces": [[[1.0]]]})
    (B,) = sc.build_options(s).subspaces
    assert B.shape == (1, 1)
    s2 = sc.parse({"name": "p", "dim": 2, "index": {"kind": "finite"},
                   "members": [{"type": "affine", "a": [1.0, 0.0]}], "subspaces": [[[1.0, 2.0]]]})
    (B2,) = sc.build_options(s2).subspaces
    assert np.array_equal(B2, [[1.0], [2.0]])


def test_table_template_matches_coefficients():
    s = sc.load(FIXTURES / "suite" / "linear_box.json")
    F = sc.build_family(s)
    # f(x) = max_{t in [0,1]} t x
    assert fm.sup_eval(F, [2.0]) == pytest.approx(2.0)
    assert fm.sup_eval(F, [-2.0]) == pytest.approx(0.0, abs=1e-12)
