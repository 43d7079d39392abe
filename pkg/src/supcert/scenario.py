"""JSON scenario files: a family of convex functions, query points and the
certification options.

Numeric leaves are either plain numbers/arrays or coefficient tables
``{"table": [{"exponent": [...], "value": ...}, ...]}`` giving a polynomial
in the index variable ``t`` (box-indexed families only).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import convexfn as cf
from . import family as fm
from .oracle import OracleConfig
from .setgeom import Polyhedron
from .theorems import DEFAULT_EPS_GRID, Options, TheoremId

Number = Union[float, list[float], list[list[float]]]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TableEntry(_Strict):
    exponent: list[int]
    value: Number


class CoefTable(_Strict):
    table: list[TableEntry] = Field(min_length=1)


Coef = Union[CoefTable, Number]


class AffineNode(_Strict):
    type: Literal["affine"]
    a: Coef
    b: Coef = 0.0


class QuadNode(_Strict):
    type: Literal["quad"]
    Q: Coef
    a: Coef
    b: Coef = 0.0


class NormNode(_Strict):
    type: Literal["norm"]
    kind: Union[Literal[1, 2], Literal["inf"]]
    scale: Coef = 1.0
    n: int = Field(ge=1)


class IndicatorNode(_Strict):
    type: Literal["indicator"]
    normals: Coef  # (r, n)
    offsets: Coef  # (r,)
    strict: list[bool] = Field(default_factory=list)


class MaxNode(_Strict):
    type: Literal["max"]
    items: list["Node"] = Field(min_length=1)


class SumNode(_Strict):
    type: Literal["sum"]
    items: list["Node"] = Field(min_length=1)


class ShiftedNode(_Strict):
    type: Literal["shifted"]
    child: "Node"
    translate: Coef


class TruncatedNode(_Strict):
    type: Literal["truncated"]
    child: "Node"
    floor: Coef


Node = Annotated[
    Union[AffineNode, QuadNode, NormNode, IndicatorNode, MaxNode, SumNode, ShiftedNode, TruncatedNode],
    Field(discriminator="type"),
]

for _cls in (MaxNode, SumNode, ShiftedNode, TruncatedNode):
    _cls.model_rebuild()


class FiniteIndexSpec(_Strict):
    kind: Literal["finite"]
    labels: Optional[list[Union[int, str]]] = None


class BoxIndexSpec(_Strict):
    kind: Literal["box"]
    lower: list[float] = Field(min_length=1, max_length=2)
    upper: list[float] = Field(min_length=1, max_length=2)
    base_resolution: int = Field(default=256, ge=256)


class Constraint(_Strict):
    normal: list[float]
    offset: float
    strict: bool = False


class SIPSpec(_Strict):
    lower: list[float]
    upper: list[float]
    target_tol: float = Field(default=1e-6, ge=0)
    max_iter: int = Field(default=500, ge=1)


class Tolerances(_Strict):
    cert: float = Field(default=1e-7, gt=0)
    refine: float = Field(default=1e-8, gt=0)
    reconstruction: float = Field(default=1e-7, gt=0)


class ScenarioFile(_Strict):
    name: str
    dim: int = Field(ge=1)
    index: Annotated[Union[FiniteIndexSpec, BoxIndexSpec], Field(discriminator="kind")]
    members: Optional[list[Node]] = None
    template: Optional[Node] = None
    domain_hint: Optional[list[Constraint]] = None
    points: list[list[float]] = Field(default_factory=list)
    theorems: list[TheoremId] = Field(default_factory=list)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    eps0: float = Field(default=1.0, gt=0)
    eps_grid: list[float] = Field(default_factory=lambda: list(DEFAULT_EPS_GRID))
    subspaces: list[list[list[float]]] = Field(default_factory=list)  # bases as lists of vectors
    probes: list[list[float]] = Field(default_factory=list)
    sip: Optional[SIPSpec] = None
    seed: int = 0

    @field_validator("eps_grid")
    @classmethod
    def _positive_grid(cls, v):
        if any(e <= 0 for e in v):
            raise ValueError("eps_grid entries must be positive")
        return v

    @model_validator(mode="after")
    def _shape(self):
        n = self.dim
        if isinstance(self.index, FiniteIndexSpec):
            if not self.members or self.template is not None:
                raise ValueError("a finite index needs 'members' and no 'template'")
            if self.index.labels is not None and len(self.index.labels) != len(self.members):
                raise ValueError("one label per member required")
        else:
            if self.template is None or self.members is not None:
                raise ValueError("a box index needs 'template' and no 'members'")
            if len(self.index.lower) != len(self.index.upper):
                raise ValueError("index box bounds differ in length")
            if any(a > b for a, b in zip(self.index.lower, self.index.upper)):
                raise ValueError("index box needs lower <= upper")
        for name, pts in (("points", self.points), ("probes", self.probes)):
            for p in pts:
                if len(p) != n:
                    raise ValueError(f"{name}: point {p} does not have dimension {n}")
        for c in self.domain_hint or []:
            if len(c.normal) != n:
                raise ValueError("domain_hint: normal has the wrong dimension")
        if self.sip is not None and (len(self.sip.lower) != n or len(self.sip.upper) != n):
            raise ValueError("sip: box bounds must have dimension dim")
        return self


class ScenarioError(ValueError):
    """A scenario that parses but does not describe a valid family."""


# --------------------------------------------------------------------------
# building
# --------------------------------------------------------------------------


def _const(c, where: str) -> np.ndarray:
    if isinstance(c, CoefTable):
        raise ScenarioError(f"{where}: coefficient tables need a box index")
    return np.asarray(c, float)


def _poly(c, m: int) -> fm.Poly:
    if not isinstance(c, CoefTable):
        return fm.Poly.const(c, m)
    exps = np.array([e.exponent for e in c.table], int)
    if exps.shape[1] != m:
        raise ScenarioError(f"exponent length {exps.shape[1]} does not match index dimension {m}")
    return fm.Poly(exps, np.array([np.asarray(e.value, float) for e in c.table]))


def build_function(node, n: int, where: str = "member") -> cf.ConvexFunc:
    C = lambda v: _const(v, where)  # noqa: E731
    if isinstance(node, AffineNode):
        return cf.Affine(C(node.a).reshape(n), float(C(node.b)))
    if isinstance(node, QuadNode):
        return cf.Quad(C(node.Q).reshape(n, n), C(node.a).reshape(n), float(C(node.b)))
    if isinstance(node, NormNode):
        return cf.Norm(node.kind, float(C(node.scale)), node.n)
    if isinstance(node, IndicatorNode):
        A = C(node.normals).reshape(-1, n)
        b = C(node.offsets).reshape(-1)
        strict = node.strict or [False] * b.size
        return cf.Indicator(Polyhedron(A, b, np.array(strict, bool)))
    if isinstance(node, MaxNode):
        return cf.MaxFinite(tuple(build_function(c, n, where) for c in node.items))
    if isinstance(node, SumNode):
        return cf.Sum(tuple(build_function(c, n, where) for c in node.items))
    if isinstance(node, ShiftedNode):
        return cf.Shifted(build_function(node.child, n, where), C(node.translate).reshape(n))
    if isinstance(node, TruncatedNode):
        return cf.Truncated(build_function(node.child, n, where), float(C(node.floor)))
    raise ScenarioError(f"unknown node {node!r}")


def build_template(node, n: int, m: int) -> fm.Template:
    P = lambda v: _poly(v, m)  # noqa: E731
    if isinstance(node, AffineNode):
        return fm.TAffine(P(node.a), P(node.b))
    if isinstance(node, QuadNode):
        return fm.TQuad(P(node.Q), P(node.a), P(node.b))
    if isinstance(node, NormNode):
        return fm.TNorm(node.kind, P(node.scale), node.n)
    if isinstance(node, IndicatorNode):
        normals, offsets = P(node.normals), P(node.offsets)
        r = offsets.shape[0] if offsets.shape else 1
        strict = tuple(node.strict) if node.strict else tuple(False for _ in range(r))
        return fm.TIndicator(normals, offsets, strict)
    if isinstance(node, MaxNode):
        return fm.TMax(tuple(build_template(c, n, m) for c in node.items))
    if isinstance(node, SumNode):
        return fm.TSum(tuple(build_template(c, n, m) for c in node.items))
    if isinstance(node, ShiftedNode):
        return fm.TShifted(build_template(node.child, n, m), P(node.translate))
    if isinstance(node, TruncatedNode):
        return fm.TTruncated(build_template(node.child, n, m), P(node.floor))
    raise ScenarioError(f"unknown node {node!r}")


def build_family(s: ScenarioFile) -> fm.Family:
    n = s.dim
    hint = None
    if s.domain_hint:
        hint = Polyhedron.from_constraints(n, [(c.normal, c.offset, c.strict) for c in s.domain_hint])
    try:
        if isinstance(s.index, FiniteIndexSpec):
            members = [build_function(node, n, f"members[{i}]") for i, node in enumerate(s.members)]
            if any(f.dim != n for f in members):
                raise ScenarioError("member dimension differs from dim")
            return fm.Family.finite(members, s.index.labels, hint)
        m = len(s.index.lower)
        tmpl = build_template(s.template, n, m)
        if tmpl.dim != n:
            raise ScenarioError("template dimension differs from dim")
        return fm.Family.box(s.index.lower, s.index.upper, tmpl, s.index.base_resolution, hint)
    except ScenarioError:
        raise
    except (ValueError, IndexError) as e:
        raise ScenarioError(str(e)) from e


def build_options(s: ScenarioFile) -> Options:
    n = s.dim
    subspaces = tuple(np.asarray(B, float).reshape(-1, n).T for B in s.subspaces)
    return Options(
        eps_grid=tuple(s.eps_grid),
        subspaces=subspaces,
        eps0=s.eps0,
        tol=s.tolerances.cert,
        refine_tol=s.tolerances.refine,
        probes=tuple(tuple(p) for p in s.probes),
        oracle=OracleConfig(reconstruction_tol=s.tolerances.reconstruction),
    )


def load(path) -> ScenarioFile:
    """Parse a scenario file; raises ``json.JSONDecodeError`` or pydantic's
    ``ValidationError`` with line or field locations."""
    text = Path(path).read_text()
    return ScenarioFile.model_validate(json.loads(text))


def dump(s: ScenarioFile) -> str:
    return s.model_dump_json(indent=2, exclude_defaults=False)


def parse(data: Any) -> ScenarioFile:
    return ScenarioFile.model_validate(data)
