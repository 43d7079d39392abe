"""Command line: evaluate, inspect and certify scenario files.

Exit codes: 0 all pass, 1 a formula failed (or ``f(x)`` undefined for
``eval``/``active-set``), 2 a hypothesis is unmet, 3 the cutting-plane
solver hit its iteration limit, 64 usage or parse errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import ValidationError

from . import __version__
from . import family as fm
from . import scenario as sc
from . import sipsolve
from . import theorems as th
from .oracle import cross_validate, oracle_subdiff
from .setgeom import Polyhedron

EXIT_OK, EXIT_FAIL, EXIT_UNMET, EXIT_NONCONVERGED, EXIT_USAGE = 0, 1, 2, 3, 64
REPORT_FORMAT = "supcert-report/1"
FIXTURES = Path(__file__).parent / "fixtures"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


# --------------------------------------------------------------------------
# input
# --------------------------------------------------------------------------


def expand_paths(items) -> list[Path]:
    """Files as given; directories contribute their ``*.json`` files, sorted."""
    out = []
    for it in items:
        p = Path(it)
        if p.is_dir():
            out.extend(sorted(p.rglob("*.json")))
        elif p.is_file():
            out.append(p)
        else:
            raise UsageError(f"{it}: no such file or directory")
    if not out:
        raise UsageError("no scenario files given")
    return out


def load_scenario(path) -> sc.ScenarioFile:
    """Parse and build-check one file; diagnostics carry line or field."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise UsageError(f"{path}: {e.strerror}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    try:
        s = sc.parse(data)
    except ValidationError as e:
        lines = [f"{path}: invalid scenario"]
        for err in e.errors():
            loc = ".".join(str(v) for v in err["loc"]) or "<root>"
            lines.append(f"  {loc}: {err['msg']}")
        raise UsageError("\n".join(lines)) from e
    try:
        sc.build_family(s)
    except sc.ScenarioError as e:
        raise UsageError(f"{path}: {e}") from e
    return s


def parse_point(text: str, n: int) -> np.ndarray:
    try:
        x = np.array([float(v) for v in text.split(",")])
    except ValueError as e:
        raise UsageError(f"--point: {text!r} is not a comma-separated list of numbers") from e
    if x.size != n:
        raise UsageError(f"--point: expected {n} coordinates, got {x.size}")
    return x


def _points(args, s: sc.ScenarioFile) -> list[np.ndarray]:
    if args.point is not None:
        return [parse_point(args.point, s.dim)]
    if not s.points:
        raise UsageError(f"{s.name}: no query points (pass --point)")
    return [np.asarray(p, float) for p in s.points]


def _options(s: sc.ScenarioFile, eps0: Optional[float]) -> th.Options:
    opts = sc.build_options(s)
    return replace(opts, eps0=eps0) if eps0 is not None else opts


# --------------------------------------------------------------------------
# rendering
# --------------------------------------------------------------------------


def _fmt_point(x) -> str:
    return "(" + ", ".join(f"{float(v):.6g}" for v in x) + ")"


def _fmt_value(v: float) -> str:
    if math.isinf(v):
        return "+inf" if v > 0 else "-inf"
    return f"{v:.10g}"


def _fmt_set(d: dict) -> str:
    if d["empty"]:
        return "empty"
    pts = "co{" + ", ".join(_fmt_point(p) for p in d["points"]) + "}"
    if d["rays"]:
        pts += " + cone{" + ", ".join(_fmt_point(r) for r in d["rays"]) + "}"
    return pts


def _emit(args, payload, text_lines: list[str]) -> None:
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
    if args.format == "json":
        print(json.dumps(payload, indent=2))
    else:
        print("\n".join(text_lines))


def _active_json(A: fm.ActiveSet) -> dict:
    d = {"epsilon": A.epsilon, "describe": A.describe(), "certified": A.certified}
    if A.labels is not None:
        d["labels"] = list(A.labels)
    else:
        d["boxes"] = [[list(map(float, lo)), list(map(float, hi))] for lo, hi in A.intervals()]
    return d


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _eval_like(args, eps_levels) -> int:
    code = EXIT_OK
    payload, lines = [], []
    for path in expand_paths(args.scenario):
        s = load_scenario(path)
        F = sc.build_family(s)
        eps0 = args.eps0 if args.eps0 is not None else s.eps0
        for x in _points(args, s):
            fx = fm.sup_eval(F, x)
            entry = {"scenario": s.name, "point": x.tolist(), "value": _fmt_value(fx) if not math.isfinite(fx) else fx}
            lines.append(f"{s.name}  f{_fmt_point(x)} = {_fmt_value(fx)}")
            if not math.isfinite(fx):
                entry["active_sets"] = "undefined"
                lines.append("  active set: undefined (f(x) is not finite)")
                code = EXIT_FAIL
            else:
                sets = []
                for eps in eps_levels(eps0):
                    A = fm.active_set(F, x, eps)
                    sets.append(_active_json(A))
                    lines.append(f"  T_{eps:g}(x) = {A.describe()}")
                entry["active_sets"] = sets
            payload.append(entry)
    _emit(args, payload, lines)
    return code


def cmd_eval(args) -> int:
    return _eval_like(args, lambda e: (0.0, e))


def cmd_active_set(args) -> int:
    return _eval_like(args, lambda e: (e,))


def cmd_subdiff(args) -> int:
    payload, lines = [], []
    for path in expand_paths(args.scenario):
        s = load_scenario(path)
        F = sc.build_family(s)
        opts = _options(s, args.eps0)
        for x in _points(args, s):
            res = oracle_subdiff(F, x, opts.oracle)
            cv = cross_validate(res.set, F, x, seed=s.seed)
            payload.append(
                {
                    "scenario": s.name,
                    "point": x.tolist(),
                    "subdifferential": res.set.to_json(),
                    "exact": res.exact,
                    "cross_validation": cv.to_json(),
                }
            )
            lines.append(f"{s.name}  ∂f{_fmt_point(x)} = {_fmt_set(res.set.to_json())}")
            lines.append(f"  cross-validation: {'passed' if cv.passed else 'FAILED'}")
    _emit(args, payload, lines)
    return EXIT_OK


def certify_scenario(path: str, theorems: Optional[list], eps0: Optional[float], point: Optional[str]) -> dict:
    """One scenario's section of the run report (picklable for workers)."""
    s = load_scenario(path)
    F = sc.build_family(s)
    opts = _options(s, eps0)
    ids = [th.TheoremId(t) for t in theorems] if theorems else list(s.theorems)
    pts = [parse_point(point, s.dim)] if point is not None else [np.asarray(p, float) for p in s.points]
    certs, cvs = [], []
    for x in pts:
        lhs = None
        for t in ids:
            r = th.certify(F, x, t, opts)
            certs.append(r.to_json())
            lhs = r.lhs
        if lhs is None:
            lhs = oracle_subdiff(F, x, opts.oracle).set
        cv = cross_validate(lhs, F, x, seed=s.seed)
        cvs.append({"point": x.tolist(), **cv.to_json()})
    return {
        "name": s.name,
        "source": str(path),
        "tolerances": s.tolerances.model_dump(),
        "eps0": opts.eps0,
        "certificates": certs,
        "cross_validation": cvs,
    }


def summarize(sections: list[dict]) -> dict:
    counts = {"PASS": 0, "FAIL": 0, "HYPOTHESIS-UNMET": 0}
    for sec in sections:
        for c in sec.get("certificates", []):
            counts[c["verdict"]] += 1
    return counts


def exit_code_for(counts: dict, sip_statuses=()) -> int:
    if counts.get("FAIL"):
        return EXIT_FAIL
    if counts.get("HYPOTHESIS-UNMET"):
        return EXIT_UNMET
    if any(st != "converged" for st in sip_statuses):
        return EXIT_NONCONVERGED
    return EXIT_OK


def environment_stamp() -> dict:
    return {
        "version": __version__,
        "numpy": np.__version__,
        "tolerances": {"cert": th.CERT_TOL, "refine": th.REFINE_TOL},
        "eps_grid_default": list(th.DEFAULT_EPS_GRID),
    }


def _report(sections: list[dict]) -> dict:
    counts = summarize(sections)
    sips = [sec["sip"]["status"] for sec in sections if "sip" in sec]
    return {
        "format": REPORT_FORMAT,
        "environment": environment_stamp(),
        "scenarios": sections,
        "summary": counts,
        "exit_code": exit_code_for(counts, sips),
    }


def _report_lines(rep: dict) -> list[str]:
    lines = []
    for sec in rep["scenarios"]:
        for c in sec.get("certificates", []):
            lines.append(
                f"{sec['name']:<20} {_fmt_point(c['point']):<16} {c['theorem']:<17} {c['verdict']:<17} gap={c['gap']}"
            )
            for h in c["hypotheses"]:
                if h["status"] == th.VIOLATED:
                    lines.append(f"    unmet: {h['name']}: {h['detail']}")
        for cv in sec.get("cross_validation", []):
            if not cv["passed"]:
                lines.append(f"{sec['name']:<20} {_fmt_point(cv['point']):<16} cross-validation FAILED")
        if "sip" in sec:
            r = sec["sip"]
            lines.append(
                f"{sec['name']:<20} sip x={_fmt_point(r['x'])} value={r['value']} "
                f"iterations={r['iterations']} status={r['status']}"
            )
    s = rep["summary"]
    lines.append(f"PASS {s['PASS']}  FAIL {s['FAIL']}  HYPOTHESIS-UNMET {s['HYPOTHESIS-UNMET']}")
    return lines


def cmd_certify(args) -> int:
    paths = expand_paths(args.scenario)
    for p in paths:
        load_scenario(p)  # report parse errors before any work starts
    theorems = args.theorem or None
    jobs = max(1, args.jobs)
    call = [(str(p), theorems, args.eps0, args.point) for p in paths]
    if jobs == 1 or len(call) == 1:
        sections = [certify_scenario(*c) for c in call]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            sections = list(ex.map(certify_scenario, *zip(*call)))
    rep = _report(sections)
    _emit(args, rep, _report_lines(rep))
    return rep["exit_code"]


def cmd_sip(args) -> int:
    sections = []
    for path in expand_paths(args.scenario):
        s = load_scenario(path)
        if s.sip is None:
            raise UsageError(f"{path}: scenario has no 'sip' section")
        F = sc.build_family(s)
        try:
            box = Polyhedron.box(s.sip.lower, s.sip.upper)
            prob = sipsolve.SIPProblem(F, box, s.sip.target_tol)
            res = sipsolve.solve(prob, s.sip.max_iter)
        except sipsolve.MalformedProblem as e:
            raise UsageError(f"{path}: {e}") from e
        sections.append({"name": s.name, "source": str(path), "sip": res.to_json()})
    rep = _report(sections)
    _emit(args, rep, _report_lines(rep))
    return rep["exit_code"]


def cmd_report(args) -> int:
    sections = []
    for p in args.reports:
        try:
            rep = json.loads(Path(p).read_text())
        except OSError as e:
            raise UsageError(f"{p}: {e.strerror}") from e
        except json.JSONDecodeError as e:
            raise UsageError(f"{p}:{e.lineno}:{e.colno}: {e.msg}") from e
        if not isinstance(rep, dict) or rep.get("format") != REPORT_FORMAT:
            raise UsageError(f"{p}: not a {REPORT_FORMAT} report")
        sections.extend(rep["scenarios"])
    rep = _report(sections)
    _emit(args, rep, _report_lines(rep))
    return rep["exit_code"]


def strip_timing(obj):
    """Copy of a report without its ``timing`` fields."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k != "timing"}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="supcert", description="Subdifferentials of supremum functions: evaluate and certify.")
    p.add_argument("--version", action="version", version=f"supcert {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(q, point=True):
        q.add_argument("--scenario", action="append", required=True, help="scenario file or directory (repeatable)")
        if point:
            q.add_argument("--point", help="comma-separated coordinates; default: the scenario's points")
        q.add_argument("--eps0", type=float, help="override the scenario's eps0")
        q.add_argument("--out", help="also write the JSON output here")
        q.add_argument("--format", choices=("json", "text"), default="text")

    common(sub.add_parser("eval", help="f(x) and the active sets for eps in {0, eps0}"))
    common(sub.add_parser("active-set", help="the eps0-active index set"))
    common(sub.add_parser("subdiff", help="oracle subdifferential with cross-validation"))
    q = sub.add_parser("certify", help="check theorem formulas against the oracle")
    common(q)
    q.add_argument("--theorem", action="append", choices=[t.value for t in th.TheoremId], help="repeatable")
    q.add_argument("--jobs", type=int, default=1, help="worker processes (scenario-level)")
    common(sub.add_parser("sip", help="minimize the supremum over a box by cutting planes"), point=False)
    q = sub.add_parser("report", help="merge and re-render saved JSON reports")
    q.add_argument("reports", nargs="+")
    q.add_argument("--out")
    q.add_argument("--format", choices=("json", "text"), default="text")
    return p


COMMANDS = {
    "eval": cmd_eval,
    "active-set": cmd_active_set,
    "subdiff": cmd_subdiff,
    "certify": cmd_certify,
    "sip": cmd_sip,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "eps0", None) is not None and not args.eps0 > 0:
        print("supcert: error: --eps0 must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"supcert: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
