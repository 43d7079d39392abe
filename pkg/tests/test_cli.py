import json
import subprocess
import sys

import pytest

from supcert import cli
from supcert.cli import FIXTURES, main, strip_timing

SUITE = FIXTURES / "suite"
EXTRA = FIXTURES / "extra"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--format", "json")
    return code, json.loads(out)


def test_eval_linear_box_at_one(capsys):
    code, d = run_json(capsys, "eval", "--scenario", SUITE / "linear_box.json", "--point", "1", "--eps0", "0.25")
    assert code == 0
    (entry,) = d
    assert entry["value"] == pytest.approx(1.0)
    t0, t1 = entry["active_sets"]
    assert t0["epsilon"] == 0.0 and t0["boxes"][0][1] == [1.0]
    # the certified cover of T_0.25 = [0.75, 1] overshoots by at most one grid cell
    lo = t1["boxes"][0][0][0]
    assert 0.75 - 2.0**-16 <= lo <= 0.75
    assert t1["boxes"][0][1] == [1.0]


def test_eval_abs_pair_labels(capsys):
    code, d = run_json(capsys, "eval", "--scenario", SUITE / "abs_pair.json", "--point", "0")
    assert code == 0
    assert d[0]["active_sets"][0]["labels"] == [1, 2]


def test_eval_outside_domain_exits_1(capsys):
    code, out, _ = run(capsys, "eval", "--scenario", SUITE / "halfline.json", "--point=-1")
    assert code == 1
    assert "+inf" in out and "undefined" in out


def test_active_set(capsys):
    code, d = run_json(capsys, "active-set", "--scenario", SUITE / "abs_pair.json", "--point", "1", "--eps0", "1")
    assert code == 0
    assert d[0]["active_sets"][0]["labels"] == [1]


def test_subdiff_abs_pair(capsys):
    code, d = run_json(capsys, "subdiff", "--scenario", SUITE / "abs_pair.json", "--point", "0")
    assert code == 0
    assert sorted(p[0] for p in d[0]["subdifferential"]["points"]) == [-1.0, 1.0]
    assert d[0]["cross_validation"]["passed"]


def test_certify_suite_all_pass(capsys, tmp_path):
    out = tmp_path / "r.json"
    code, rep = run_json(capsys, "certify", "--scenario", SUITE, "--out", out)
    assert code == 0
    assert rep["format"] == cli.REPORT_FORMAT
    assert rep["summary"]["FAIL"] == 0 and rep["summary"]["HYPOTHESIS-UNMET"] == 0
    assert rep["summary"]["PASS"] > 0
    assert json.loads(out.read_text()) == rep


def test_certify_closure_violation_exits_2(capsys):
    code, rep = run_json(capsys, "certify", "--scenario", EXTRA / "closure_violation.json")
    assert code == 2
    assert rep["summary"] == {"PASS": 0, "FAIL": 0, "HYPOTHESIS-UNMET": 1}


def test_certify_theorem_filter(capsys):
    code, rep = run_json(capsys, "certify", "--scenario", SUITE / "abs_pair.json", "--theorem", "compact0", "--point", "0")
    assert code == 0
    assert [c["theorem"] for c in rep["scenarios"][0]["certificates"]] == ["compact0"]


def test_sip_converged_and_limit(capsys):
    code, rep = run_json(capsys, "sip", "--scenario", EXTRA / "sip_chebyshev.json")
    assert code == 0
    s = rep["scenarios"][0]["sip"]
    assert s["value"] == pytest.approx(0.125, abs=1e-6) and s["status"] == "converged"
    code, rep = run_json(capsys, "sip", "--scenario", EXTRA / "sip_iteration_limit.json")
    assert code == 3
    assert rep["scenarios"][0]["sip"]["status"] == "iteration-limit"


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["eval"],
        ["eval", "--scenario", str(SUITE / "abs_pair.json"), "--eps0", "0"],
        ["eval", "--scenario", str(SUITE / "abs_pair.json"), "--point", "1,2"],
        ["eval", "--scenario", str(SUITE / "abs_pair.json"), "--point", "abc"],
        ["eval", "--scenario", "/nonexistent.json"],
        ["sip", "--scenario", str(SUITE / "abs_pair.json")],
        ["certify", "--scenario", str(SUITE / "abs_pair.json"), "--theorem", "nope"],
    ],
)
def test_usage_errors_exit_64(capsys, argv):
    with pytest.raises(SystemExit) as e:
        sys.exit(main(argv))
    assert e.value.code == 64


def test_parse_error_has_location(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x",\n "dim": }')
    code, _, err = run(capsys, "eval", "--scenario", bad)
    assert code == 64
    assert f"{bad}:2:" in err
    bad.write_text(json.dumps({"name": "x", "dim": 1, "index": {"kind": "finite"}, "members": [{"type": "affine"}]}))
    code, _, err = run(capsys, "eval", "--scenario", bad)
    assert code == 64 and "members" in err


def test_report_merges(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, "certify", "--scenario", SUITE / "abs_pair.json", "--out", a)
    run(capsys, "certify", "--scenario", EXTRA / "closure_violation.json", "--out", b)
    code, rep = run_json(capsys, "report", a, b)
    assert code == 2
    assert [s["name"] for s in rep["scenarios"]] == ["abs_pair", "closure_violation"]


def test_report_rejects_foreign_json(capsys, tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{}")
    assert run(capsys, "report", p)[0] == 64


def test_jobs_keep_order_and_content(capsys):
    _, one = run_json(capsys, "certify", "--scenario", SUITE)
    _, four = run_json(capsys, "certify", "--scenario", SUITE, "--jobs", "4")
    assert strip_timing(one) == strip_timing(four)


def test_repeat_runs_identical(capsys):
    _, a = run_json(capsys, "certify", "--scenario", SUITE / "polyhedral_2d.json")
    _, b = run_json(capsys, "certify", "--scenario", SUITE / "polyhedral_2d.json")
    assert strip_timing(a) == strip_timing(b)


def test_exit_code_precedence():
    assert cli.exit_code_for({"FAIL": 1, "HYPOTHESIS-UNMET": 1}, ["iteration-limit"]) == 1
    assert cli.exit_code_for({"FAIL": 0, "HYPOTHESIS-UNMET": 1}, ["iteration-limit"]) == 2
    assert cli.exit_code_for({"FAIL": 0, "HYPOTHESIS-UNMET": 0}, ["iteration-limit"]) == 3
    assert cli.exit_code_for({"PASS": 3}, ["converged"]) == 0


def test_console_script_version():
    r = subprocess.run([sys.executable, "-m", "supcert.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("supcert ")
