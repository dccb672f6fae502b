from __future__ import annotations

import json

import pytest

from secforge.catalog import CwePair
from secforge.errors import AnalyzerFailureError, ConfigurationError, ValidationError
from secforge.oracle import analyze, is_secure, run_external, syntax_check
from secforge.oracle.engine import AnalysisReport, Finding, Rule
from secforge.oracle.jstree import parse_javascript
from secforge.oracle.pytree import parse_python
from secforge.oracle.query import compile_query, find_matches

from planted import PLANTED


# --- syntax gate -----------------------------------------------------------


def test_syntax_check_python():
    assert syntax_check("def f():\n    return 1\n", "python").ok
    bad = syntax_check("def f(:\n", "python")
    assert not bad.ok and bad.detail


def test_syntax_check_javascript():
    assert syntax_check("function f() { return 1; }\n", "javascript").ok
    assert not syntax_check("function f( {", "javascript").ok


def test_syntax_check_unregistered_language():
    with pytest.raises(ConfigurationError):
        syntax_check("x", "cobol")


def test_planted_corpus_all_parses(oracle):
    count = 0
    for pair, members in PLANTED.items():
        for vulnerable, fixed in members:
            assert oracle.syntax_check(vulnerable, pair.language).ok, vulnerable
            assert oracle.syntax_check(fixed, pair.language).ok, fixed
            count += 2
    assert count >= 50


# --- query DSL -------------------------------------------------------------


def test_query_parse_and_match_basics():
    tree = parse_python('import os\nos.system("ls " + d)\n')
    term = compile_query('call[function: attribute[text ~ /^os\\.system$/], has: binary_operator]')
    assert len(find_matches(tree, term)) == 1
    assert not find_matches(tree, compile_query("identifier[text ~ /^zzz$/]"))


def test_query_wildcard_and_field_list_semantics():
    tree = parse_python("f(1, x)\n")
    assert find_matches(tree, compile_query("call[arguments: identifier]"))
    assert find_matches(tree, compile_query("call[arguments: number]"))
    assert not find_matches(tree, compile_query("call[arguments: string]"))
    assert len(find_matches(tree, compile_query("_[text ~ /^x$/]"))) == 1


def test_query_parse_errors():
    with pytest.raises(ConfigurationError):
        compile_query("call[")
    with pytest.raises(ConfigurationError):
        compile_query("call[text ~ /unterminated]")
    with pytest.raises(ConfigurationError):
        compile_query("call] trailing")


def test_js_tree_shapes():
    tree = parse_javascript('db.query(`SELECT ${a}`);')
    assert find_matches(tree, compile_query("template_substitution"))
    tree = parse_javascript("el.innerHTML = name;")
    term = compile_query('assignment_expression[left: member_expression[text ~ /\\.innerHTML$/], right: identifier]')
    assert len(find_matches(tree, term)) == 1


# --- analyze ---------------------------------------------------------------


def test_analyze_is_deterministic_and_sorted(oracle):
    code = (
        "import os\n"
        "def bad(a, b):\n"
        "    os.system('ls ' + a)\n"
        "    os.system('ls ' + b)\n"
    )
    first = oracle.analyze(code, "python")
    second = oracle.analyze(code, "python")
    assert [f.to_dict() for f in first.findings] == [f.to_dict() for f in second.findings]
    spans = [f.span for f in first.findings]
    assert spans == sorted(spans)
    assert len(first.findings) == 2


def test_removing_a_rule_never_adds_findings(oracle):
    code = 'import os\ndef bad(a):\n    os.system("ls " + a)\n'
    full = analyze(code, "python", oracle.rules)
    reduced_rules = [r for r in oracle.rules if r.rule_id != "py-cwe78-os-shell-concat"]
    reduced = analyze(code, "python", reduced_rules)
    full_keys = {(f.rule_id, f.span) for f in full.findings}
    reduced_keys = {(f.rule_id, f.span) for f in reduced.findings}
    assert reduced_keys <= full_keys


def test_analyze_empty_code_no_findings(oracle):
    assert oracle.analyze("", "python").findings == []
    assert oracle.analyze("", "javascript").findings == []


def test_analyze_broken_code_is_best_effort(oracle):
    report = oracle.analyze("def f(:\n", "python")
    assert report.best_effort and report.findings == []


def test_counterpart_fixture_pair(oracle):
    vulnerable = 'import os\ndef run(cmd_arg):\n    os.system("ping -c 1 " + cmd_arg)\n'
    fixed = 'import subprocess\ndef run(cmd_arg):\n    subprocess.run(["ping", "-c", "1", cmd_arg])\n'
    assert any(f.pair.cwe == "CWE-78" for f in oracle.analyze(vulnerable, "python").findings)
    assert oracle.analyze(fixed, "python").findings == []


def test_planted_corpus_ground_truth(oracle):
    """Zero false negatives on vulnerable members, zero false positives on
    fixed members, across every (language, CWE) group."""
    for pair, members in PLANTED.items():
        for vulnerable, fixed in members:
            report = oracle.analyze(vulnerable, pair.language)
            assert any(f.pair == pair for f in report.findings), (pair, vulnerable)
            fixed_report = oracle.analyze(fixed, pair.language)
            assert fixed_report.findings == [], (pair, fixed, [f.rule_id for f in fixed_report.findings])


def test_is_secure_polarity():
    pair = CwePair("python", "CWE-78")
    empty = AnalysisReport(code_id="x")
    assert is_secure(empty)
    flagged = AnalysisReport(code_id="x", findings=[Finding(pair, "r", "m", (1, 1))])
    assert not is_secure(flagged)
    unmapped_only = AnalysisReport(
        code_id="x", analyzer="external", findings=[Finding(pair, "r", "m", (1, 1), unmapped=True)]
    )
    assert not is_secure(unmapped_only)  # fail-closed


def test_rule_with_bad_pattern_is_config_error():
    with pytest.raises(ConfigurationError):
        Rule.make("broken", CwePair("python", "CWE-78"), "call[", "m")


# --- external analyzer adapter --------------------------------------------


def _stub_script(tmp_path, body: str) -> str:
    script = tmp_path / "stub.py"
    script.write_text(body, encoding="utf-8")
    return f"python3 {script} {{file}}"


def test_run_external_empty_findings(tmp_path):
    cmd = _stub_script(tmp_path, "print('[]')\n")
    report = run_external(cmd, "print('hi')\n", "python")
    assert report.analyzer == "external" and report.findings == []


def test_run_external_parses_findings(tmp_path):
    finding = {"cwe": "CWE-78", "rule": "ext-1", "message": "shell", "start_line": 2, "end_line": 3}
    cmd = _stub_script(tmp_path, f"print('{json.dumps([finding])}')\n")
    report = run_external(cmd, "x = 1\n", "python", known_cwes={"CWE-78"})
    assert len(report.findings) == 1
    f = report.findings[0]
    assert f.pair == CwePair("python", "CWE-78") and f.span == (2, 3) and not f.unmapped


def test_run_external_unknown_cwe_kept_unmapped(tmp_path):
    finding = {"cwe": "NOT-A-CWE", "rule": "weird", "message": "m", "start_line": 1, "end_line": 1}
    cmd = _stub_script(tmp_path, f"print('{json.dumps([finding])}')\n")
    report = run_external(cmd, "x = 1\n", "python")
    assert len(report.findings) == 1 and report.findings[0].unmapped
    assert not is_secure(report)


def test_run_external_garbage_exit_is_failure(tmp_path):
    cmd = _stub_script(tmp_path, "import sys\nprint('garbage')\nsys.exit(2)\n")
    with pytest.raises(AnalyzerFailureError):
        run_external(cmd, "x = 1\n", "python")


def test_run_external_requires_placeholder():
    with pytest.raises(ValidationError):
        run_external("analyzer --json", "x", "python")


def test_finding_and_report_round_trip(oracle):
    code = 'import os\ndef bad(a):\n    os.system("ls " + a)\n'
    report = oracle.analyze(code, "python")
    blob = json.dumps(report.to_dict(), sort_keys=True)
    again = json.dumps(AnalysisReport.from_dict(json.loads(blob)).to_dict(), sort_keys=True)
    assert blob == again
    assert report.findings
