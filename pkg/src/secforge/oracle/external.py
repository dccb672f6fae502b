"""Adapter for external analyzers speaking the findings-JSON contract.

Contract: the command template names a ``{file}`` placeholder; the analyzer
writes a JSON array of {"cwe", "rule", "message", "start_line", "end_line"}
objects to stdout. A nonzero exit with parseable JSON is fine (many tools
exit nonzero when they find something); a nonzero exit without JSON is an
analyzer failure.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import tempfile
from pathlib import Path

from ..canonical import text_hash
from ..catalog import CWE_RE, CwePair
from ..errors import AnalyzerFailureError, ValidationError
from .engine import AnalysisReport, Finding

_SUFFIX = {"python": ".py", "javascript": ".js", "c": ".c", "cpp": ".cpp", "java": ".java"}


def _parse_findings_json(stdout: str) -> list[dict] | None:
    try:
        data = json.loads(stdout)
    except json.JSONDecodeError:
        start = stdout.find("[")
        end = stdout.rfind("]")
        if start < 0 or end <= start:
            return None
        try:
            data = json.loads(stdout[start : end + 1])
        except json.JSONDecodeError:
            return None
    return data if isinstance(data, list) else None


def run_external(
    cmd_template: str,
    code: str,
    language: str,
    known_cwes: set[str] | None = None,
    timeout: float = 120.0,
) -> AnalysisReport:
    if "{file}" not in cmd_template:
        raise ValidationError("external analyzer command template must contain '{file}'")
    report = AnalysisReport(code_id=text_hash(code), analyzer="external")
    with tempfile.NamedTemporaryFile(
        "w", suffix=_SUFFIX.get(language, ".txt"), encoding="utf-8", delete=False
    ) as f:
        f.write(code)
        tmp_path = f.name
    try:
        argv = [tok.replace("{file}", tmp_path) for tok in shlex.split(cmd_template)]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise AnalyzerFailureError(f"external analyzer did not run: {exc}") from exc
        rows = _parse_findings_json(proc.stdout)
        if rows is None:
            raise AnalyzerFailureError(
                f"external analyzer exit {proc.returncode} without JSON findings "
                f"(stderr: {proc.stderr.strip()[:200]!r})"
            )
        findings = []
        for row in rows:
            raw_cwe = str(row.get("cwe", ""))
            message = str(row.get("message", ""))
            if CWE_RE.match(raw_cwe):
                pair = CwePair(language=language, cwe=raw_cwe)
                unmapped = known_cwes is not None and raw_cwe not in known_cwes
            else:
                # Unknown id kept, flagged unmapped: is_secure stays conservative.
                pair = CwePair(language=language, cwe="CWE-0")
                unmapped = True
                message = f"[unrecognized id {raw_cwe!r}] {message}"
            start = max(1, int(row.get("start_line", 1)))
            end = max(start, int(row.get("end_line", start)))
            findings.append(
                Finding(
                    pair=pair,
                    rule_id=str(row.get("rule", "external")),
                    message=message,
                    span=(start, end),
                    unmapped=unmapped,
                )
            )
        report.findings = sorted(findings, key=lambda f: (f.span[0], f.rule_id, f.span[1]))
        return report
    finally:
        Path(tmp_path).unlink(missing_ok=True)
