"""Rule engine realizing the security oracle over concrete syntax trees.

A report with zero findings means the snippet conforms to every loaded rule;
analysis is a pure function of (code, rules), so reports are reproducible
and safe to re-check at any later stage.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from ..canonical import text_hash
from ..catalog import CWE_RE, CwePair
from ..errors import ConfigurationError
from ..toml_compat import load_toml
from .jstree import JsSyntaxError
from .query import Term, compile_query, find_matches
from .syntax import SyntaxResult, parse_tree, syntax_check
from .tree import TreeNode

log = logging.getLogger(__name__)

BUILTIN_RULES_DIR = Path(__file__).parent / "rules"


@dataclass(frozen=True)
class Finding:
    pair: CwePair
    rule_id: str
    message: str
    span: tuple[int, int]
    unmapped: bool = False

    def __post_init__(self):
        start, end = self.span
        if not 1 <= start <= end:
            raise ValueError(f"bad span {self.span} for rule {self.rule_id}")

    def to_dict(self) -> dict:
        return {
            "pair": self.pair.to_dict(),
            "rule_id": self.rule_id,
            "message": self.message,
            "span": list(self.span),
            "unmapped": self.unmapped,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Finding":
        return cls(
            pair=CwePair.from_dict(d["pair"]),
            rule_id=d["rule_id"],
            message=d["message"],
            span=tuple(d["span"]),
            unmapped=d.get("unmapped", False),
        )


@dataclass
class AnalysisReport:
    code_id: str
    findings: list[Finding] = field(default_factory=list)
    analyzer: str = "builtin"  # "builtin" | "external"
    skipped_rules: list[str] = field(default_factory=list)
    best_effort: bool = False

    def to_dict(self) -> dict:
        return {
            "code_id": self.code_id,
            "findings": [f.to_dict() for f in self.findings],
            "analyzer": self.analyzer,
            "skipped_rules": self.skipped_rules,
            "best_effort": self.best_effort,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisReport":
        return cls(
            code_id=d["code_id"],
            findings=[Finding.from_dict(f) for f in d.get("findings", [])],
            analyzer=d.get("analyzer", "builtin"),
            skipped_rules=list(d.get("skipped_rules", [])),
            best_effort=d.get("best_effort", False),
        )


def is_secure(report: AnalysisReport) -> bool:
    """Empty findings <=> secure; unmapped external findings still count (fail-closed)."""
    return not report.findings


@dataclass(frozen=True)
class Rule:
    rule_id: str
    pair: CwePair
    pattern: str
    message: str
    compiled: Term = field(compare=False, repr=False, default=None)  # type: ignore[assignment]

    @classmethod
    def make(cls, rule_id: str, pair: CwePair, pattern: str, message: str) -> "Rule":
        try:
            compiled = compile_query(pattern)
        except ConfigurationError as exc:
            raise ConfigurationError(f"rule {rule_id!r}: {exc}") from exc
        return cls(rule_id=rule_id, pair=pair, pattern=pattern, message=message, compiled=compiled)


def load_rule_packs(rules_dir: str | Path | None = None) -> list[Rule]:
    """Load every rules/<lang>/<cwe>.rules pack under *rules_dir*.

    Each pack is TOML with [[rules]] tables {id, pattern, message}; the
    (language, CWE) pair comes from the pack's path. Duplicate rule ids are a
    configuration error.
    """
    root = Path(rules_dir) if rules_dir is not None else BUILTIN_RULES_DIR
    rules: list[Rule] = []
    seen: set[str] = set()
    for path in sorted(root.glob("*/*.rules")):
        language = path.parent.name
        cwe = path.stem
        if not CWE_RE.match(cwe):
            raise ConfigurationError(f"{path}: pack filename must be <CWE-id>.rules")
        pair = CwePair(language=language, cwe=cwe)
        data = load_toml(path)
        for row in data.get("rules", []):
            for key in ("id", "pattern", "message"):
                if key not in row:
                    raise ConfigurationError(f"{path}: rule missing {key!r}")
            if row["id"] in seen:
                raise ConfigurationError(f"{path}: duplicate rule id {row['id']!r}")
            seen.add(row["id"])
            rules.append(Rule.make(row["id"], pair, row["pattern"].strip(), row["message"]))
    return rules


def analyze(code: str, language: str, rules: list[Rule], code_id: str | None = None) -> AnalysisReport:
    """Match every applicable rule; findings dedup by (rule_id, span) and sort
    by (start_line, rule_id). Unparseable code yields a best-effort empty report."""
    report = AnalysisReport(code_id=code_id if code_id is not None else text_hash(code))
    try:
        tree = parse_tree(code, language)
    except (SyntaxError, JsSyntaxError, ValueError):
        report.best_effort = True
        return report
    found: dict[tuple[str, tuple[int, int]], Finding] = {}
    for rule in rules:
        if rule.pair.language != language:
            continue
        try:
            matches = find_matches(tree, rule.compiled)
        except Exception as exc:  # pattern runtime failure: skip, record
            log.warning("rule %s failed at match time: %s", rule.rule_id, exc)
            report.skipped_rules.append(rule.rule_id)
            continue
        for node in matches:
            key = (rule.rule_id, (node.start_line, node.end_line))
            if key not in found:
                found[key] = Finding(
                    pair=rule.pair,
                    rule_id=rule.rule_id,
                    message=rule.message,
                    span=(node.start_line, node.end_line),
                )
    report.findings = sorted(found.values(), key=lambda f: (f.span[0], f.rule_id, f.span[1]))
    return report


class SecurityOracle:
    """Loaded rule inventory plus the syntax gate, bundled for pipeline use."""

    def __init__(self, rules: list[Rule] | None = None):
        self.rules = rules if rules is not None else load_rule_packs()

    @classmethod
    def from_dir(cls, rules_dir: str | Path) -> "SecurityOracle":
        return cls(load_rule_packs(rules_dir))

    @property
    def known_cwes(self) -> set[str]:
        return {r.pair.cwe for r in self.rules}

    def syntax_check(self, code: str, language: str) -> SyntaxResult:
        return syntax_check(code, language)

    def analyze(self, code: str, language: str, code_id: str | None = None) -> AnalysisReport:
        return analyze(code, language, self.rules, code_id=code_id)
