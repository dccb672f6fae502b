"""Static-analysis oracle: syntax checking and rule-based CWE detection."""

from .engine import AnalysisReport, Finding, Rule, SecurityOracle, analyze, is_secure, load_rule_packs
from .external import run_external
from .syntax import SyntaxResult, registered_languages, syntax_check

__all__ = [
    "AnalysisReport",
    "Finding",
    "Rule",
    "SecurityOracle",
    "SyntaxResult",
    "analyze",
    "is_secure",
    "load_rule_packs",
    "registered_languages",
    "run_external",
    "syntax_check",
]
