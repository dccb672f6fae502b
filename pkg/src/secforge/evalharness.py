"""Secure-generation measurement: vulnerable-code ratio per target, normal
vs. induced trigger comparison, and the inference-time iterative-refinement
baseline.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .canonical import content_hash, read_jsonl
from .catalog import CwePair, Instruction
from .clients import GenerationParams, TextGenClient
from .errors import ClientError, ValidationError
from .oracle.engine import SecurityOracle
from .prefs import extract_code_block, format_feedback, render_fix_prompt, sample_responses

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalCase:
    """A test instruction with its target pair. External benchmark suites
    have no origin links, so this is deliberately looser than Instruction."""

    id: str
    text: str
    pair: CwePair

    @classmethod
    def make(cls, text: str, pair: CwePair) -> "EvalCase":
        return cls(id=content_hash({"text": text, "pair": pair.to_dict()}), text=text, pair=pair)


def load_eval_suite(path: str | Path) -> list[EvalCase]:
    """Suite rows: {"text", "lang", "cwe"}; any instruction JSONL with pair
    tags qualifies."""
    cases = []
    for row in read_jsonl(path):
        if "text" not in row or "lang" not in row or "cwe" not in row:
            raise ValidationError(f"{path}: suite rows need text, lang, cwe: {row!r}")
        cases.append(EvalCase.make(str(row["text"]), CwePair(str(row["lang"]), str(row["cwe"]))))
    return cases


def _as_cases(instrs: Sequence) -> list[EvalCase]:
    cases = []
    for item in instrs:
        if isinstance(item, EvalCase):
            cases.append(item)
            continue
        if isinstance(item, Instruction):
            if item.pair is None:
                raise ValidationError(f"instruction {item.id[:12]} carries no pair; eval needs pair tags")
            cases.append(EvalCase(id=item.id, text=item.text, pair=item.pair))
            continue
        raise ValidationError(f"unsupported eval item type {type(item).__name__}")
    return cases


@dataclass
class PairStats:
    n_samples: int = 0
    n_vulnerable: int = 0

    @property
    def ratio(self) -> float:
        return self.n_vulnerable / self.n_samples if self.n_samples else 0.0

    def to_dict(self) -> dict:
        return {"n_samples": self.n_samples, "n_vulnerable": self.n_vulnerable, "ratio": self.ratio}


@dataclass
class EvalReport:
    per_pair: dict[CwePair, PairStats] = field(default_factory=dict)
    sample_rows: list[dict] = field(default_factory=list)
    coverage: dict[str, int] = field(default_factory=dict)
    partial: bool = False

    @property
    def aggregate_ratio(self) -> float:
        """Unweighted mean of per-pair ratios (macro average)."""
        stats = [s.ratio for s in self.per_pair.values() if s.n_samples]
        return sum(stats) / len(stats) if stats else 0.0

    @property
    def micro_ratio(self) -> float:
        total = sum(s.n_samples for s in self.per_pair.values())
        vuln = sum(s.n_vulnerable for s in self.per_pair.values())
        return vuln / total if total else 0.0

    def to_dict(self) -> dict:
        return {
            "per_pair": {
                f"{p.language}/{p.cwe}": s.to_dict()
                for p, s in sorted(self.per_pair.items(), key=lambda kv: kv[0].sort_key)
            },
            "aggregate_ratio": self.aggregate_ratio,
            "micro_ratio": self.micro_ratio,
            "coverage": self.coverage,
            "partial": self.partial,
            "utility": None,  # reserved for externally computed pass@1 blocks
        }


def secure_ratio(
    test_instrs: Sequence,
    client: TextGenClient,
    oracle: SecurityOracle,
    n_per_instr: int,
    params: GenerationParams | None = None,
) -> EvalReport:
    """Sample n responses per instruction and report the flagged fraction,
    per pair and aggregated. Sample-level verdicts are kept for audit."""
    if n_per_instr < 1:
        raise ValidationError("secure_ratio: n_per_instr must be >= 1")
    cases = _as_cases(test_instrs)
    params = params or GenerationParams()
    report = EvalReport()
    coverage = {"requested": 0, "extracted": 0, "invalid": 0, "client_failures": 0}
    for case in sorted(cases, key=lambda c: c.id):
        stats = report.per_pair.setdefault(case.pair, PairStats())
        coverage["requested"] += n_per_instr
        instr_view = Instruction.normal(case.text)
        try:
            samples = sample_responses(instr_view, n_per_instr, params, client, case.pair.language)
        except ClientError as exc:
            log.warning("client failure for case %s: %s", case.id[:12], exc)
            coverage["client_failures"] += 1
            report.partial = True
            continue
        coverage["extracted"] += len(samples)
        for sample in samples:
            if not oracle.syntax_check(sample.text, case.pair.language).ok:
                coverage["invalid"] += 1
                continue
            result = oracle.analyze(sample.text, case.pair.language, code_id=sample.id)
            vulnerable = bool(result.findings)
            stats.n_samples += 1
            stats.n_vulnerable += int(vulnerable)
            report.sample_rows.append(
                {
                    "case_id": case.id,
                    "pair": case.pair.to_dict(),
                    "sample_id": sample.id,
                    "text": sample.text,
                    "vulnerable": vulnerable,
                    "rule_ids": sorted({f.rule_id for f in result.findings}),
                }
            )
    report.coverage = coverage
    return report


def trigger_comparison(
    normal: Sequence,
    induced: Sequence,
    client: TextGenClient,
    oracle: SecurityOracle,
    n: int,
    params: GenerationParams | None = None,
) -> dict:
    """Count vulnerable instances each instruction set elicits; the headline
    number is induced_total / normal_total (math.inf when normal is clean)."""
    if not normal or not induced:
        raise ValidationError("trigger_comparison needs both instruction sets non-empty")
    reports = {
        "normal": secure_ratio(normal, client, oracle, n, params),
        "induced": secure_ratio(induced, client, oracle, n, params),
    }
    totals = {name: sum(s.n_vulnerable for s in r.per_pair.values()) for name, r in reports.items()}
    ratio = math.inf if totals["normal"] == 0 else totals["induced"] / totals["normal"]
    return {
        "normal_vulnerable": totals["normal"],
        "induced_vulnerable": totals["induced"],
        "ratio": ratio,
        "per_pair": {
            name: {f"{p.language}/{p.cwe}": s.to_dict() for p, s in sorted(r.per_pair.items(), key=lambda kv: kv[0].sort_key)}
            for name, r in reports.items()
        },
    }


@dataclass
class RefineResult:
    final_code: str | None
    iters_used: int
    secure: bool
    failure: str | None = None


def iterative_refine(
    instr,
    client: TextGenClient,
    oracle: SecurityOracle,
    max_iters: int,
    params: GenerationParams | None = None,
) -> RefineResult:
    """Generate -> analyze -> (fix-prompt) loop, budgeted by total generation
    attempts: max_iters=1 is exactly one plain sample-and-verdict."""
    if max_iters < 1:
        raise ValidationError("iterative_refine: max_iters must be >= 1")
    case = _as_cases([instr])[0]
    params = params or GenerationParams()
    instr_view = Instruction.normal(case.text)
    code: str | None = None
    report = None
    iters = 0
    while iters < max_iters:
        iters += 1
        try:
            if report is None:
                samples = sample_responses(instr_view, 1, params, client, case.pair.language)
                code = samples[0].text if samples else None
            else:
                feedback = format_feedback(report, case.pair.language)
                prompt = render_fix_prompt(feedback, case.text, code or "")
                completions = client.complete(prompt, params.with_n(1))
                fixed = extract_code_block(completions[0].text) if completions else None
                if fixed is not None:
                    code = fixed
        except ClientError as exc:
            return RefineResult(final_code=code, iters_used=iters, secure=False, failure=str(exc))
        if code is None or not oracle.syntax_check(code, case.pair.language).ok:
            report = None  # nothing analyzable; retry from the instruction
            continue
        report = oracle.analyze(code, case.pair.language)
        if not report.findings:
            return RefineResult(final_code=code, iters_used=iters, secure=True)
    return RefineResult(final_code=code, iters_used=iters, secure=False)
