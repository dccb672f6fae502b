"""Candidate preference-data construction.

Drives the sample -> detect -> fix loop against the target model and pairs
secure fixes with the vulnerable code they repair (D_sec), then pairs normal
responses with those fixes under the originating seed instruction (D_norm).
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .canonical import content_hash
from .catalog import CwePair, Instruction
from .clients import GenerationParams, TextGenClient
from .errors import LinkError, ValidationError
from .forge import FIX_TEMPLATE, load_prompt
from .oracle.engine import AnalysisReport, SecurityOracle

log = logging.getLogger(__name__)

_FENCE_RE = re.compile(r"```[ \t]*([A-Za-z0-9_+-]*)[ \t]*\r?\n(.*?)```", re.DOTALL)


def extract_code_block(text: str) -> str | None:
    """Code inside the first fenced block, or None. Later fences are ignored."""
    m = _FENCE_RE.search(text)
    if not m:
        return None
    code = m.group(2)
    return code if code.strip() else None


def code_sample_id(instruction_id: str, text: str, seed: int, sample_index: int) -> str:
    return content_hash(
        {"instruction_id": instruction_id, "text": text, "seed": seed, "sample_index": sample_index}
    )


@dataclass
class CodeSample:
    """One extracted code response; the analysis report is attached after
    the oracle has seen it."""

    id: str
    instruction_id: str
    text: str
    language: str
    gen: GenerationParams
    sample_index: int
    report: AnalysisReport | None = None

    @classmethod
    def make(
        cls, instruction_id: str, text: str, language: str, gen: GenerationParams, sample_index: int
    ) -> "CodeSample":
        return cls(
            id=code_sample_id(instruction_id, text, gen.seed, sample_index),
            instruction_id=instruction_id,
            text=text,
            language=language,
            gen=gen,
            sample_index=sample_index,
        )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "instruction_id": self.instruction_id,
            "text": self.text,
            "language": self.language,
            "gen": self.gen.to_dict(),
            "sample_index": self.sample_index,
            "report": self.report.to_dict() if self.report is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CodeSample":
        return cls(
            id=d["id"],
            instruction_id=d["instruction_id"],
            text=d["text"],
            language=d["language"],
            gen=GenerationParams(**d["gen"]),
            sample_index=d["sample_index"],
            report=AnalysisReport.from_dict(d["report"]) if d.get("report") else None,
        )


@dataclass(frozen=True)
class SecTriple:
    """(x_v, y_f, y_v): the fix is preferred over the vulnerable response."""

    id: str
    x_v: str
    y_f: str
    y_v: str
    pair: CwePair
    findings_fixed: tuple[str, ...]

    @classmethod
    def make(cls, x_v: str, y_f: str, y_v: str, pair: CwePair, findings_fixed: list[str]) -> "SecTriple":
        return cls(
            id=content_hash({"x_v": x_v, "y_f": y_f, "y_v": y_v}),
            x_v=x_v,
            y_f=y_f,
            y_v=y_v,
            pair=pair,
            findings_fixed=tuple(sorted(findings_fixed)),
        )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "x_v": self.x_v,
            "y_f": self.y_f,
            "y_v": self.y_v,
            "pair": self.pair.to_dict(),
            "findings_fixed": list(self.findings_fixed),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SecTriple":
        return cls(
            id=d["id"],
            x_v=d["x_v"],
            y_f=d["y_f"],
            y_v=d["y_v"],
            pair=CwePair.from_dict(d["pair"]),
            findings_fixed=tuple(d["findings_fixed"]),
        )


@dataclass(frozen=True)
class NormTriple:
    """(x_n, y_n, y_f): the normal response is preferred over the fix."""

    id: str
    x_n: str
    y_n: str
    y_f: str
    sec_link: str

    @classmethod
    def make(cls, x_n: str, y_n: str, y_f: str, sec_link: str) -> "NormTriple":
        return cls(
            id=content_hash({"x_n": x_n, "y_n": y_n, "y_f": y_f, "sec_link": sec_link}),
            x_n=x_n,
            y_n=y_n,
            y_f=y_f,
            sec_link=sec_link,
        )

    def to_dict(self) -> dict:
        return {"id": self.id, "x_n": self.x_n, "y_n": self.y_n, "y_f": self.y_f, "sec_link": self.sec_link}

    @classmethod
    def from_dict(cls, d: dict) -> "NormTriple":
        return cls(id=d["id"], x_n=d["x_n"], y_n=d["y_n"], y_f=d["y_f"], sec_link=d["sec_link"])


def sample_responses(
    instr: Instruction,
    n: int,
    params: GenerationParams,
    client: TextGenClient,
    language: str,
) -> list[CodeSample]:
    """Up to n code samples; completions without a usable fence are dropped."""
    if n < 1:
        raise ValidationError("sample_responses: n must be >= 1")
    completions = client.complete(instr.text, params.with_n(n))
    samples = []
    for i, completion in enumerate(completions):
        code = extract_code_block(completion.text)
        if code is None:
            continue
        samples.append(CodeSample.make(instr.id, code, language, params.with_n(n), i))
    return samples


@dataclass
class PartitionResult:
    vulnerable: list[CodeSample] = field(default_factory=list)
    clean: list[CodeSample] = field(default_factory=list)
    invalid: list[CodeSample] = field(default_factory=list)


def partition_by_security(samples: list[CodeSample], oracle: SecurityOracle) -> PartitionResult:
    """Split syntax-valid samples into vulnerable/clean; broken ones are set
    aside. Each surviving sample carries its analysis report."""
    result = PartitionResult()
    for sample in samples:
        if not oracle.syntax_check(sample.text, sample.language).ok:
            result.invalid.append(sample)
            continue
        sample.report = oracle.analyze(sample.text, sample.language, code_id=sample.id)
        if sample.report.findings:
            result.vulnerable.append(sample)
        else:
            result.clean.append(sample)
    return result


def format_feedback(report: AnalysisReport, language: str) -> str:
    lines = []
    for f in report.findings:
        lines.append(
            f"- [{language}] {f.pair.cwe} rule {f.rule_id} "
            f"(lines {f.span[0]}-{f.span[1]}): {f.message}"
        )
    return "\n".join(lines)


def render_fix_prompt(
    feedback: str, task_text: str, vulnerable_code: str, template: str | None = None
) -> str:
    template = template if template is not None else load_prompt(FIX_TEMPLATE)
    return (
        template.replace("[[Feedback from the static analyzer]]", feedback)
        .replace("[[Coding task]]", task_text)
        .replace("[[Vulnerable code]]", vulnerable_code)
    )


def request_fix(
    x_v: Instruction,
    y_v: CodeSample,
    params: GenerationParams,
    client: TextGenClient,
    oracle: SecurityOracle,
    template: str | None = None,
) -> list[CodeSample]:
    """Sample fixes for a vulnerable response; keep only syntax-valid ones the
    oracle finds clean. Stub fixes ("rest unchanged") survive here on purpose:
    the heuristic filter owns that policy."""
    if y_v.report is None or not y_v.report.findings:
        raise ValidationError("request_fix requires a vulnerable sample with a non-empty report")
    prompt = render_fix_prompt(format_feedback(y_v.report, y_v.language), x_v.text, y_v.text, template)
    completions = client.complete(prompt, params)
    fixes = []
    for i, completion in enumerate(completions):
        code = extract_code_block(completion.text)
        if code is None:
            continue
        if not oracle.syntax_check(code, y_v.language).ok:
            continue
        report = oracle.analyze(code, y_v.language)
        if report.findings:
            continue
        sample = CodeSample.make(x_v.id, code, y_v.language, params, i)
        sample.report = report
        fixes.append(sample)
    if not fixes:
        log.info("no secure fixes retained for sample %s", y_v.id[:12])
    return fixes


@dataclass
class BuildResult:
    sec_triples: list[SecTriple] = field(default_factory=list)
    norm_triples: list[NormTriple] = field(default_factory=list)
    samples: dict[str, CodeSample] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)


def build_sec(
    instrs: list[Instruction],
    oracle: SecurityOracle,
    client: TextGenClient,
    params: GenerationParams,
    n_vuln_samples: int = 16,
    n_fix_samples: int = 8,
    max_pairs_per_instruction: int = 4,
    allow_clean_as_win: bool = False,
) -> BuildResult:
    """Assemble candidate SecTriples for every vulnerability-inducing
    instruction. A vulnerable sample must be flagged for the instruction's own
    target pair; per instruction, the (y_v, y_f) cross product is capped in
    triple-id order."""
    result = BuildResult()
    counts = {
        "instructions": 0,
        "samples": 0,
        "invalid_samples": 0,
        "vulnerable_on_target": 0,
        "vulnerable_off_target": 0,
        "clean_samples": 0,
        "fixes_retained": 0,
        "triples": 0,
        "capped": 0,
    }
    for instr in sorted(instrs, key=lambda i: i.id):
        if instr.kind != "vuln_inducing":
            raise ValidationError(f"build_sec: instruction {instr.id[:12]} is not vuln_inducing")
        assert instr.pair is not None
        counts["instructions"] += 1
        samples = sample_responses(instr, n_vuln_samples, params, client, instr.pair.language)
        counts["samples"] += len(samples)
        parts = partition_by_security(samples, oracle)
        counts["invalid_samples"] += len(parts.invalid)
        counts["clean_samples"] += len(parts.clean)
        for s in samples:
            result.samples[s.id] = s
        on_target = []
        for y_v in parts.vulnerable:
            assert y_v.report is not None
            if any(f.pair == instr.pair for f in y_v.report.findings):
                on_target.append(y_v)
            else:
                counts["vulnerable_off_target"] += 1
        counts["vulnerable_on_target"] += len(on_target)
        candidates = []
        for y_v in sorted(on_target, key=lambda s: s.id):
            assert y_v.report is not None
            fixes = request_fix(instr, y_v, params.with_n(n_fix_samples), client, oracle)
            counts["fixes_retained"] += len(fixes)
            win_pool = list(fixes)
            if allow_clean_as_win:
                win_pool.extend(parts.clean)
            for y_f in sorted(win_pool, key=lambda s: s.id):
                result.samples[y_f.id] = y_f
                candidates.append(
                    SecTriple.make(
                        x_v=instr.id,
                        y_f=y_f.id,
                        y_v=y_v.id,
                        pair=instr.pair,
                        findings_fixed=[f.rule_id for f in y_v.report.findings],
                    )
                )
        candidates.sort(key=lambda t: t.id)
        if len(candidates) > max_pairs_per_instruction:
            counts["capped"] += len(candidates) - max_pairs_per_instruction
            candidates = candidates[:max_pairs_per_instruction]
        counts["triples"] += len(candidates)
        result.sec_triples.extend(candidates)
    result.counts = counts
    return result


def build_norm(
    sec_triples: list[SecTriple],
    instructions: dict[str, Instruction],
    oracle: SecurityOracle,
    client: TextGenClient,
    params: GenerationParams,
    n_norm_samples: int = 8,
    max_norm_per_sec: int = 8,
) -> BuildResult:
    """For each SecTriple, sample responses to the originating normal
    instruction and keep the clean, syntax-valid ones as utility-preservation
    wins against the triple's fix."""
    orphans = []
    for t in sec_triples:
        x_v = instructions.get(t.x_v)
        if x_v is None or x_v.origin_id is None or x_v.origin_id not in instructions:
            orphans.append(t.id)
    if orphans:
        raise LinkError(f"build_norm: unresolvable origin for SecTriples: {', '.join(o[:12] for o in orphans)}")

    result = BuildResult()
    counts = {"sec_triples": 0, "samples": 0, "invalid_samples": 0, "clean_candidates": 0,
              "insecure_dropped": 0, "triples": 0, "sec_without_norm": 0}
    for t in sorted(sec_triples, key=lambda t: t.id):
        counts["sec_triples"] += 1
        x_v = instructions[t.x_v]
        x_n = instructions[x_v.origin_id]  # type: ignore[index]
        samples = sample_responses(x_n, n_norm_samples, params, client, t.pair.language)
        counts["samples"] += len(samples)
        parts = partition_by_security(samples, oracle)
        counts["invalid_samples"] += len(parts.invalid)
        counts["insecure_dropped"] += len(parts.vulnerable)
        counts["clean_candidates"] += len(parts.clean)
        for s in samples:
            result.samples[s.id] = s
        candidates = [
            NormTriple.make(x_n=x_n.id, y_n=y_n.id, y_f=t.y_f, sec_link=t.id)
            for y_n in sorted(parts.clean, key=lambda s: s.id)
        ]
        candidates.sort(key=lambda n: n.id)
        candidates = candidates[:max_norm_per_sec]
        if not candidates:
            counts["sec_without_norm"] += 1
        counts["triples"] += len(candidates)
        result.norm_triples.extend(candidates)
    result.counts = counts
    return result
