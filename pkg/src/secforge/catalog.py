"""Target catalog and shared record types: CWE pairs, scenarios, instructions.

Records are immutable after construction and serialize to canonical JSON, so
re-ingestion never mints new ids and round trips are byte-identical.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path

from .canonical import content_hash, read_jsonl
from .errors import ValidationError
from .toml_compat import load_toml

log = logging.getLogger(__name__)

CWE_RE = re.compile(r"^CWE-[0-9]+$")
LANGUAGE_RE = re.compile(r"^[a-z][a-z0-9_+]*$")

DEFAULT_LANGUAGES = ("c", "cpp", "java", "javascript", "python")

KIND_NORMAL = "normal"
KIND_VULN = "vuln_inducing"


@dataclass(frozen=True, order=True)
class CwePair:
    """A (language, CWE) target. Ordering is by language, then CWE number."""

    language: str
    cwe: str

    def __post_init__(self):
        if not LANGUAGE_RE.match(self.language):
            raise ValidationError(f"bad language identifier: {self.language!r}")
        if not CWE_RE.match(self.cwe):
            raise ValidationError(f"bad CWE identifier: {self.cwe!r} (expected CWE-<int>)")

    @property
    def cwe_number(self) -> int:
        return int(self.cwe.split("-", 1)[1])

    @property
    def sort_key(self) -> tuple[str, int]:
        return (self.language, self.cwe_number)

    def to_dict(self) -> dict:
        return {"language": self.language, "cwe": self.cwe}

    @classmethod
    def from_dict(cls, d: dict) -> "CwePair":
        return cls(language=d["language"], cwe=d["cwe"])


@dataclass(frozen=True)
class ScenarioRecord:
    """One sampled trigger-scenario completion for a (language, CWE) target."""

    pair: CwePair
    scenario_text: str
    source_prompt_hash: str
    sample_index: int

    def __post_init__(self):
        if not self.scenario_text.strip():
            raise ValidationError("scenario_text must be non-empty")

    def to_dict(self) -> dict:
        return {
            "pair": self.pair.to_dict(),
            "scenario_text": self.scenario_text,
            "source_prompt_hash": self.source_prompt_hash,
            "sample_index": self.sample_index,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioRecord":
        return cls(
            pair=CwePair.from_dict(d["pair"]),
            scenario_text=d["scenario_text"],
            source_prompt_hash=d["source_prompt_hash"],
            sample_index=d["sample_index"],
        )


def instruction_id(kind: str, text: str, pair: CwePair | None, origin_id: str | None) -> str:
    """Ids are a pure function of (kind, text, pair, origin_id) and nothing else."""
    return content_hash(
        {
            "kind": kind,
            "text": text,
            "pair": pair.to_dict() if pair is not None else None,
            "origin_id": origin_id,
        }
    )


@dataclass(frozen=True)
class Instruction:
    """A seed ("normal") or synthesized vulnerability-inducing coding task.

    ``lang`` carries the optional seed language tag; untagged seeds are
    language-agnostic candidates for every target.
    """

    id: str
    kind: str
    text: str
    pair: CwePair | None = None
    origin_id: str | None = None
    lang: str | None = None

    def __post_init__(self):
        if self.kind not in (KIND_NORMAL, KIND_VULN):
            raise ValidationError(f"bad instruction kind: {self.kind!r}")
        if self.kind == KIND_VULN:
            if self.pair is None or self.origin_id is None:
                raise ValidationError("vuln_inducing instruction requires pair and origin_id")
        else:
            if self.pair is not None:
                raise ValidationError("normal instruction must not carry a pair")

    @classmethod
    def normal(cls, text: str, lang: str | None = None) -> "Instruction":
        return cls(
            id=instruction_id(KIND_NORMAL, text, None, None),
            kind=KIND_NORMAL,
            text=text,
            lang=lang,
        )

    @classmethod
    def vuln_inducing(cls, text: str, pair: CwePair, origin_id: str) -> "Instruction":
        return cls(
            id=instruction_id(KIND_VULN, text, pair, origin_id),
            kind=KIND_VULN,
            text=text,
            pair=pair,
            origin_id=origin_id,
        )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "text": self.text,
            "pair": self.pair.to_dict() if self.pair is not None else None,
            "origin_id": self.origin_id,
            "lang": self.lang,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Instruction":
        return cls(
            id=d["id"],
            kind=d["kind"],
            text=d["text"],
            pair=CwePair.from_dict(d["pair"]) if d.get("pair") else None,
            origin_id=d.get("origin_id"),
            lang=d.get("lang"),
        )


def load_cwe_targets(config_path: str | Path, allowed_languages: tuple[str, ...] | None = None) -> list[CwePair]:
    """Load, validate, dedupe, and sort the (language, CWE) targets.

    The config may declare its own closed language set under ``languages``;
    otherwise DEFAULT_LANGUAGES applies.
    """
    raw = load_toml(config_path)
    languages = allowed_languages or tuple(raw.get("languages", DEFAULT_LANGUAGES))
    rows = raw.get("targets", [])
    if not isinstance(rows, list):
        raise ValidationError(f"{config_path}: 'targets' must be an array of tables")
    seen: set[CwePair] = set()
    for i, row in enumerate(rows):
        if not isinstance(row, dict) or "language" not in row or "cwe" not in row:
            raise ValidationError(f"{config_path}: targets[{i}] must have 'language' and 'cwe'")
        try:
            pair = CwePair(language=str(row["language"]), cwe=str(row["cwe"]))
        except ValidationError as exc:
            raise ValidationError(f"{config_path}: targets[{i}]: {exc}") from exc
        if pair.language not in languages:
            raise ValidationError(
                f"{config_path}: targets[{i}]: language {pair.language!r} not in configured set {sorted(languages)}"
            )
        seen.add(pair)
    return sorted(seen, key=lambda p: p.sort_key)


def load_seed_instructions(path: str | Path, stats: dict | None = None) -> list[Instruction]:
    """Load seed instructions from JSONL rows {"id"?, "text", "lang"?}.

    Rows missing text are skipped and counted; identical content dedupes via
    the content-hash id. Incoming "id" values are ignored: ids are minted from
    content so they stay stable across runs.
    """
    out: dict[str, Instruction] = {}
    skipped = 0
    total = 0
    for row in read_jsonl(path):
        total += 1
        text = row.get("text")
        if not isinstance(text, str) or not text.strip():
            skipped += 1
            continue
        lang = row.get("lang")
        instr = Instruction.normal(text, lang=str(lang) if lang is not None else None)
        out[instr.id] = instr
    if skipped:
        log.warning("load_seed_instructions(%s): skipped %d of %d rows missing text", path, skipped, total)
    if stats is not None:
        stats.update({"rows": total, "skipped_missing_text": skipped, "loaded": len(out)})
    return [out[k] for k in sorted(out)]
