"""Final-prefs dataset loading with strict schema validation."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path


class SchemaError(ValueError):
    """Dataset rows do not conform to the final-prefs schema."""


REQUIRED_KEYS = ("prompt", "chosen", "rejected", "source")


@dataclass(frozen=True)
class PrefRow:
    row_id: str
    prompt: str
    chosen: str
    rejected: str
    source: str


def _row_id(raw: dict) -> str:
    if raw.get("source") == "norm" and raw.get("norm_id"):
        return str(raw["norm_id"])
    if raw.get("sec_id"):
        return str(raw["sec_id"])
    blob = json.dumps({k: raw.get(k) for k in REQUIRED_KEYS}, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def load_pref_rows(path: str | Path) -> list[PrefRow]:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: not JSON: {exc}") from exc
            missing = [k for k in REQUIRED_KEYS if not isinstance(raw.get(k), str)]
            if missing:
                raise SchemaError(f"{path}:{lineno}: missing/invalid keys {missing}")
            if raw["source"] not in ("sec", "norm"):
                raise SchemaError(f"{path}:{lineno}: bad source {raw['source']!r}")
            rows.append(
                PrefRow(
                    row_id=_row_id(raw),
                    prompt=raw["prompt"],
                    chosen=raw["chosen"],
                    rejected=raw["rejected"],
                    source=raw["source"],
                )
            )
    return rows
