"""Canonical serialization, content hashing, and atomic file IO.

Every dataset row is one UTF-8 JSON line with sorted keys and no spaces, so
diffs, content hashes, and cache keys are reproducible across machines.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator


def canonical_dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def content_hash(obj: Any) -> str:
    """Lowercase hex SHA-256 over the canonical serialization of *obj*."""
    return hashlib.sha256(canonical_dumps(obj).encode("utf-8")).hexdigest()


def text_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def file_hash(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON line: {exc}") from exc


def dump_jsonl_lines(rows: Iterable[dict]) -> str:
    return "".join(canonical_dumps(row) + "\n" for row in rows)


def atomic_write_text(path: str | Path, data: str) -> None:
    """Write via temp file + rename so readers never observe partial files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> int:
    rows = list(rows)
    atomic_write_text(path, dump_jsonl_lines(rows))
    return len(rows)


def write_json(path: str | Path, obj: Any) -> None:
    atomic_write_text(path, canonical_dumps(obj) + "\n")
