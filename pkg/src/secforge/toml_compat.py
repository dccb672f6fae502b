"""TOML loading that works on 3.10 (tomli) and 3.11+ (stdlib tomllib)."""

from __future__ import annotations

from pathlib import Path

try:
    import tomllib as _toml
except ImportError:  # pragma: no cover - depends on interpreter version
    import tomli as _toml

from .errors import ValidationError


def load_toml(path: str | Path) -> dict:
    try:
        with open(path, "rb") as f:
            return _toml.load(f)
    except FileNotFoundError as exc:
        raise ValidationError(f"config file not found: {path}") from exc
    except _toml.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: invalid TOML: {exc}") from exc
