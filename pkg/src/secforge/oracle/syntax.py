"""Lightweight syntax gate: a snippet passes iff its grammar parses cleanly."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from ..errors import ConfigurationError
from .jstree import JsSyntaxError, parse_javascript
from .pytree import parse_python
from .tree import TreeNode

_PARSERS: dict[str, Callable[[str], TreeNode]] = {
    "python": parse_python,
    "javascript": parse_javascript,
}


def registered_languages() -> tuple[str, ...]:
    return tuple(sorted(_PARSERS))


def register_language(name: str, parser: Callable[[str], TreeNode]) -> None:
    _PARSERS[name] = parser


@dataclass(frozen=True)
class SyntaxResult:
    ok: bool
    detail: str | None = None
    line: int | None = None

    def __bool__(self) -> bool:
        return self.ok


def parse_tree(code: str, language: str) -> TreeNode:
    """Parse or raise (SyntaxError / JsSyntaxError); unknown language is a config error."""
    parser = _PARSERS.get(language)
    if parser is None:
        raise ConfigurationError(
            f"no grammar registered for language {language!r} (have {', '.join(registered_languages())})"
        )
    return parser(code)


def syntax_check(code: str, language: str) -> SyntaxResult:
    parser = _PARSERS.get(language)
    if parser is None:
        raise ConfigurationError(
            f"no grammar registered for language {language!r} (have {', '.join(registered_languages())})"
        )
    try:
        parser(code)
    except (SyntaxError, JsSyntaxError) as exc:
        line = getattr(exc, "lineno", None) or getattr(exc, "line", None)
        return SyntaxResult(ok=False, detail=str(exc), line=line)
    except ValueError as exc:  # e.g. null bytes rejected by compile()
        return SyntaxResult(ok=False, detail=str(exc), line=None)
    return SyntaxResult(ok=True)
