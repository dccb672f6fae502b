"""Tiny tree-query DSL used by rule packs.

Grammar (whitespace-insensitive)::

    term    := TYPE [ '[' clause (',' clause)* ']' ]
    clause  := 'text' '~' /regex/
             | 'has' ':' term          -- some strict descendant matches
             | FIELD ':' term          -- the named child field matches
    TYPE    := node type name, or '_' for any

Regexes are searched against the node's source text with re.DOTALL. A field
holding a list matches when any element matches. Examples::

    call[function: _[text ~ /^os\\.(system|popen)$/], has: binary_operator]
    assignment_expression[left: _[text ~ /\\.innerHTML$/], right: identifier]
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..errors import ConfigurationError
from .tree import TreeNode

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class Clause:
    kind: str  # "text" | "has" | "field"
    name: str = ""
    regex: re.Pattern | None = None
    term: "Term | None" = None


@dataclass(frozen=True)
class Term:
    node_type: str
    clauses: tuple[Clause, ...] = field(default_factory=tuple)


class _QueryParser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, msg: str) -> ConfigurationError:
        return ConfigurationError(f"query parse error at offset {self.pos}: {msg} in {self.text!r}")

    def _ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def _peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def _name(self) -> str:
        m = _NAME_RE.match(self.text, self.pos)
        if not m:
            raise self.error("expected a name")
        self.pos = m.end()
        return m.group(0)

    def _regex(self) -> re.Pattern:
        if self._peek() != "/":
            raise self.error("expected /regex/")
        self.pos += 1
        out = []
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == "\\" and self.pos + 1 < len(self.text):
                nxt = self.text[self.pos + 1]
                if nxt == "/":
                    out.append("/")
                else:
                    out.append(ch)
                    out.append(nxt)
                self.pos += 2
                continue
            if ch == "/":
                self.pos += 1
                try:
                    return re.compile("".join(out), re.DOTALL)
                except re.error as exc:
                    raise self.error(f"bad regex: {exc}")
            out.append(ch)
            self.pos += 1
        raise self.error("unterminated regex")

    def parse_term(self) -> Term:
        self._ws()
        if self._peek() == "_":
            self.pos += 1
            node_type = "_"
        else:
            node_type = self._name()
        self._ws()
        clauses: list[Clause] = []
        if self._peek() == "[":
            self.pos += 1
            while True:
                self._ws()
                name = "_" if self._peek() == "_" else self._name()
                if name == "_":
                    self.pos += 1
                self._ws()
                if name == "text":
                    if self._peek() != "~":
                        raise self.error("expected '~' after text")
                    self.pos += 1
                    self._ws()
                    clauses.append(Clause(kind="text", regex=self._regex()))
                else:
                    if self._peek() != ":":
                        raise self.error(f"expected ':' after {name!r}")
                    self.pos += 1
                    sub = self.parse_term()
                    kind = "has" if name == "has" else "field"
                    clauses.append(Clause(kind=kind, name=name, term=sub))
                self._ws()
                if self._peek() == ",":
                    self.pos += 1
                    continue
                if self._peek() == "]":
                    self.pos += 1
                    break
                raise self.error("expected ',' or ']'")
        return Term(node_type=node_type, clauses=tuple(clauses))

    def parse(self) -> Term:
        term = self.parse_term()
        self._ws()
        if self.pos != len(self.text):
            raise self.error("trailing input after pattern")
        return term


def compile_query(pattern: str) -> Term:
    return _QueryParser(pattern).parse()


def node_matches(node: TreeNode, term: Term) -> bool:
    if term.node_type != "_" and node.type != term.node_type:
        return False
    for clause in term.clauses:
        if clause.kind == "text":
            assert clause.regex is not None
            if not clause.regex.search(node.text):
                return False
        elif clause.kind == "has":
            assert clause.term is not None
            if not any(node_matches(d, clause.term) for d in node.descendants()):
                return False
        else:
            assert clause.term is not None
            value = node.field_value(clause.name)
            if value is None:
                return False
            if isinstance(value, list):
                if not any(node_matches(v, clause.term) for v in value):
                    return False
            elif not node_matches(value, clause.term):
                return False
    return True


def find_matches(root: TreeNode, term: Term) -> list[TreeNode]:
    return [node for node in root.walk() if node_matches(node, term)]
