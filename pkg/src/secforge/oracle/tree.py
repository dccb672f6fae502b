"""Language-neutral concrete-syntax-tree node used by the rule engine."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union

FieldValue = Union["TreeNode", list["TreeNode"]]


@dataclass
class TreeNode:
    type: str
    text: str
    start_line: int
    end_line: int
    fields: dict[str, FieldValue] = field(default_factory=dict)
    children: list["TreeNode"] = field(default_factory=list)

    def field_value(self, name: str) -> FieldValue | None:
        return self.fields.get(name)

    def walk(self) -> Iterator["TreeNode"]:
        """Preorder traversal including self."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def descendants(self) -> Iterator["TreeNode"]:
        for child in self.children:
            yield from child.walk()

    def __repr__(self) -> str:  # keep debugging output short
        snippet = self.text if len(self.text) <= 30 else self.text[:27] + "..."
        return f"TreeNode({self.type}, {snippet!r}, L{self.start_line}-{self.end_line})"
