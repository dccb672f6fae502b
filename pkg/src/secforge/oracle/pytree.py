"""Python source -> generic TreeNode, backed by the stdlib ast parser.

Node types use a small canonical vocabulary shared with the JavaScript
parser where constructs coincide (call, identifier, string, ...), so rule
patterns read the same across languages:

    module, call, attribute, identifier, string, number, constant,
    binary_operator, boolean_operator, unary_operator, comparison,
    interpolation (f-string hole), keyword_argument, assignment,
    return_statement, function_definition, ...

A plain or formatted string literal is type "string"; f-string holes appear
as "interpolation" children, so ``string[has: interpolation]`` finds
interpolated strings.
"""

from __future__ import annotations

import ast

from .tree import TreeNode

_TYPE_MAP = {
    "Module": "module",
    "FunctionDef": "function_definition",
    "AsyncFunctionDef": "function_definition",
    "ClassDef": "class_definition",
    "Call": "call",
    "Attribute": "attribute",
    "Name": "identifier",
    "BinOp": "binary_operator",
    "BoolOp": "boolean_operator",
    "UnaryOp": "unary_operator",
    "Compare": "comparison",
    "JoinedStr": "string",
    "FormattedValue": "interpolation",
    "keyword": "keyword_argument",
    "Assign": "assignment",
    "AugAssign": "augmented_assignment",
    "AnnAssign": "assignment",
    "Return": "return_statement",
    "Expr": "expression_statement",
    "If": "if_statement",
    "For": "for_statement",
    "AsyncFor": "for_statement",
    "While": "while_statement",
    "With": "with_statement",
    "AsyncWith": "with_statement",
    "Try": "try_statement",
    "Raise": "raise_statement",
    "Import": "import_statement",
    "ImportFrom": "import_statement",
    "List": "list",
    "Tuple": "tuple",
    "Dict": "dictionary",
    "Set": "set",
    "Subscript": "subscript",
    "Lambda": "lambda",
    "IfExp": "ternary_expression",
    "ListComp": "comprehension",
    "SetComp": "comprehension",
    "DictComp": "comprehension",
    "GeneratorExp": "comprehension",
    "Starred": "spread_element",
}

_FIELD_MAP = {
    ("Call", "func"): "function",
    ("Call", "args"): "arguments",
    ("Call", "keywords"): "keywords",
    ("Attribute", "value"): "object",
    ("BinOp", "left"): "left",
    ("BinOp", "right"): "right",
    ("Assign", "value"): "value",
    ("Assign", "targets"): "targets",
    ("AnnAssign", "value"): "value",
    ("AnnAssign", "target"): "targets",
    ("AugAssign", "value"): "value",
    ("AugAssign", "target"): "targets",
    ("Return", "value"): "value",
    ("keyword", "value"): "value",
    ("FormattedValue", "value"): "expression",
    ("Subscript", "value"): "object",
    ("Subscript", "slice"): "index",
}

_OP_TEXT = {
    "Add": "+", "Sub": "-", "Mult": "*", "Div": "/", "FloorDiv": "//",
    "Mod": "%", "Pow": "**", "LShift": "<<", "RShift": ">>",
    "BitOr": "|", "BitAnd": "&", "BitXor": "^", "MatMult": "@",
}


def _snake(name: str) -> str:
    out = []
    for i, ch in enumerate(name):
        if ch.isupper() and i > 0:
            out.append("_")
        out.append(ch.lower())
    return "".join(out)


def _const_type(value: object) -> str:
    if isinstance(value, str):
        return "string"
    if isinstance(value, bool) or value is None:
        return "constant"
    if isinstance(value, (int, float, complex)):
        return "number"
    return "constant"


class _Converter:
    def __init__(self, source: str):
        self.source = source

    def _segment(self, node: ast.AST) -> str:
        try:
            seg = ast.get_source_segment(self.source, node)
        except Exception:
            seg = None
        return seg if seg is not None else ""

    def _lines(self, node: ast.AST, fallback: tuple[int, int]) -> tuple[int, int]:
        start = getattr(node, "lineno", None)
        end = getattr(node, "end_lineno", None)
        if start is None:
            return fallback
        return start, end if end is not None else start

    def convert(self, node: ast.AST, fallback: tuple[int, int] = (1, 1)) -> TreeNode:
        cls = type(node).__name__
        start, end = self._lines(node, fallback)
        ntype = _TYPE_MAP.get(cls)
        if cls == "Constant":
            ntype = _const_type(node.value)  # type: ignore[attr-defined]
        if ntype is None:
            ntype = _snake(cls)
        # Name text comes from the node itself: source segments inside
        # f-strings are unreliable before 3.12.
        if cls == "Name":
            text = node.id  # type: ignore[attr-defined]
        else:
            text = self._segment(node)
            if not text and cls == "Constant":
                text = repr(node.value)  # type: ignore[attr-defined]
        out = TreeNode(type=ntype, text=text, start_line=start, end_line=end)

        for field_name, value in ast.iter_fields(node):
            mapped = _FIELD_MAP.get((cls, field_name), field_name)
            if isinstance(value, ast.AST):
                if type(value).__name__ in ("Load", "Store", "Del"):
                    continue
                if cls == "BinOp" and field_name == "op":
                    op = TreeNode(
                        type="operator",
                        text=_OP_TEXT.get(type(value).__name__, _snake(type(value).__name__)),
                        start_line=start,
                        end_line=end,
                    )
                    out.fields["operator"] = op
                    out.children.append(op)
                    continue
                child = self.convert(value, fallback=(start, end))
                out.fields[mapped] = child
                out.children.append(child)
            elif isinstance(value, list):
                converted = []
                for item in value:
                    if isinstance(item, ast.AST):
                        converted.append(self.convert(item, fallback=(start, end)))
                if converted:
                    out.fields[mapped] = converted
                    out.children.extend(converted)
            elif cls == "Attribute" and field_name == "attr":
                leaf = TreeNode(type="identifier", text=str(value), start_line=start, end_line=end)
                out.fields["attribute"] = leaf
                out.children.append(leaf)
            elif cls == "keyword" and field_name == "arg" and value is not None:
                leaf = TreeNode(type="identifier", text=str(value), start_line=start, end_line=end)
                out.fields["name"] = leaf
                out.children.append(leaf)
        return out


def parse_python(source: str) -> TreeNode:
    """Parse python source; raises SyntaxError on invalid input."""
    tree = ast.parse(source)
    root = _Converter(source).convert(tree)
    root.text = source
    last = max(1, source.count("\n") + 1)
    root.start_line, root.end_line = 1, last
    return root
