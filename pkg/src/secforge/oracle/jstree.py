"""Hand-rolled JavaScript lexer + recursive-descent parser.

Produces the same generic TreeNode vocabulary as the python converter
(call_expression, member_expression, binary_expression, template_string,
template_substitution, assignment_expression, ...). Covers the practical
statement/expression subset that snippet-scale generated code uses; it is a
syntax gate and rule-matching substrate, not a full ECMAScript front end.
Regex literals and automatic-semicolon corner cases beyond newline/brace
termination are unsupported.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .tree import TreeNode


class JsSyntaxError(SyntaxError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


KEYWORDS = {
    "var", "let", "const", "function", "return", "if", "else", "while", "for",
    "do", "break", "continue", "new", "delete", "typeof", "instanceof", "in",
    "of", "this", "null", "undefined", "true", "false", "throw", "try",
    "catch", "finally", "class", "extends", "super", "switch", "case",
    "default", "void", "yield", "async", "await", "static", "get", "set",
}

PUNCT = [
    ">>>=", "===", "!==", "**=", "...", "<<=", ">>=", ">>>", "&&=", "||=", "??=",
    "=>", "==", "!=", "<=", ">=", "&&", "||", "??", "++", "--", "+=", "-=",
    "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>", "**", "?.",
    "+", "-", "*", "/", "%", "=", "<", ">", "!", "&", "|", "^", "~", "?", ":",
    ";", ",", ".", "(", ")", "[", "]", "{", "}",
]

ASSIGN_OPS = {"+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", ">>>=", "**=", "&&=", "||=", "??="}

BINARY_LEVELS = [
    ("??",),
    ("||",),
    ("&&",),
    ("|",),
    ("^",),
    ("&",),
    ("===", "!==", "==", "!="),
    ("<", ">", "<=", ">=", "instanceof", "in"),
    ("<<", ">>", ">>>"),
    ("+", "-"),
    ("*", "/", "%"),
    ("**",),
]


@dataclass
class Token:
    kind: str  # ident | keyword | number | string | template | punct | eof
    value: str
    line: int
    start: int
    end: int
    nl_before: bool
    parts: list = field(default_factory=list)  # template: [(kind, text, line, start)]


class Lexer:
    def __init__(self, source: str, line_offset: int = 0):
        self.src = source
        self.pos = 0
        self.line = 1 + line_offset
        self.tokens: list[Token] = []

    def error(self, msg: str) -> JsSyntaxError:
        return JsSyntaxError(msg, self.line)

    def tokenize(self) -> list[Token]:
        nl = False
        src, n = self.src, len(self.src)
        while self.pos < n:
            ch = src[self.pos]
            if ch == "\n":
                self.line += 1
                self.pos += 1
                nl = True
                continue
            if ch in " \t\r":
                self.pos += 1
                continue
            if src.startswith("//", self.pos):
                end = src.find("\n", self.pos)
                self.pos = n if end < 0 else end
                continue
            if src.startswith("/*", self.pos):
                end = src.find("*/", self.pos + 2)
                if end < 0:
                    raise self.error("unterminated block comment")
                self.line += src.count("\n", self.pos, end)
                self.pos = end + 2
                continue
            start = self.pos
            if ch.isalpha() or ch in "_$":
                while self.pos < n and (src[self.pos].isalnum() or src[self.pos] in "_$"):
                    self.pos += 1
                word = src[start : self.pos]
                kind = "keyword" if word in KEYWORDS else "ident"
                self._emit(kind, word, start, nl)
            elif ch.isdigit() or (ch == "." and self.pos + 1 < n and src[self.pos + 1].isdigit()):
                self._number()
                self.tokens[-1].nl_before = nl
            elif ch in "'\"":
                self._string(ch)
                self.tokens[-1].nl_before = nl
            elif ch == "`":
                self._template()
                self.tokens[-1].nl_before = nl
            else:
                for p in PUNCT:
                    if src.startswith(p, self.pos):
                        self.pos += len(p)
                        self._emit("punct", p, start, nl)
                        break
                else:
                    raise self.error(f"unexpected character {ch!r}")
            nl = False
        self.tokens.append(Token("eof", "", self.line, n, n, nl))
        return self.tokens

    def _emit(self, kind: str, value: str, start: int, nl: bool, parts: list | None = None):
        tok = Token(kind, value, self.line, start, self.pos, nl)
        if parts is not None:
            tok.parts = parts
        self.tokens.append(tok)

    def _number(self):
        src, n = self.src, len(self.src)
        start = self.pos
        if src.startswith(("0x", "0X", "0b", "0B", "0o", "0O"), self.pos):
            self.pos += 2
            while self.pos < n and (src[self.pos].isalnum() or src[self.pos] == "_"):
                self.pos += 1
        else:
            while self.pos < n and (src[self.pos].isdigit() or src[self.pos] == "_"):
                self.pos += 1
            if self.pos < n and src[self.pos] == ".":
                self.pos += 1
                while self.pos < n and src[self.pos].isdigit():
                    self.pos += 1
            if self.pos < n and src[self.pos] in "eE":
                self.pos += 1
                if self.pos < n and src[self.pos] in "+-":
                    self.pos += 1
                while self.pos < n and src[self.pos].isdigit():
                    self.pos += 1
        self._emit("number", src[start : self.pos], start, False)

    def _string(self, quote: str):
        src, n = self.src, len(self.src)
        start = self.pos
        self.pos += 1
        while self.pos < n:
            ch = src[self.pos]
            if ch == "\\":
                self.pos += 2
                continue
            if ch == "\n":
                raise self.error("unterminated string literal")
            if ch == quote:
                self.pos += 1
                self._emit("string", src[start : self.pos], start, False)
                return
            self.pos += 1
        raise self.error("unterminated string literal")

    def _template(self):
        src, n = self.src, len(self.src)
        start = self.pos
        self.pos += 1
        parts: list = []
        chunk_start = self.pos
        chunk_line = self.line
        while self.pos < n:
            ch = src[self.pos]
            if ch == "\\":
                self.pos += 2
                continue
            if ch == "\n":
                self.line += 1
                self.pos += 1
                continue
            if ch == "`":
                if self.pos > chunk_start:
                    parts.append(("chunk", src[chunk_start : self.pos], chunk_line, chunk_start))
                self.pos += 1
                self._emit("template", src[start : self.pos], start, False, parts=parts)
                return
            if src.startswith("${", self.pos):
                if self.pos > chunk_start:
                    parts.append(("chunk", src[chunk_start : self.pos], chunk_line, chunk_start))
                expr_line = self.line
                self.pos += 2
                expr_start = self.pos
                depth = 1
                while self.pos < n and depth:
                    c = src[self.pos]
                    if c == "\\":
                        self.pos += 2
                        continue
                    if c == "\n":
                        self.line += 1
                    elif c == "{":
                        depth += 1
                    elif c == "}":
                        depth -= 1
                        if depth == 0:
                            break
                    elif c in "'\"":
                        self.pos += 1
                        while self.pos < n and src[self.pos] != c:
                            if src[self.pos] == "\\":
                                self.pos += 1
                            self.pos += 1
                    self.pos += 1
                if depth:
                    raise self.error("unterminated template substitution")
                parts.append(("expr", src[expr_start : self.pos], expr_line, expr_start))
                self.pos += 1  # closing }
                chunk_start = self.pos
                chunk_line = self.line
                continue
            self.pos += 1
        raise self.error("unterminated template literal")


class Parser:
    def __init__(self, source: str, line_offset: int = 0):
        self.src = source
        self.tokens = Lexer(source, line_offset).tokenize()
        self.i = 0

    # --- token helpers -------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def prev(self) -> Token:
        return self.tokens[self.i - 1]

    def at(self, value: str) -> bool:
        t = self.tok
        return t.kind in ("punct", "keyword") and t.value == value

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, value: str) -> Token:
        if not self.at(value):
            found = repr(self.tok.value) if self.tok.value else "end of input"
            raise JsSyntaxError(f"expected {value!r}, found {found}", self.tok.line)
        return self.advance()

    def error(self, msg: str) -> JsSyntaxError:
        return JsSyntaxError(msg, self.tok.line)

    def _node(self, ntype: str, start_tok: Token, **fields) -> TreeNode:
        end = self.prev()
        node = TreeNode(
            type=ntype,
            text=self.src[start_tok.start : end.end],
            start_line=start_tok.line,
            end_line=end.line,
        )
        for name, value in fields.items():
            if value is None or (isinstance(value, list) and not value):
                continue
            node.fields[name] = value
            node.children.extend(value if isinstance(value, list) else [value])
        return node

    def _leaf(self, ntype: str, tok: Token) -> TreeNode:
        return TreeNode(type=ntype, text=tok.value, start_line=tok.line, end_line=tok.line)

    def _end_statement(self):
        if self.at(";"):
            self.advance()
            return
        t = self.tok
        if t.kind == "eof" or t.value == "}" or t.nl_before:
            return
        raise self.error(f"expected ';' before {t.value!r}")

    # --- program / statements ------------------------------------------

    def parse_program(self) -> TreeNode:
        start = self.tok
        body = []
        while self.tok.kind != "eof":
            body.append(self.parse_statement())
        node = self._node("program", start, body=body)
        node.text = self.src
        node.start_line = 1 if not self.tokens else self.tokens[0].line
        node.end_line = self.tokens[-1].line
        return node

    def parse_statement(self) -> TreeNode:
        t = self.tok
        if t.kind == "keyword":
            if t.value == "function" or (t.value == "async" and self.tokens[self.i + 1].value == "function"):
                return self.parse_function(declaration=True)
            if t.value in ("var", "let", "const"):
                node = self.parse_variable_declaration()
                self._end_statement()
                return node
            if t.value == "return":
                start = self.advance()
                value = None
                if not (self.at(";") or self.at("}") or self.tok.kind == "eof" or self.tok.nl_before):
                    value = self.parse_expression()
                node = self._node("return_statement", start, value=value)
                self._end_statement()
                return node
            if t.value == "if":
                return self.parse_if()
            if t.value == "while":
                start = self.advance()
                self.expect("(")
                cond = self.parse_expression()
                self.expect(")")
                body = self.parse_statement()
                return self._node("while_statement", start, condition=cond, body=body)
            if t.value == "do":
                start = self.advance()
                body = self.parse_statement()
                self.expect("while")
                self.expect("(")
                cond = self.parse_expression()
                self.expect(")")
                self._end_statement()
                return self._node("do_statement", start, body=body, condition=cond)
            if t.value == "for":
                return self.parse_for()
            if t.value == "throw":
                start = self.advance()
                value = self.parse_expression()
                self._end_statement()
                return self._node("throw_statement", start, value=value)
            if t.value in ("break", "continue"):
                start = self.advance()
                self._end_statement()
                return self._node(f"{t.value}_statement", start)
            if t.value == "try":
                return self.parse_try()
            if t.value == "class":
                return self.parse_class()
            if t.value == "switch":
                return self.parse_switch()
        if self.at("{"):
            return self.parse_block()
        if self.at(";"):
            start = self.advance()
            return self._node("empty_statement", start)
        start = self.tok
        expr = self.parse_expression()
        self._end_statement()
        return self._node("expression_statement", start, expression=expr)

    def parse_block(self) -> TreeNode:
        start = self.expect("{")
        body = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise self.error("unterminated block")
            body.append(self.parse_statement())
        self.expect("}")
        return self._node("statement_block", start, body=body)

    def parse_variable_declaration(self, consume_keyword: bool = True) -> TreeNode:
        start = self.advance() if consume_keyword else self.tok
        declarators = []
        while True:
            d_start = self.tok
            name = self.parse_binding_target()
            value = None
            if self.at("="):
                self.advance()
                value = self.parse_assignment()
            declarators.append(self._node("variable_declarator", d_start, name=name, value=value))
            if self.at(","):
                self.advance()
                continue
            break
        return self._node("variable_declaration", start, declarators=declarators)

    def parse_binding_target(self) -> TreeNode:
        if self.tok.kind == "ident":
            return self._leaf("identifier", self.advance())
        if self.at("["):
            start = self.advance()
            elements = []
            while not self.at("]"):
                if self.at(","):
                    self.advance()
                    continue
                elements.append(self.parse_binding_target())
                if self.at(","):
                    self.advance()
            self.expect("]")
            return self._node("array_pattern", start, elements=elements)
        if self.at("{"):
            start = self.advance()
            props = []
            while not self.at("}"):
                if self.tok.kind not in ("ident", "keyword", "string"):
                    raise self.error("bad destructuring property")
                p_start = self.tok
                key = self._leaf("property_identifier", self.advance())
                value = None
                if self.at(":"):
                    self.advance()
                    value = self.parse_binding_target()
                if self.at("="):
                    self.advance()
                    self.parse_assignment()
                props.append(self._node("pair", p_start, key=key, value=value))
                if self.at(","):
                    self.advance()
            self.expect("}")
            return self._node("object_pattern", start, properties=props)
        raise self.error(f"expected binding target, found {self.tok.value!r}")

    def parse_if(self) -> TreeNode:
        start = self.expect("if")
        self.expect("(")
        cond = self.parse_expression()
        self.expect(")")
        consequence = self.parse_statement()
        alternative = None
        if self.at("else"):
            self.advance()
            alternative = self.parse_statement()
        return self._node("if_statement", start, condition=cond, consequence=consequence, alternative=alternative)

    def parse_for(self) -> TreeNode:
        start = self.expect("for")
        self.expect("(")
        init = None
        if not self.at(";"):
            if self.tok.kind == "keyword" and self.tok.value in ("var", "let", "const"):
                init = self.parse_variable_declaration()
            else:
                init = self.parse_expression(allow_in=False)
        if self.at("of") or self.at("in"):
            self.advance()
            right = self.parse_expression()
            self.expect(")")
            body = self.parse_statement()
            return self._node("for_in_statement", start, left=init, right=right, body=body)
        self.expect(";")
        cond = None if self.at(";") else self.parse_expression()
        self.expect(";")
        update = None if self.at(")") else self.parse_expression()
        self.expect(")")
        body = self.parse_statement()
        return self._node("for_statement", start, initializer=init, condition=cond, update=update, body=body)

    def parse_try(self) -> TreeNode:
        start = self.expect("try")
        block = self.parse_block()
        handler = None
        finalizer = None
        if self.at("catch"):
            c_start = self.advance()
            param = None
            if self.at("("):
                self.advance()
                param = self.parse_binding_target()
                self.expect(")")
            body = self.parse_block()
            handler = self._node("catch_clause", c_start, parameter=param, body=body)
        if self.at("finally"):
            self.advance()
            finalizer = self.parse_block()
        if handler is None and finalizer is None:
            raise self.error("try without catch or finally")
        return self._node("try_statement", start, block=block, handler=handler, finalizer=finalizer)

    def parse_class(self) -> TreeNode:
        start = self.expect("class")
        name = None
        if self.tok.kind == "ident":
            name = self._leaf("identifier", self.advance())
        superclass = None
        if self.at("extends"):
            self.advance()
            superclass = self.parse_postfix()
        self.expect("{")
        members = []
        while not self.at("}"):
            if self.at(";"):
                self.advance()
                continue
            m_start = self.tok
            while self.tok.kind == "keyword" and self.tok.value in ("static", "async", "get", "set") and \
                    self.tokens[self.i + 1].value != "(":
                self.advance()
            if self.tok.kind not in ("ident", "keyword", "string"):
                raise self.error("bad class member")
            m_name = self._leaf("property_identifier", self.advance())
            if self.at("("):
                params = self.parse_parameters()
                body = self.parse_block()
                members.append(self._node("method_definition", m_start, name=m_name, parameters=params, body=body))
            else:
                value = None
                if self.at("="):
                    self.advance()
                    value = self.parse_assignment()
                self._end_statement()
                members.append(self._node("field_definition", m_start, name=m_name, value=value))
        self.expect("}")
        return self._node("class_declaration", start, name=name, superclass=superclass, members=members)

    def parse_switch(self) -> TreeNode:
        start = self.expect("switch")
        self.expect("(")
        value = self.parse_expression()
        self.expect(")")
        self.expect("{")
        cases = []
        while not self.at("}"):
            c_start = self.tok
            if self.at("case"):
                self.advance()
                test = self.parse_expression()
            elif self.at("default"):
                self.advance()
                test = None
            else:
                raise self.error("expected 'case' or 'default'")
            self.expect(":")
            body = []
            while not (self.at("case") or self.at("default") or self.at("}")):
                body.append(self.parse_statement())
            cases.append(self._node("switch_case", c_start, value=test, body=body))
        self.expect("}")
        return self._node("switch_statement", start, value=value, cases=cases)

    # --- functions ------------------------------------------------------

    def parse_parameters(self) -> TreeNode:
        start = self.expect("(")
        params = []
        while not self.at(")"):
            if self.at("..."):
                r_start = self.advance()
                target = self.parse_binding_target()
                params.append(self._node("rest_parameter", r_start, name=target))
            else:
                target = self.parse_binding_target()
                if self.at("="):
                    self.advance()
                    default = self.parse_assignment()
                    target = self._node("default_parameter", start, name=target, value=default)
                params.append(target)
            if self.at(","):
                self.advance()
        self.expect(")")
        return self._node("formal_parameters", start, parameters=params)

    def parse_function(self, declaration: bool) -> TreeNode:
        start = self.tok
        if self.at("async"):
            self.advance()
        self.expect("function")
        if self.at("*"):
            self.advance()
        name = None
        if self.tok.kind == "ident":
            name = self._leaf("identifier", self.advance())
        elif declaration:
            raise self.error("function declaration needs a name")
        params = self.parse_parameters()
        body = self.parse_block()
        ntype = "function_declaration" if declaration else "function_expression"
        return self._node(ntype, start, name=name, parameters=params, body=body)

    # --- expressions -----------------------------------------------------

    def parse_expression(self, allow_in: bool = True) -> TreeNode:
        first = self.parse_assignment(allow_in=allow_in)
        if not self.at(","):
            return first
        start_tok = self.tokens[self.i - 1]
        exprs = [first]
        while self.at(","):
            self.advance()
            exprs.append(self.parse_assignment(allow_in=allow_in))
        return self._node("sequence_expression", start_tok, expressions=exprs)

    def parse_assignment(self, allow_in: bool = True) -> TreeNode:
        start = self.tok
        left = self.parse_ternary(allow_in=allow_in)
        if self.at("="):
            self.advance()
            right = self.parse_assignment(allow_in=allow_in)
            if left.type not in ("identifier", "member_expression", "subscript_expression", "array_pattern", "object_pattern", "parenthesized_expression"):
                raise JsSyntaxError(f"invalid assignment target ({left.type})", start.line)
            return self._node("assignment_expression", start, left=left, right=right)
        if self.tok.kind == "punct" and self.tok.value in ASSIGN_OPS:
            self.advance()
            right = self.parse_assignment(allow_in=allow_in)
            if left.type not in ("identifier", "member_expression", "subscript_expression"):
                raise JsSyntaxError(f"invalid assignment target ({left.type})", start.line)
            return self._node("augmented_assignment_expression", start, left=left, right=right)
        return left

    def parse_ternary(self, allow_in: bool = True) -> TreeNode:
        start = self.tok
        cond = self.parse_binary(0, allow_in=allow_in)
        if self.at("?"):
            self.advance()
            consequence = self.parse_assignment()
            self.expect(":")
            alternative = self.parse_assignment(allow_in=allow_in)
            return self._node("ternary_expression", start, condition=cond, consequence=consequence, alternative=alternative)
        return cond

    def parse_binary(self, level: int, allow_in: bool = True) -> TreeNode:
        if level >= len(BINARY_LEVELS):
            return self.parse_unary()
        start = self.tok
        left = self.parse_binary(level + 1, allow_in=allow_in)
        ops = BINARY_LEVELS[level]
        while True:
            t = self.tok
            if t.kind not in ("punct", "keyword") or t.value not in ops:
                break
            if t.value == "in" and not allow_in:
                break
            op_tok = self.advance()
            right = self.parse_binary(level + 1, allow_in=allow_in)
            op_leaf = self._leaf("operator", op_tok)
            left = self._node("binary_expression", start, left=left, operator=op_leaf, right=right)
        return left

    def parse_unary(self) -> TreeNode:
        t = self.tok
        if (t.kind == "punct" and t.value in ("!", "~", "+", "-")) or (
            t.kind == "keyword" and t.value in ("typeof", "void", "delete", "await")
        ):
            start = self.advance()
            argument = self.parse_unary()
            return self._node("unary_expression", start, argument=argument)
        if t.kind == "punct" and t.value in ("++", "--"):
            start = self.advance()
            argument = self.parse_unary()
            return self._node("update_expression", start, argument=argument)
        if t.kind == "keyword" and t.value == "new":
            start = self.advance()
            callee = self.parse_postfix(no_call=True)
            arguments = None
            if self.at("("):
                arguments = self.parse_arguments()
            node = self._node("new_expression", start, constructor=callee, arguments=arguments)
            return self.parse_postfix_chain(node, start)
        return self.parse_postfix()

    def parse_arguments(self) -> TreeNode:
        start = self.expect("(")
        args = []
        while not self.at(")"):
            if self.at("..."):
                s_start = self.advance()
                args.append(self._node("spread_element", s_start, argument=self.parse_assignment()))
            else:
                args.append(self.parse_assignment())
            if self.at(","):
                self.advance()
        self.expect(")")
        return self._node("arguments", start, arguments=args)

    def parse_postfix(self, no_call: bool = False) -> TreeNode:
        start = self.tok
        node = self.parse_primary()
        return self.parse_postfix_chain(node, start, no_call=no_call)

    def parse_postfix_chain(self, node: TreeNode, start: Token, no_call: bool = False) -> TreeNode:
        while True:
            if self.at(".") or self.at("?."):
                self.advance()
                if self.tok.kind not in ("ident", "keyword"):
                    raise self.error("expected property name")
                prop = self._leaf("property_identifier", self.advance())
                node = self._node("member_expression", start, object=node, property=prop)
            elif self.at("["):
                self.advance()
                index = self.parse_expression()
                self.expect("]")
                node = self._node("subscript_expression", start, object=node, index=index)
            elif self.at("(") and not no_call:
                arguments = self.parse_arguments()
                node = self._node("call_expression", start, function=node, arguments=arguments)
            elif self.tok.kind == "template":
                template = self.parse_template(self.advance())
                node = self._node("call_expression", start, function=node, arguments=template)
            elif self.tok.kind == "punct" and self.tok.value in ("++", "--") and not self.tok.nl_before:
                self.advance()
                node = self._node("update_expression", start, argument=node)
            else:
                return node

    def parse_template(self, tok: Token) -> TreeNode:
        node = TreeNode(type="template_string", text=tok.value, start_line=tok.line, end_line=self.prev().line)
        children = []
        for kind, text, line, _start in tok.parts:
            if kind == "chunk":
                children.append(TreeNode(type="string_fragment", text=text, start_line=line, end_line=line))
            else:
                sub = Parser(text, line_offset=line - 1)
                expr = sub.parse_expression()
                if sub.tok.kind != "eof":
                    raise JsSyntaxError("trailing input in template substitution", sub.tok.line)
                hole = TreeNode(
                    type="template_substitution",
                    text="${" + text + "}",
                    start_line=line,
                    end_line=expr.end_line,
                )
                hole.fields["expression"] = expr
                hole.children.append(expr)
                children.append(hole)
        node.children = children
        if children:
            node.fields["parts"] = children
        return node

    def _arrow_ahead(self) -> bool:
        # at '(': look for the matching ')' immediately followed by '=>'
        depth = 0
        j = self.i
        while j < len(self.tokens):
            v = self.tokens[j]
            if v.kind == "punct":
                if v.value in ("(", "[", "{"):
                    depth += 1
                elif v.value in (")", "]", "}"):
                    depth -= 1
                    if depth == 0:
                        nxt = self.tokens[j + 1] if j + 1 < len(self.tokens) else None
                        return nxt is not None and nxt.kind == "punct" and nxt.value == "=>"
            j += 1
        return False

    def parse_arrow(self, start: Token) -> TreeNode:
        if self.at("("):
            params = self.parse_parameters()
        else:
            ident = self._leaf("identifier", self.advance())
            params = self._node("formal_parameters", start, parameters=[ident])
        self.expect("=>")
        if self.at("{"):
            body = self.parse_block()
        else:
            body = self.parse_assignment()
        return self._node("arrow_function", start, parameters=params, body=body)

    def parse_primary(self) -> TreeNode:
        t = self.tok
        if t.kind == "number":
            return self._leaf("number", self.advance())
        if t.kind == "string":
            return self._leaf("string", self.advance())
        if t.kind == "template":
            return self.parse_template(self.advance())
        if t.kind == "ident":
            nxt = self.tokens[self.i + 1] if self.i + 1 < len(self.tokens) else None
            if nxt is not None and nxt.kind == "punct" and nxt.value == "=>":
                return self.parse_arrow(t)
            return self._leaf("identifier", self.advance())
        if t.kind == "keyword":
            if t.value == "async":
                nxt = self.tokens[self.i + 1]
                if nxt.kind == "ident" or (nxt.kind == "punct" and nxt.value == "("):
                    self.advance()
                    return self.parse_arrow(self.tok)
                if nxt.value == "function":
                    return self.parse_function(declaration=False)
            if t.value == "function":
                return self.parse_function(declaration=False)
            if t.value in ("true", "false", "null", "undefined"):
                return self._leaf("constant", self.advance())
            if t.value == "this":
                return self._leaf("this", self.advance())
            if t.value == "super":
                return self._leaf("super", self.advance())
            if t.value in ("get", "set", "of", "static"):  # contextual keywords as plain identifiers
                return self._leaf("identifier", self.advance())
        if self.at("("):
            if self._arrow_ahead():
                return self.parse_arrow(t)
            start = self.advance()
            expr = self.parse_expression()
            self.expect(")")
            return self._node("parenthesized_expression", start, expression=expr)
        if self.at("["):
            start = self.advance()
            elements = []
            while not self.at("]"):
                if self.at("..."):
                    s_start = self.advance()
                    elements.append(self._node("spread_element", s_start, argument=self.parse_assignment()))
                else:
                    elements.append(self.parse_assignment())
                if self.at(","):
                    self.advance()
            self.expect("]")
            return self._node("array", start, elements=elements)
        if self.at("{"):
            return self.parse_object()
        found = repr(t.value) if t.value else "end of input"
        raise self.error(f"unexpected token {found}")

    def parse_object(self) -> TreeNode:
        start = self.expect("{")
        properties = []
        while not self.at("}"):
            if self.at("..."):
                s_start = self.advance()
                properties.append(self._node("spread_element", s_start, argument=self.parse_assignment()))
            else:
                p_start = self.tok
                computed = False
                if self.at("["):
                    self.advance()
                    key = self.parse_assignment()
                    self.expect("]")
                    computed = True
                elif self.tok.kind in ("ident", "keyword", "string", "number"):
                    key = self._leaf("property_identifier", self.advance())
                else:
                    raise self.error("bad object property")
                if self.at("("):
                    params = self.parse_parameters()
                    body = self.parse_block()
                    properties.append(self._node("method_definition", p_start, name=key, parameters=params, body=body))
                elif self.at(":"):
                    self.advance()
                    value = self.parse_assignment()
                    properties.append(self._node("pair", p_start, key=key, value=value))
                elif not computed and key.type == "property_identifier":
                    properties.append(self._node("shorthand_property", p_start, key=key))
                else:
                    raise self.error("bad object property")
            if self.at(","):
                self.advance()
        self.expect("}")
        return self._node("object", start, properties=properties)


def parse_javascript(source: str) -> TreeNode:
    """Parse javascript source; raises JsSyntaxError on invalid input."""
    return Parser(source).parse_program()
