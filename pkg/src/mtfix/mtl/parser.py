"""Lexer and recursive-descent parser for the mini transformation language.

The grammar is the declarative subset visible in the bundled fixtures:

    [module <name> ;]
    create OUT : <TargetMM> from IN : <SourceMM> ;
    helper context <Type> def : <name> : <Type> = <expr> ;
    rule <name> {
        from <var> : <Type> [( <guard-expr> )]
        to <var> : <Type> [( <binding> , ... )] [, <more out elements>]
    }

Expressions are postfix chains over variables and literals: `.feature`
navigation, `.op()` scalar calls (closed set), `->op(...)` collection
calls (closed set), `->it(v | body)` iterators (closed set),
`.oclIsKindOf(T)` / `.oclAsType(T)`, and `Sequence{...}` literals.
`--` comments run to end of line.  Operation names outside the closed
sets are syntax errors, never silently accepted.
"""

from __future__ import annotations

from dataclasses import dataclass

from .nodes import (
    COLLECTION_OPS, ITERATOR_OPS, PREDEF_OPS, TYPETEST_KINDS,
    Binding, CollOp, FeatureNav, HelperCall, HelperDef, InPattern,
    IteratorOp, Literal, OutPatternElement, PredefOp, RuleDef, SequenceLit,
    Span, TransformationAST, TypeName, TypeTest, VarRef,
)


class MtlSyntaxError(Exception):
    def __init__(self, message, line, col):
        super().__init__("%d:%d: %s" % (line, col, message))
        self.line = line
        self.col = col
        self.message = message


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, INT, STRING, SYM, EOF
    value: str
    line: int
    col: int

    @property
    def end_col(self):
        return self.col + max(len(self.value), 1)


_TWO_CHAR = ("->", "<-")
_ONE_CHAR = "{}():;,.|!="


def tokenize(source: str) -> list[Token]:
    toks = []
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("--", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        two = source[i:i + 2]
        if two in _TWO_CHAR:
            toks.append(Token("SYM", two, line, col))
            i += 2
            col += 2
            continue
        if ch == "'":
            j = source.find("'", i + 1)
            if j < 0 or "\n" in source[i + 1:j]:
                raise MtlSyntaxError("unterminated string literal", line, col)
            toks.append(Token("STRING", source[i + 1:j], line, col))
            col += j + 1 - i
            i = j + 1
            continue
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            toks.append(Token("INT", source[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            toks.append(Token("IDENT", source[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch in _ONE_CHAR:
            toks.append(Token("SYM", ch, line, col))
            i += 1
            col += 1
            continue
        raise MtlSyntaxError("unexpected character %r" % ch, line, col)
    toks.append(Token("EOF", "", line, col))
    return toks


class _Parser:
    def __init__(self, source):
        self.toks = tokenize(source)
        self.pos = 0

    # -- token plumbing ----------------------------------------------------
    def peek(self, offset=0) -> Token:
        return self.toks[min(self.pos + offset, len(self.toks) - 1)]

    def next(self) -> Token:
        tok = self.toks[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise MtlSyntaxError(message, tok.line, tok.col)

    def expect_sym(self, value) -> Token:
        tok = self.next()
        if tok.kind != "SYM" or tok.value != value:
            self.error("expected %r, found %r" % (value, tok.value or "end of input"), tok)
        return tok

    def expect_word(self, word) -> Token:
        tok = self.next()
        if tok.kind != "IDENT" or tok.value != word:
            self.error("expected %r, found %r" % (word, tok.value or "end of input"), tok)
        return tok

    def expect_ident(self, what="identifier") -> Token:
        tok = self.next()
        if tok.kind != "IDENT":
            self.error("expected %s, found %r" % (what, tok.value or "end of input"), tok)
        return tok

    def at_word(self, word) -> bool:
        tok = self.peek()
        return tok.kind == "IDENT" and tok.value == word

    def prev_end(self):
        tok = self.toks[self.pos - 1]
        return tok.line, tok.end_col

    def span_from(self, tok: Token) -> Span:
        end_line, end_col = self.prev_end()
        return Span(tok.line, tok.col, end_line, end_col)

    # -- grammar -----------------------------------------------------------
    def parse_module(self) -> TransformationAST:
        start = self.peek()
        name = None
        if self.at_word("module"):
            self.next()
            name = self.expect_ident("module name").value
            self.expect_sym(";")
        self.expect_word("create")
        self.expect_word("OUT")
        self.expect_sym(":")
        target_mm = self.expect_ident("target metamodel name").value
        self.expect_word("from")
        self.expect_word("IN")
        self.expect_sym(":")
        source_mm = self.expect_ident("source metamodel name").value
        self.expect_sym(";")

        helpers, rules = [], []
        while True:
            if self.at_word("helper"):
                helpers.append(self.parse_helper())
            elif self.at_word("rule"):
                rules.append(self.parse_rule())
            elif self.peek().kind == "EOF":
                break
            else:
                self.error("expected 'helper', 'rule', or end of input, found %r"
                           % self.peek().value)
        ast = TransformationAST(name, source_mm, target_mm, helpers, rules,
                                self.span_from(start))
        _resolve_helper_calls(ast)
        return ast

    def parse_helper(self) -> HelperDef:
        start = self.expect_word("helper")
        self.expect_word("context")
        context = self.parse_type()
        self.expect_word("def")
        self.expect_sym(":")
        name = self.expect_ident("helper name").value
        self.expect_sym(":")
        declared = self.parse_type()
        self.expect_sym("=")
        body = self.parse_expr()
        self.expect_sym(";")
        return HelperDef(context, name, declared, body, self.span_from(start))

    def parse_rule(self) -> RuleDef:
        start = self.expect_word("rule")
        name = self.expect_ident("rule name").value
        self.expect_sym("{")
        self.expect_word("from")
        in_pat = self.parse_in_pattern()
        self.expect_word("to")
        outs = [self.parse_out_element()]
        while self.peek().kind == "SYM" and self.peek().value == ",":
            self.next()
            outs.append(self.parse_out_element())
        self.expect_sym("}")
        return RuleDef(name, in_pat, outs, self.span_from(start))

    def parse_in_pattern(self) -> InPattern:
        start = self.peek()
        var = self.expect_ident("pattern variable").value
        self.expect_sym(":")
        typ = self.parse_type()
        guard = None
        if self.peek().kind == "SYM" and self.peek().value == "(":
            self.next()
            guard = self.parse_expr()
            self.expect_sym(")")
        return InPattern(var, typ, guard, self.span_from(start))

    def parse_out_element(self) -> OutPatternElement:
        start = self.peek()
        var = self.expect_ident("pattern variable").value
        self.expect_sym(":")
        typ = self.parse_type()
        bindings = []
        if self.peek().kind == "SYM" and self.peek().value == "(":
            self.next()
            if not (self.peek().kind == "SYM" and self.peek().value == ")"):
                bindings.append(self.parse_binding())
                while self.peek().kind == "SYM" and self.peek().value == ",":
                    self.next()
                    bindings.append(self.parse_binding())
            self.expect_sym(")")
        return OutPatternElement(var, typ, bindings, self.span_from(start))

    def parse_binding(self) -> Binding:
        start = self.peek()
        lhs = self.expect_ident("target feature name").value
        self.expect_sym("<-")
        rhs = self.parse_expr()
        return Binding(lhs, rhs, self.span_from(start))

    def parse_type(self) -> TypeName:
        start = self.peek()
        if self.at_word("Sequence") and self.peek(1).value == "(":
            self.next()
            self.next()
            inner = self.parse_type()
            self.expect_sym(")")
            return TypeName(inner.mm, inner.name, True, self.span_from(start))
        first = self.expect_ident("type name")
        if self.peek().kind == "SYM" and self.peek().value == "!":
            self.next()
            cls = self.expect_ident("class name")
            return TypeName(first.value, cls.value, False, self.span_from(start))
        return TypeName(None, first.value, False, self.span_from(start))

    # -- expressions ---------------------------------------------------------
    def parse_expr(self):
        expr = self.parse_primary()
        while self.peek().kind == "SYM" and self.peek().value in (".", "->"):
            sym = self.next()
            name_tok = self.expect_ident("operation or feature name")
            name = name_tok.value
            if sym.value == ".":
                if self.peek().kind == "SYM" and self.peek().value == "(":
                    if name in TYPETEST_KINDS:
                        self.next()
                        typ = self.parse_type()
                        self.expect_sym(")")
                        expr = TypeTest(expr, name, typ,
                                        self._span_of(expr, name_tok))
                    elif name in PREDEF_OPS:
                        args = self.parse_args()
                        expr = PredefOp(expr, name, args,
                                        self._span_of(expr, name_tok))
                    else:
                        self.error(
                            "unknown operation %r (expected one of %s)"
                            % (name, ", ".join(PREDEF_OPS + TYPETEST_KINDS)),
                            name_tok)
                else:
                    expr = FeatureNav(expr, name, self._span_of(expr, name_tok))
            else:
                if not (self.peek().kind == "SYM" and self.peek().value == "("):
                    self.error("expected '(' after '->%s'" % name)
                if name in ITERATOR_OPS:
                    self.next()
                    var = self.expect_ident("iterator variable").value
                    self.expect_sym("|")
                    body = self.parse_expr()
                    self.expect_sym(")")
                    expr = IteratorOp(expr, name, var, body,
                                      self._span_of(expr, name_tok))
                elif name in COLLECTION_OPS:
                    args = self.parse_args()
                    expr = CollOp(expr, name, args, self._span_of(expr, name_tok))
                else:
                    self.error(
                        "unknown collection operation %r (expected one of %s)"
                        % (name, ", ".join(ITERATOR_OPS + COLLECTION_OPS)),
                        name_tok)
        return expr

    def _span_of(self, expr, tok):
        end_line, end_col = self.prev_end()
        start = getattr(expr, "span", None)
        if start is not None and start.line:
            return Span(start.line, start.col, end_line, end_col)
        return Span(tok.line, tok.col, end_line, end_col)

    def parse_args(self):
        self.expect_sym("(")
        args = []
        if not (self.peek().kind == "SYM" and self.peek().value == ")"):
            args.append(self.parse_expr())
            while self.peek().kind == "SYM" and self.peek().value == ",":
                self.next()
                args.append(self.parse_expr())
        self.expect_sym(")")
        return args

    def parse_primary(self):
        tok = self.peek()
        if tok.kind == "INT":
            self.next()
            return Literal(int(tok.value), self.span_from(tok))
        if tok.kind == "STRING":
            self.next()
            return Literal(tok.value, self.span_from(tok))
        if tok.kind == "IDENT":
            if tok.value in ("true", "false"):
                self.next()
                return Literal(tok.value == "true", self.span_from(tok))
            if tok.value == "Sequence" and self.peek(1).value == "{":
                self.next()
                self.next()
                elems = []
                if not (self.peek().kind == "SYM" and self.peek().value == "}"):
                    elems.append(self.parse_expr())
                    while self.peek().kind == "SYM" and self.peek().value == ",":
                        self.next()
                        elems.append(self.parse_expr())
                self.expect_sym("}")
                return SequenceLit(elems, self.span_from(tok))
            self.next()
            return VarRef(tok.value, self.span_from(tok))
        if tok.kind == "SYM" and tok.value == "(":
            self.next()
            expr = self.parse_expr()
            self.expect_sym(")")
            return expr
        self.error("expected expression, found %r" % (tok.value or "end of input"))


def _resolve_helper_calls(ast: TransformationAST):
    """Rewrite `recv.name` navigations whose name matches a declared helper
    into HelperCall nodes.  Run after parsing and after edit insertion so
    structurally equal sources always yield structurally equal trees."""
    names = ast.helper_names()
    if not names:
        return
    for helper in ast.helpers:
        helper.body = convert_helper_navs(helper.body, names)
    for rule in ast.rules:
        if rule.in_pattern.guard is not None:
            rule.in_pattern.guard = convert_helper_navs(rule.in_pattern.guard, names)
        for elem in rule.out_patterns:
            for binding in elem.bindings:
                binding.rhs = convert_helper_navs(binding.rhs, names)


def convert_helper_navs(expr, helper_names):
    conv = lambda e: convert_helper_navs(e, helper_names)
    if isinstance(expr, (FeatureNav, HelperCall, TypeTest)):
        expr.recv = conv(expr.recv)
    elif isinstance(expr, (PredefOp, CollOp)):
        expr.recv = conv(expr.recv)
        expr.args = [conv(a) for a in expr.args]
    elif isinstance(expr, IteratorOp):
        expr.recv = conv(expr.recv)
        expr.body = conv(expr.body)
    elif isinstance(expr, SequenceLit):
        expr.elems = [conv(e) for e in expr.elems]
    if isinstance(expr, FeatureNav) and expr.feature in helper_names:
        return HelperCall(expr.recv, expr.feature, expr.span)
    return expr


def parse_transformation(source: str) -> TransformationAST:
    """Parse a transformation source into an AST; raises MtlSyntaxError."""
    return _Parser(source).parse_module()


def parse_expression(text: str, helper_names=()) -> "Expr":
    """Parse a standalone expression (used when applying edits)."""
    p = _Parser(text)
    expr = p.parse_expr()
    tok = p.peek()
    if tok.kind != "EOF":
        p.error("trailing input after expression: %r" % tok.value)
    return convert_helper_navs(expr, set(helper_names))
