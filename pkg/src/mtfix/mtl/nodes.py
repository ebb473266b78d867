"""AST node types for the mini transformation language.

All nodes are plain dataclasses.  Source spans are carried on every node
but excluded from equality, so two trees compare equal exactly when they
are structurally identical regardless of layout.  Trees are treated as
immutable by convention; the edit module copies before modifying.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

ITERATOR_OPS = ("collect", "select", "reject", "exists", "forAll")
COLLECTION_OPS = ("flatten", "includes", "size", "first", "isEmpty")
PREDEF_OPS = ("toString", "size")
TYPETEST_KINDS = ("oclIsKindOf", "oclAsType")


@dataclass(frozen=True)
class Span:
    line: int = 0
    col: int = 0
    end_line: int = 0
    end_col: int = 0

    def covers(self, other: "Span") -> bool:
        return ((self.line, self.col) <= (other.line, other.col)
                and (other.end_line, other.end_col) <= (self.end_line, self.end_col))


NO_SPAN = Span()


def span_field():
    return field(default=NO_SPAN, compare=False, repr=False)


@dataclass
class TypeName:
    """A type written in source: `UML!Activity`, `String`, or
    `Sequence(UML!ActivityPartition)` (many=True)."""

    mm: Optional[str]  # metamodel name, None for primitives
    name: str
    many: bool = False
    span: Span = span_field()


@dataclass
class VarRef:
    name: str
    span: Span = span_field()


@dataclass
class FeatureNav:
    recv: "Expr"
    feature: str
    span: Span = span_field()


@dataclass
class HelperCall:
    recv: "Expr"
    helper: str
    span: Span = span_field()


@dataclass
class PredefOp:
    """Scalar operation called with '.', e.g. `x.toString()`."""

    recv: "Expr"
    op: str
    args: list["Expr"] = field(default_factory=list)
    span: Span = span_field()


@dataclass
class CollOp:
    """Collection operation called with '->', e.g. `xs->flatten()`."""

    recv: "Expr"
    op: str
    args: list["Expr"] = field(default_factory=list)
    span: Span = span_field()


@dataclass
class IteratorOp:
    """Iterator with a binder, e.g. `xs->select(e | body)`."""

    recv: "Expr"
    op: str
    var: str
    body: "Expr"
    span: Span = span_field()


@dataclass
class TypeTest:
    recv: "Expr"
    kind: str  # oclIsKindOf | oclAsType
    type: TypeName
    span: Span = span_field()


@dataclass
class Literal:
    value: Union[str, int, bool]
    span: Span = span_field()


@dataclass
class SequenceLit:
    elems: list["Expr"] = field(default_factory=list)
    span: Span = span_field()


Expr = Union[VarRef, FeatureNav, HelperCall, PredefOp, CollOp, IteratorOp,
             TypeTest, Literal, SequenceLit]


@dataclass
class Binding:
    lhs: str
    rhs: Expr
    span: Span = span_field()


@dataclass
class OutPatternElement:
    var: str
    type: TypeName
    bindings: list[Binding] = field(default_factory=list)
    span: Span = span_field()


@dataclass
class InPattern:
    var: str
    type: TypeName
    guard: Optional[Expr] = None
    span: Span = span_field()


@dataclass
class RuleDef:
    name: str
    in_pattern: InPattern
    out_patterns: list[OutPatternElement] = field(default_factory=list)
    span: Span = span_field()


@dataclass
class HelperDef:
    context: TypeName
    name: str
    declared_type: TypeName
    body: Expr
    span: Span = span_field()


@dataclass
class TransformationAST:
    name: Optional[str]     # from an optional `module <name>;` header
    source_mm: str          # bound to alias IN
    target_mm: str          # bound to alias OUT
    helpers: list[HelperDef] = field(default_factory=list)
    rules: list[RuleDef] = field(default_factory=list)
    span: Span = span_field()

    def rule(self, name: str) -> Optional[RuleDef]:
        for r in self.rules:
            if r.name == name:
                return r
        return None

    def helper_names(self) -> set[str]:
        return {h.name for h in self.helpers}


def expr_children(expr: Expr) -> list[Expr]:
    """Deterministic child list, used for expression paths in edit locators."""
    if isinstance(expr, (FeatureNav, HelperCall, TypeTest)):
        return [expr.recv]
    if isinstance(expr, (PredefOp, CollOp)):
        return [expr.recv] + list(expr.args)
    if isinstance(expr, IteratorOp):
        return [expr.recv, expr.body]
    if isinstance(expr, SequenceLit):
        return list(expr.elems)
    return []


def walk_expr(expr: Expr):
    """Yield expr and all descendants, preorder."""
    yield expr
    for child in expr_children(expr):
        yield from walk_expr(child)


def iter_expr_paths(expr: Expr, _prefix: tuple = ()):
    """Yield (path, node) pairs preorder; path is a tuple of child indices."""
    yield _prefix, expr
    for i, child in enumerate(expr_children(expr)):
        yield from iter_expr_paths(child, _prefix + (i,))


def expr_at(expr: Expr, path) -> Optional[Expr]:
    """Node at a child-index path, or None when the path does not resolve."""
    node = expr
    for index in path:
        children = expr_children(node)
        if not 0 <= index < len(children):
            return None
        node = children[index]
    return node


def replace_child(expr: Expr, index: int, child: Expr) -> Expr:
    """Copy of expr with child slot `index` (per expr_children) swapped."""
    if isinstance(expr, (FeatureNav, HelperCall, TypeTest)) and index == 0:
        return replace(expr, recv=child)
    if isinstance(expr, (PredefOp, CollOp)):
        if index == 0:
            return replace(expr, recv=child)
        args = list(expr.args)
        args[index - 1] = child
        return replace(expr, args=args)
    if isinstance(expr, IteratorOp):
        if index == 0:
            return replace(expr, recv=child)
        if index == 1:
            return replace(expr, body=child)
    if isinstance(expr, SequenceLit):
        elems = list(expr.elems)
        elems[index] = child
        return replace(expr, elems=elems)
    raise IndexError(f"{type(expr).__name__} has no child slot {index}")


def replace_at(expr: Expr, path, node: Expr) -> Expr:
    """Copy of expr with the node at `path` replaced; shares untouched parts."""
    if not path:
        return node
    children = expr_children(expr)
    index = path[0]
    if not 0 <= index < len(children):
        raise IndexError(f"path step {index} out of range")
    return replace_child(expr, index, replace_at(children[index], path[1:], node))
