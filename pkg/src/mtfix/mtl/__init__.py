"""Front-end for the mini transformation language: AST, parser, printer."""

from .nodes import (
    COLLECTION_OPS, ITERATOR_OPS, NO_SPAN, PREDEF_OPS, TYPETEST_KINDS,
    Binding, CollOp, Expr, FeatureNav, HelperCall, HelperDef, InPattern,
    IteratorOp, Literal, OutPatternElement, PredefOp, RuleDef, SequenceLit,
    Span, TransformationAST, TypeName, TypeTest, VarRef, expr_at,
    expr_children, iter_expr_paths, replace_at, replace_child, walk_expr,
)
from .parser import (
    MtlSyntaxError, convert_helper_navs, parse_expression,
    parse_transformation, tokenize,
)
from .printer import (
    format_binding, format_expr, format_in_pattern, format_out_element,
    format_rule, format_type, pretty_print,
)

__all__ = [
    "COLLECTION_OPS", "ITERATOR_OPS", "NO_SPAN", "PREDEF_OPS",
    "TYPETEST_KINDS", "Binding", "CollOp", "Expr", "FeatureNav",
    "HelperCall", "HelperDef", "InPattern", "IteratorOp", "Literal",
    "MtlSyntaxError", "OutPatternElement", "PredefOp", "RuleDef",
    "SequenceLit", "Span", "TransformationAST", "TypeName", "TypeTest",
    "VarRef", "convert_helper_navs", "expr_at", "expr_children",
    "format_binding", "format_expr", "format_in_pattern",
    "format_out_element", "format_rule", "format_type", "iter_expr_paths",
    "parse_expression", "parse_transformation", "pretty_print",
    "replace_at", "replace_child", "tokenize", "walk_expr",
]
