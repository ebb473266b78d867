"""Canonical pretty-printer.

parse(pretty_print(ast)) is structurally equal to ast for every valid
tree.  The layout is fixed (one binding per line, one `from` line per
rule) so textual diffs between a faulty and a repaired transformation
stay local to the changed constructs.
"""

from __future__ import annotations

from .nodes import (
    Binding, CollOp, FeatureNav, HelperCall, HelperDef, InPattern,
    IteratorOp, Literal, OutPatternElement, PredefOp, RuleDef, SequenceLit,
    TransformationAST, TypeName, TypeTest, VarRef,
)


def format_type(t: TypeName) -> str:
    base = t.name if t.mm is None else "%s!%s" % (t.mm, t.name)
    return "Sequence(%s)" % base if t.many else base


def format_expr(expr) -> str:
    if isinstance(expr, VarRef):
        return expr.name
    if isinstance(expr, FeatureNav):
        return "%s.%s" % (format_expr(expr.recv), expr.feature)
    if isinstance(expr, HelperCall):
        return "%s.%s" % (format_expr(expr.recv), expr.helper)
    if isinstance(expr, PredefOp):
        return "%s.%s(%s)" % (format_expr(expr.recv), expr.op,
                              ", ".join(format_expr(a) for a in expr.args))
    if isinstance(expr, CollOp):
        return "%s->%s(%s)" % (format_expr(expr.recv), expr.op,
                               ", ".join(format_expr(a) for a in expr.args))
    if isinstance(expr, IteratorOp):
        return "%s->%s(%s | %s)" % (format_expr(expr.recv), expr.op,
                                    expr.var, format_expr(expr.body))
    if isinstance(expr, TypeTest):
        return "%s.%s(%s)" % (format_expr(expr.recv), expr.kind,
                              format_type(expr.type))
    if isinstance(expr, Literal):
        if isinstance(expr.value, bool):
            return "true" if expr.value else "false"
        if isinstance(expr.value, str):
            return "'%s'" % expr.value
        return str(expr.value)
    if isinstance(expr, SequenceLit):
        return "Sequence{%s}" % ", ".join(format_expr(e) for e in expr.elems)
    raise TypeError("not an expression node: %r" % (expr,))


def format_binding(b: Binding) -> str:
    return "%s <- %s" % (b.lhs, format_expr(b.rhs))


def format_in_pattern(p: InPattern) -> str:
    text = "%s : %s" % (p.var, format_type(p.type))
    if p.guard is not None:
        text += " (%s)" % format_expr(p.guard)
    return text


def format_out_element(elem: OutPatternElement) -> str:
    """Single-line rendering, used for fragment comparison in scoring."""
    text = "%s : %s" % (elem.var, format_type(elem.type))
    if elem.bindings:
        text += " (%s)" % ", ".join(format_binding(b) for b in elem.bindings)
    return text


def _element_lines(elem: OutPatternElement, lead: str):
    lines = []
    head = "    %s%s : %s" % (lead, elem.var, format_type(elem.type))
    if not elem.bindings:
        lines.append(head)
        return lines, False
    lines.append(head + " (")
    for i, b in enumerate(elem.bindings):
        comma = "," if i < len(elem.bindings) - 1 else ""
        lines.append("        %s%s" % (format_binding(b), comma))
    lines.append("    )")
    return lines, True


def format_rule(rule: RuleDef) -> str:
    lines = ["rule %s {" % rule.name,
             "    from %s" % format_in_pattern(rule.in_pattern)]
    for i, elem in enumerate(rule.out_patterns):
        lead = "to " if i == 0 else ""
        elem_lines, parens = _element_lines(elem, lead)
        last = i == len(rule.out_patterns) - 1
        if not last:
            elem_lines[-1] += ","
        elif parens:
            elem_lines[-1] += "}"
        lines.extend(elem_lines)
        if last and not parens:
            lines.append("}")
    return "\n".join(lines)


def format_helper(h: HelperDef) -> str:
    return ("helper context %s def :\n    %s : %s =\n    %s;"
            % (format_type(h.context), h.name, format_type(h.declared_type),
               format_expr(h.body)))


def pretty_print(ast: TransformationAST) -> str:
    header = "create OUT : %s from IN : %s;" % (ast.target_mm, ast.source_mm)
    if ast.name:
        header = "module %s;\n" % ast.name + header
    sections = [header]
    sections.extend(format_helper(h) for h in ast.helpers)
    sections.extend(format_rule(r) for r in ast.rules)
    return "\n\n".join(sections) + "\n"
