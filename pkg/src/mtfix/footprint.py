"""Syntactic metamodel footprints.

A footprint is the set of metamodel element names a transformation
touches on one side: class names referenced by type expressions, plus
"Class.feature" entries for every navigation whose receiver class is
syntactically evident (the rule's input element, `self` inside a helper,
or the result of an oclAsType cast).  Navigations whose host class the
text alone cannot reveal contribute the bare feature name; helper calls
are not structural features and contribute nothing.

The extraction deliberately never consults the metamodels, so it works
on broken candidates just as well as on well-typed ones.
"""

from .mtl import nodes

__all__ = ["extract_footprint", "footprints", "footprint_delta"]

SOURCE_SIDE = "source"
TARGET_SIDE = "target"


def _alias_side(ast, alias):
    if alias is None:
        return None
    if alias == ast.source_mm:
        return SOURCE_SIDE
    if alias == ast.target_mm:
        return TARGET_SIDE
    return None


class _Collector:
    def __init__(self, ast):
        self.ast = ast
        self.source = set()
        self.target = set()

    def add_class(self, tn):
        side = _alias_side(self.ast, tn.mm)
        if side == SOURCE_SIDE:
            self.source.add(tn.name)
        elif side == TARGET_SIDE:
            self.target.add(tn.name)

    def add_feature(self, host, feature):
        if host is None:
            self.source.add(feature)
        elif host[0] == SOURCE_SIDE:
            self.source.add(f"{host[1]}.{feature}")
        else:
            self.target.add(f"{host[1]}.{feature}")

    def host_of(self, expr, env):
        """(side, class) of an expression if the text states it, else None."""
        if isinstance(expr, nodes.VarRef):
            return env.get(expr.name)
        if isinstance(expr, nodes.TypeTest) and expr.kind == "oclAsType":
            side = _alias_side(self.ast, expr.type.mm)
            if side is not None:
                return (side, expr.type.name)
        return None

    def walk(self, expr, env):
        if isinstance(expr, (nodes.Literal, nodes.VarRef)):
            return
        if isinstance(expr, nodes.SequenceLit):
            for elem in expr.elems:
                self.walk(elem, env)
            return
        if isinstance(expr, nodes.FeatureNav):
            self.add_feature(self.host_of(expr.recv, env), expr.feature)
            self.walk(expr.recv, env)
            return
        if isinstance(expr, nodes.HelperCall):
            self.walk(expr.recv, env)
            return
        if isinstance(expr, nodes.TypeTest):
            self.add_class(expr.type)
            self.walk(expr.recv, env)
            return
        if isinstance(expr, (nodes.PredefOp, nodes.CollOp)):
            self.walk(expr.recv, env)
            for arg in expr.args:
                self.walk(arg, env)
            return
        if isinstance(expr, nodes.IteratorOp):
            self.walk(expr.recv, env)
            inner = dict(env)
            inner[expr.var] = None
            self.walk(expr.body, inner)
            return
        raise TypeError(f"cannot walk {type(expr).__name__}")

    def typename_host(self, tn):
        side = _alias_side(self.ast, tn.mm)
        if side is None:
            return None
        return (side, tn.name)

    def run(self):
        for helper in self.ast.helpers:
            self.add_class(helper.context)
            self.add_class(helper.declared_type)
            env = {"self": self.typename_host(helper.context)}
            self.walk(helper.body, env)
        for rule in self.ast.rules:
            env = {}
            self.add_class(rule.in_pattern.type)
            env[rule.in_pattern.var] = self.typename_host(rule.in_pattern.type)
            for out in rule.out_patterns:
                self.add_class(out.type)
                env[out.var] = self.typename_host(out.type)
            if rule.in_pattern.guard is not None:
                self.walk(rule.in_pattern.guard, env)
            for out in rule.out_patterns:
                host = self.typename_host(out.type)
                for binding in out.bindings:
                    if host is None:
                        self.target.add(binding.lhs)
                    else:
                        self.add_feature(host, binding.lhs)
                    self.walk(binding.rhs, env)
        return frozenset(self.source), frozenset(self.target)


def footprints(ast):
    """Both footprints at once, as a (source, target) pair of frozensets."""
    return _Collector(ast).run()


def extract_footprint(ast, side):
    """Footprint of one side; `side` is "source", "target", or a model alias."""
    source, target = footprints(ast)
    if side == SOURCE_SIDE or side == ast.source_mm:
        return source
    if side == TARGET_SIDE or side == ast.target_mm:
        return target
    raise ValueError(f"unknown side {side!r}")


def footprint_delta(original, candidate):
    """Total symmetric difference between the two footprints, both sides."""
    src_o, tgt_o = footprints(original)
    src_c, tgt_c = footprints(candidate)
    return len(src_o ^ src_c) + len(tgt_o ^ tgt_c)
