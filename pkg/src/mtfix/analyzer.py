"""Static type checking for rule-based transformations.

The analyzer infers a type for every expression, checks bindings against
the target metamodel, and reports problems in a fixed seven-category
taxonomy.  Types it cannot determine become an explicit unknown that
propagates silently, so a single fault does not cascade into a wall of
follow-up errors.
"""

from dataclasses import dataclass, replace
from typing import Optional

from .metamodel import PRIMITIVES, Metamodel, accessible_features, find_feature, is_subtype
from .mtl import nodes
from .mtl.printer import format_type

__all__ = [
    "ERROR_CATEGORIES",
    "SOURCE",
    "TARGET",
    "PRIMITIVE",
    "UNKNOWN",
    "UNKNOWN_TYPE",
    "InferredType",
    "AnalysisError",
    "BindingResolution",
    "NOT_NEEDED",
    "RESOLVED",
    "UNRESOLVED",
    "infer_type",
    "analyze",
    "resolve_binding",
    "resolvable",
    "error_summary",
]

ERROR_CATEGORIES = (
    "InvalidType",
    "FeatureNotFound",
    "IncompatibleBindingType",
    "PossibleUnresolvedBinding",
    "CompulsoryFeatureNotInitialized",
    "InvalidOperationCall",
    "InvalidTypeParameter",
)

# Type origins.
SOURCE = "source"
TARGET = "target"
PRIMITIVE = "primitive"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class InferredType:
    """Static type of an expression: where it lives, its base name, arity."""

    origin: str
    base: str
    many: bool = False

    @property
    def is_unknown(self):
        return self.origin == UNKNOWN

    @property
    def is_primitive(self):
        return self.origin == PRIMITIVE

    @property
    def is_class(self):
        return self.origin in (SOURCE, TARGET)

    def with_many(self, many):
        return replace(self, many=many)

    def __str__(self):
        if self.is_unknown:
            return "OclAny"
        name = self.base if self.is_primitive else f"{self.origin}:{self.base}"
        return f"Sequence({name})" if self.many else name


UNKNOWN_TYPE = InferredType(UNKNOWN, "?", False)


@dataclass(frozen=True)
class AnalysisError:
    """One reported problem, anchored to a source location and a
    structural site (rule/out-element/binding path) that stays meaningful
    across reformatting."""

    category: str
    message: str
    line: int
    col: int
    rule: Optional[str]
    site: tuple
    symbol: str = ""

    def to_dict(self):
        return {
            "category": self.category,
            "message": self.message,
            "line": self.line,
            "col": self.col,
            "rule": self.rule,
            "site": list(self.site),
            "symbol": self.symbol,
        }


# Binding resolution outcomes.
NOT_NEEDED = "NotNeeded"
RESOLVED = "Resolved"
UNRESOLVED = "Unresolved"


@dataclass(frozen=True)
class BindingResolution:
    status: str
    rule: Optional[str] = None
    from_class: Optional[str] = None
    to_class: Optional[str] = None


class _Analyzer:
    def __init__(self, ast, src, tgt):
        self.ast = ast
        self.src = src
        self.tgt = tgt
        self.errors = []
        self._rule = None
        self._site = ()

    # -- plumbing ---------------------------------------------------------

    def error(self, category, message, span, site=None, symbol=""):
        self.errors.append(
            AnalysisError(
                category=category,
                message=message,
                line=span.line,
                col=span.col,
                rule=self._rule,
                site=self._site if site is None else site,
                symbol=symbol,
            )
        )

    def mm_origin(self, alias):
        if alias is not None:
            if alias == self.ast.source_mm or alias == self.src.name:
                return SOURCE
            if alias == self.ast.target_mm or alias == self.tgt.name:
                return TARGET
        return None

    def mm_of(self, origin) -> Metamodel:
        return self.src if origin == SOURCE else self.tgt

    def resolve_typename(self, tn):
        """Map a syntactic type reference onto an InferredType, or None."""
        if tn.mm is None:
            if tn.name in PRIMITIVES:
                return InferredType(PRIMITIVE, tn.name, tn.many)
            if self.src.has_class(tn.name):
                return InferredType(SOURCE, tn.name, tn.many)
            if self.tgt.has_class(tn.name):
                return InferredType(TARGET, tn.name, tn.many)
            return None
        origin = self.mm_origin(tn.mm)
        if origin is None or not self.mm_of(origin).has_class(tn.name):
            return None
        return InferredType(origin, tn.name, tn.many)

    def feature_type(self, recv, fdef):
        origin = PRIMITIVE if fdef.is_attribute else recv.origin
        return InferredType(origin, fdef.type, fdef.many or recv.many)

    # -- expression typing ------------------------------------------------

    def infer(self, expr, env):
        if isinstance(expr, nodes.Literal):
            if isinstance(expr.value, bool):
                return InferredType(PRIMITIVE, "Boolean")
            if isinstance(expr.value, int):
                return InferredType(PRIMITIVE, "Integer")
            return InferredType(PRIMITIVE, "String")

        if isinstance(expr, nodes.SequenceLit):
            elem = UNKNOWN_TYPE
            for e in expr.elems:
                t = self.infer(e, env)
                if elem.is_unknown and not t.is_unknown:
                    elem = t
            if elem.is_unknown:
                return UNKNOWN_TYPE
            return elem.with_many(True)

        if isinstance(expr, nodes.VarRef):
            return env.get(expr.name, UNKNOWN_TYPE)

        if isinstance(expr, nodes.FeatureNav):
            recv = self.infer(expr.recv, env)
            return self.nav_feature(expr, recv)

        if isinstance(expr, nodes.HelperCall):
            recv = self.infer(expr.recv, env)
            if recv.is_unknown:
                return UNKNOWN_TYPE
            helper = self.matching_helper(expr.helper, recv)
            if helper is not None:
                declared = self.resolve_typename(helper.declared_type)
                if declared is None:
                    return UNKNOWN_TYPE
                return declared.with_many(declared.many or recv.many)
            return self.nav_feature(expr, recv, feature=expr.helper)

        if isinstance(expr, nodes.PredefOp):
            return self.infer_predef(expr, env)

        if isinstance(expr, nodes.CollOp):
            return self.infer_collop(expr, env)

        if isinstance(expr, nodes.IteratorOp):
            return self.infer_iterator(expr, env)

        if isinstance(expr, nodes.TypeTest):
            return self.infer_typetest(expr, env)

        raise TypeError(f"cannot infer type of {type(expr).__name__}")

    def nav_feature(self, expr, recv, feature=None):
        name = expr.feature if feature is None else feature
        if recv.is_unknown:
            return UNKNOWN_TYPE
        if recv.is_primitive:
            self.error(
                "FeatureNotFound",
                f"feature '{name}' does not exist on primitive type {recv.base}",
                expr.span,
                symbol=name,
            )
            return UNKNOWN_TYPE
        fdef = find_feature(self.mm_of(recv.origin), recv.base, name)
        if fdef is None:
            self.error(
                "FeatureNotFound",
                f"feature '{name}' does not exist on class {recv.base}",
                expr.span,
                symbol=name,
            )
            return UNKNOWN_TYPE
        return self.feature_type(recv, fdef)

    def matching_helper(self, name, recv):
        """First helper of that name whose context admits the receiver."""
        for helper in self.ast.helpers:
            if helper.name != name:
                continue
            ctx = self.resolve_typename(helper.context)
            if ctx is None or not ctx.is_class:
                continue
            if recv.origin == ctx.origin and is_subtype(
                self.mm_of(ctx.origin), recv.base, ctx.base
            ):
                return helper
        return None

    def infer_predef(self, expr, env):
        recv = self.infer(expr.recv, env)
        for arg in expr.args:
            self.infer(arg, env)
        if expr.args:
            self.error(
                "InvalidOperationCall",
                f"operation {expr.op}() takes no arguments",
                expr.span,
                symbol=expr.op,
            )
            return UNKNOWN_TYPE
        if recv.is_unknown:
            return UNKNOWN_TYPE
        if expr.op == "toString":
            return InferredType(PRIMITIVE, "String", recv.many)
        # size() measures string length; collections use ->size() instead.
        if not (recv.is_primitive and recv.base == "String"):
            self.error(
                "InvalidOperationCall",
                f"operation size() is only defined on String, not {recv}",
                expr.span,
                symbol=expr.op,
            )
            return UNKNOWN_TYPE
        return InferredType(PRIMITIVE, "Integer", recv.many)

    def infer_collop(self, expr, env):
        recv = self.infer(expr.recv, env)
        args = [self.infer(a, env) for a in expr.args]
        wanted = 1 if expr.op == "includes" else 0
        if len(args) != wanted:
            self.error(
                "InvalidOperationCall",
                f"operation {expr.op}() takes {wanted} argument(s), got {len(args)}",
                expr.span,
                symbol=expr.op,
            )
            return UNKNOWN_TYPE
        if recv.is_unknown:
            return UNKNOWN_TYPE
        if not recv.many:
            self.error(
                "InvalidOperationCall",
                f"operation ->{expr.op}() requires a collection receiver, not {recv}",
                expr.span,
                symbol=expr.op,
            )
            return UNKNOWN_TYPE
        if expr.op == "flatten":
            return recv
        if expr.op == "size":
            return InferredType(PRIMITIVE, "Integer")
        if expr.op == "first":
            return recv.with_many(False)
        if expr.op in ("includes", "isEmpty"):
            return InferredType(PRIMITIVE, "Boolean")
        raise AssertionError(expr.op)

    def infer_iterator(self, expr, env):
        recv = self.infer(expr.recv, env)
        elem = UNKNOWN_TYPE
        if not recv.is_unknown:
            if recv.many:
                elem = recv.with_many(False)
            else:
                self.error(
                    "InvalidOperationCall",
                    f"iterator ->{expr.op}() requires a collection receiver, not {recv}",
                    expr.span,
                    symbol=expr.op,
                )
                recv = UNKNOWN_TYPE
        inner = dict(env)
        inner[expr.var] = elem
        body = self.infer(expr.body, inner)
        if recv.is_unknown:
            return UNKNOWN_TYPE
        if expr.op == "collect":
            if body.is_unknown:
                return UNKNOWN_TYPE
            return body.with_many(True)
        if expr.op in ("exists", "forAll"):
            return InferredType(PRIMITIVE, "Boolean")
        if expr.op == "select":
            narrowed = self.narrowed_by_kind_test(expr, elem)
            if narrowed is not None:
                return narrowed.with_many(True)
        return recv

    def narrowed_by_kind_test(self, expr, elem):
        """select(x | x.oclIsKindOf(T)) narrows the element type to T."""
        body = expr.body
        if not (
            isinstance(body, nodes.TypeTest)
            and body.kind == "oclIsKindOf"
            and isinstance(body.recv, nodes.VarRef)
            and body.recv.name == expr.var
        ):
            return None
        target = self.resolve_typename(body.type)
        if target is None or not target.is_class or elem.is_unknown:
            return None
        if target.origin != elem.origin:
            return None
        if not is_subtype(self.mm_of(target.origin), target.base, elem.base):
            return None
        return InferredType(target.origin, target.base, False)

    def infer_typetest(self, expr, env):
        recv = self.infer(expr.recv, env)
        param = self.resolve_typename(expr.type)
        if param is None or not param.is_class:
            self.error(
                "InvalidTypeParameter",
                f"type parameter {format_type(expr.type)} of {expr.kind}() "
                "does not name a known class",
                expr.type.span,
                symbol=format_type(expr.type),
            )
            param = None
        elif recv.is_class:
            compatible = param.origin == recv.origin and is_subtype(
                self.mm_of(param.origin), param.base, recv.base
            )
            if not compatible:
                self.error(
                    "InvalidTypeParameter",
                    f"type parameter {format_type(expr.type)} of {expr.kind}() "
                    f"is not a subtype of {recv.base}",
                    expr.type.span,
                    symbol=format_type(expr.type),
                )
        if expr.kind == "oclIsKindOf":
            return InferredType(PRIMITIVE, "Boolean")
        if param is None or recv.is_unknown:
            return UNKNOWN_TYPE
        return InferredType(param.origin, param.base, recv.many)

    # -- declarations -----------------------------------------------------

    def check_helper(self, index, helper):
        self._rule = None
        self._site = ("helper", index)
        ctx = self.resolve_typename(helper.context)
        if ctx is None or not ctx.is_class:
            self.error(
                "InvalidType",
                f"helper context type {format_type(helper.context)} does not exist",
                helper.context.span,
                symbol=format_type(helper.context),
            )
            ctx = UNKNOWN_TYPE
        declared = self.resolve_typename(helper.declared_type)
        if declared is None:
            self.error(
                "InvalidType",
                f"helper return type {format_type(helper.declared_type)} does not exist",
                helper.declared_type.span,
                symbol=format_type(helper.declared_type),
            )
        self.infer(helper.body, {"self": ctx})

    def rule_env(self, rule):
        """Variable environment of a rule plus the type of each out element."""
        env = {}
        tn = rule.in_pattern.type
        t_in = self.resolve_typename(tn)
        if t_in is None or t_in.origin != SOURCE:
            t_in = UNKNOWN_TYPE
        env[rule.in_pattern.var] = t_in
        out_types = []
        for out in rule.out_patterns:
            t_out = self.resolve_typename(out.type)
            if t_out is None or t_out.origin != TARGET:
                t_out = UNKNOWN_TYPE
            out_types.append(t_out)
            env[out.var] = t_out
        return env, out_types

    def check_rule(self, rule):
        self._rule = rule.name
        env, out_types = self.rule_env(rule)

        self._site = ("rule", rule.name, "in")
        tn = rule.in_pattern.type
        if env[rule.in_pattern.var].is_unknown:
            self.error(
                "InvalidType",
                f"source pattern type {format_type(tn)} does not exist "
                "in the source metamodel",
                tn.span,
                symbol=format_type(tn),
            )
        if rule.in_pattern.guard is not None:
            self.infer(rule.in_pattern.guard, env)

        for i, out in enumerate(rule.out_patterns):
            if out_types[i].is_unknown:
                self._site = ("rule", rule.name, "out", i)
                self.error(
                    "InvalidType",
                    f"target pattern type {format_type(out.type)} does not exist "
                    "in the target metamodel",
                    out.type.span,
                    symbol=format_type(out.type),
                )

        for i, out in enumerate(rule.out_patterns):
            t_out = out_types[i]
            for j, binding in enumerate(out.bindings):
                self._site = ("rule", rule.name, "out", i, "binding", j)
                self.check_binding(out, t_out, binding, env)
            if t_out.is_unknown:
                continue
            self._site = ("rule", rule.name, "out", i)
            bound = {b.lhs for b in out.bindings}
            for fdef in accessible_features(self.tgt, t_out.base):
                if fdef.mandatory and fdef.name not in bound:
                    self.error(
                        "CompulsoryFeatureNotInitialized",
                        f"compulsory feature {t_out.base}.{fdef.name} "
                        f"is never initialized by rule {rule.name}",
                        out.span,
                        symbol=fdef.name,
                    )

    def check_binding(self, out, t_out, binding, env):
        fdef = None
        if not t_out.is_unknown:
            fdef = find_feature(self.tgt, t_out.base, binding.lhs)
            if fdef is None:
                self.error(
                    "FeatureNotFound",
                    f"feature '{binding.lhs}' does not exist on class {t_out.base}",
                    binding.span,
                    symbol=binding.lhs,
                )
        rhs = self.infer(binding.rhs, env)
        if fdef is None or rhs.is_unknown:
            return
        if fdef.is_attribute:
            if not (rhs.is_primitive and rhs.base == fdef.type):
                self.error(
                    "IncompatibleBindingType",
                    f"cannot bind value of type {rhs} to attribute "
                    f"{t_out.base}.{binding.lhs} : {fdef.type}",
                    binding.span,
                    symbol=binding.lhs,
                )
            return
        # Reference feature.
        if rhs.is_primitive:
            self.error(
                "IncompatibleBindingType",
                f"cannot bind value of type {rhs} to reference "
                f"{t_out.base}.{binding.lhs} : {fdef.type}",
                binding.span,
                symbol=binding.lhs,
            )
            return
        if rhs.origin == TARGET:
            if not is_subtype(self.tgt, rhs.base, fdef.type):
                self.error(
                    "IncompatibleBindingType",
                    f"cannot bind {rhs.base} element to reference "
                    f"{t_out.base}.{binding.lhs} : {fdef.type}",
                    binding.span,
                    symbol=binding.lhs,
                )
            return
        # Source element: needs a rule that translates it into the target.
        resolution = self.resolution_for(rhs.base, fdef.type)
        if resolution.status == UNRESOLVED:
            self.error(
                "PossibleUnresolvedBinding",
                f"binding may stay unresolved: no rule transforms "
                f"{resolution.from_class} into {resolution.to_class}",
                binding.span,
                symbol=binding.lhs,
            )

    def resolution_for(self, from_class, to_class):
        """Trace check: can some rule turn from_class elements into to_class?"""
        for rule in self.ast.rules:
            t_in = self.resolve_typename(rule.in_pattern.type)
            if t_in is None or t_in.origin != SOURCE:
                continue
            if not is_subtype(self.src, t_in.base, from_class):
                continue
            for out in rule.out_patterns:
                t_out = self.resolve_typename(out.type)
                if t_out is None or t_out.origin != TARGET:
                    continue
                if is_subtype(self.tgt, t_out.base, to_class):
                    return BindingResolution(RESOLVED, rule=rule.name)
        return BindingResolution(UNRESOLVED, from_class=from_class, to_class=to_class)

    def run(self):
        for i, helper in enumerate(self.ast.helpers):
            self.check_helper(i, helper)
        for rule in self.ast.rules:
            self.check_rule(rule)
        self.errors.sort(key=lambda e: (e.line, e.col, e.category, e.message))
        return self.errors


def infer_type(ast, src, tgt, expr, env=None):
    """Infer the static type of an expression; problems are not reported."""
    analyzer = _Analyzer(ast, src, tgt)
    return analyzer.infer(expr, dict(env or {}))


def analyze(ast, src, tgt):
    """Type check a transformation against its metamodels.

    Returns AnalysisError records sorted by source location.
    """
    return _Analyzer(ast, src, tgt).run()


def rule_environment(ast, src, tgt, rule):
    """Variable typing environment of a rule: in variable plus out variables."""
    if isinstance(rule, str):
        found = ast.rule(rule)
        if found is None:
            raise ValueError("unknown rule %r" % (rule,))
        rule = found
    env, _ = _Analyzer(ast, src, tgt).rule_env(rule)
    return env


def resolve_type(ast, src, tgt, typename):
    """Map a syntactic type reference onto an InferredType, or None."""
    return _Analyzer(ast, src, tgt).resolve_typename(typename)


def resolve_binding(ast, tgt, src, rule, binding):
    """Classify one binding's trace resolution.

    `rule` may be a RuleDef or a rule name.  The result is NotNeeded for
    attribute targets and non-source values, Resolved with the rule that
    covers it, or Unresolved with the offending class pair.
    """
    if isinstance(rule, str):
        found = ast.rule(rule)
        if found is None:
            raise ValueError(f"no rule named {rule!r}")
        rule = found
    analyzer = _Analyzer(ast, src, tgt)
    env, out_types = analyzer.rule_env(rule)
    home = None
    for out, t_out in zip(rule.out_patterns, out_types):
        if any(b is binding for b in out.bindings):
            home = (out, t_out)
            break
    if home is None:
        raise ValueError(f"binding is not part of rule {rule.name!r}")
    out, t_out = home
    if t_out.is_unknown:
        return BindingResolution(NOT_NEEDED)
    fdef = find_feature(tgt, t_out.base, binding.lhs)
    if fdef is None or fdef.is_attribute:
        return BindingResolution(NOT_NEEDED)
    rhs = analyzer.infer(binding.rhs, env)
    if not (rhs.is_class and rhs.origin == SOURCE):
        return BindingResolution(NOT_NEEDED)
    return analyzer.resolution_for(rhs.base, fdef.type)


def resolvable(ast, src, tgt, from_class, to_class):
    """True when some rule maps from_class (source) into to_class (target)."""
    analyzer = _Analyzer(ast, src, tgt)
    return analyzer.resolution_for(from_class, to_class).status == RESOLVED


def error_summary(errors):
    """Counts per category, in taxonomy order, skipping empty ones."""
    counts = {}
    for err in errors:
        counts[err.category] = counts.get(err.category, 0) + 1
    return {cat: counts[cat] for cat in ERROR_CATEGORIES if cat in counts}
