"""Deterministic repair heuristics applied after the evolutionary search.

The search phase optimizes error count, patch length, and footprint
preservation, but it cannot tell two type-correct programs apart.  This
module closes that gap with four rule-level rewrites, applied once each in
a fixed order over the whole transformation:

1. ``target_of_binding``: no target feature is initialized twice; the
   binding whose name best matches its value keeps the feature, the others
   move to compatible free features.  Well-typed String bindings whose
   target name is far from the value name are renamed too.
2. ``navigation_expression``: a mistyped binding onto a String attribute is
   re-pointed at the source String feature closest in name to the target.
3. ``source_pattern_type``: when exactly one rule produces (or consumes) a
   class, the bindings that refer to that rule pin down its from/to types.
4. ``type_parameter``: an oclIsKindOf/oclAsType argument outside the
   receiver's hierarchy is replaced by a subtype, preferring ones that
   expose the feature navigated afterwards.

Every change is re-checked with the analyzer and rolled back when it would
increase the error count (heuristic 3 must strictly decrease it, since it
rewrites rule signatures on circumstantial evidence).  The input AST is
never modified; callers get a fresh tree plus a report of what changed.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from .analyzer import (
    PRIMITIVE,
    SOURCE,
    TARGET,
    analyze,
    infer_type,
    resolvable,
    resolve_type,
    rule_environment,
)
from .metamodel import (
    Metamodel,
    accessible_features,
    find_feature,
    is_subtype,
    subclasses,
)
from .mtl import parse_expression
from .mtl.nodes import (
    CollOp,
    FeatureNav,
    HelperCall,
    IteratorOp,
    Literal,
    PredefOp,
    SequenceLit,
    TypeTest,
    VarRef,
    expr_at,
)
from .mtl.printer import format_binding, format_expr, format_type

H_TARGET_OF_BINDING = "target_of_binding"
H_NAVIGATION = "navigation_expression"
H_SOURCE_TYPE = "source_pattern_type"
H_TYPE_PARAMETER = "type_parameter"

HEURISTIC_NAMES = (
    H_TARGET_OF_BINDING,
    H_NAVIGATION,
    H_SOURCE_TYPE,
    H_TYPE_PARAMETER,
)


def edit_distance(a, b):
    """Levenshtein distance with unit costs, compared case-insensitively."""
    a = a.lower()
    b = b.lower()
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ca != cb),
            ))
        previous = current
    return previous[-1]


@dataclass(frozen=True)
class RefinementEntry:
    """One kept AST change: where it happened, what it did, and why."""

    heuristic: str
    rule: str
    location: str
    before: str
    after: str
    condition: str

    def to_dict(self):
        return {
            "heuristic": self.heuristic,
            "rule": self.rule,
            "location": self.location,
            "before": self.before,
            "after": self.after,
            "condition": self.condition,
        }


@dataclass
class RefinementReport:
    """Kept changes (one entry per AST change) plus declined-case notes."""

    entries: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def by_heuristic(self, name):
        return [e for e in self.entries if e.heuristic == name]

    def to_dict(self):
        return {
            "heuristics": {
                name: [e.to_dict() for e in self.by_heuristic(name)]
                for name in HEURISTIC_NAMES
            },
            "notes": list(self.notes),
        }

    def __len__(self):
        return len(self.entries)


def _rhs_tail(expr):
    """The last property-ish name of an expression, used for name matching."""
    if isinstance(expr, FeatureNav):
        return expr.feature
    if isinstance(expr, HelperCall):
        return expr.helper
    if isinstance(expr, (PredefOp, CollOp, IteratorOp, TypeTest)):
        return _rhs_tail(expr.recv)
    if isinstance(expr, VarRef):
        return expr.name
    if isinstance(expr, Literal):
        return str(expr.value)
    return ""


def _closest(names, reference):
    """The name with minimal edit distance to `reference`; ties break
    lexicographically."""
    return min(names, key=lambda n: (edit_distance(n, reference), n))


class _Session:
    """One refinement run: a private working tree, guard, and report.

    When either metamodel is missing (degraded single-heuristic calls) an
    empty stand-in keeps the type machinery total: lookups on the absent
    side come back unknown, and the analyzer guard is skipped because its
    error counts would be meaningless.
    """

    def __init__(self, ast, src, tgt):
        self.ast = copy.deepcopy(ast)
        self.full = src is not None and tgt is not None
        self.src = src if src is not None else Metamodel(name="")
        self.tgt = tgt if tgt is not None else Metamodel(name="")
        self.report = RefinementReport()

    def error_count(self):
        if not self.full:
            return None
        return len(analyze(self.ast, self.src, self.tgt))

    def infer(self, expr, env):
        return infer_type(self.ast, self.src, self.tgt, expr, env)

    def env_of(self, rule):
        return rule_environment(self.ast, self.src, self.tgt, rule)

    def note(self, heuristic, rule, location, text):
        self.report.notes.append(
            "%s: rule %s %s: %s" % (heuristic, rule, location, text)
        )

    def attempt(self, entry, change, strict=False):
        """Apply `change()` to the working tree; keep it only if the
        analyzer error count does not grow (`strict`: must shrink)."""
        before = self.error_count()
        snapshot = copy.deepcopy(self.ast)
        change()
        if before is not None:
            after = self.error_count()
            rejected = after >= before if strict else after > before
            if rejected:
                self.ast = snapshot
                self.report.notes.append(
                    "%s: rule %s %s: reverted (%d -> %d errors): %s"
                    % (entry.heuristic, entry.rule, entry.location,
                       before, after, entry.condition)
                )
                return False
        self.report.entries.append(entry)
        return True

    def source_class(self, typename):
        """Class name when the type reference denotes a source class."""
        if typename.mm is not None and typename.mm != self.ast.source_mm:
            return None
        if self.src.has_class(typename.name):
            return typename.name
        return None

    def target_class(self, typename):
        if typename.mm is not None and typename.mm != self.ast.target_mm:
            return None
        if self.tgt.has_class(typename.name):
            return typename.name
        return None

    def feature_accepts(self, feature, value_type):
        """Can `feature` be initialized from a value of `value_type`?"""
        if value_type is None or value_type.is_unknown:
            return False
        if value_type.origin == PRIMITIVE:
            return feature.is_attribute and feature.type == value_type.base
        if not feature.is_reference:
            return False
        if value_type.origin == TARGET:
            return is_subtype(self.tgt, value_type.base, feature.type)
        return resolvable(
            self.ast, self.src, self.tgt, value_type.base, feature.type
        )


def _rule_index(ast, rule):
    name = rule if isinstance(rule, str) else rule.name
    for i, r in enumerate(ast.rules):
        if r.name == name:
            return i
    raise ValueError("unknown rule %r" % (name,))


# --- heuristic 1: duplicate / misnamed binding targets ---------------------

def _free_targets(session, elem, binding_index, value_type, typed):
    """Accessible out-class features not already taken by a sibling binding,
    filtered for type compatibility when the value type is known."""
    out_class = session.target_class(elem.type)
    if out_class is None:
        return []
    taken = {
        b.lhs for k, b in enumerate(elem.bindings) if k != binding_index
    }
    names = []
    for feature in accessible_features(session.tgt, out_class):
        if feature.name in taken:
            continue
        if typed and not session.feature_accepts(feature, value_type):
            continue
        names.append(feature.name)
    return names


def _target_of_binding(session, rule_index):
    rule = session.ast.rules[rule_index]
    for ei in range(len(rule.out_patterns)):
        _dedupe_targets(session, rule_index, ei)
        _rename_string_targets(session, rule_index, ei)


def _dedupe_targets(session, rule_index, ei):
    rule = session.ast.rules[rule_index]
    elem = rule.out_patterns[ei]
    env = session.env_of(rule) if session.full else {}
    groups = {}
    for bi, binding in enumerate(elem.bindings):
        groups.setdefault(binding.lhs, []).append(bi)
    for lhs, members in groups.items():
        if len(members) < 2:
            continue
        keeper = min(
            members,
            key=lambda bi: (
                edit_distance(lhs, _rhs_tail(elem.bindings[bi].rhs)),
                bi,
            ),
        )
        for bi in members:
            if bi == keeper:
                continue
            binding = elem.bindings[bi]
            location = "out[%d].binding[%d]" % (ei, bi)
            value_type = session.infer(binding.rhs, env) if session.full else None
            candidates = _free_targets(
                session, elem, bi, value_type, typed=session.full
            )
            if not candidates:
                session.note(
                    H_TARGET_OF_BINDING, rule.name, location,
                    "duplicate target %r has no compatible free feature" % lhs,
                )
                continue
            new_lhs = _closest(candidates, _rhs_tail(binding.rhs))
            entry = RefinementEntry(
                H_TARGET_OF_BINDING, rule.name, location,
                format_binding(binding),
                "%s <- %s" % (new_lhs, format_expr(binding.rhs)),
                "feature %r initialized more than once" % lhs,
            )
            session.attempt(
                entry,
                lambda ri=rule_index, e=ei, b=bi, v=new_lhs: setattr(
                    session.ast.rules[ri].out_patterns[e].bindings[b],
                    "lhs", v,
                ),
            )


def _rename_string_targets(session, rule_index, ei):
    if not session.full:
        return
    rule = session.ast.rules[rule_index]
    elem = rule.out_patterns[ei]
    out_class = session.target_class(elem.type)
    if out_class is None:
        return
    env = session.env_of(rule)
    for bi, binding in enumerate(elem.bindings):
        value_type = session.infer(binding.rhs, env)
        if value_type.origin != PRIMITIVE or value_type.base != "String":
            continue
        feature = find_feature(session.tgt, out_class, binding.lhs)
        if feature is None or not feature.is_attribute or feature.type != "String":
            continue
        tail = _rhs_tail(binding.rhs)
        current = edit_distance(binding.lhs, tail)
        candidates = _free_targets(session, elem, bi, value_type, typed=True)
        if not candidates:
            continue
        new_lhs = _closest(candidates, tail)
        if new_lhs == binding.lhs or edit_distance(new_lhs, tail) >= current:
            continue
        location = "out[%d].binding[%d]" % (ei, bi)
        entry = RefinementEntry(
            H_TARGET_OF_BINDING, rule.name, location,
            format_binding(binding),
            "%s <- %s" % (new_lhs, format_expr(binding.rhs)),
            "String value %r names the target better than %r"
            % (tail, binding.lhs),
        )
        session.attempt(
            entry,
            lambda ri=rule_index, e=ei, b=bi, v=new_lhs: setattr(
                session.ast.rules[ri].out_patterns[e].bindings[b], "lhs", v,
            ),
        )


# --- heuristic 2: retarget mistyped String bindings ------------------------

def _navigation_expression(session, rule_index):
    rule = session.ast.rules[rule_index]
    env = session.env_of(rule)
    in_var = rule.in_pattern.var
    in_class = session.source_class(rule.in_pattern.type)
    for ei, elem in enumerate(rule.out_patterns):
        out_class = session.target_class(elem.type)
        if out_class is None:
            continue
        for bi, binding in enumerate(elem.bindings):
            feature = find_feature(session.tgt, out_class, binding.lhs)
            if (feature is None or not feature.is_attribute
                    or feature.type != "String"):
                continue
            value_type = session.infer(binding.rhs, env)
            if value_type.is_unknown:
                continue
            if value_type.origin == PRIMITIVE and value_type.base == "String":
                continue
            location = "out[%d].binding[%d]" % (ei, bi)
            if in_class is None:
                session.note(
                    H_NAVIGATION, rule.name, location,
                    "source element type unknown, cannot rebuild the value",
                )
                continue
            options = [
                f.name
                for f in accessible_features(session.src, in_class)
                if f.is_attribute and f.type == "String"
            ]
            if not options:
                session.note(
                    H_NAVIGATION, rule.name, location,
                    "source class %r exposes no String feature" % in_class,
                )
                continue
            chosen = _closest(options, binding.lhs)
            new_rhs = parse_expression("%s.%s" % (in_var, chosen))
            entry = RefinementEntry(
                H_NAVIGATION, rule.name, location,
                format_binding(binding),
                "%s <- %s" % (binding.lhs, format_expr(new_rhs)),
                "String target %r bound to a %s value"
                % (binding.lhs, value_type),
            )
            session.attempt(
                entry,
                lambda ri=rule_index, e=ei, b=bi, v=new_rhs: setattr(
                    session.ast.rules[ri].out_patterns[e].bindings[b],
                    "rhs", v,
                ),
            )


# --- heuristic 3: align rule types with referring bindings -----------------

def _referring_bindings(session, rule):
    """(feature, value type) of every reference binding in other rules."""
    found = []
    for other in session.ast.rules:
        if other.name == rule.name:
            continue
        env = session.env_of(other)
        for elem in other.out_patterns:
            out_class = session.target_class(elem.type)
            if out_class is None:
                continue
            for binding in elem.bindings:
                feature = find_feature(session.tgt, out_class, binding.lhs)
                if feature is None or not feature.is_reference:
                    continue
                found.append((feature, session.infer(binding.rhs, env)))
    return found


def _source_pattern_type(session, rule_index):
    rule = session.ast.rules[rule_index]
    referring = _referring_bindings(session, rule)

    # Forward: a unique producer's `from` type must match what the
    # referring bindings feed into it.
    for ei, elem in enumerate(rule.out_patterns):
        produced = session.target_class(elem.type)
        if produced is None:
            continue
        producers = [
            r for r in session.ast.rules
            if any(session.target_class(o.type) == produced
                   for o in r.out_patterns)
        ]
        if [r.name for r in producers] != [rule.name]:
            continue
        evidence = {
            value.base
            for feature, value in referring
            if feature.type == produced and value.origin == SOURCE
        }
        if not evidence:
            session.note(
                H_SOURCE_TYPE, rule.name, "in",
                "no binding elsewhere targets a %r feature" % produced,
            )
            continue
        if len(evidence) > 1:
            session.note(
                H_SOURCE_TYPE, rule.name, "in",
                "bindings targeting %r disagree on the source class" % produced,
            )
            continue
        wanted = next(iter(evidence))
        if wanted == rule.in_pattern.type.name or not session.src.has_class(wanted):
            continue
        entry = RefinementEntry(
            H_SOURCE_TYPE, rule.name, "in",
            format_type(rule.in_pattern.type),
            format_type(_retyped(rule.in_pattern.type, wanted,
                                 session.ast.source_mm)),
            "only rule producing %r, but its input is fed %r values"
            % (produced, wanted),
        )
        session.attempt(
            entry,
            lambda ri=rule_index, v=wanted: _set_type(
                session.ast.rules[ri].in_pattern.type, v,
                session.ast.source_mm,
            ),
            strict=True,
        )
        rule = session.ast.rules[rule_index]

    # Symmetric: a unique consumer with one output; the bindings that pass
    # its input class along pin down the output class.
    consumed = session.source_class(rule.in_pattern.type)
    if consumed is None or len(rule.out_patterns) != 1:
        return
    consumers = [
        r for r in session.ast.rules
        if session.source_class(r.in_pattern.type) == consumed
    ]
    if [r.name for r in consumers] != [rule.name]:
        return
    evidence = {
        feature.type
        for feature, value in referring
        if value.origin == SOURCE and value.base == consumed
    }
    if len(evidence) != 1:
        return
    wanted = next(iter(evidence))
    current = rule.out_patterns[0].type
    if wanted == current.name or not session.tgt.has_class(wanted):
        return
    entry = RefinementEntry(
        H_SOURCE_TYPE, rule.name, "out[0]",
        format_type(current),
        format_type(_retyped(current, wanted, session.ast.target_mm)),
        "only rule consuming %r, but its output is stored in %r features"
        % (consumed, wanted),
    )
    session.attempt(
        entry,
        lambda ri=rule_index, v=wanted: _set_type(
            session.ast.rules[ri].out_patterns[0].type, v,
            session.ast.target_mm,
        ),
        strict=True,
    )


def _set_type(typename, name, alias):
    typename.name = name
    if typename.mm is not None:
        typename.mm = alias


def _retyped(typename, name, alias):
    shown = copy.deepcopy(typename)
    _set_type(shown, name, alias)
    return shown


# --- heuristic 4: type-test parameters outside the hierarchy ---------------

def _scan_type_tests(expr, env, session, path=(), navigated=None, out=None):
    """Collect (path, env, feature-navigated-afterwards) per TypeTest."""
    if out is None:
        out = []
    if isinstance(expr, TypeTest):
        out.append((path, dict(env), navigated))
        _scan_type_tests(expr.recv, env, session, path + (0,), None, out)
    elif isinstance(expr, FeatureNav):
        _scan_type_tests(expr.recv, env, session, path + (0,), expr.feature, out)
    elif isinstance(expr, HelperCall):
        _scan_type_tests(expr.recv, env, session, path + (0,), None, out)
    elif isinstance(expr, (PredefOp, CollOp)):
        _scan_type_tests(expr.recv, env, session, path + (0,), None, out)
        for i, arg in enumerate(expr.args):
            _scan_type_tests(arg, env, session, path + (1 + i,), None, out)
    elif isinstance(expr, IteratorOp):
        _scan_type_tests(expr.recv, env, session, path + (0,), None, out)
        recv_type = session.infer(expr.recv, env)
        body_env = dict(env)
        body_env[expr.var] = recv_type.with_many(False)
        # A select whose body is one type test narrows the collection; a
        # navigation applied to the select result lands on the tested type.
        body_navigated = navigated if (
            expr.op == "select" and isinstance(expr.body, TypeTest)
        ) else None
        _scan_type_tests(expr.body, body_env, session, path + (1,),
                         body_navigated, out)
    elif isinstance(expr, SequenceLit):
        for i, elem in enumerate(expr.elems):
            _scan_type_tests(elem, env, session, path + (i,), None, out)
    return out


def _expr_slots(rule):
    """(location, getter) for every expression hanging off a rule."""
    slots = []
    if rule.in_pattern.guard is not None:
        slots.append((
            "guard",
            lambda r: r.in_pattern.guard,
        ))
    for ei in range(len(rule.out_patterns)):
        for bi in range(len(rule.out_patterns[ei].bindings)):
            slots.append((
                "out[%d].binding[%d]" % (ei, bi),
                lambda r, e=ei, b=bi: r.out_patterns[e].bindings[b].rhs,
            ))
    return slots


def _type_parameter(session, rule_index):
    rule = session.ast.rules[rule_index]
    env = session.env_of(rule)
    for location, getter in _expr_slots(rule):
        root = getter(rule)
        for path, scope, navigated in _scan_type_tests(root, env, session):
            node = expr_at(root, path)
            recv_type = session.infer(node.recv, scope)
            if recv_type.is_unknown or recv_type.origin == PRIMITIVE:
                session.note(
                    H_TYPE_PARAMETER, rule.name, location,
                    "receiver type of %s is unknown" % format_expr(node),
                )
                continue
            if recv_type.origin == SOURCE:
                side, alias = session.src, session.ast.source_mm
            else:
                side, alias = session.tgt, session.ast.target_mm
            param = resolve_type(session.ast, session.src, session.tgt,
                                 node.type)
            if (param is not None and param.origin == recv_type.origin
                    and is_subtype(side, param.base, recv_type.base)):
                continue
            options = subclasses(side, recv_type.base)
            if navigated is not None:
                options = [
                    c for c in options
                    if find_feature(side, c, navigated) is not None
                ]
            options = [c for c in options if c != node.type.name]
            if not options:
                session.note(
                    H_TYPE_PARAMETER, rule.name, location,
                    "no usable subtype of %r for %s"
                    % (recv_type.base, format_expr(node)),
                )
                continue
            chosen = _closest(options, node.type.name)
            before = format_expr(node)
            entry = RefinementEntry(
                H_TYPE_PARAMETER, rule.name, location,
                before,
                before.replace(format_type(node.type),
                               "%s!%s" % (alias, chosen), 1),
                "%r is not a subtype of receiver class %r"
                % (node.type.name, recv_type.base),
            )

            def change(ri=rule_index, g=getter, p=path, v=chosen, a=alias):
                target = expr_at(g(session.ast.rules[ri]), p)
                target.type.name = v
                target.type.mm = a

            session.attempt(entry, change)


# --- public entry points ----------------------------------------------------

def heuristic_target_of_binding(ast, tgt_mm, rule, src_mm=None):
    """Deduplicate and rename binding targets in one rule.

    Without `src_mm` the value types cannot be inferred: reassignment then
    matches on names only and the well-typed-rename pass is skipped.
    """
    session = _Session(ast, src_mm, tgt_mm)
    _target_of_binding(session, _rule_index(session.ast, rule))
    return session.ast, session.report


def heuristic_navigation_expression(ast, src_mm, tgt_mm, rule):
    """Re-point mistyped String bindings of one rule at source features."""
    session = _Session(ast, src_mm, tgt_mm)
    _navigation_expression(session, _rule_index(session.ast, rule))
    return session.ast, session.report


def heuristic_source_pattern_type(ast, src_mm, tgt_mm, rule):
    """Correct one rule's from/to types from the bindings referring to it."""
    session = _Session(ast, src_mm, tgt_mm)
    _source_pattern_type(session, _rule_index(session.ast, rule))
    return session.ast, session.report


def heuristic_type_parameter(ast, src_mm, rule, tgt_mm=None):
    """Replace invalid type-test parameters in one rule by valid subtypes.

    Without `tgt_mm` the analyzer guard is skipped and tests on
    target-side receivers are left alone.
    """
    session = _Session(ast, src_mm, tgt_mm)
    _type_parameter(session, _rule_index(session.ast, rule))
    return session.ast, session.report


_PASSES = (
    (H_TARGET_OF_BINDING, _target_of_binding),
    (H_NAVIGATION, _navigation_expression),
    (H_SOURCE_TYPE, _source_pattern_type),
    (H_TYPE_PARAMETER, _type_parameter),
)


def refine(ast_patched, src_mm, tgt_mm):
    """Run all four heuristics over every rule, in order.

    Returns the refined AST and a RefinementReport.  The error count of the
    result is never above the input's; inputs are left untouched.
    """
    session = _Session(ast_patched, src_mm, tgt_mm)
    for _, heuristic in _PASSES:
        for rule_index in range(len(session.ast.rules)):
            heuristic(session, rule_index)
    return session.ast, session.report
