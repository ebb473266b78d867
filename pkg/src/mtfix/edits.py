"""Edit operations on transformation ASTs.

Ten parameterized operation kinds (no delete operators), each addressing
a fragment through a structural locator: rule name plus pattern/binding
indices plus an optional expression path.  Application is copy-on-write
and skip-not-fail: an operation whose locator or old value no longer
matches leaves the AST untouched and records why, so operation sequences
stay applicable after earlier operations rewrote their surroundings.
"""

import json
import re
from dataclasses import dataclass, replace
from typing import Optional

from .analyzer import (
    SOURCE,
    TARGET,
    infer_type,
    resolvable,
    resolve_type,
    rule_environment,
)
from .metamodel import PRIMITIVES, accessible_features, find_feature, is_subtype
from .mtl import nodes
from .mtl.parser import MtlSyntaxError, parse_expression
from .mtl.printer import format_expr

__all__ = [
    "EDIT_KINDS",
    "PATCH_FORMAT_VERSION",
    "EditOperation",
    "EditOutcome",
    "Patch",
    "apply_edit",
    "apply_patch",
    "sample_edit",
    "resample_new_value",
    "reachable_edits",
    "error_rule_names",
    "patch_to_dict",
    "patch_from_dict",
    "patch_key",
    "rhs_locator",
]

EDIT_KINDS = (
    "CreationOfBinding",
    "TypeOfSourcePatternElement",
    "TypeOfTargetPatternElement",
    "TypeOfVariableOrCollection",
    "TypeParameter",
    "NavigationExpression",
    "TargetOfBinding",
    "PredefinedOperationCall",
    "CollectionOperationCall",
    "IteratorCall",
)

PATCH_FORMAT_VERSION = 1


@dataclass(frozen=True)
class EditOperation:
    """One atomic change: kind, rule, locator, expected old text, new text."""

    kind: str
    rule_to_modify: str
    object_to_modify: str
    old_value: str
    new_value: str

    def to_dict(self):
        return {
            "kind": self.kind,
            "rule": self.rule_to_modify,
            "locator": self.object_to_modify,
            "old": self.old_value,
            "new": self.new_value,
        }

    @classmethod
    def from_dict(cls, data):
        op = cls(
            kind=data["kind"],
            rule_to_modify=data["rule"],
            object_to_modify=data["locator"],
            old_value=data["old"],
            new_value=data["new"],
        )
        if op.kind not in EDIT_KINDS:
            raise ValueError(f"unknown edit kind {op.kind!r}")
        return op


@dataclass(frozen=True)
class Patch:
    """An ordered sequence of edit operations, applied left to right."""

    ops: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))

    def __len__(self):
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)


@dataclass(frozen=True)
class EditOutcome:
    applied: bool
    found_old: Optional[str] = None
    reason: Optional[str] = None

    def __bool__(self):
        return self.applied


def _applied(found):
    return EditOutcome(True, found_old=found)


def _skipped(reason, found=None):
    return EditOutcome(False, found_old=found, reason=reason)


# -- patch (de)serialization ------------------------------------------------


def patch_to_dict(patch):
    return {
        "format_version": PATCH_FORMAT_VERSION,
        "ops": [op.to_dict() for op in patch.ops],
    }


def patch_from_dict(data):
    if isinstance(data, list):
        ops = data
    else:
        version = data.get("format_version")
        if version != PATCH_FORMAT_VERSION:
            raise ValueError(f"unsupported patch format_version {version!r}")
        ops = data["ops"]
    return Patch(tuple(EditOperation.from_dict(entry) for entry in ops))


def patch_key(patch):
    """Canonical serialization, used for dedup and total ordering."""
    return json.dumps(
        [op.to_dict() for op in patch.ops], separators=(",", ":"), sort_keys=True
    )


# -- locators ----------------------------------------------------------------

_HELPER_RE = re.compile(r"helper\[(\d+)\]\Z")
_OUT_RE = re.compile(r"out\[(\d+)\]\Z")
_BINDING_RE = re.compile(
    r"out\[(\d+)\]\.binding\[(\d+)\]\.(lhs|rhs)(?:@(\d+(?:\.\d+)*))?\Z"
)


def _parse_locator(loc):
    if loc == "in":
        return ("in",)
    m = _HELPER_RE.match(loc)
    if m:
        return ("helper", int(m.group(1)))
    m = _OUT_RE.match(loc)
    if m:
        return ("out", int(m.group(1)))
    m = _BINDING_RE.match(loc)
    if m:
        path = ()
        if m.group(4):
            path = tuple(int(p) for p in m.group(4).split("."))
        return ("binding", int(m.group(1)), int(m.group(2)), m.group(3), path)
    return None


def rhs_locator(out_index, binding_index, path=()):
    """Locator string for a node inside a binding's right-hand side."""
    loc = f"out[{out_index}].binding[{binding_index}].rhs"
    if path:
        loc += "@" + ".".join(str(step) for step in path)
    return loc


_rhs_locator = rhs_locator


# -- application --------------------------------------------------------------


def _with_rule(ast, index, rule):
    rules = list(ast.rules)
    rules[index] = rule
    return replace(ast, rules=rules)


def _with_out(rule, index, out):
    outs = list(rule.out_patterns)
    outs[index] = out
    return replace(rule, out_patterns=outs)


def _with_binding(out, index, binding):
    bindings = list(out.bindings)
    bindings[index] = binding
    return replace(out, bindings=bindings)


def _parse_binding_text(text, helper_names):
    if "<-" not in text:
        return None
    lhs, rhs_text = text.split("<-", 1)
    lhs = lhs.strip()
    if not lhs.isidentifier():
        return None
    try:
        rhs = parse_expression(rhs_text.strip(), helper_names)
    except MtlSyntaxError:
        return None
    return nodes.Binding(lhs=lhs, rhs=rhs)


def apply_edit(ast, op):
    """Apply one operation; returns (new_ast, EditOutcome).

    Skipped operations return the input AST unchanged, with a reason.
    """
    loc = _parse_locator(op.object_to_modify)
    if loc is None:
        return ast, _skipped("malformed locator")

    if loc[0] == "helper":
        if op.kind != "TypeOfVariableOrCollection":
            return ast, _skipped("locator does not fit kind")
        index = loc[1]
        if not 0 <= index < len(ast.helpers):
            return ast, _skipped("helper index out of range")
        helper = ast.helpers[index]
        found = helper.declared_type.name
        if found != op.old_value:
            return ast, _skipped("old value mismatch", found=found)
        new_tn = replace(helper.declared_type, name=op.new_value)
        helpers = list(ast.helpers)
        helpers[index] = replace(helper, declared_type=new_tn)
        return replace(ast, helpers=helpers), _applied(found)

    rule_index = next(
        (k for k, r in enumerate(ast.rules) if r.name == op.rule_to_modify), None
    )
    if rule_index is None:
        return ast, _skipped("rule not found")
    rule = ast.rules[rule_index]

    if loc[0] == "in":
        if op.kind != "TypeOfSourcePatternElement":
            return ast, _skipped("locator does not fit kind")
        tn = rule.in_pattern.type
        if tn.name != op.old_value:
            return ast, _skipped("old value mismatch", found=tn.name)
        new_rule = replace(
            rule, in_pattern=replace(rule.in_pattern, type=replace(tn, name=op.new_value))
        )
        return _with_rule(ast, rule_index, new_rule), _applied(tn.name)

    if loc[0] == "out":
        index = loc[1]
        if not 0 <= index < len(rule.out_patterns):
            return ast, _skipped("out element index out of range")
        out = rule.out_patterns[index]
        if op.kind == "TypeOfTargetPatternElement":
            tn = out.type
            if tn.name != op.old_value:
                return ast, _skipped("old value mismatch", found=tn.name)
            new_out = replace(out, type=replace(tn, name=op.new_value))
            return (
                _with_rule(ast, rule_index, _with_out(rule, index, new_out)),
                _applied(tn.name),
            )
        if op.kind == "CreationOfBinding":
            binding = _parse_binding_text(op.new_value, ast.helper_names())
            if binding is None:
                return ast, _skipped("new value does not parse as a binding")
            new_out = replace(out, bindings=list(out.bindings) + [binding])
            return (
                _with_rule(ast, rule_index, _with_out(rule, index, new_out)),
                _applied(""),
            )
        return ast, _skipped("locator does not fit kind")

    # Binding-level locator.
    _, i, j, part, path = loc
    if not 0 <= i < len(rule.out_patterns):
        return ast, _skipped("out element index out of range")
    out = rule.out_patterns[i]
    if not 0 <= j < len(out.bindings):
        return ast, _skipped("binding index out of range")
    binding = out.bindings[j]

    if part == "lhs":
        if op.kind != "TargetOfBinding" or path:
            return ast, _skipped("locator does not fit kind")
        if binding.lhs != op.old_value:
            return ast, _skipped("old value mismatch", found=binding.lhs)
        new_binding = replace(binding, lhs=op.new_value)
        new_out = _with_binding(out, j, new_binding)
        return (
            _with_rule(ast, rule_index, _with_out(rule, i, new_out)),
            _applied(binding.lhs),
        )

    if op.kind == "NavigationExpression":
        if path:
            return ast, _skipped("locator does not fit kind")
        found = format_expr(binding.rhs)
        if found != op.old_value:
            return ast, _skipped("old value mismatch", found=found)
        try:
            rhs = parse_expression(op.new_value, ast.helper_names())
        except MtlSyntaxError:
            return ast, _skipped("new value does not parse as an expression")
        new_out = _with_binding(out, j, replace(binding, rhs=rhs))
        return (
            _with_rule(ast, rule_index, _with_out(rule, i, new_out)),
            _applied(found),
        )

    node = nodes.expr_at(binding.rhs, path)
    if node is None:
        return ast, _skipped("expression path does not resolve")

    if op.kind == "TypeParameter":
        if not isinstance(node, nodes.TypeTest):
            return ast, _skipped("node is not a type test")
        found = node.type.name
        if found != op.old_value:
            return ast, _skipped("old value mismatch", found=found)
        new_node = replace(node, type=replace(node.type, name=op.new_value))
    elif op.kind == "PredefinedOperationCall":
        if not isinstance(node, nodes.PredefOp):
            return ast, _skipped("node is not a predefined operation call")
        if node.op != op.old_value:
            return ast, _skipped("old value mismatch", found=node.op)
        if op.new_value not in nodes.PREDEF_OPS:
            return ast, _skipped("unknown predefined operation")
        found = node.op
        new_node = replace(node, op=op.new_value)
    elif op.kind == "CollectionOperationCall":
        if not isinstance(node, nodes.CollOp):
            return ast, _skipped("node is not a collection operation call")
        if node.op != op.old_value:
            return ast, _skipped("old value mismatch", found=node.op)
        if op.new_value not in nodes.COLLECTION_OPS:
            return ast, _skipped("unknown collection operation")
        found = node.op
        new_node = replace(node, op=op.new_value)
    elif op.kind == "IteratorCall":
        if not isinstance(node, nodes.IteratorOp):
            return ast, _skipped("node is not an iterator call")
        if node.op != op.old_value:
            return ast, _skipped("old value mismatch", found=node.op)
        if op.new_value not in nodes.ITERATOR_OPS:
            return ast, _skipped("unknown iterator operation")
        found = node.op
        new_node = replace(node, op=op.new_value)
    else:
        return ast, _skipped("locator does not fit kind")

    new_rhs = nodes.replace_at(binding.rhs, path, new_node)
    new_out = _with_binding(out, j, replace(binding, rhs=new_rhs))
    return (
        _with_rule(ast, rule_index, _with_out(rule, i, new_out)),
        _applied(found),
    )


def apply_patch(ast, patch):
    """Left fold of apply_edit; returns (new_ast, per-op log)."""
    ops = patch.ops if isinstance(patch, Patch) else tuple(patch)
    log = []
    current = ast
    for op in ops:
        current, outcome = apply_edit(current, op)
        log.append(
            {
                "op": op.to_dict(),
                "applied": outcome.applied,
                "found": outcome.found_old,
                "reason": outcome.reason,
            }
        )
    return current, log


# -- sampling ------------------------------------------------------------------


def error_rule_names(ast, errors):
    """Rule names flagged by errors, deduplicated in order of appearance."""
    names, seen = [], set()
    for err in errors:
        name = getattr(err, "rule", None)
        if name and name not in seen and ast.rule(name) is not None:
            seen.add(name)
            names.append(name)
    return names


def _choice(rng, seq):
    return seq[rng.randrange(len(seq))]


_SITE_BIAS = 0.8


class _FlaggedSites:
    """Error locations indexed for biased sampling.

    Sampling favors flagged locations (the error's own out element,
    binding, or helper) but keeps the rest reachable: repairs sometimes
    live away from the reported site, e.g. an unresolved binding fixed by
    retyping another rule's output.
    """

    def __init__(self, errors):
        self.outs = {}
        self.bindings = {}
        self.helpers = set()
        for err in errors or ():
            site = getattr(err, "site", None) or ()
            if not site:
                continue
            if site[0] == "helper" and len(site) >= 2:
                self.helpers.add(site[1])
            elif site[0] == "rule" and len(site) >= 4 and site[2] == "out":
                self.outs.setdefault(site[1], set()).add(site[3])
                if len(site) >= 6 and site[4] == "binding":
                    self.bindings.setdefault(site[1], set()).add(
                        (site[3], site[5])
                    )

    def pick(self, rng, candidates, key, flagged):
        hot = [c for c in candidates if key(c) in flagged]
        if hot and rng.random() < _SITE_BIAS:
            return _choice(rng, hot)
        return _choice(rng, candidates)


_NO_SITES = _FlaggedSites(())


def _source_class(ast, src, tn):
    if tn.mm is not None and tn.mm != ast.source_mm and tn.mm != src.name:
        return None
    return tn.name if src.has_class(tn.name) else None


def _target_class(ast, tgt, tn):
    if tn.mm is not None and tn.mm != ast.target_mm and tn.mm != tgt.name:
        return None
    return tn.name if tgt.has_class(tn.name) else None


def _rhs_nodes(rule, node_type):
    found = []
    for i, out in enumerate(rule.out_patterns):
        for j, binding in enumerate(out.bindings):
            for path, node in nodes.iter_expr_paths(binding.rhs):
                if isinstance(node, node_type):
                    found.append((i, j, path, node))
    return found


def _all_bindings(rule):
    return [
        (i, j, binding)
        for i, out in enumerate(rule.out_patterns)
        for j, binding in enumerate(out.bindings)
    ]


_PRIMITIVE_LITERALS = {"String": "''", "Integer": "0", "Boolean": "false"}


def _seed_rhs_pool(ast, rule, src, tgt, fdef):
    """Navigation texts able to initialize target feature fdef."""
    var = rule.in_pattern.var
    in_cls = _source_class(ast, src, rule.in_pattern.type)
    if in_cls is None:
        return []
    feats = accessible_features(src, in_cls)
    if fdef.is_attribute:
        return [f"{var}.{g.name}" for g in feats
                if g.is_attribute and g.type == fdef.type]
    navs = [f"{var}.{g.name}" for g in feats if g.is_reference
            and resolvable(ast, src, tgt, g.type, fdef.type)]
    if not navs:
        navs = [f"{var}.{g.name}" for g in feats if g.is_reference]
    return navs


def _seed_rhs(rng, ast, rule, src, tgt, fdef, exclude=()):
    """Navigation (or literal) text to initialize target feature fdef with."""
    navs = [n for n in _seed_rhs_pool(ast, rule, src, tgt, fdef)
            if n not in exclude]
    if navs:
        return _choice(rng, navs)
    if fdef.is_attribute:
        literal = _PRIMITIVE_LITERALS.get(fdef.type, "''")
        return literal if literal not in exclude else None
    return None


def _sample_creation(rng, ast, rule, src, tgt, sites=_NO_SITES):
    if not rule.out_patterns:
        return None
    i = sites.pick(
        rng, range(len(rule.out_patterns)), lambda k: k,
        sites.outs.get(rule.name, ()),
    )
    out = rule.out_patterns[i]
    out_cls = _target_class(ast, tgt, out.type)
    if out_cls is None:
        return None
    bound = {b.lhs for b in out.bindings}
    unbound = [f for f in accessible_features(tgt, out_cls) if f.name not in bound]
    mandatory = [f for f in unbound if f.mandatory]
    pool = mandatory or unbound
    if not pool:
        return None
    fdef = _choice(rng, pool)
    rhs = _seed_rhs(rng, ast, rule, src, tgt, fdef)
    if rhs is None:
        return None
    return EditOperation(
        "CreationOfBinding", rule.name, f"out[{i}]", "", f"{fdef.name} <- {rhs}"
    )


def _sample_src_type(rng, ast, rule, src, tgt, sites=_NO_SITES):
    old = rule.in_pattern.type.name
    pool = _pool_src_types(ast, src, rule, exclude={old})
    if not pool:
        return None
    return EditOperation(
        "TypeOfSourcePatternElement", rule.name, "in", old, _choice(rng, pool)
    )


def _sample_tgt_type(rng, ast, rule, src, tgt, sites=_NO_SITES):
    if not rule.out_patterns:
        return None
    i = sites.pick(
        rng, range(len(rule.out_patterns)), lambda k: k,
        sites.outs.get(rule.name, ()),
    )
    old = rule.out_patterns[i].type.name
    pool = _pool_tgt_types(ast, tgt, rule.out_patterns[i], exclude={old})
    if not pool:
        return None
    return EditOperation(
        "TypeOfTargetPatternElement", rule.name, f"out[{i}]", old, _choice(rng, pool)
    )


def _sample_helper_type(rng, ast, rule, src, tgt, sites=_NO_SITES):
    if not ast.helpers:
        return None
    j = sites.pick(rng, range(len(ast.helpers)), lambda k: k, sites.helpers)
    old = ast.helpers[j].declared_type.name
    pool = _pool_helper_types(ast, src, tgt, j, exclude={old})
    if not pool:
        return None
    return EditOperation(
        "TypeOfVariableOrCollection", rule.name, f"helper[{j}]", old, _choice(rng, pool)
    )


def _type_param_pool(ast, src, tgt, tn):
    if tn.mm is None or tn.mm == ast.source_mm or tn.mm == src.name:
        return list(src.class_names())
    if tn.mm == ast.target_mm or tn.mm == tgt.name:
        return list(tgt.class_names())
    return list(src.class_names())


def _sample_type_param(rng, ast, rule, src, tgt, sites=_NO_SITES):
    cands = _rhs_nodes(rule, nodes.TypeTest)
    if not cands:
        return None
    i, j, path, node = sites.pick(
        rng, cands, lambda c: (c[0], c[1]), sites.bindings.get(rule.name, ())
    )
    old = node.type.name
    pool = _pool_type_params(ast, src, tgt, rule, i, j, path, node, exclude={old})
    if not pool:
        return None
    return EditOperation(
        "TypeParameter", rule.name, _rhs_locator(i, j, path), old, _choice(rng, pool)
    )


def _navigation_pool(ast, src, rule):
    var = rule.in_pattern.var
    in_cls = _source_class(ast, src, rule.in_pattern.type)
    if in_cls is None:
        return []
    options = [f"{var}.{g.name}" for g in accessible_features(src, in_cls)]
    for helper in ast.helpers:
        ctx = _source_class(ast, src, helper.context)
        if ctx is not None and is_subtype(src, in_cls, ctx):
            options.append(f"{var}.{helper.name}")
    return options


# --- plausibility-filtered value pools ----------------------------------------
#
# Every pool starts from the full type-aware candidate set and keeps the
# values a static look at the rule deems workable (the feature exists, the
# types line up, the class supports what the rule navigates).  An empty
# filter falls back to the full set so no operation kind ever starves.
# Shared by the sampler, the parameter resampler, and reachable_edits, so
# all three agree on what the search can express.


def _in_var_requirements(rule):
    """Features and helpers the rule navigates directly off its in-variable."""
    var = rule.in_pattern.var
    exprs = []
    if rule.in_pattern.guard is not None:
        exprs.append(rule.in_pattern.guard)
    for out in rule.out_patterns:
        for binding in out.bindings:
            exprs.append(binding.rhs)
    features, helpers = set(), set()
    for expr in exprs:
        for _, node in nodes.iter_expr_paths(expr):
            if not isinstance(node.recv if hasattr(node, "recv") else None,
                              nodes.VarRef):
                continue
            if node.recv.name != var:
                continue
            if isinstance(node, nodes.FeatureNav):
                features.add(node.feature)
            elif isinstance(node, nodes.HelperCall):
                helpers.add(node.helper)
    return features, helpers


def _pool_src_types(ast, src, rule, exclude=()):
    base = [c for c in src.class_names() if c not in exclude]
    features, helpers = _in_var_requirements(rule)

    def supports(cls):
        for name in features:
            if find_feature(src, cls, name) is None:
                return False
        for name in helpers:
            helper = next((h for h in ast.helpers if h.name == name), None)
            if helper is None:
                return False
            ctx = _source_class(ast, src, helper.context)
            if ctx is None or not is_subtype(src, cls, ctx):
                return False
        return True

    filtered = [c for c in base if supports(c)]
    return filtered or base


def _pool_tgt_types(ast, tgt, out, exclude=()):
    base = [c for c in tgt.class_names() if c not in exclude]
    lhs_names = {b.lhs for b in out.bindings}
    filtered = [
        c for c in base
        if all(find_feature(tgt, c, name) is not None for name in lhs_names)
    ]
    return filtered or base


def _rule_env(ast, src, tgt, rule):
    try:
        return rule_environment(ast, src, tgt, rule)
    except ValueError:
        return {}


def _env_at_path(ast, src, tgt, rule, rhs, path):
    """Variable environment in effect at a node inside a binding RHS.

    Iterator bodies introduce the iteration variable, typed as one element
    of the receiver collection.
    """
    env = dict(_rule_env(ast, src, tgt, rule))
    node = rhs
    for index in path:
        children = nodes.expr_children(node)
        if not 0 <= index < len(children):
            break
        child = children[index]
        if isinstance(node, nodes.IteratorOp) and child is node.body:
            recv_type = infer_type(ast, src, tgt, node.recv, env)
            env[node.var] = recv_type.with_many(False)
        node = child
    return env


def _value_accepted(ast, src, tgt, fdef, value):
    if value is None or value.is_unknown:
        return True
    if fdef.is_attribute:
        return value.is_primitive and value.base == fdef.type
    if value.is_primitive:
        return False
    if value.origin == TARGET:
        return is_subtype(tgt, value.base, fdef.type)
    return resolvable(ast, src, tgt, value.base, fdef.type)


def _pool_binding_targets(ast, src, tgt, rule, i, j, exclude=()):
    out = rule.out_patterns[i]
    out_cls = _target_class(ast, tgt, out.type)
    if out_cls is None:
        return []
    feats = accessible_features(tgt, out_cls)
    base = [f.name for f in feats if f.name not in exclude]
    env = _rule_env(ast, src, tgt, rule)
    value = infer_type(ast, src, tgt, out.bindings[j].rhs, env)
    filtered = [
        f.name for f in feats
        if f.name not in exclude and _value_accepted(ast, src, tgt, f, value)
    ]
    return filtered or base


def _navigation_value(ast, src, tgt, rule, option):
    """Inferred value shape (is_attr, origin, type name) of a var.name option."""
    in_cls = _source_class(ast, src, rule.in_pattern.type)
    name = option.split(".", 1)[1]
    if in_cls is not None:
        fdef = find_feature(src, in_cls, name)
        if fdef is not None:
            if fdef.is_attribute:
                return True, None, fdef.type
            return False, SOURCE, fdef.type
    helper = next((h for h in ast.helpers if h.name == name), None)
    if helper is not None:
        declared = resolve_type(ast, src, tgt, helper.declared_type)
        if declared is None:
            return None
        if declared.is_primitive:
            return True, None, declared.base
        return False, declared.origin, declared.base
    return None


def _pool_navigations(ast, src, tgt, rule, i, j, exclude=()):
    base = [o for o in _navigation_pool(ast, src, rule) if o not in exclude]
    out = rule.out_patterns[i]
    out_cls = _target_class(ast, tgt, out.type)
    fdef = find_feature(tgt, out_cls, out.bindings[j].lhs) if out_cls else None
    if fdef is None:
        return base
    filtered = []
    for option in base:
        shape = _navigation_value(ast, src, tgt, rule, option)
        if shape is None:
            continue
        is_attr, origin, type_name = shape
        if fdef.is_attribute:
            ok = is_attr and type_name == fdef.type
        elif is_attr:
            ok = False
        elif origin == TARGET:
            ok = is_subtype(tgt, type_name, fdef.type)
        else:
            ok = resolvable(ast, src, tgt, type_name, fdef.type)
        if ok:
            filtered.append(option)
    return filtered or base


def _pool_type_params(ast, src, tgt, rule, i, j, path, node, exclude=()):
    base = [c for c in _type_param_pool(ast, src, tgt, node.type)
            if c not in exclude]
    env = _env_at_path(ast, src, tgt, rule,
                       rule.out_patterns[i].bindings[j].rhs, path)
    recv = infer_type(ast, src, tgt, node.recv, env)
    if not recv.is_class:
        return base
    side = src if recv.origin == SOURCE else tgt
    filtered = [c for c in base
                if side.has_class(c) and is_subtype(side, c, recv.base)]
    return filtered or base


def _pool_helper_types(ast, src, tgt, j, exclude=()):
    helper = ast.helpers[j]
    base = [c for c in list(src.class_names()) + list(PRIMITIVES)
            if c not in exclude]
    ctx = resolve_type(ast, src, tgt, helper.context)
    body = infer_type(ast, src, tgt, helper.body,
                      {"self": ctx} if ctx is not None else {})
    if body.is_unknown:
        return base
    if body.is_primitive:
        filtered = [c for c in base if c == body.base]
    elif body.origin == SOURCE:
        filtered = [c for c in base
                    if src.has_class(c) and is_subtype(src, body.base, c)]
    else:
        filtered = []
    return filtered or base


def _sample_navigation(rng, ast, rule, src, tgt, sites=_NO_SITES):
    bindings = _all_bindings(rule)
    if not bindings:
        return None
    i, j, binding = sites.pick(
        rng, bindings, lambda c: (c[0], c[1]), sites.bindings.get(rule.name, ())
    )
    old = format_expr(binding.rhs)
    pool = _pool_navigations(ast, src, tgt, rule, i, j, exclude={old})
    if not pool:
        return None
    return EditOperation(
        "NavigationExpression", rule.name, _rhs_locator(i, j, ()), old,
        _choice(rng, pool),
    )


def _sample_target_of_binding(rng, ast, rule, src, tgt, sites=_NO_SITES):
    bindings = _all_bindings(rule)
    if not bindings:
        return None
    i, j, binding = sites.pick(
        rng, bindings, lambda c: (c[0], c[1]), sites.bindings.get(rule.name, ())
    )
    pool = _pool_binding_targets(ast, src, tgt, rule, i, j, exclude={binding.lhs})
    if not pool:
        return None
    return EditOperation(
        "TargetOfBinding", rule.name, f"out[{i}].binding[{j}].lhs", binding.lhs,
        _choice(rng, pool),
    )


def _make_op_sampler(kind, node_type, op_names):
    def sampler(rng, ast, rule, src, tgt, sites=_NO_SITES):
        cands = _rhs_nodes(rule, node_type)
        if not cands:
            return None
        i, j, path, node = sites.pick(
            rng, cands, lambda c: (c[0], c[1]), sites.bindings.get(rule.name, ())
        )
        pool = [o for o in op_names if o != node.op]
        if not pool:
            return None
        return EditOperation(
            kind, rule.name, _rhs_locator(i, j, path), node.op, _choice(rng, pool)
        )

    return sampler


_SAMPLERS = {
    "CreationOfBinding": _sample_creation,
    "TypeOfSourcePatternElement": _sample_src_type,
    "TypeOfTargetPatternElement": _sample_tgt_type,
    "TypeOfVariableOrCollection": _sample_helper_type,
    "TypeParameter": _sample_type_param,
    "NavigationExpression": _sample_navigation,
    "TargetOfBinding": _sample_target_of_binding,
    "PredefinedOperationCall": _make_op_sampler(
        "PredefinedOperationCall", nodes.PredefOp, nodes.PREDEF_OPS
    ),
    "CollectionOperationCall": _make_op_sampler(
        "CollectionOperationCall", nodes.CollOp, nodes.COLLECTION_OPS
    ),
    "IteratorCall": _make_op_sampler(
        "IteratorCall", nodes.IteratorOp, nodes.ITERATOR_OPS
    ),
}

# A kind may be unconstructible on a given rule (no candidate nodes, or no
# alternative values); the sampled operation then gets a locator/old pair
# that can never resolve, so applying it is a clean skip.  Keeping the kind
# preserves the uniform kind distribution.
_SKIP_SHAPES = {
    "CreationOfBinding": ("out[9999]", "", "x <- ''"),
    "TypeOfSourcePatternElement": ("in", "", ""),
    "TypeOfTargetPatternElement": ("out[9999]", "", ""),
    "TypeOfVariableOrCollection": ("helper[9999]", "", ""),
    "TypeParameter": ("out[9999].binding[0].rhs", "", ""),
    "NavigationExpression": ("out[9999].binding[0].rhs", "", ""),
    "TargetOfBinding": ("out[9999].binding[0].lhs", "", ""),
    "PredefinedOperationCall": ("out[9999].binding[0].rhs", "", ""),
    "CollectionOperationCall": ("out[9999].binding[0].rhs", "", ""),
    "IteratorCall": ("out[9999].binding[0].rhs", "", ""),
}


def sample_edit(rng, ast, errors, src_mm, tgt_mm):
    """Draw one random, type-aware edit operation.

    The kind is uniform over all ten kinds; the rule is drawn from the
    rules flagged in `errors` when any are, else from all rules.
    """
    if not ast.rules:
        raise ValueError("cannot sample edits: transformation has no rules")
    kind = EDIT_KINDS[rng.randrange(len(EDIT_KINDS))]
    pool = error_rule_names(ast, errors) or [r.name for r in ast.rules]
    rule = ast.rule(_choice(rng, pool))
    sites = _FlaggedSites(errors)
    op = _SAMPLERS[kind](rng, ast, rule, src_mm, tgt_mm, sites)
    if op is None:
        locator, old, new = _SKIP_SHAPES[kind]
        op = EditOperation(kind, rule.name, locator, old, new)
    return op


def resample_new_value(rng, op, ast, src_mm, tgt_mm):
    """A copy of op with only new_value redrawn from its candidate pool.

    Returns None when the pool offers no alternative (caller falls back to
    sampling a fresh operation).
    """
    rule = ast.rule(op.rule_to_modify)
    loc = _parse_locator(op.object_to_modify)
    exclude = {op.old_value, op.new_value}

    def pick(pool):
        pool = [p for p in pool if p not in exclude]
        if not pool:
            return None
        return replace(op, new_value=_choice(rng, pool))

    if op.kind == "PredefinedOperationCall":
        return pick(nodes.PREDEF_OPS)
    if op.kind == "CollectionOperationCall":
        return pick(nodes.COLLECTION_OPS)
    if op.kind == "IteratorCall":
        return pick(nodes.ITERATOR_OPS)
    if op.kind == "TypeOfVariableOrCollection":
        if loc is None or loc[0] != "helper" or not 0 <= loc[1] < len(ast.helpers):
            return None
        return pick(_pool_helper_types(ast, src_mm, tgt_mm, loc[1]))
    if rule is None or loc is None:
        return None
    if op.kind == "TypeOfSourcePatternElement":
        return pick(_pool_src_types(ast, src_mm, rule))
    if op.kind == "TypeOfTargetPatternElement":
        if loc[0] != "out" or not 0 <= loc[1] < len(rule.out_patterns):
            return None
        return pick(_pool_tgt_types(ast, tgt_mm, rule.out_patterns[loc[1]]))
    if op.kind == "NavigationExpression":
        if loc[0] != "binding":
            return None
        _, i, j, _part, _path = loc
        if not 0 <= i < len(rule.out_patterns):
            return None
        if not 0 <= j < len(rule.out_patterns[i].bindings):
            return None
        return pick(_pool_navigations(ast, src_mm, tgt_mm, rule, i, j))
    if op.kind == "TargetOfBinding":
        if loc[0] != "binding" or not 0 <= loc[1] < len(rule.out_patterns):
            return None
        if not 0 <= loc[2] < len(rule.out_patterns[loc[1]].bindings):
            return None
        return pick(
            _pool_binding_targets(ast, src_mm, tgt_mm, rule, loc[1], loc[2])
        )
    if op.kind == "TypeParameter":
        if loc[0] != "binding":
            return None
        _, i, j, part, path = loc
        if part != "rhs" or not 0 <= i < len(rule.out_patterns):
            return None
        out = rule.out_patterns[i]
        if not 0 <= j < len(out.bindings):
            return None
        node = nodes.expr_at(out.bindings[j].rhs, path)
        if not isinstance(node, nodes.TypeTest):
            return None
        return pick(_pool_type_params(ast, src_mm, tgt_mm, rule, i, j, path, node))
    if op.kind == "CreationOfBinding":
        if loc[0] != "out" or not 0 <= loc[1] < len(rule.out_patterns):
            return None
        out_cls = _target_class(ast, tgt_mm, rule.out_patterns[loc[1]].type)
        if out_cls is None or "<-" not in op.new_value:
            return None
        lhs, old_rhs = (s.strip() for s in op.new_value.split("<-", 1))
        fdef = next(
            (f for f in accessible_features(tgt_mm, out_cls) if f.name == lhs), None
        )
        if fdef is None:
            return None
        rhs = _seed_rhs(rng, ast, rule, src_mm, tgt_mm, fdef, exclude={old_rhs})
        if rhs is None:
            return None
        return replace(op, new_value=f"{lhs} <- {rhs}")
    return None


def reachable_edits(ast, errors, src_mm, tgt_mm):
    """Every operation sample_edit could emit, enumerated deterministically.

    The support of the sampler given these errors: same flagged-rule
    restriction, same candidate pools.  Useful for reachability analysis
    (is a repair even expressible?) and for exhaustive small-problem
    tests.  Order is fixed: rules in flagged order, kinds grouped, pools
    in declaration order.
    """
    rule_names = error_rule_names(ast, errors) or [r.name for r in ast.rules]
    ops = []
    for name in rule_names:
        rule = ast.rule(name)
        old = rule.in_pattern.type.name
        ops.extend(
            EditOperation("TypeOfSourcePatternElement", name, "in", old, new)
            for new in _pool_src_types(ast, src_mm, rule, exclude={old})
        )
        for i, out in enumerate(rule.out_patterns):
            ops.extend(
                EditOperation(
                    "TypeOfTargetPatternElement", name, f"out[{i}]",
                    out.type.name, new,
                )
                for new in _pool_tgt_types(ast, tgt_mm, out,
                                           exclude={out.type.name})
            )
            out_cls = _target_class(ast, tgt_mm, out.type)
            if out_cls is not None:
                bound = {b.lhs for b in out.bindings}
                unbound = [f for f in accessible_features(tgt_mm, out_cls)
                           if f.name not in bound]
                mandatory = [f for f in unbound if f.mandatory]
                for fdef in mandatory or unbound:
                    seeds = _seed_rhs_pool(ast, rule, src_mm, tgt_mm, fdef)
                    if not seeds and fdef.is_attribute:
                        seeds = [_PRIMITIVE_LITERALS.get(fdef.type, "''")]
                    ops.extend(
                        EditOperation(
                            "CreationOfBinding", name, f"out[{i}]", "",
                            f"{fdef.name} <- {rhs}",
                        )
                        for rhs in seeds
                    )
            for j, binding in enumerate(out.bindings):
                ops.extend(
                    EditOperation(
                        "TargetOfBinding", name,
                        f"out[{i}].binding[{j}].lhs", binding.lhs, new,
                    )
                    for new in _pool_binding_targets(
                        ast, src_mm, tgt_mm, rule, i, j,
                        exclude={binding.lhs},
                    )
                )
                rhs_text = format_expr(binding.rhs)
                ops.extend(
                    EditOperation(
                        "NavigationExpression", name, rhs_locator(i, j),
                        rhs_text, new,
                    )
                    for new in _pool_navigations(
                        ast, src_mm, tgt_mm, rule, i, j, exclude={rhs_text}
                    )
                )
                for path, node in nodes.iter_expr_paths(binding.rhs):
                    if isinstance(node, nodes.TypeTest):
                        pool = _pool_type_params(
                            ast, src_mm, tgt_mm, rule, i, j, path, node,
                            exclude={node.type.name},
                        )
                        ops.extend(
                            EditOperation(
                                "TypeParameter", name,
                                rhs_locator(i, j, path), node.type.name, new,
                            )
                            for new in pool
                        )
                    elif isinstance(node, nodes.IteratorOp):
                        ops.extend(
                            EditOperation(
                                "IteratorCall", name,
                                rhs_locator(i, j, path), node.op, new,
                            )
                            for new in nodes.ITERATOR_OPS if new != node.op
                        )
                    elif isinstance(node, nodes.CollOp):
                        ops.extend(
                            EditOperation(
                                "CollectionOperationCall", name,
                                rhs_locator(i, j, path), node.op, new,
                            )
                            for new in nodes.COLLECTION_OPS if new != node.op
                        )
                    elif isinstance(node, nodes.PredefOp):
                        ops.extend(
                            EditOperation(
                                "PredefinedOperationCall", name,
                                rhs_locator(i, j, path), node.op, new,
                            )
                            for new in nodes.PREDEF_OPS if new != node.op
                        )
    anchor = rule_names[0] if rule_names else ""
    for j, helper in enumerate(ast.helpers):
        old = helper.declared_type.name
        pool = _pool_helper_types(ast, src_mm, tgt_mm, j, exclude={old})
        ops.extend(
            EditOperation(
                "TypeOfVariableOrCollection", anchor, f"helper[{j}]", old, new,
            )
            for new in pool
        )
    return ops
