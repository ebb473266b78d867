"""Metamodels: the type system that transformations are checked against.

A metamodel is a set of named classes with attributes (primitive-typed),
references (class-typed), and single or multiple inheritance.  Metamodels
are loaded from a small textual format (see `load_metamodel`), validated
eagerly, and immutable afterwards, so they can be shared freely between
concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

PRIMITIVES = ("String", "Integer", "Boolean")


class MetamodelError(Exception):
    """Raised for parse or validation problems in a metamodel source."""

    def __init__(self, message, line=None):
        if line is not None:
            message = "line %d: %s" % (line, message)
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class FeatureDef:
    """One attribute or reference of a class.

    kind is "attr" (primitive type) or "ref" (class type).  `many` marks
    multiplicity > 1, `mandatory` marks lower bound >= 1.
    """

    name: str
    kind: str
    type: str
    many: bool = False
    mandatory: bool = False

    @property
    def is_attribute(self):
        return self.kind == "attr"

    @property
    def is_reference(self):
        return self.kind == "ref"


@dataclass
class ClassDef:
    name: str
    abstract: bool = False
    supertypes: list[str] = field(default_factory=list)
    features: list[FeatureDef] = field(default_factory=list)


@dataclass
class Metamodel:
    name: str
    classes: dict[str, ClassDef] = field(default_factory=dict)
    # accessible-feature cache, filled during validation
    _accessible: dict[str, list[FeatureDef]] = field(
        default_factory=dict, repr=False, compare=False
    )

    def has_class(self, name: str) -> bool:
        return name in self.classes

    def class_names(self) -> list[str]:
        return list(self.classes)


# ---------------------------------------------------------------------------
# Parsing

def _tokenize(text):
    """Yield (value, line) pairs; '#' starts a comment to end of line."""
    toks = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0]
        for ch in "{}:;,":
            line = line.replace(ch, " %s " % ch)
        for word in line.split():
            toks.append((word, lineno))
    return toks


class _MmParser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.toks[self.pos][0] if self.pos < len(self.toks) else None

    def next(self):
        if self.pos >= len(self.toks):
            raise MetamodelError("unexpected end of input")
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        tok, line = self.next()
        if tok != value:
            raise MetamodelError("expected %r, found %r" % (value, tok), line)
        return tok, line

    def ident(self, what):
        tok, line = self.next()
        if not tok or not (tok[0].isalpha() or tok[0] == "_") or not tok.replace("_", "").isalnum():
            raise MetamodelError("expected %s, found %r" % (what, tok), line)
        return tok, line

    def parse(self) -> Metamodel:
        self.expect("metamodel")
        name, _ = self.ident("metamodel name")
        self.expect("{")
        classes: dict[str, ClassDef] = {}
        while self.peek() == "class":
            cls, line = self._parse_class()
            if cls.name in classes:
                raise MetamodelError("duplicate class %r" % cls.name, line)
            classes[cls.name] = cls
        self.expect("}")
        if self.pos != len(self.toks):
            tok, line = self.next()
            raise MetamodelError("trailing input %r" % tok, line)
        return Metamodel(name, classes)

    def _parse_class(self):
        self.expect("class")
        name, line = self.ident("class name")
        abstract = False
        supers: list[str] = []
        if self.peek() == "abstract":
            self.next()
            abstract = True
        if self.peek() == "extends":
            self.next()
            while True:
                sup, _ = self.ident("superclass name")
                supers.append(sup)
                if self.peek() == ",":
                    self.next()
                else:
                    break
        self.expect("{")
        features = []
        while self.peek() in ("attr", "ref"):
            features.append(self._parse_feature())
        self.expect("}")
        return ClassDef(name, abstract, supers, features), line

    def _parse_feature(self):
        kind, _ = self.next()
        name, line = self.ident("feature name")
        self.expect(":")
        ftype, _ = self.ident("feature type")
        many = mandatory = False
        while self.peek() in ("many", "mandatory"):
            flag, _ = self.next()
            if flag == "many":
                many = True
            else:
                mandatory = True
        self.expect(";")
        return FeatureDef(name, kind, ftype, many, mandatory)


def _validate(mm: Metamodel):
    # supertypes resolve, inheritance acyclic
    for cls in mm.classes.values():
        for sup in cls.supertypes:
            if sup not in mm.classes:
                raise MetamodelError(
                    "class %r extends unknown class %r" % (cls.name, sup))

    WHITE, GRAY, BLACK = 0, 1, 2
    state = {name: WHITE for name in mm.classes}

    def visit(name, trail):
        if state[name] == GRAY:
            cycle = trail[trail.index(name):] + [name]
            raise MetamodelError("inheritance cycle: %s" % ",".join(cycle))
        if state[name] == BLACK:
            return
        state[name] = GRAY
        for sup in mm.classes[name].supertypes:
            visit(sup, trail + [name])
        state[name] = BLACK

    for name in mm.classes:
        visit(name, [])

    # feature types resolve; attrs primitive, refs class-typed
    for cls in mm.classes.values():
        for feat in cls.features:
            if feat.is_attribute and feat.type not in PRIMITIVES:
                raise MetamodelError(
                    "attribute %s.%s has non-primitive type %r"
                    % (cls.name, feat.name, feat.type))
            if feat.is_reference and feat.type not in mm.classes:
                raise MetamodelError(
                    "reference %s.%s has dangling type %r"
                    % (cls.name, feat.name, feat.type))

    # accessible-feature sets: unique names, conflicting duplicates rejected
    for name in mm.classes:
        feats = _collect_accessible(mm, name)
        seen: dict[str, FeatureDef] = {}
        merged = []
        for feat in feats:
            if feat.name in seen:
                if seen[feat.name] != feat:
                    raise MetamodelError(
                        "class %r inherits conflicting definitions of feature %r"
                        % (name, feat.name))
                continue
            seen[feat.name] = feat
            merged.append(feat)
        mm._accessible[name] = merged


def _collect_accessible(mm: Metamodel, cls_name: str) -> list[FeatureDef]:
    """Own features first, then supertypes depth-first in declaration order."""
    out = []
    visited = set()

    def walk(name):
        if name in visited:
            return
        visited.add(name)
        out.extend(mm.classes[name].features)
        for sup in mm.classes[name].supertypes:
            walk(sup)

    walk(cls_name)
    return out


def load_metamodel(text: str) -> Metamodel:
    """Parse and validate a metamodel source; raises MetamodelError."""
    mm = _MmParser(text).parse()
    _validate(mm)
    return mm


# ---------------------------------------------------------------------------
# Queries

def is_subtype(mm: Metamodel, sub: str, sup: str) -> bool:
    """True iff sub == sup or sup is reachable through supertype edges."""
    if sub not in mm.classes:
        raise MetamodelError("unknown class %r" % sub)
    if sup not in mm.classes:
        raise MetamodelError("unknown class %r" % sup)
    if sub == sup:
        return True
    todo = list(mm.classes[sub].supertypes)
    seen = set()
    while todo:
        cur = todo.pop()
        if cur == sup:
            return True
        if cur in seen:
            continue
        seen.add(cur)
        todo.extend(mm.classes[cur].supertypes)
    return False


def accessible_features(mm: Metamodel, cls: str) -> list[FeatureDef]:
    """Own plus inherited features, deduplicated, in deterministic order."""
    if cls not in mm.classes:
        raise MetamodelError("unknown class %r" % cls)
    return list(mm._accessible[cls])


def find_feature(mm: Metamodel, cls: str, name: str):
    """The FeatureDef visible as `cls.name`, or None."""
    for feat in accessible_features(mm, cls):
        if feat.name == name:
            return feat
    return None


def subclasses(mm: Metamodel, cls: str) -> list[str]:
    """All classes that are subtype-or-equal to cls, in declaration order."""
    return [name for name in mm.classes if is_subtype(mm, name, cls)]
