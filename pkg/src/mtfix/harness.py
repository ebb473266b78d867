"""Mutation-based evaluation of the repair pipeline.

The protocol: corrupt a known-good transformation with single-edit mutants
(one per requested error category), merge them into one multi-error faulty
program, repair it with the evolutionary search (and optionally the random
baseline at the same budget), refine the recommended patch, and score the
result against the ground truth.  Everything is derived from one master
seed, so reports are reproducible byte for byte, including under worker
pools.

Scoring automates the objective core of semantic patch assessment: an
error site counts as exactly fixed when its error is gone and the repaired
fragment is structurally identical to the original one.  Mismatched
fragments are kept as a residual list for manual review.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .analyzer import (
    ERROR_CATEGORIES,
    SOURCE,
    analyze,
    infer_type,
    rule_environment,
)
from .edits import (
    EditOperation,
    apply_edit,
    apply_patch,
    reachable_edits,
    rhs_locator,
)
from .metamodel import PRIMITIVES, accessible_features
from .mtl import nodes
from .mtl.nodes import FeatureNav, IteratorOp, TypeTest, iter_expr_paths, replace_at
from .mtl.printer import (
    format_binding,
    format_expr,
    format_helper,
    format_in_pattern,
    format_type,
)
from .refine import refine
from .search import RepairProblem, SearchConfig, run_nsga2, run_random, select_recommended
from .stats import cohens_d, mann_whitney_u

_BOGUS_SUFFIX = "Typo"


@dataclass(frozen=True)
class Mutant:
    """One injected fault: the edit, the category it provokes, its origin."""

    category: str
    edit: EditOperation
    origin: object

    def to_dict(self):
        return {"category": self.category, "edit": self.edit.to_dict()}


@dataclass(frozen=True)
class _Candidate:
    op: EditOperation
    categories: frozenset
    error_count: int

    def is_exactly(self, category):
        return self.error_count == 1 and self.categories == frozenset((category,))


def _expression_rewrites(ast, src, tgt, rule, ei, bi, binding, env):
    """Candidate edits that rewrite one node of a binding's RHS."""
    ops = []
    old_text = format_expr(binding.rhs)
    rhs_loc = rhs_locator(ei, bi)
    for path, node in iter_expr_paths(binding.rhs):
        if isinstance(node, FeatureNav):
            host = infer_type(ast, src, tgt, node.recv, env)
            names = []
            if host.is_class:
                side = src if host.origin == SOURCE else tgt
                if side.has_class(host.base):
                    names = [f.name for f in accessible_features(side, host.base)]
            for alt in names + [node.feature + _BOGUS_SUFFIX]:
                if alt == node.feature:
                    continue
                new_rhs = replace_at(binding.rhs, path, replace(node, feature=alt))
                ops.append(EditOperation(
                    "NavigationExpression", rule.name, rhs_loc,
                    old_text, format_expr(new_rhs),
                ))
        elif isinstance(node, TypeTest):
            if node.type.mm in (None, ast.source_mm, src.name):
                pool = list(src.class_names())
            else:
                pool = list(tgt.class_names())
            for alt in pool + [node.type.name + _BOGUS_SUFFIX]:
                if alt != node.type.name:
                    ops.append(EditOperation(
                        "TypeParameter", rule.name, rhs_locator(ei, bi, path),
                        node.type.name, alt,
                    ))
        elif isinstance(node, IteratorOp):
            for alt in nodes.ITERATOR_OPS:
                if alt != node.op:
                    ops.append(EditOperation(
                        "IteratorCall", rule.name, rhs_locator(ei, bi, path),
                        node.op, alt,
                    ))
        elif isinstance(node, nodes.CollOp):
            for alt in nodes.COLLECTION_OPS:
                if alt != node.op:
                    ops.append(EditOperation(
                        "CollectionOperationCall", rule.name,
                        rhs_locator(ei, bi, path), node.op, alt,
                    ))
        elif isinstance(node, nodes.PredefOp):
            for alt in nodes.PREDEF_OPS:
                if alt != node.op:
                    ops.append(EditOperation(
                        "PredefinedOperationCall", rule.name,
                        rhs_locator(ei, bi, path), node.op, alt,
                    ))
    return ops


def _candidate_edits(ast, src, tgt):
    """Every single-edit corruption we know how to build, in a fixed order."""
    ops = []
    for rule in ast.rules:
        old = rule.in_pattern.type.name
        for new in list(src.class_names()) + [old + _BOGUS_SUFFIX]:
            if new != old:
                ops.append(EditOperation(
                    "TypeOfSourcePatternElement", rule.name, "in", old, new,
                ))
        env = rule_environment(ast, src, tgt, rule)
        for ei, elem in enumerate(rule.out_patterns):
            told = elem.type.name
            for new in list(tgt.class_names()) + [told + _BOGUS_SUFFIX]:
                if new != told:
                    ops.append(EditOperation(
                        "TypeOfTargetPatternElement", rule.name,
                        f"out[{ei}]", told, new,
                    ))
            target_names = []
            if tgt.has_class(told):
                target_names = [f.name for f in accessible_features(tgt, told)]
            for bi, binding in enumerate(elem.bindings):
                for new in target_names + [binding.lhs + _BOGUS_SUFFIX]:
                    if new != binding.lhs:
                        ops.append(EditOperation(
                            "TargetOfBinding", rule.name,
                            f"out[{ei}].binding[{bi}].lhs", binding.lhs, new,
                        ))
                ops.extend(_expression_rewrites(
                    ast, src, tgt, rule, ei, bi, binding, env,
                ))
    anchor_rule = ast.rules[0].name if ast.rules else ""
    for j, helper in enumerate(ast.helpers):
        old = helper.declared_type.name
        pool = list(src.class_names()) + list(PRIMITIVES)
        for new in pool + [old + _BOGUS_SUFFIX]:
            if new != old:
                ops.append(EditOperation(
                    "TypeOfVariableOrCollection", anchor_rule,
                    f"helper[{j}]", old, new,
                ))
    return ops


def _classified_candidates(ast, src, tgt):
    """Candidate edits grouped by the error categories they provoke."""
    by_category = {category: [] for category in ERROR_CATEGORIES}
    for op in _candidate_edits(ast, src, tgt):
        mutated, outcome = apply_edit(ast, op)
        if not outcome.applied:
            continue
        errors = analyze(mutated, src, tgt)
        if not errors:
            continue
        candidate = _Candidate(
            op, frozenset(e.category for e in errors), len(errors)
        )
        for category in candidate.categories:
            by_category[category].append(candidate)
    return by_category


def generate_mutants(ast, src, tgt, categories=None, rng=None):
    """One verified mutant per requested category occurrence.

    Candidates provoking exactly one error, of the requested category, are
    preferred; otherwise any candidate whose error set contains the
    category is acceptable.  Because mutants are applied in order, each
    choice is additionally checked in the context of the previous ones:
    candidates whose error would be masked (e.g. silenced by an earlier
    type corruption turning the expression unknown) are avoided when a
    visible alternative exists, and candidates adding exactly one new
    error beat those cascading into several, so the merged error count
    tracks the mutant count.  Repeated categories receive distinct edits.
    Categories
    with no viable candidate are silently skipped (they simply produce no
    mutant), matching the impossible-category contract.
    """
    if analyze(ast, src, tgt):
        raise ValueError("mutants must start from an error-free transformation")
    if categories is None:
        categories = ERROR_CATEGORIES
    if rng is None:
        rng = random.Random(0)
    pool = _classified_candidates(ast, src, tgt)
    used = set()
    mutants = []
    merged = ast
    merged_errors = 0
    for category in categories:
        if category not in pool:
            raise ValueError("unknown error category %r" % (category,))
        fresh = [c for c in pool[category] if c.op not in used]
        preferred = [c for c in fresh if c.is_exactly(category)]
        visible = {}
        single = set()
        for candidate in fresh:
            applied, outcome = apply_edit(merged, candidate.op)
            if not outcome.applied:
                continue
            count = len(analyze(applied, src, tgt))
            if count > merged_errors:
                visible[candidate.op] = (applied, count)
                if count == merged_errors + 1:
                    single.add(candidate.op)
        choices = (
            [c for c in preferred if c.op in single]
            or [c for c in fresh if c.op in single]
            or [c for c in preferred if c.op in visible]
            or [c for c in fresh if c.op in visible]
            or preferred
            or fresh
        )
        if not choices:
            continue
        chosen = rng.choice(choices)
        used.add(chosen.op)
        mutants.append(Mutant(category, chosen.op, ast))
        if chosen.op in visible:
            merged, merged_errors = visible[chosen.op]
        else:
            merged, _ = apply_edit(merged, chosen.op)
            merged_errors = len(analyze(merged, src, tgt))
    return mutants


def greedy_repair_residual(faulty, src, tgt, max_steps=None):
    """Errors left after greedy repair over the sampler-reachable edits.

    A repairability certificate for injected fault sets: 0 means a
    sequence of single-error-reducing operations from the search's own
    candidate space reaches an error-free program.  Faults whose only fix
    lies outside that space (for example a resolution error whose cause
    sits in a rule the errors never flag) leave a positive residual.
    """
    ast = faulty
    errors = analyze(ast, src, tgt)
    if max_steps is None:
        max_steps = len(errors) + 2
    for _ in range(max_steps):
        if not errors:
            return 0
        best = None
        for op in reachable_edits(ast, errors, src, tgt):
            cand, outcome = apply_edit(ast, op)
            if not outcome.applied:
                continue
            count = len(analyze(cand, src, tgt))
            if count < len(errors) and (best is None or count < best[0]):
                best = (count, cand)
        if best is None:
            break
        ast = best[1]
        errors = analyze(ast, src, tgt)
    return len(errors)


def merge_mutants(original, mutants, src, tgt):
    """Apply mutant edits in order (skip-not-fail); count resulting errors.

    Overlapping mutants may collide: an edit whose fragment was already
    rewritten is skipped, so the error count can differ from the mutant
    count in both directions.
    """
    ast = original
    for mutant in mutants:
        ast, _ = apply_edit(ast, mutant.edit)
    return ast, len(analyze(ast, src, tgt))


# --- scoring -----------------------------------------------------------------

def _element_fragment(elem):
    bindings = sorted(
        (binding.lhs, format_expr(binding.rhs)) for binding in elem.bindings
    )
    body = "; ".join("%s <- %s" % pair for pair in bindings)
    return "%s : %s (%s)" % (elem.var, format_type(elem.type), body)


def _site_fragment(ast, site):
    """Canonical text of the program fragment an error site points at."""
    if site[0] == "helper":
        index = site[1]
        if 0 <= index < len(ast.helpers):
            return format_helper(ast.helpers[index])
        return None
    rule = ast.rule(site[1])
    if rule is None:
        return None
    rest = site[2:]
    if rest == ("in",):
        return format_in_pattern(rule.in_pattern)
    if len(rest) >= 2 and rest[0] == "out":
        if not 0 <= rest[1] < len(rule.out_patterns):
            return None
        elem = rule.out_patterns[rest[1]]
        if len(rest) == 2:
            return _element_fragment(elem)
        if len(rest) == 4 and rest[2] == "binding":
            if not 0 <= rest[3] < len(elem.bindings):
                return None
            return format_binding(elem.bindings[rest[3]])
    return None


def _site_text(site):
    if site[0] == "helper":
        return "helper[%d]" % site[1]
    parts = ["rule %s" % site[1]]
    rest = site[2:]
    if rest == ("in",):
        parts.append("in")
    elif rest:
        loc = "out[%d]" % rest[1]
        if len(rest) == 4:
            loc += ".binding[%d]" % rest[3]
        parts.append(loc)
    return " ".join(parts)


def score_patch(original, faulty, repaired, src, tgt):
    """Compare a repair against ground truth, error site by error site.

    errors_fixed counts faulty-program errors absent from the repaired
    program (same site, same category).  exact_fixes additionally requires
    the repaired fragment at that site to equal the original's.  Sites
    failing either test are listed in the residual for review.
    """
    faulty_errors = analyze(faulty, src, tgt)
    repaired_keys = {
        (e.site, e.category) for e in analyze(repaired, src, tgt)
    }
    errors_fixed = 0
    exact_fixes = 0
    residual = []
    for error in faulty_errors:
        cleared = (error.site, error.category) not in repaired_keys
        if cleared:
            errors_fixed += 1
        expected = _site_fragment(original, error.site)
        actual = _site_fragment(repaired, error.site)
        if cleared and expected is not None and expected == actual:
            exact_fixes += 1
        else:
            residual.append({
                "site": _site_text(error.site),
                "category": error.category,
                "expected": expected,
                "actual": actual,
            })
    return {
        "errors_fixed": errors_fixed,
        "exact_fixes": exact_fixes,
        "residual": residual,
    }


# --- the evaluation pipeline -------------------------------------------------

DEFAULT_FIXTURES = ("uml2bpmn", "class2table", "pnml2pn")


@dataclass(frozen=True)
class EvalConfig:
    """Everything one evaluation needs; cells derive their seeds from it."""

    fixtures: tuple = DEFAULT_FIXTURES
    mutant_counts: tuple = (3, 4, 5, 6)
    runs: int = 5
    search: SearchConfig = field(default_factory=SearchConfig)
    seed: int = 0
    include_baseline: bool = True
    jobs: int = 1
    problems: object = None  # optional {name: (ast, src, tgt)} override

    def __post_init__(self):
        object.__setattr__(self, "fixtures", tuple(self.fixtures))
        object.__setattr__(self, "mutant_counts", tuple(self.mutant_counts))
        if isinstance(self.search, dict):
            object.__setattr__(self, "search", SearchConfig(**self.search))
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


def _derived_seed(*parts):
    text = ":".join(str(part) for part in parts)
    return int(hashlib.sha256(text.encode("utf8")).hexdigest(), 16)


def _load_fixture(config, name):
    if config.problems is not None and name in config.problems:
        return config.problems[name]
    from .fixtures import load_problem

    return load_problem(name)


def _cell_categories(rng, count):
    """`count` categories: a shuffled pass over all seven, then repeats."""
    shuffled = list(ERROR_CATEGORIES)
    rng.shuffle(shuffled)
    return [shuffled[i % len(shuffled)] for i in range(count)]


def _run_arm_search(config, problem, seed):
    run_config = replace(config.search, seed=seed, runs=1)
    result = run_nsga2(run_config, problem)
    best = select_recommended(result)
    return best, result.statistics


_MUTANT_SET_TRIES = 16


def _draw_mutant_set(original, src, tgt, size, rng):
    categories = _cell_categories(rng, size)
    mutants = generate_mutants(original, src, tgt, categories, rng)
    for _ in range(2):
        if len(mutants) >= size:
            break
        top_up = _cell_categories(rng, size - len(mutants))
        mutants.extend(generate_mutants(original, src, tgt, top_up, rng))
    return mutants[:size]


def build_faulty(original, src, tgt, size, rng):
    """A merged mutant set of the given size, certified repairable.

    Draws are repeated (bounded) until greedy repair over the reachable
    edit space clears the merged program; otherwise the draw with the
    lowest residual wins.  Keeps evaluation problems inside the repair
    tool's domain, which tiny example transformations do not guarantee
    the way large rule bases do.
    """
    best = None
    for _ in range(_MUTANT_SET_TRIES):
        mutants = _draw_mutant_set(original, src, tgt, size, rng)
        faulty, err_in = merge_mutants(original, mutants, src, tgt)
        residual = greedy_repair_residual(faulty, src, tgt)
        if best is None or residual < best[0]:
            best = (residual, mutants, faulty, err_in)
        if residual == 0:
            break
    return best[1], best[2], best[3]


def _evaluate_cell(args):
    """All rows for one (fixture, mutant count) cell, both arms."""
    config, fixture, size = args
    original, src, tgt = _load_fixture(config, fixture)
    set_rng = random.Random(_derived_seed(config.seed, fixture, size, "mutants"))
    mutants, faulty, err_in = build_faulty(original, src, tgt, size, set_rng)

    rows = []
    for run in range(config.runs):
        problem = RepairProblem(faulty, src, tgt)
        seed = _derived_seed(config.seed, fixture, size, run, "nsga2")
        best, statistics = _run_arm_search(config, problem, seed)
        repaired, log = apply_patch(faulty, best.patch)
        explored_score = score_patch(original, faulty, repaired, src, tgt)
        refined, _ = refine(repaired, src, tgt)
        refined_score = score_patch(original, faulty, refined, src, tgt)
        rows.append({
            "fixture": fixture,
            "mut": size,
            "run": run,
            "arm": "nsga2",
            "err_in": err_in,
            "ite": statistics["ite"],
            "ope": len(best.patch.ops),
            "ope_applied": sum(1 for step in log if step["applied"]),
            "err_search": best.fitness.f1,
            "err_out": len(analyze(refined, src, tgt)),
            "ep_exact": explored_score["exact_fixes"],
            "rp_exact": refined_score["exact_fixes"],
        })
        if config.include_baseline:
            problem = RepairProblem(faulty, src, tgt)
            seed = _derived_seed(config.seed, fixture, size, run, "random")
            run_config = replace(config.search, seed=seed, runs=1)
            best = run_random(run_config, problem)
            repaired, log = apply_patch(faulty, best.patch)
            explored_score = score_patch(original, faulty, repaired, src, tgt)
            rows.append({
                "fixture": fixture,
                "mut": size,
                "run": run,
                "arm": "random",
                "err_in": err_in,
                "ite": None,
                "ope": len(best.patch.ops),
                "ope_applied": sum(1 for step in log if step["applied"]),
                "err_search": best.fitness.f1,
                "err_out": best.fitness.f1,
                "ep_exact": explored_score["exact_fixes"],
                "rp_exact": None,
            })
    return rows


def _fmt(value):
    if value is None:
        return "-"
    if isinstance(value, float):
        return "%.4f" % value
    return str(value)


def _mean(values):
    return sum(values) / len(values)


@dataclass
class EvaluationReport:
    """Per-run rows plus the two paper-shaped aggregate tables."""

    rows: list
    config: EvalConfig

    def runs_of(self, fixture, size, arm):
        return [
            row for row in self.rows
            if row["fixture"] == fixture and row["mut"] == size
            and row["arm"] == arm
        ]

    def table2_rows(self):
        """One aggregate row per (fixture, #MUT, arm)."""
        out = []
        arms = ["nsga2"] + (["random"] if self.config.include_baseline else [])
        for fixture in self.config.fixtures:
            for size in self.config.mutant_counts:
                for arm in arms:
                    rows = self.runs_of(fixture, size, arm)
                    if not rows:
                        continue
                    found = [r["ite"] for r in rows if r["ite"] is not None]
                    err_in = rows[0]["err_in"]
                    rates = lambda key: _mean([
                        (r[key] / err_in if err_in else 1.0) for r in rows
                        if r[key] is not None
                    ]) if any(r[key] is not None for r in rows) else None
                    out.append({
                        "fixture": fixture,
                        "mut": size,
                        "arm": arm,
                        "runs": len(rows),
                        "err_in": err_in,
                        "ite_avg": _mean(found) if found else None,
                        "ope_avg": _mean([r["ope"] for r in rows]),
                        "err_out_min": min(r["err_out"] for r in rows),
                        "err_out_avg": _mean([r["err_out"] for r in rows]),
                        "err_out_max": max(r["err_out"] for r in rows),
                        "ep_rate": rates("ep_exact"),
                        "rp_rate": rates("rp_exact"),
                    })
        return out

    def table3_rows(self):
        """Search-vs-baseline comparison pooled across fixtures, per #MUT."""
        if not self.config.include_baseline:
            return []
        out = []
        for size in self.config.mutant_counts:
            ours = [
                row["err_out"] for row in self.rows
                if row["mut"] == size and row["arm"] == "nsga2"
            ]
            baseline = [
                row["err_out"] for row in self.rows
                if row["mut"] == size and row["arm"] == "random"
            ]
            if not ours or not baseline:
                continue
            test = mann_whitney_u(ours, baseline)
            effect = (
                cohens_d(ours, baseline)
                if len(ours) > 1 and len(baseline) > 1 else None
            )
            out.append({
                "mut": size,
                "automatix_avg": _mean(ours),
                "rdn_avg": _mean(baseline),
                "p_value": test.p_value,
                "cohens_d": effect,
            })
        return out

    def _csv(self, header, rows):
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(row[key]) for key in header])
        return buffer.getvalue()

    def table2_csv(self):
        return self._csv(
            ["fixture", "mut", "arm", "runs", "err_in", "ite_avg", "ope_avg",
             "err_out_min", "err_out_avg", "err_out_max", "ep_rate", "rp_rate"],
            self.table2_rows(),
        )

    def table3_csv(self):
        return self._csv(
            ["mut", "automatix_avg", "rdn_avg", "p_value", "cohens_d"],
            self.table3_rows(),
        )

    def write_csv(self, directory):
        import os

        os.makedirs(directory, exist_ok=True)
        paths = []
        for name, text in (("table2.csv", self.table2_csv()),
                           ("table3.csv", self.table3_csv())):
            path = os.path.join(directory, name)
            with open(path, "w", encoding="utf8", newline="") as handle:
                handle.write(text)
            paths.append(path)
        return paths


def run_evaluation(config):
    """Mutate, merge, repair, refine, and score every configured cell."""
    cells = [
        (config, fixture, size)
        for fixture in config.fixtures
        for size in config.mutant_counts
    ]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            per_cell = list(pool.map(_evaluate_cell, cells))
    else:
        per_cell = [_evaluate_cell(cell) for cell in cells]
    rows = list(itertools.chain.from_iterable(per_cell))
    return EvaluationReport(rows=rows, config=config)
