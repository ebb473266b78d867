"""Command-line front end.

Subcommands: analyze, footprint, mutate, repair, apply, refine, evaluate.
Exit codes: 0 success, 1 usage error, 2 input error (unreadable file, parse
or metamodel failure, malformed JSON), 3 when `analyze` finds type errors
(so CI pipelines can gate on a clean transformation).

Every subcommand accepts --json and then prints a single machine-readable
document with a `format_version` field.  All randomized commands take
--seed and are byte-reproducible for a fixed seed, including under --jobs.
"""

import argparse
import difflib
import json
import random
import sys
from concurrent.futures import ProcessPoolExecutor

from .analyzer import ERROR_CATEGORIES, analyze
from .edits import EditOperation, apply_patch
from .footprint import extract_footprint, footprints
from .harness import EvalConfig, generate_mutants, merge_mutants, run_evaluation
from .metamodel import MetamodelError, load_metamodel
from .mtl import parse_transformation
from .mtl.parser import MtlSyntaxError
from .mtl.printer import pretty_print
from .refine import refine
from .search import (
    RepairProblem,
    SearchConfig,
    run_nsga2,
    run_random,
    select_recommended,
)

FORMAT_VERSION = 1


class _UsageError(Exception):
    pass


class _InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse, but usage problems raise instead of exiting with status 2."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _read_text(path):
    try:
        with open(path, "r", encoding="utf8") as handle:
            return handle.read()
    except OSError as exc:
        raise _InputError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _load_transformation(path):
    try:
        return parse_transformation(_read_text(path))
    except MtlSyntaxError as exc:
        raise _InputError(f"{path}: {exc}") from exc


def _load_metamodel(path):
    try:
        return load_metamodel(_read_text(path))
    except MetamodelError as exc:
        raise _InputError(f"{path}: {exc}") from exc


def _load_json(path):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise _InputError(f"{path}: not valid JSON: {exc}") from exc


def _emit(text, path=None):
    if path is None:
        sys.stdout.write(text)
        if text and not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(path, "w", encoding="utf8") as handle:
            handle.write(text)


def _print_json(document):
    json.dump(document, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _patch_document(ops):
    return {"format_version": FORMAT_VERSION, "ops": [op.to_dict() for op in ops]}


def _parse_patch_document(data, path):
    if not isinstance(data, dict) or "ops" not in data:
        raise _InputError(f"{path}: expected an object with an 'ops' array")
    try:
        return [EditOperation.from_dict(item) for item in data["ops"]]
    except (KeyError, TypeError) as exc:
        raise _InputError(f"{path}: malformed edit operation: {exc}") from exc


def _unified_diff(before, after):
    return "".join(
        difflib.unified_diff(
            before.splitlines(keepends=True),
            after.splitlines(keepends=True),
            fromfile="faulty",
            tofile="repaired",
        )
    )


# -- analyze -------------------------------------------------------------------


def _cmd_analyze(args):
    ast = _load_transformation(args.file)
    src = _load_metamodel(args.src)
    tgt = _load_metamodel(args.tgt)
    errors = analyze(ast, src, tgt)
    if args.json:
        _print_json(
            {
                "format_version": FORMAT_VERSION,
                "file": args.file,
                "errors": [e.to_dict() for e in errors],
            }
        )
    else:
        for e in errors:
            where = f" [rule {e.rule}]" if e.rule else ""
            print(f"{args.file}:{e.line}:{e.col}: {e.category}: {e.message}{where}")
        noun = "error" if len(errors) == 1 else "errors"
        print(f"{len(errors)} {noun}")
    return 3 if errors else 0


# -- footprint -----------------------------------------------------------------


def _cmd_footprint(args):
    ast = _load_transformation(args.file)
    if args.json:
        document = {"format_version": FORMAT_VERSION, "file": args.file}
        source, target = footprints(ast)
        if args.side in (None, "source"):
            document["source"] = sorted(source)
        if args.side in (None, "target"):
            document["target"] = sorted(target)
        _print_json(document)
        return 0
    if args.side is not None:
        for name in sorted(extract_footprint(ast, args.side)):
            print(name)
        return 0
    source, target = footprints(ast)
    for side, elements in (("source", source), ("target", target)):
        for name in sorted(elements):
            print(f"{side}:{name}")
    return 0


# -- mutate --------------------------------------------------------------------


def _cmd_mutate(args):
    ast = _load_transformation(args.file)
    src = _load_metamodel(args.src)
    tgt = _load_metamodel(args.tgt)
    rng = random.Random(args.seed)
    if args.categories:
        for name in args.categories:
            if name not in ERROR_CATEGORIES:
                known = ", ".join(ERROR_CATEGORIES)
                raise _InputError(f"unknown category {name!r} (known: {known})")
        count = args.count if args.count is not None else len(args.categories)
        categories = [args.categories[i % len(args.categories)] for i in range(count)]
    else:
        count = args.count if args.count is not None else 1
        shuffled = list(ERROR_CATEGORIES)
        rng.shuffle(shuffled)
        categories = [shuffled[i % len(shuffled)] for i in range(count)]
    try:
        mutants = generate_mutants(ast, src, tgt, categories, rng)
    except ValueError as exc:
        raise _InputError(str(exc)) from exc
    faulty, error_count = merge_mutants(ast, mutants, src, tgt)
    text = pretty_print(faulty)
    if args.json:
        _print_json(
            {
                "format_version": FORMAT_VERSION,
                "source": text,
                "errors": error_count,
                "mutants": [m.to_dict() for m in mutants],
            }
        )
    else:
        _emit(text, args.output)
        if args.output is not None:
            print(f"{len(mutants)} mutants, {error_count} errors -> {args.output}")
    return 0


# -- repair --------------------------------------------------------------------


def _repair_run(packed):
    problem, config, baseline = packed
    if baseline:
        best = run_random(config, problem)
        return [best], {"explored": config.population_size * config.generations}
    result = run_nsga2(config, problem)
    return list(result.pareto), result.statistics


def _cmd_repair(args):
    ast = _load_transformation(args.file)
    src = _load_metamodel(args.src)
    tgt = _load_metamodel(args.tgt)
    problem = RepairProblem(ast, src, tgt)
    baseline = args.baseline == "random"
    tasks = [
        (
            problem,
            SearchConfig(
                population_size=args.population,
                generations=args.generations,
                crossover_rate=args.crossover_rate,
                mutation_rate=args.mutation_rate,
                seed=args.seed + run,
            ),
            baseline,
        )
        for run in range(args.runs)
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(_repair_run, tasks))
    else:
        outcomes = [_repair_run(task) for task in tasks]

    pool_members = []  # (run, individual)
    statistics = []
    for run, (members, stats) in enumerate(outcomes):
        statistics.append(stats)
        pool_members.extend((run, ind) for ind in members)
    recommended = select_recommended([ind for _, ind in pool_members])
    repaired_ast, _ = apply_patch(ast, recommended.patch)
    before = pretty_print(ast)
    after = pretty_print(repaired_ast)
    diff = _unified_diff(before, after)
    patch_doc = _patch_document(recommended.patch.ops)

    if args.out is not None:
        import os

        os.makedirs(args.out, exist_ok=True)
        _emit(diff, os.path.join(args.out, "recommended.diff"))
        _emit(
            json.dumps(patch_doc, indent=2, sort_keys=True) + "\n",
            os.path.join(args.out, "recommended.json"),
        )
        lines = ["run,member,f1,f2,f3"]
        for run, ind in pool_members:
            f = ind.fitness
            lines.append(f"{run},{len(lines) - 1},{f.f1},{f.f2},{f.f3}")
        _emit("\n".join(lines) + "\n", os.path.join(args.out, "pareto.csv"))
        patches_dir = os.path.join(args.out, "pareto")
        os.makedirs(patches_dir, exist_ok=True)
        for index, (run, ind) in enumerate(pool_members):
            _emit(
                json.dumps(_patch_document(ind.patch.ops), indent=2, sort_keys=True)
                + "\n",
                os.path.join(patches_dir, f"{index:03d}.json"),
            )

    if args.json:
        _print_json(
            {
                "format_version": FORMAT_VERSION,
                "recommended": {
                    "patch": patch_doc["ops"],
                    "fitness": list(recommended.fitness),
                },
                "pareto": [
                    {
                        "run": run,
                        "patch": [op.to_dict() for op in ind.patch.ops],
                        "fitness": list(ind.fitness),
                    }
                    for run, ind in pool_members
                ],
                "statistics": statistics,
                "diff": diff,
            }
        )
    else:
        sys.stdout.write(diff)
        print(json.dumps(patch_doc, indent=2, sort_keys=True))
    return 0


# -- apply ---------------------------------------------------------------------


def _cmd_apply(args):
    ast = _load_transformation(args.file)
    ops = _parse_patch_document(_load_json(args.patch), args.patch)
    patched, log = apply_patch(ast, ops)
    text = pretty_print(patched)
    if args.json:
        _print_json(
            {"format_version": FORMAT_VERSION, "source": text, "log": log}
        )
    else:
        _emit(text, args.output)
    return 0


# -- refine --------------------------------------------------------------------


def _cmd_refine(args):
    ast = _load_transformation(args.file)
    src = _load_metamodel(args.src)
    tgt = _load_metamodel(args.tgt)
    refined, report = refine(ast, src, tgt)
    text = pretty_print(refined)
    if args.json:
        _print_json(
            {
                "format_version": FORMAT_VERSION,
                "source": text,
                "report": report.to_dict(),
            }
        )
        return 0
    _emit(text, args.output)
    if args.output is not None:
        report_path = args.output + ".report.json"
        _emit(
            json.dumps(
                {"format_version": FORMAT_VERSION, "report": report.to_dict()},
                indent=2,
                sort_keys=True,
            )
            + "\n",
            report_path,
        )
        print(f"{len(report)} refinements -> {args.output} (+ {report_path})")
    return 0


# -- evaluate ------------------------------------------------------------------


def _cmd_evaluate(args):
    raw = _load_json(args.config)
    if not isinstance(raw, dict):
        raise _InputError(f"{args.config}: expected a JSON object")
    known = {
        "fixtures",
        "mutant_counts",
        "runs",
        "search",
        "seed",
        "include_baseline",
        "jobs",
    }
    unknown = set(raw) - known
    if unknown:
        raise _InputError(
            f"{args.config}: unknown keys {sorted(unknown)} (known: {sorted(known)})"
        )
    if args.jobs is not None:
        raw["jobs"] = args.jobs
    try:
        config = EvalConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise _InputError(f"{args.config}: {exc}") from exc
    report = run_evaluation(config)
    import os

    os.makedirs(args.out, exist_ok=True)
    report.write_csv(args.out)
    if args.json:
        _print_json(
            {
                "format_version": FORMAT_VERSION,
                "rows": report.rows,
                "table2": report.table2_rows(),
                "table3": report.table3_rows(),
            }
        )
    else:
        sys.stdout.write(report.table2_csv())
        sys.stdout.write(report.table3_csv())
        print(f"wrote {args.out}/table2.csv and {args.out}/table3.csv")
    return 0


# -- wiring --------------------------------------------------------------------


def _add_mm_flags(parser):
    parser.add_argument("--src", required=True, help="source metamodel file")
    parser.add_argument("--tgt", required=True, help="target metamodel file")


def build_parser():
    parser = _Parser(prog="mtfix", description=__doc__.splitlines()[0])
    commands = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = commands.add_parser("analyze", help="type-check a transformation")
    p.add_argument("file", help="transformation file (.mtl)")
    _add_mm_flags(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_analyze)

    p = commands.add_parser("footprint", help="metamodel elements a program uses")
    p.add_argument("file")
    p.add_argument("--side", choices=("source", "target"))
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_footprint)

    p = commands.add_parser("mutate", help="inject seeded type errors")
    p.add_argument("file")
    _add_mm_flags(p)
    p.add_argument("--count", type=int, default=None, help="number of mutants")
    p.add_argument(
        "--categories",
        nargs="+",
        metavar="CATEGORY",
        help=f"error categories to inject ({', '.join(ERROR_CATEGORIES)})",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="write the mutated program here")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_mutate)

    p = commands.add_parser("repair", help="search for a type-error-fixing patch")
    p.add_argument("file")
    _add_mm_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--generations", type=int, default=500)
    p.add_argument("--population", type=int, default=100)
    p.add_argument("--crossover-rate", type=float, default=0.8)
    p.add_argument("--mutation-rate", type=float, default=0.2)
    p.add_argument("--runs", type=int, default=1, help="independent seeded runs")
    p.add_argument(
        "--baseline",
        choices=("random",),
        help="replace the evolutionary search by random search at equal budget",
    )
    p.add_argument("--jobs", type=int, default=1, help="parallel runs")
    p.add_argument("--out", help="directory for diff, patch and Pareto artifacts")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_repair)

    p = commands.add_parser("apply", help="apply a patch JSON to a program")
    p.add_argument("file")
    p.add_argument("patch", help="patch JSON produced by `mtfix repair`")
    p.add_argument("-o", "--output")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_apply)

    p = commands.add_parser("refine", help="run the four repair heuristics once")
    p.add_argument("file")
    _add_mm_flags(p)
    p.add_argument("-o", "--output")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_refine)

    p = commands.add_parser("evaluate", help="mutation-based evaluation study")
    p.add_argument("--config", required=True, help="evaluation config JSON")
    p.add_argument("--jobs", type=int, default=None, help="override config jobs")
    p.add_argument("--out", default=".", help="directory for table CSVs")
    p.add_argument("--json", action="store_true")
    p.set_defaults(handler=_cmd_evaluate)

    return parser


def dispatch(argv):
    """Run one CLI invocation; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "handler", None) is None:
            raise _UsageError(parser.format_usage())
        return args.handler(args)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except _InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
