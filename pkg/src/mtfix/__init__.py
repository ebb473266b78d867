"""mtfix: search-based repair of type errors in model transformations.

The pipeline, end to end:

    parse -> analyze -> (NSGA-II over edit sequences) -> apply patch -> refine

`analyze` type-checks a transformation against its source and target
metamodels and reports seven categories of error.  The search evolves
patches (sequences of edit operations) against three objectives: remaining
errors, patch length, and syntactic distance from the faulty program.  The
refinement step then rewrites the surviving program with four deterministic
heuristics that trade the search's "any type-correct value" choices for
more specific ones.

Most callers want `load_problem` / `parse_transformation`, `analyze`,
`run_nsga2`, `apply_patch` and `refine`; the rest is exposed for the
evaluation harness and the CLI.
"""

from .analyzer import ERROR_CATEGORIES, AnalysisError, InferredType, analyze
from .edits import EDIT_KINDS, EditOperation, Patch, apply_edit, apply_patch
from .footprint import extract_footprint, footprint_delta, footprints
from .harness import (
    EvalConfig,
    EvaluationReport,
    Mutant,
    build_faulty,
    generate_mutants,
    merge_mutants,
    run_evaluation,
)
from .metamodel import Metamodel, MetamodelError, load_metamodel
from .mtl import parse_transformation
from .mtl.parser import MtlSyntaxError
from .mtl.printer import pretty_print
from .refine import RefinementReport, refine
from .search import (
    FitnessVector,
    Individual,
    RepairProblem,
    SearchConfig,
    run_nsga2,
    run_random,
    select_recommended,
)
from .stats import cohens_d, mann_whitney_u

__version__ = "0.1.0"

__all__ = [
    "ERROR_CATEGORIES",
    "EDIT_KINDS",
    "AnalysisError",
    "EditOperation",
    "EvalConfig",
    "EvaluationReport",
    "FitnessVector",
    "Individual",
    "InferredType",
    "Metamodel",
    "MetamodelError",
    "MtlSyntaxError",
    "Mutant",
    "Patch",
    "RefinementReport",
    "RepairProblem",
    "SearchConfig",
    "analyze",
    "apply_edit",
    "apply_patch",
    "build_faulty",
    "cohens_d",
    "extract_footprint",
    "footprint_delta",
    "footprints",
    "generate_mutants",
    "load_metamodel",
    "mann_whitney_u",
    "merge_mutants",
    "parse_transformation",
    "pretty_print",
    "refine",
    "run_evaluation",
    "run_nsga2",
    "run_random",
    "select_recommended",
    "__version__",
]
