"""Bundled metamodels and transformations used by demos, tests and the harness."""

from dataclasses import dataclass
from importlib import resources

__all__ = [
    "FixtureProblem",
    "BUNDLED_PROBLEMS",
    "fixture_text",
    "fixture_names",
    "load_problem",
    "worked_example_patch",
]


def fixture_text(filename):
    """Return the raw text of a bundled fixture file."""
    return resources.files(__package__).joinpath(filename).read_text(encoding="utf-8")


def fixture_names():
    """All bundled fixture filenames, sorted."""
    names = []
    for entry in resources.files(__package__).iterdir():
        if entry.name.endswith((".mm", ".mtl")):
            names.append(entry.name)
    return sorted(names)


@dataclass(frozen=True)
class FixtureProblem:
    """A ground-truth transformation plus its two metamodels."""

    name: str
    transformation: str
    source_mm: str
    target_mm: str

    def load(self):
        from ..metamodel import load_metamodel
        from ..mtl import parse_transformation

        ast = parse_transformation(fixture_text(self.transformation))
        src = load_metamodel(fixture_text(self.source_mm))
        tgt = load_metamodel(fixture_text(self.target_mm))
        return ast, src, tgt


BUNDLED_PROBLEMS = {
    "uml2bpmn": FixtureProblem(
        name="uml2bpmn",
        transformation="uml2bpmn_original.mtl",
        source_mm="uml_ad.mm",
        target_mm="intalio_bpmn.mm",
    ),
    "class2table": FixtureProblem(
        name="class2table",
        transformation="class2table.mtl",
        source_mm="class_model.mm",
        target_mm="rel_model.mm",
    ),
    "pnml2pn": FixtureProblem(
        name="pnml2pn",
        transformation="pnml2pn.mtl",
        source_mm="pnml.mm",
        target_mm="pn.mm",
    ),
}


def load_problem(name):
    """Load a bundled problem by name as (ast, source_mm, target_mm)."""
    try:
        problem = BUNDLED_PROBLEMS[name]
    except KeyError:
        known = ", ".join(sorted(BUNDLED_PROBLEMS))
        raise KeyError(f"unknown bundled problem {name!r} (known: {known})") from None
    return problem.load()


def worked_example_patch():
    """The two-step patch that turns the faulty excerpt into its patched form.

    Returned in the on-disk patch format so callers can feed it straight to
    the patch loader.
    """
    return {
        "format_version": 1,
        "ops": [
            {
                "kind": "TargetOfBinding",
                "rule": "activity2diagram",
                "locator": "out[0].binding[0].lhs",
                "old": "artifacts",
                "new": "documentation",
            },
            {
                "kind": "TypeOfSourcePatternElement",
                "rule": "activitypartition2pool",
                "locator": "in",
                "old": "Comment",
                "new": "Activity",
            },
        ],
    }
