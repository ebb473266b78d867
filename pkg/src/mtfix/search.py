"""Exploration phase: NSGA-II over edit-operation sequences.

Individuals are patches; the three minimized objectives are the number of
remaining type errors, the patch length, and the footprint change against
the faulty input.  A plain random sampler with the same evaluation budget
serves as the sanity baseline.
"""

import math
import random
from dataclasses import dataclass, field
from typing import Optional

from .analyzer import analyze
from .edits import Patch, apply_patch, patch_key, resample_new_value, sample_edit
from .footprint import footprints

__all__ = [
    "FitnessVector",
    "Individual",
    "SearchConfig",
    "RepairProblem",
    "Nsga2Result",
    "evaluate",
    "dominates",
    "fast_nondominated_sort",
    "crowding_distance",
    "crossover",
    "mutate",
    "run_nsga2",
    "run_random",
    "select_recommended",
]


@dataclass(frozen=True)
class FitnessVector:
    f1: int  # remaining analyzer errors
    f2: int  # patch length
    f3: int  # footprint delta vs the faulty input

    def __iter__(self):
        yield self.f1
        yield self.f2
        yield self.f3


@dataclass
class Individual:
    patch: Patch
    fitness: FitnessVector
    rank: int = 0
    crowding: float = 0.0

    def key(self):
        return patch_key(self.patch)


@dataclass
class SearchConfig:
    population_size: int = 100
    generations: int = 500
    crossover_rate: float = 0.8
    mutation_rate: float = 0.2
    max_initial_patch_length: Optional[int] = None
    seed: int = 0
    runs: int = 1

    def __post_init__(self):
        if self.population_size < 2 or self.population_size % 2:
            raise ValueError("population_size must be an even number >= 2")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        for name in ("crossover_rate", "mutation_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")


class RepairProblem:
    """A faulty transformation plus everything needed to judge candidates.

    `original` is the ground truth when known (evaluation harness); the
    objectives never look at it, since a repair tool only sees the faulty
    input.  Fitness values are cached per patch serialization.
    """

    def __init__(self, faulty, src, tgt, original=None):
        self.faulty = faulty
        self.src = src
        self.tgt = tgt
        self.original = original
        self.errors = analyze(faulty, src, tgt)
        self.base_footprints = footprints(faulty)
        self.cache = {}

    def max_initial_length(self, config):
        return config.max_initial_patch_length or max(3, len(self.errors))


def evaluate(patch, problem):
    """Fitness of a patch: (errors after applying, length, footprint delta)."""
    key = patch_key(patch)
    cached = problem.cache.get(key)
    if cached is not None:
        return cached
    candidate, _ = apply_patch(problem.faulty, patch)
    errors = analyze(candidate, problem.src, problem.tgt)
    src_fp, tgt_fp = footprints(candidate)
    base_src, base_tgt = problem.base_footprints
    fitness = FitnessVector(
        f1=len(errors),
        f2=len(patch.ops),
        f3=len(src_fp ^ base_src) + len(tgt_fp ^ base_tgt),
    )
    problem.cache[key] = fitness
    return fitness


def _fit(item):
    fitness = getattr(item, "fitness", item)
    return tuple(fitness)


def dominates(a, b):
    """Pareto dominance for minimization: no worse everywhere, better once."""
    at, bt = tuple(a), tuple(b)
    return all(x <= y for x, y in zip(at, bt)) and at != bt


def fast_nondominated_sort(population):
    """Partition into dominance fronts (Deb's algorithm); front 0 first."""
    items = list(population)
    fits = [_fit(item) for item in items]
    n = len(items)
    dominated_by = [[] for _ in range(n)]
    counts = [0] * n
    current = []
    for p in range(n):
        for q in range(n):
            if p == q:
                continue
            if dominates(fits[p], fits[q]):
                dominated_by[p].append(q)
            elif dominates(fits[q], fits[p]):
                counts[p] += 1
        if counts[p] == 0:
            current.append(p)
    fronts = []
    while current:
        fronts.append(current)
        nxt = []
        for p in current:
            for q in dominated_by[p]:
                counts[q] -= 1
                if counts[q] == 0:
                    nxt.append(q)
        current = sorted(nxt)
    return [[items[i] for i in front] for front in fronts]


def crowding_distance(front):
    """Crowding distances for one front, aligned with the input order."""
    items = list(front)
    n = len(items)
    if n == 0:
        return []
    fits = [_fit(item) for item in items]
    dist = [0.0] * n
    for k in range(len(fits[0])):
        order = sorted(range(n), key=lambda i: fits[i][k])
        lo = fits[order[0]][k]
        hi = fits[order[-1]][k]
        if hi == lo:
            continue
        dist[order[0]] = math.inf
        dist[order[-1]] = math.inf
        for pos in range(1, n - 1):
            i = order[pos]
            if dist[i] != math.inf:
                dist[i] += (fits[order[pos + 1]][k] - fits[order[pos - 1]][k]) / (hi - lo)
    return dist


def crossover(a, b, rng):
    """Single-point crossover; empty parents pass through unchanged.

    Each parent picks its own cut, uniform over all len+1 positions, and
    the right parts are swapped.  Children may therefore shrink to empty
    or grow up to the combined length; the pair conserves the op multiset.
    """
    if not a.ops or not b.ops:
        return a, b
    cut_a = rng.randint(0, len(a.ops))
    cut_b = rng.randint(0, len(b.ops))
    child1 = Patch(a.ops[:cut_a] + b.ops[cut_b:])
    child2 = Patch(b.ops[:cut_b] + a.ops[cut_a:])
    return child1, child2


# How often a mutated position takes a freshly sampled operation instead of
# a parameter redraw.  Fresh samples drive discovery of new repair sites;
# redraws only fine-tune values, so the mix leans toward discovery.
_FRESH_OP_RATE = 0.75


def mutate(patch, rng, problem):
    """Rewrite >= 1 positions: fresh operation or redrawn new_value."""
    ops = list(patch.ops)
    if not ops:
        return patch
    selected = [i for i in range(len(ops)) if rng.random() < 1.0 / len(ops)]
    if not selected:
        selected = [rng.randrange(len(ops))]
    for i in selected:
        if rng.random() < _FRESH_OP_RATE:
            ops[i] = sample_edit(
                rng, problem.faulty, problem.errors, problem.src, problem.tgt
            )
        else:
            redrawn = resample_new_value(
                rng, ops[i], problem.faulty, problem.src, problem.tgt
            )
            if redrawn is None:
                redrawn = sample_edit(
                    rng, problem.faulty, problem.errors, problem.src, problem.tgt
                )
            ops[i] = redrawn
    return Patch(tuple(ops))


def _initial_patch(rng, problem, max_len):
    length = rng.randint(1, max_len)
    return Patch(
        tuple(
            sample_edit(rng, problem.faulty, problem.errors, problem.src, problem.tgt)
            for _ in range(length)
        )
    )


def _recommend_key(individual):
    f = individual.fitness
    return (f.f1, f.f2, f.f3, individual.key())


def _tournament(rng, population):
    a = population[rng.randrange(len(population))]
    b = population[rng.randrange(len(population))]
    if a.rank != b.rank:
        return a if a.rank < b.rank else b
    if a.crowding != b.crowding:
        return a if a.crowding > b.crowding else b
    return a


def _assign_front_metadata(fronts):
    for rank, front in enumerate(fronts):
        distances = crowding_distance(front)
        for individual, distance in zip(front, distances):
            individual.rank = rank
            individual.crowding = distance


def _truncate(fronts, size):
    """Fill the next parent set front by front, crowding as tie-break.

    Within the fill order, genotypes already selected are passed over
    while distinct ones remain, then duplicates pad the remainder.  Small
    populations otherwise collapse into copies of one dominant individual
    within a few generations (identical vectors never dominate each other,
    so clones monopolize front 1 and every variant dies in front 2),
    which reduces the algorithm to single-point hill climbing.
    """
    ranked = []
    for front in fronts:
        distances = crowding_distance(front)
        order = sorted(range(len(front)), key=lambda i: (-distances[i], i))
        ranked.extend(front[i] for i in order)
    selected = []
    seen = set()
    for individual in ranked:
        if len(selected) >= size:
            break
        key = individual.key()
        if key in seen:
            continue
        seen.add(key)
        selected.append(individual)
    if len(selected) < size:
        chosen = set(map(id, selected))
        for individual in ranked:
            if len(selected) >= size:
                break
            if id(individual) not in chosen:
                chosen.add(id(individual))
                selected.append(individual)
    return selected


def _breed(rng, population, count, config, problem):
    children = []
    while len(children) < count:
        parent1 = _tournament(rng, population)
        parent2 = _tournament(rng, population)
        if rng.random() < config.crossover_rate:
            child1, child2 = crossover(parent1.patch, parent2.patch, rng)
        else:
            child1, child2 = parent1.patch, parent2.patch
        for child in (child1, child2):
            if len(children) >= count:
                break
            if rng.random() < config.mutation_rate:
                child = mutate(child, rng, problem)
            children.append(Individual(child, evaluate(child, problem)))
    return children


def _dedupe_front(front):
    seen = set()
    unique = []
    for individual in front:
        key = individual.key()
        if key not in seen:
            seen.add(key)
            unique.append(individual)
    unique.sort(key=_recommend_key)
    return unique


@dataclass
class Nsga2Result:
    pareto: list
    statistics: dict

    def __iter__(self):
        return iter(self.pareto)


def run_nsga2(config, problem):
    """One seeded NSGA-II run; returns the final Pareto set plus statistics.

    The population holds N/2 parents; each generation breeds N/2 offspring
    by binary tournament, single-point crossover and operation mutation,
    then truncates the merged 2x pool by dominance fronts with crowding
    tie-breaks.  The `ite` statistic records the first generation at which
    any individual reached f1 = 0 (0 when the initial population already
    contains one, None when never observed).
    """
    rng = random.Random(config.seed)
    half = config.population_size // 2
    max_len = problem.max_initial_length(config)

    population = []
    for _ in range(half):
        patch = _initial_patch(rng, problem, max_len)
        population.append(Individual(patch, evaluate(patch, problem)))
    _assign_front_metadata(fast_nondominated_sort(population))

    ite = 0 if any(ind.fitness.f1 == 0 for ind in population) else None
    per_generation = []
    final_pool = population

    for generation in range(1, config.generations + 1):
        offspring = _breed(rng, population, half, config, problem)
        combined = population + offspring
        if ite is None and any(ind.fitness.f1 == 0 for ind in offspring):
            ite = generation
        fronts = fast_nondominated_sort(combined)
        _assign_front_metadata(fronts)
        population = _truncate(fronts, half)
        per_generation.append(
            {
                "generation": generation,
                "best_f1": min(ind.fitness.f1 for ind in population),
                "front_size": len(fronts[0]),
            }
        )
        final_pool = combined

    pareto = _dedupe_front(fast_nondominated_sort(final_pool)[0])
    statistics = {
        "ite": ite,
        "generations": config.generations,
        "explored": config.generations * config.population_size,
        "per_generation": per_generation,
    }
    return Nsga2Result(pareto=pareto, statistics=statistics)


def run_random(config, problem):
    """Random search at the NSGA-II budget; best individual by (f1, f2)."""
    rng = random.Random(config.seed)
    budget = max(config.population_size * config.generations, 1)
    max_len = problem.max_initial_length(config)
    best = None
    for _ in range(budget):
        patch = _initial_patch(rng, problem, max_len)
        individual = Individual(patch, evaluate(patch, problem))
        if best is None or (
            (individual.fitness.f1, individual.fitness.f2)
            < (best.fitness.f1, best.fitness.f2)
        ):
            best = individual
    return best


def select_recommended(pareto):
    """The patch to present: min (f1, f2, f3), then serialization order."""
    items = list(getattr(pareto, "pareto", pareto))
    if not items:
        raise ValueError("empty Pareto set")
    return min(items, key=_recommend_key)
