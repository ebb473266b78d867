"""Rank and effect-size statistics for comparing repair strategies.

Both tests compare two independent samples of a quality measure (for us:
best error counts across seeded runs).  Samples are tiny, integer-valued,
and full of ties, so the U test switches to exact enumeration whenever the
permutation space is small enough to walk outright.
"""

from __future__ import annotations

import itertools
import math
import statistics
from dataclasses import dataclass
from fractions import Fraction

# Exact p-values are computed when the smaller sample has fewer than this
# many observations and the assignment count stays enumerable.
_EXACT_MIN_N = 8
_EXACT_MAX_ASSIGNMENTS = 20000


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    p_value: float

    def __iter__(self):
        return iter((self.u, self.p_value))


def _average_ranks(values):
    """1-based ranks with ties sharing their average rank, as Fractions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [Fraction(0)] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        shared = Fraction(i + j + 2, 2)
        for k in range(i, j + 1):
            ranks[order[k]] = shared
        i = j + 1
    return ranks


def _u_statistic(ranks, first_indices, n1, n2):
    rank_sum = sum(ranks[i] for i in first_indices)
    u1 = rank_sum - Fraction(n1 * (n1 + 1), 2)
    return min(u1, n1 * n2 - u1)


def mann_whitney_u(xs, ys):
    """Two-sided Mann-Whitney U test.

    U is the smaller of the two rank-sum statistics.  The p-value comes
    from exhaustive enumeration of group assignments for small samples and
    from the tie-corrected normal approximation with continuity correction
    otherwise.  Samples with no variation at all give p = 1.0.
    """
    xs = list(xs)
    ys = list(ys)
    if not xs or not ys:
        raise ValueError("both samples must be nonempty")
    n1, n2 = len(xs), len(ys)
    pooled = xs + ys
    ranks = _average_ranks(pooled)
    observed = _u_statistic(ranks, range(n1), n1, n2)

    total = math.comb(n1 + n2, n1)
    if min(n1, n2) < _EXACT_MIN_N and total <= _EXACT_MAX_ASSIGNMENTS:
        hits = sum(
            1
            for combo in itertools.combinations(range(n1 + n2), n1)
            if _u_statistic(ranks, combo, n1, n2) <= observed
        )
        return MannWhitneyResult(float(observed), float(Fraction(hits, total)))

    mean_u = n1 * n2 / 2.0
    n = n1 + n2
    tie_term = 0
    for _, group in itertools.groupby(sorted(pooled)):
        t = sum(1 for _ in group)
        tie_term += t ** 3 - t
    variance = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if variance <= 0:
        return MannWhitneyResult(float(observed), 1.0)
    z = max(0.0, mean_u - float(observed) - 0.5) / math.sqrt(variance)
    return MannWhitneyResult(float(observed), math.erfc(z / math.sqrt(2)))


def cohens_d(xs, ys):
    """Effect size (mean(ys) - mean(xs)) / pooled stdev, or None.

    Pooled variance uses n-1 denominators.  Zero pooled variance has no
    defined effect size; callers render the None as "-".
    """
    xs = list(xs)
    ys = list(ys)
    n1, n2 = len(xs), len(ys)
    if n1 < 2 or n2 < 2:
        raise ValueError("both samples need at least two observations")
    v1 = statistics.variance(xs)
    v2 = statistics.variance(ys)
    pooled = ((n1 - 1) * v1 + (n2 - 1) * v2) / (n1 + n2 - 2)
    if pooled == 0:
        return None
    return (statistics.fmean(ys) - statistics.fmean(xs)) / math.sqrt(pooled)
