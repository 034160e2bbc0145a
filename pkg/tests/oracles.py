"""Slow, obviously-correct reference implementations used as test oracles."""

import itertools
from fractions import Fraction


def ranks(values):
    """Midranks by direct counting: 1 + #smaller + (#equal - 1)/2."""
    return [Fraction(2 * sum(w < v for w in values) + sum(w == v for w in values) + 1, 2) for v in values]


def exact_rank_sum_p(xs, ys):
    """Two-sided p of the rank sum of xs over every way to split the pooled ranks."""
    pooled = list(xs) + list(ys)
    r = ranks(pooled)
    n, total = len(xs), len(pooled)
    mu = Fraction(n * (total + 1), 2)
    w = sum(r[:n])
    extreme = count = 0
    for idx in itertools.combinations(range(total), n):
        count += 1
        if abs(sum(r[i] for i in idx) - mu) >= abs(w - mu):
            extreme += 1
    return min(1.0, float(Fraction(extreme, count)))


def a12_pairs(xs, ys):
    wins = sum(1 for x in xs for y in ys if x > y)
    ties = sum(1 for x in xs for y in ys if x == y)
    return (wins + 0.5 * ties) / (len(xs) * len(ys))


def observation_diff_kills(baseline, mutant_runs):
    """Indices of mutants whose rendered observations differ anywhere from the baseline.

    ``baseline`` is a list of observation lists (one per test); ``mutant_runs``
    is a list of such lists, one per mutant.
    """
    return {k for k, runs in enumerate(mutant_runs)
            if any(a != b for base, run in zip(baseline, runs) for a, b in itertools.zip_longest(base, run))}
