import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import CORPUS, unit_of
from hmxforge.encoding import random_test
from hmxforge.lang import CoverageTarget
from hmxforge.runtime import execute_test
from hmxforge.search import (
    Archive,
    SearchConfig,
    TargetSpace,
    active_targets,
    coverage_of,
    crowding_distance,
    evolve,
    non_dominated_fronts,
    preference_sort,
    update_archive,
)


def _dominates(a, b):
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def _brute_fronts(F):
    """Peel off non-dominated sets by pairwise comparison."""
    left, fronts = list(range(len(F))), []
    while left:
        front = [i for i in left if not any(_dominates(F[j], F[i]) for j in left if j != i)]
        fronts.append(front)
        left = [i for i in left if i not in front]
    return fronts


def test_preference_sort_worked_case():
    F = np.array([(0.2, 0.9), (0.9, 0.2), (0.5, 0.5), (1.0, 1.0)])
    fronts = preference_sort(F)
    assert fronts == [[0, 1], [2], [3]]
    rest = [2, 3]
    assert [[rest[i] for i in f] for f in _brute_fronts(F[rest].tolist())] == fronts[1:]


def test_preference_single_target_and_ties():
    F = np.array([[0.4], [0.1], [0.1], [0.9]])
    assert preference_sort(F)[0] == [1]
    assert preference_sort(F, np.array([5, 7, 3, 1]))[0] == [2]


def test_dominating_individual_leads():
    F = np.array([(0.5, 0.5, 0.5), (0.1, 0.1, 0.1), (0.7, 0.2, 0.9)])
    assert preference_sort(F)[0] == [1]


@given(arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 4)),
              elements=st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0])))
@settings(max_examples=200)
def test_fronts_match_brute_force(F):
    assert non_dominated_fronts(F) == _brute_fronts(F.tolist())


def test_crowding_boundaries_infinite():
    F = np.array([[0.0, 1.0], [0.5, 0.5], [1.0, 0.0], [0.25, 0.75]])
    d = crowding_distance(F)
    assert np.isinf(d[0]) and np.isinf(d[2])
    assert np.isfinite(d[1]) and d[1] > 0


def _controller(u, t):
    cdg = u.cdgs[t.method]
    ctrl = cdg.parent[t.branch_id] if t.kind == "branch" else cdg.line_parent[t.line]
    return None if ctrl is None else CoverageTarget("branch", t.method, ctrl[0], ctrl[1])


def test_nothing_covered_gives_roots(fraction):
    act = active_targets(set(), fraction.cdgs, fraction.targets)
    assert act == {t for t in fraction.targets if _controller(fraction, t) is None}
    assert active_targets(set(fraction.targets), fraction.cdgs, fraction.targets) == set()


def test_nested_branch_activates():
    u = unit_of("fraction")
    ctor = "Fraction|<init>(int, int)Fraction"
    inner = CoverageTarget("branch", ctor, 1, True)
    assert inner not in active_targets(set(), u.cdgs, u.targets)
    outer_false = CoverageTarget("branch", ctor, 0, False)
    assert inner in active_targets({outer_false}, u.cdgs, u.targets)


@pytest.mark.parametrize("name", CORPUS)
def test_active_targets_follow_cdg_edges(name):
    u = unit_of(name)
    rng = random.Random(0)
    for _ in range(30):
        covered = set()
        for _ in range(rng.randint(0, 4)):
            tr = execute_test(random_test(u, rng, 10), u)
            covered |= {t for t in u.targets if tr.covers(t)}
        act = active_targets(covered, u.cdgs, u.targets)
        assert act <= set(u.targets) - covered
        # reachability oracle: an uncovered target is active iff its controller is entry or covered
        expected = {t for t in u.targets if t not in covered
                    and (_controller(u, t) is None or _controller(u, t) in covered)}
        assert act == expected


def test_update_archive_rules(fraction):
    rng = random.Random(1)
    space = TargetSpace(fraction)
    short = random_test(fraction, rng, 1)
    tr_short = execute_test(short, fraction)
    archive = update_archive(Archive(), short, tr_short, space.targets)
    first = dict(archive.entries)
    assert first and all(e[0] == short for e in first.values())
    assert all(tr_short.covers(t) for t in first)

    longer = type(short)(short.statements * 3)
    update_archive(archive, longer, execute_test(longer, fraction), space.targets)
    assert all(archive.entries[t][0] == short for t in first)

    same_len = random_test(fraction, random.Random(99), 1)
    update_archive(archive, same_len, execute_test(same_len, fraction), space.targets)
    assert all(archive.entries[t][0] == short for t in first)


def test_archive_replaced_by_strictly_shorter(fraction):
    space = TargetSpace(fraction)
    base = random_test(fraction, random.Random(4), 1)
    long_t = type(base)(base.statements * 2)
    archive = update_archive(Archive(), long_t, execute_test(long_t, fraction), space.targets)
    update_archive(archive, base, execute_test(base, fraction), space.targets)
    assert all(e[0] == base for e in archive.entries.values())


def test_straight_line_subject_done_in_generation_zero(counter):
    res = evolve(counter, SearchConfig(budget_evals=1000, seed=3))
    assert res.generations == 0
    assert res.series[0][1:] == (1.0, 1.0)
    assert res.covered_branches == 1.0 and res.covered_lines == 1.0


@pytest.mark.parametrize("op", ["spx", "hmx"])
def test_seeded_run_is_reproducible(op):
    u = unit_of("triangle")
    cfg = SearchConfig(budget_evals=800, seed=5, operator=op, population_size=20)
    assert evolve(u, cfg).to_json() == evolve(u, cfg).to_json()


def test_run_sanity(fraction):
    res = evolve(fraction, SearchConfig(budget_evals=1500, seed=2, operator="hmx"))
    assert res.self_consistent
    assert res.evaluations_used <= 1500
    covs = [s[1] for s in res.series]
    assert covs == sorted(covs)
    assert coverage_of(res.suite, fraction) == (res.covered_branches, res.covered_lines)
    assert len(set(res.suite)) == len(res.suite)


def test_generation_callback(fraction):
    seen = []
    evolve(fraction, SearchConfig(budget_evals=300, seed=1, population_size=10),
           on_generation=lambda g, b, l: seen.append(g))
    assert seen == list(range(len(seen))) and seen


@pytest.mark.parametrize("kw", [{"population_size": 1}, {"budget_evals": 0}, {"budget_secs": 0.0},
                                {"operator": "uniform"}, {"max_test_length": 0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SearchConfig(**kw)


def test_time_budget_stops():
    res = evolve(unit_of("stemmer"), SearchConfig(budget_secs=0.5, seed=0))
    assert res.evaluations_used > 0


def test_fitness_vector_aligned(fraction):
    space = TargetSpace(fraction)
    tr = execute_test(random_test(fraction, random.Random(0), 8), fraction)
    f = space.fitness(tr)
    assert f.shape == (len(space.targets),)
    assert [bool(x == 0) for x in f] == [tr.covers(t) for t in space.targets]
    for i, p in enumerate(space.parent):
        if p is not None:
            assert space.targets[p].kind == "branch"
    assert list(itertools.compress(space.targets, space.is_branch)) == fraction.branch_targets
