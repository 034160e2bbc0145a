"""Many-objective search with dynamically activated targets and an archive."""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from hmxforge.encoding import TestCase, random_test, render
from hmxforge.lang.cdg import CoverageTarget
from hmxforge.lang.unit import TypedSubjectUnit
from hmxforge.operators import OperatorConfig, crossover, mutate, truncate
from hmxforge.runtime import ExecutionTrace, SandboxLimits, compiled, execute_test, target_fitness

OPERATORS = ("spx", "hmx")


@dataclass(frozen=True)
class SearchConfig:
    """Search parameters.

    ``budget_evals`` takes precedence over ``budget_secs``; only the former
    gives reproducible runs.
    """

    population_size: int = 50
    budget_evals: Optional[int] = None
    budget_secs: float = 120.0
    operator: str = "spx"
    operator_config: OperatorConfig = OperatorConfig()
    seed: int = 0
    max_test_length: int = 40
    initial_test_length: int = 10
    limits: SandboxLimits = SandboxLimits()

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if self.budget_evals is not None and self.budget_evals <= 0:
            raise ValueError("budget_evals must be positive")
        if self.budget_evals is None and not self.budget_secs > 0:
            raise ValueError("budget_secs must be positive")
        if self.operator not in OPERATORS:
            raise ValueError(f"operator must be one of {OPERATORS}, got {self.operator!r}")
        if self.max_test_length < 1 or self.initial_test_length < 1:
            raise ValueError("test lengths must be at least 1")


# ------------------------------------------------------------------ targets


class TargetSpace:
    """Targets of a subject with their control-dependency parents, by index."""

    def __init__(self, unit: TypedSubjectUnit) -> None:
        self.unit = unit
        self.targets: list = list(unit.targets)
        self.index = {t: i for i, t in enumerate(self.targets)}
        self.parent: list = [self._parent(t) for t in self.targets]
        self.is_branch = np.array([t.kind == "branch" for t in self.targets], dtype=bool)

    def _parent(self, t: CoverageTarget) -> Optional[int]:
        cdg = self.unit.cdgs[t.method]
        ctrl = cdg.parent[t.branch_id] if t.kind == "branch" else cdg.line_parent[t.line]
        if ctrl is None:
            return None
        return self.index[CoverageTarget("branch", t.method, ctrl[0], ctrl[1])]

    def fitness(self, trace: ExecutionTrace) -> np.ndarray:
        cdgs = self.unit.cdgs
        return np.array([target_fitness(t, trace, cdgs[t.method]) for t in self.targets])


def active_targets(covered: set, cdg_by_method: dict, all_targets: Iterable) -> set:
    """Uncovered targets whose controlling branch outcome is covered (or the entry)."""
    out = set()
    for t in all_targets:
        if t in covered:
            continue
        cdg = cdg_by_method[t.method]
        ctrl = cdg.parent[t.branch_id] if t.kind == "branch" else cdg.line_parent[t.line]
        if ctrl is None or CoverageTarget("branch", t.method, ctrl[0], ctrl[1]) in covered:
            out.add(t)
    return out


# ------------------------------------------------------------------ ranking


def non_dominated_fronts(F: np.ndarray) -> list:
    """Fronts (lists of row indices) of minimisation vectors ``F``."""
    n = F.shape[0]
    if n == 0:
        return []
    le = (F[:, None, :] <= F[None, :, :]).all(axis=2)
    lt = (F[:, None, :] < F[None, :, :]).any(axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    count = dom.sum(axis=0)
    remaining = np.ones(n, dtype=bool)
    fronts = []
    while remaining.any():
        front = np.flatnonzero(remaining & (count == 0))
        fronts.append(front.tolist())
        remaining[front] = False
        count = count - dom[front].sum(axis=0)
    return fronts


def crowding_distance(F: np.ndarray) -> np.ndarray:
    n, m = F.shape
    d = np.zeros(n)
    if n <= 2:
        d[:] = np.inf
        return d
    for k in range(m):
        order = np.argsort(F[:, k], kind="stable")
        col = F[order, k]
        d[order[0]] = d[order[-1]] = np.inf
        span = col[-1] - col[0]
        if span > 0:
            d[order[1:-1]] += (col[2:] - col[:-2]) / span
    return d


def preference_sort(fitness: np.ndarray, lengths: Optional[np.ndarray] = None) -> list:
    """Rank individuals on the active-target columns of ``fitness``.

    Front 0 holds, for each column, the individual with the lowest value
    (ties go to the shorter test, then the lower index). The rest are ranked
    by non-dominated sorting.
    """
    n = fitness.shape[0]
    if lengths is None:
        lengths = np.zeros(n)
    if fitness.shape[1] == 0:
        return [list(range(n))] if n else []
    idx = np.arange(n)
    best = set()
    for k in range(fitness.shape[1]):
        order = np.lexsort((idx, lengths, fitness[:, k]))
        best.add(int(order[0]))
    first = sorted(best)
    rest = np.array([i for i in range(n) if i not in best], dtype=int)
    fronts = [first]
    if rest.size:
        fronts.extend([rest[f].tolist() for f in non_dominated_fronts(fitness[rest])])
    return fronts


# ------------------------------------------------------------------ archive


@dataclass
class Archive:
    """Shortest known covering test per target."""

    entries: dict = field(default_factory=dict)

    def covered(self) -> set:
        return set(self.entries)

    def suite(self, order: Iterable) -> list:
        seen, out = set(), []
        for t in order:
            if t in self.entries:
                test = self.entries[t][0]
                if test not in seen:
                    seen.add(test)
                    out.append(test)
        return out


def update_archive(archive: Archive, test: TestCase, trace: ExecutionTrace,
                   targets: list, fitness: Optional[np.ndarray] = None) -> Archive:
    """Store ``test`` for each target it covers, unless a test of equal or shorter length is there.

    ``fitness``, aligned with ``targets``, saves recomputing coverage from the trace.
    """
    n = len(test)
    for k, t in enumerate(targets):
        hit = fitness[k] == 0.0 if fitness is not None else trace.covers(t)
        if not hit:
            continue
        cur = archive.entries.get(t)
        if cur is None or n < cur[1]:
            archive.entries[t] = (test, n)
    return archive


# ------------------------------------------------------------------- result


@dataclass
class SearchResult:
    subject: str
    operator: str
    seed: int
    suite: list
    covered_branches: float
    covered_lines: float
    evaluations_used: int
    generations: int
    series: list  # (evaluations, branch coverage, line coverage) per generation
    covered_targets: list
    self_consistent: bool

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "operator": self.operator,
            "seed": self.seed,
            "covered_branches": self.covered_branches,
            "covered_lines": self.covered_lines,
            "evaluations_used": self.evaluations_used,
            "generations": self.generations,
            "series": [list(s) for s in self.series],
            "covered_targets": [str(t) for t in self.covered_targets],
            "self_consistent": self.self_consistent,
            "suite": [render(t) for t in self.suite],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def _fraction(covered: set, targets: list, kind: str) -> float:
    pool = [t for t in targets if t.kind == kind]
    if not pool:
        return 1.0
    return sum(1 for t in pool if t in covered) / len(pool)


def coverage_of(suite: list, unit: TypedSubjectUnit, limits: SandboxLimits = SandboxLimits()) -> tuple:
    """(branch, line) coverage fractions obtained by re-executing ``suite``."""
    covered = set()
    for test in suite:
        tr = execute_test(test, unit, limits)
        covered.update(t for t in unit.targets if t not in covered and tr.covers(t))
    return _fraction(covered, unit.targets, "branch"), _fraction(covered, unit.targets, "line")


def check_archive(archive: Archive, unit: TypedSubjectUnit, limits: SandboxLimits) -> bool:
    """Re-execute every archived test and confirm it covers its target."""
    cache: dict = {}
    for t, (test, _) in archive.entries.items():
        tr = cache.get(test)
        if tr is None:
            tr = cache[test] = execute_test(test, unit, limits)
        if not tr.covers(t):
            return False
    return True


# ------------------------------------------------------------------- evolve


@dataclass
class _Individual:
    test: TestCase
    fitness: np.ndarray
    rank: int = 0
    crowding: float = 0.0


def evolve(unit: TypedSubjectUnit, cfg: SearchConfig,
           on_generation: Optional[Callable[[int, float, float], None]] = None) -> SearchResult:
    """Evolve tests for ``unit`` until the budget is spent or every target is covered."""
    rng = random.Random(cfg.seed)
    space = TargetSpace(unit)
    targets = space.targets
    program = compiled(unit)
    archive = Archive()
    evals = 0
    deadline = None if cfg.budget_evals is not None else time.monotonic() + cfg.budget_secs

    def budget_left() -> bool:
        if cfg.budget_evals is not None:
            return evals < cfg.budget_evals
        return time.monotonic() < deadline

    def evaluate(test: TestCase, known: Optional[_Individual] = None) -> _Individual:
        nonlocal evals
        evals += 1
        if known is not None and known.test == test:
            # execution is deterministic, so an unchanged child scores like its parent
            return _Individual(test, known.fitness)
        tr = execute_test(test, unit, cfg.limits, program)
        f = space.fitness(tr)
        update_archive(archive, test, tr, targets, f)
        return _Individual(test, f)

    init_len = min(cfg.max_test_length, cfg.initial_test_length)
    population = []
    while len(population) < cfg.population_size and budget_left():
        population.append(evaluate(random_test(unit, rng, init_len)))

    series = []
    generation = 0

    def record() -> None:
        cov = archive.covered()
        b, l = _fraction(cov, targets, "branch"), _fraction(cov, targets, "line")
        series.append((evals, b, l))
        if on_generation is not None:
            on_generation(generation, b, l)

    def rank(pop: list) -> list:
        act = sorted(space.index[t] for t in active_targets(archive.covered(), unit.cdgs, targets))
        if not pop:
            return []
        F = np.array([ind.fitness[act] for ind in pop]) if act else np.zeros((len(pop), 0))
        lengths = np.array([len(ind.test) for ind in pop])
        fronts = preference_sort(F, lengths)
        for r, front in enumerate(fronts):
            cd = crowding_distance(F[front]) if act else np.zeros(len(front))
            for i, c in zip(front, cd):
                pop[i].rank, pop[i].crowding = r, float(c)
        return fronts

    rank(population)
    record()
    ocfg = cfg.operator_config

    def tournament() -> _Individual:
        a, b = rng.choice(population), rng.choice(population)
        if (b.rank, -b.crowding) < (a.rank, -a.crowding):
            return b
        return a

    while budget_left() and len(archive.entries) < len(targets) and population:
        generation += 1
        offspring: list = []
        while len(offspring) < cfg.population_size and budget_left():
            p1, p2 = tournament(), tournament()
            if rng.random() < ocfg.crossover_rate:
                o1, o2 = crossover(cfg.operator, p1.test, p2.test, rng, ocfg, unit)
            else:
                o1, o2 = p1.test, p2.test
            for o, parent in ((o1, p1), (o2, p2)):
                if not budget_left():
                    break
                child = truncate(mutate(o, unit, rng), cfg.max_test_length)
                offspring.append(evaluate(child, parent))
        union = population + offspring
        fronts = rank(union)
        nxt: list = []
        for front in fronts:
            if len(nxt) + len(front) <= cfg.population_size:
                nxt.extend(union[i] for i in front)
            else:
                need = cfg.population_size - len(nxt)
                by_crowd = sorted(front, key=lambda i: (-union[i].crowding, i))
                nxt.extend(union[i] for i in by_crowd[:need])
            if len(nxt) >= cfg.population_size:
                break
        population = nxt
        record()

    covered = archive.covered()
    ordered = [t for t in targets if t in covered]
    return SearchResult(
        subject=unit.name,
        operator=cfg.operator,
        seed=cfg.seed,
        suite=archive.suite(targets),
        covered_branches=_fraction(covered, targets, "branch"),
        covered_lines=_fraction(covered, targets, "line"),
        evaluations_used=evals,
        generations=generation,
        series=series,
        covered_targets=ordered,
        self_consistent=check_archive(archive, unit, cfg.limits),
    )
