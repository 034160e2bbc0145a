"""
One search run and its mutation score
=====================================
"""

from hmxforge.analysis import generate_mutants, score_suite
from hmxforge.encoding import render
from hmxforge.harness import corpus_path
from hmxforge.lang import load_subject
from hmxforge.search import SearchConfig, evolve

roman = load_subject(corpus_path("roman"))


def progress(gen, branch, line):
    if gen % 10 == 0:
        print(f"  generation {gen:3d}: branch {branch:.3f}, line {line:.3f}")


# %% evolve under a fixed evaluation budget, so the run is reproducible
result = evolve(roman, SearchConfig(operator="hmx", budget_evals=4000, seed=1), on_generation=progress)
print(f"branch {result.covered_branches:.3f}  line {result.covered_lines:.3f}  "
      f"{len(result.suite)} tests after {result.evaluations_used} evaluations")
print(render(result.suite[0]))

# %% coverage against evaluations spent
for evals, branch, line in result.series[::5]:
    print(f"  {evals:5d} evals  {branch:.3f}  {line:.3f}")

# %% score the suite against the first-order mutants
mutants = generate_mutants(roman)
scores = score_suite(result.suite, roman, mutants)
print(f"{len(mutants)} mutants: weak {scores.weak_score:.3f}, strong {scores.strong_score:.3f}")
survivors = [m for m in mutants if m.id not in scores.weak_killed][:5]
for m in survivors:
    print(f"  never reached or infected: {m.id} {m.operator_kind} {m.line}:{m.col} {m.description}")
