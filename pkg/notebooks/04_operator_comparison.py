"""
A small seeded operator comparison
==================================

Runs both operators on two subjects for a handful of seeds and prints the
report the harness writes to summary.md.
"""

import tempfile
from pathlib import Path

from hmxforge.harness import ExperimentPlan, corpus_path, run_plan
from hmxforge.search import SearchConfig

out = Path(tempfile.mkdtemp()) / "cmp"
plan = ExperimentPlan(subjects=(str(corpus_path("roman")), str(corpus_path("triangle"))),
                      seeds=tuple(range(5)), budget_evals=2000, mutation=False, output_dir=str(out))
outcome = run_plan(plan, SearchConfig(population_size=30))

# %% per-run rows
for r in outcome.records:
    print(f"  {r.subject:9} {r.operator} seed {r.seed}: branch {r.branch_cov:.3f}")

# %% medians, p-values and effect sizes
print((out / "stats.csv").read_text())
print((out / "summary.md").read_text())
