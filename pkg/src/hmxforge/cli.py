"""Command-line entry point: ``generate``, ``experiment``, ``mutants`` and ``stats``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from hmxforge.analysis.mutation import generate_mutants
from hmxforge.analysis.stats import build_report
from hmxforge.encoding import suite_text
from hmxforge.harness import (
    PAPER_SCALE_SEEDS,
    ConfigError,
    SubjectLoadError,
    load_checked,
    load_config,
    read_runs_csv,
    resolve_subject,
    run_plan,
    write_report,
)
from hmxforge.search import OPERATORS, SearchConfig, evolve

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SUBJECT = 2


class _Parser(argparse.ArgumentParser):
    """Usage errors count as configuration errors (exit 1)."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hmxforge", description="Search-based unit test generation for .subj subjects.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="generate a test suite for one subject")
    g.add_argument("subject", help="path to a .subj file or a bundled subject name")
    g.add_argument("--operator", choices=OPERATORS, default="hmx")
    g.add_argument("--seed", type=int, default=0)
    budget = g.add_mutually_exclusive_group()
    budget.add_argument("--budget-evals", type=int, default=None, metavar="N")
    budget.add_argument("--budget-secs", type=float, default=None, metavar="N")
    g.add_argument("--population", type=int, default=50)
    g.add_argument("-o", "--out", type=Path, default=None, help="write the suite here instead of stdout")

    e = sub.add_parser("experiment", help="run an experiment plan")
    e.add_argument("plan", type=Path)
    e.add_argument("--threads", type=int, default=None, help="worker processes (HMXFORGE_THREADS wins)")
    e.add_argument("--paper-scale", action="store_true", help="use 100 seeds per cell")
    e.add_argument("--output-dir", type=Path, default=None)

    m = sub.add_parser("mutants", help="list the mutants of a subject")
    m.add_argument("subject")

    s = sub.add_parser("stats", help="recompute reports from runs.csv")
    s.add_argument("runs", type=Path)
    s.add_argument("--output-dir", type=Path, default=None, help="also write stats.csv and summary.md here")
    return p


def _generate(args) -> int:
    unit = load_checked(resolve_subject(args.subject))
    if args.budget_evals is not None and args.budget_evals <= 0:
        raise ConfigError("--budget-evals must be positive")
    if args.budget_secs is not None and args.budget_secs <= 0:
        raise ConfigError("--budget-secs must be positive")
    if args.budget_evals is None and args.budget_secs is None:
        args.budget_evals = 10_000
    try:
        cfg = SearchConfig(population_size=args.population, budget_evals=args.budget_evals,
                           budget_secs=args.budget_secs or 120.0, operator=args.operator, seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    result = evolve(unit, cfg)
    text = suite_text(result.suite, unit.name, args.seed, operator=args.operator,
                      branch_coverage=f"{result.covered_branches:.4f}",
                      line_coverage=f"{result.covered_lines:.4f}")
    if args.out is not None:
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    print(f"{unit.name}: {len(result.suite)} tests, branch {result.covered_branches:.1%}, "
          f"line {result.covered_lines:.1%}, {result.evaluations_used} evaluations", file=sys.stderr)
    return EXIT_OK


def _experiment(args) -> int:
    search, _, plan = load_config(args.plan)
    if args.paper_scale:
        plan = replace(plan, seeds=PAPER_SCALE_SEEDS)
    if args.threads is not None:
        plan = replace(plan, threads=args.threads)
    if args.output_dir is not None:
        plan = replace(plan, output_dir=str(args.output_dir))
    elif not Path(plan.output_dir).is_absolute():
        plan = replace(plan, output_dir=str(args.plan.parent / plan.output_dir))

    def progress(r) -> None:
        line = f"{r.subject} {r.operator} seed={r.seed} branch={r.branch_cov:.3f} line={r.line_cov:.3f}"
        if r.weak_score is not None:
            line += f" weak={r.weak_score:.3f} strong={r.strong_score:.3f}"
        print(line, file=sys.stderr)

    outcome = run_plan(plan, search, progress)
    sys.stdout.write((outcome.output_dir / "summary.md").read_text(encoding="utf-8"))
    if outcome.partial:
        print(f"warning: {len(outcome.failures)} run(s) failed; results are partial", file=sys.stderr)
    return EXIT_OK


def _mutants(args) -> int:
    unit = load_checked(resolve_subject(args.subject))
    for m in generate_mutants(unit):
        print(f"{m.id}\t{m.operator_kind}\t{m.line}:{m.col}\t{m.description}")
    return EXIT_OK


def _stats(args) -> int:
    if not args.runs.exists():
        raise ConfigError(f"no such file: {args.runs}")
    records = read_runs_csv(args.runs)
    report = build_report(records)
    if args.output_dir is not None:
        args.output_dir.mkdir(parents=True, exist_ok=True)
        write_report(report, args.output_dir, records)
    sys.stdout.write(report.to_markdown())
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"generate": _generate, "experiment": _experiment, "mutants": _mutants, "stats": _stats}
    try:
        return handlers[args.command](args)
    except SubjectLoadError as exc:
        print(f"error: cannot load subject {exc}", file=sys.stderr)
        return EXIT_SUBJECT
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
