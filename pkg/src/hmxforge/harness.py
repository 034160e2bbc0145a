"""Experiment plans, configuration files and the run matrix."""

from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

from hmxforge.analysis.mutation import generate_mutants, score_suite
from hmxforge.analysis.stats import StatReport, build_report
from hmxforge.encoding import parse_suite, suite_text
from hmxforge.lang.errors import Diagnostic
from hmxforge.lang.unit import TypedSubjectUnit, load_subject
from hmxforge.operators import OperatorConfig
from hmxforge.runtime import SandboxLimits
from hmxforge.search import OPERATORS, SearchConfig, coverage_of, evolve

NUMERIC_SUBJECTS = ("fraction", "complex", "interval", "quadratic", "triangle")
STRING_SUBJECTS = ("stemmer", "csvfield", "roman", "template")
DEFAULT_SEEDS = tuple(range(20))
PAPER_SCALE_SEEDS = tuple(range(100))
DEFAULT_BUDGET_EVALS = 10_000
RUN_FIELDS = ("subject", "operator", "seed", "branch_cov", "line_cov", "weak_score", "strong_score", "evaluations")


class ConfigError(Exception):
    def __init__(self, message: str, line: int = 0) -> None:
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class UnknownKey(ConfigError):
    pass


class BadValue(ConfigError):
    pass


class SubjectLoadError(Exception):
    def __init__(self, path, diagnostic) -> None:
        super().__init__(f"{path}: {diagnostic}")
        self.path = path
        self.diagnostic = diagnostic


def corpus_dir() -> Path:
    return Path(str(resources.files("hmxforge") / "corpus"))


def corpus_path(name: str) -> Path:
    return corpus_dir() / f"{name}.subj"


def resolve_subject(spec: str, base: Optional[Path] = None) -> Path:
    """A path (relative to ``base``) or the name of a bundled subject."""
    p = Path(spec)
    if base is not None and not p.is_absolute() and (base / p).exists():
        return base / p
    if p.exists():
        return p
    if p.suffix == "" and corpus_path(spec).exists():
        return corpus_path(spec)
    return p


def subject_label(path: Path) -> str:
    return Path(path).stem


def load_checked(path) -> TypedSubjectUnit:
    """Load a subject or raise ``SubjectLoadError`` naming the file."""
    try:
        return load_subject(path, [corpus_dir()])
    except OSError as exc:
        raise SubjectLoadError(path, exc.strerror or str(exc)) from exc
    except Diagnostic as exc:
        raise SubjectLoadError(path, exc) from exc


# -------------------------------------------------------------------- config


@dataclass(frozen=True)
class ExperimentPlan:
    subjects: tuple = tuple(str(corpus_path(n)) for n in NUMERIC_SUBJECTS + STRING_SUBJECTS)
    operators: tuple = OPERATORS
    seeds: tuple = DEFAULT_SEEDS
    budget_evals: Optional[int] = DEFAULT_BUDGET_EVALS
    budget_secs: Optional[float] = None
    output_dir: str = "results"
    threads: Optional[int] = None
    mutation: bool = True

    def __post_init__(self) -> None:
        if not self.subjects:
            raise ValueError("a plan needs at least one subject")
        if not self.operators or any(op not in OPERATORS for op in self.operators):
            raise ValueError(f"operators must be a non-empty subset of {OPERATORS}")
        if not self.seeds:
            raise ValueError("a plan needs at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")


def _parse_bool(v: str) -> bool:
    low = v.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(v)


def _parse_seeds(v: str) -> tuple:
    out = []
    for part in v.split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise ValueError(v)
    return tuple(out)


def _parse_list(v: str) -> tuple:
    items = tuple(x.strip() for x in v.split(",") if x.strip())
    if not items:
        raise ValueError(v)
    return items


def _expand_subjects(items: tuple) -> tuple:
    out = []
    for it in items:
        if it == "string":
            out.extend(STRING_SUBJECTS)
        elif it == "numeric":
            out.extend(NUMERIC_SUBJECTS)
        elif it == "all":
            out.extend(NUMERIC_SUBJECTS + STRING_SUBJECTS)
        else:
            out.append(it)
    return tuple(out)


def _positive_int(v: str) -> int:
    n = int(v)
    if n <= 0:
        raise ValueError(v)
    return n


# key -> (section, field, parser)
_KEYS = {
    "population_size": ("search", "population_size", _positive_int),
    "budget_evals": ("plan", "budget_evals", _positive_int),
    "budget_secs": ("plan", "budget_secs", float),
    "crossover": ("plan", "operators", lambda v: (v.strip(),)),
    "operators": ("plan", "operators", _parse_list),
    "seed": ("plan", "seeds", lambda v: (int(v),)),
    "seeds": ("plan", "seeds", _parse_seeds),
    "subjects": ("plan", "subjects", _parse_list),
    "output_dir": ("plan", "output_dir", str),
    "threads": ("plan", "threads", _positive_int),
    "mutation": ("plan", "mutation", _parse_bool),
    "max_test_length": ("search", "max_test_length", _positive_int),
    "initial_test_length": ("search", "initial_test_length", _positive_int),
    "max_interpreted_statements": ("limits", "max_interpreted_statements", _positive_int),
    "max_string_length": ("limits", "max_string_length", _positive_int),
    "crossover_rate": ("operator", "crossover_rate", float),
    "data_crossover_rate": ("operator", "data_crossover_rate", float),
    "eta_c": ("operator", "eta_c", float),
    "sbx_literal_mode": ("operator", "sbx_literal_mode", _parse_bool),
}


def parse_config(text: str, base: Optional[Path] = None) -> tuple:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    sections: dict = {"search": {}, "plan": {}, "operator": {}, "limits": {}}
    lines_of: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise UnknownKey(f"unknown key {key!r}", lineno)
        section, name, parse = _KEYS[key]
        try:
            sections[section][name] = parse(value)
        except (ValueError, TypeError):
            raise BadValue(f"bad value {value!r} for {key!r}", lineno) from None
        lines_of[name] = lineno

    def build(cls, kwargs: dict, extra: Optional[dict] = None):
        try:
            return cls(**kwargs, **(extra or {}))
        except ValueError as exc:
            line = max((lines_of.get(k, 0) for k in kwargs), default=0)
            raise BadValue(str(exc), line) from None

    op_cfg = build(OperatorConfig, sections["operator"])
    limits = build(SandboxLimits, sections["limits"])
    plan_kw = dict(sections["plan"])
    if "budget_secs" in plan_kw and "budget_evals" not in plan_kw:
        plan_kw["budget_evals"] = None
    if "subjects" in plan_kw:
        plan_kw["subjects"] = tuple(str(resolve_subject(s, base)) for s in _expand_subjects(plan_kw["subjects"]))
    if "operators" in plan_kw:
        plan_kw["operators"] = tuple(o.lower() for o in plan_kw["operators"])
    plan = build(ExperimentPlan, plan_kw)
    search_kw = dict(sections["search"])
    search_kw.update(
        operator=plan.operators[0],
        operator_config=op_cfg,
        seed=plan.seeds[0],
        budget_evals=plan.budget_evals,
        limits=limits,
    )
    if plan.budget_secs is not None:
        search_kw["budget_secs"] = plan.budget_secs
    search = build(SearchConfig, search_kw)
    return search, op_cfg, plan


def load_config(path) -> tuple:
    """Read a plan file; returns ``(SearchConfig, OperatorConfig, ExperimentPlan)``.

    Raises:
        UnknownKey, BadValue: with the offending line number.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text, path.parent)


# ---------------------------------------------------------------------- runs


@dataclass(frozen=True)
class RunRecord:
    subject: str
    operator: str
    seed: int
    branch_cov: float
    line_cov: float
    weak_score: Optional[float]  # None when mutation scoring was off
    strong_score: Optional[float]
    evaluations: int
    wall_ms: int = 0

    def __post_init__(self) -> None:
        for name in ("branch_cov", "line_cov", "weak_score", "strong_score"):
            v = getattr(self, name)
            if v is None and name in ("weak_score", "strong_score"):
                continue
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} = {v} is not a fraction")

    @property
    def key(self) -> tuple:
        return (self.subject, self.operator, self.seed)


@dataclass
class RunOutput:
    record: RunRecord
    result: dict
    suite_text: str
    strong_subset_weak: bool
    mutants: int


_UNITS: dict = {}
_MUTANTS: dict = {}


def _unit(path: str) -> TypedSubjectUnit:
    u = _UNITS.get(path)
    if u is None:
        u = _UNITS[path] = load_checked(path)
    return u


def _mutants(path: str) -> list:
    m = _MUTANTS.get(path)
    if m is None:
        m = _MUTANTS[path] = generate_mutants(_unit(path))
    return m


def run_one(path: str, operator: str, seed: int, search: SearchConfig, mutation: bool = True) -> RunOutput:
    """One isolated search followed by mutation scoring of its suite."""
    unit = _unit(path)
    cfg = replace(search, operator=operator, seed=seed)
    t0 = time.perf_counter()
    result = evolve(unit, cfg)
    weak = strong = None
    subset = True
    n_mut = 0
    if mutation:
        mutants = _mutants(path)
        mr = score_suite(result.suite, unit, mutants, cfg.limits)
        weak, strong = mr.weak_score, mr.strong_score
        subset = mr.strong_killed <= mr.weak_killed
        n_mut = len(mutants)
    wall_ms = int((time.perf_counter() - t0) * 1000)
    record = RunRecord(subject_label(path), operator, seed, result.covered_branches, result.covered_lines,
                       weak, strong, result.evaluations_used, wall_ms)
    text = suite_text(result.suite, unit.name, seed, operator=operator)
    return RunOutput(record, result.to_dict(), text, subset, n_mut)


def _run_task(task: tuple) -> RunOutput:
    return run_one(*task)


def pool_size(requested: Optional[int] = None) -> int:
    env = os.environ.get("HMXFORGE_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"HMXFORGE_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("HMXFORGE_THREADS must be at least 1")
        return n
    if requested:
        return requested
    return os.cpu_count() or 1


@dataclass
class PlanOutcome:
    records: list
    report: StatReport
    partial: bool = False
    failures: list = field(default_factory=list)
    subset_violations: list = field(default_factory=list)
    consistency_failures: list = field(default_factory=list)
    output_dir: Optional[Path] = None


def _cell(v: Optional[float]) -> str:
    return "" if v is None else repr(v)


def _score(text: str) -> Optional[float]:
    return None if text == "" else float(text)


def records_to_csv(records: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_FIELDS)
    for r in sorted(records, key=lambda r: r.key):
        w.writerow([r.subject, r.operator, r.seed, repr(r.branch_cov), repr(r.line_cov),
                    _cell(r.weak_score), _cell(r.strong_score), r.evaluations])
    return buf.getvalue()


def read_runs_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for i, row in enumerate(rows, start=2):
        try:
            out.append(RunRecord(row["subject"], row["operator"], int(row["seed"]),
                                 float(row["branch_cov"]), float(row["line_cov"]),
                                 _score(row["weak_score"]), _score(row["strong_score"]),
                                 int(row["evaluations"])))
        except (KeyError, ValueError, TypeError) as exc:
            raise BadValue(f"malformed run record: {exc}", i) from None
    return out


def write_report(report: StatReport, out: Path, records: list, notes: Optional[list] = None) -> None:
    (out / "stats.csv").write_text(report.to_csv(), encoding="utf-8")
    lines = ["# Operator comparison", ""]
    subjects = sorted({r.subject for r in records})
    ops = sorted({r.operator for r in records})
    seeds = sorted({r.seed for r in records})
    lines.append(f"Subjects: {len(subjects)}; operators: {', '.join(ops)}; seeds per cell: {len(seeds)}.")
    lines.append("")
    lines.append(report.to_markdown())
    for n in notes or []:
        lines.append(n)
    (out / "summary.md").write_text("\n".join(lines).rstrip() + "\n", encoding="utf-8")


def run_plan(plan: ExperimentPlan, search: Optional[SearchConfig] = None,
             progress: Optional[Callable[[RunRecord], None]] = None) -> PlanOutcome:
    """Run every (subject, operator, seed) cell and write the artifacts.

    Artifacts in ``plan.output_dir``: ``runs.csv`` (reproducible; no timings),
    ``timings.csv``, ``stats.csv``, ``summary.md`` and ``runs/`` with one JSON
    record and one ``.tests`` suite per run.

    Raises:
        SubjectLoadError: before any search if a subject fails to load.
    """
    for s in plan.subjects:
        load_checked(s)
    search = search or SearchConfig()
    search = replace(search, budget_evals=plan.budget_evals,
                     budget_secs=plan.budget_secs if plan.budget_secs is not None else search.budget_secs)
    tasks = [(str(s), op, seed, search, plan.mutation)
             for s in plan.subjects for op in plan.operators for seed in plan.seeds]
    labels = [subject_label(t[0]) for t in tasks]
    if len(set(zip(labels, (t[1] for t in tasks), (t[2] for t in tasks)))) != len(tasks):
        raise ValueError("subject names must be unique within a plan")

    out = Path(plan.output_dir)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    outputs: list = []
    failures: list = []
    workers = min(pool_size(plan.threads), len(tasks))

    def collect(task, fut_result) -> None:
        o = fut_result
        outputs.append(o)
        r = o.record
        stem = f"{r.subject}-{r.operator}-{r.seed}"
        meta = {"record": {k: v for k, v in asdict(r).items() if k != "wall_ms"},
                "config": _config_dict(search, r.operator, r.seed), "mutants": o.mutants,
                "search": o.result}
        (out / "runs" / f"{stem}.json").write_text(json.dumps(meta, sort_keys=True, indent=1), encoding="utf-8")
        (out / "runs" / f"{stem}.tests").write_text(o.suite_text, encoding="utf-8")
        if progress is not None:
            progress(r)

    if workers <= 1:
        for t in tasks:
            try:
                collect(t, _run_task(t))
            except Exception as exc:  # a crashed run is reported, not fatal
                failures.append((subject_label(t[0]), t[1], t[2], repr(exc)))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [(t, pool.submit(_run_task, t)) for t in tasks]
            for t, fut in futs:
                try:
                    collect(t, fut.result())
                except Exception as exc:
                    failures.append((subject_label(t[0]), t[1], t[2], repr(exc)))

    records = sorted((o.record for o in outputs), key=lambda r: r.key)
    (out / "runs.csv").write_text(records_to_csv(records), encoding="utf-8")
    tbuf = io.StringIO()
    tw = csv.writer(tbuf, lineterminator="\n")
    tw.writerow(["subject", "operator", "seed", "wall_ms"])
    for r in records:
        tw.writerow([r.subject, r.operator, r.seed, r.wall_ms])
    (out / "timings.csv").write_text(tbuf.getvalue(), encoding="utf-8")

    subset_violations = [o.record.key for o in outputs if not o.strong_subset_weak]
    consistency = _spot_check(outputs, plan, search)
    report = build_report(records)
    notes = []
    if failures:
        notes.append(f"PARTIAL RESULTS: {len(failures)} run(s) aborted: "
                     + "; ".join(f"{s}/{o}/{k}: {e}" for s, o, k, e in failures))
    if subset_violations:
        notes.append(f"strong-kill set not contained in weak-kill set for {subset_violations}")
    if consistency:
        notes.append(f"coverage re-execution mismatch for {consistency}")
    write_report(report, out, records, notes)
    return PlanOutcome(records, report, bool(failures), failures, subset_violations, consistency, out)


def _config_dict(search: SearchConfig, operator: str, seed: int) -> dict:
    d = asdict(replace(search, operator=operator, seed=seed))
    return json.loads(json.dumps(d))


def _spot_check(outputs: list, plan: ExperimentPlan, search: SearchConfig) -> list:
    """Re-execute every tenth suite (at least one) and compare coverage."""
    bad = []
    ordered = sorted(outputs, key=lambda o: o.record.key)
    by_label = {subject_label(s): str(s) for s in plan.subjects}
    for i, o in enumerate(ordered):
        if i % 10:
            continue
        unit = _unit(by_label[o.record.subject])
        _, suite = parse_suite(o.suite_text, unit)
        b, l = coverage_of(suite, unit, search.limits)
        if (b, l) != (o.record.branch_cov, o.record.line_cov):
            bad.append(o.record.key)
    return bad
