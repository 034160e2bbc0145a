"""Rank-sum test, Vargha-Delaney A12 and win/lose/no-diff reports."""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

ALPHA = 0.05
EXACT_MAX_N = 20
EFFECT_CLASSES = ("negligible", "small", "medium", "large")
_THRESHOLDS = (0.056, 0.147, 0.217)
METRICS = ("branch_cov", "line_cov", "weak_score", "strong_score")
METRIC_LABELS = {
    "branch_cov": "Branch",
    "line_cov": "Line",
    "weak_score": "Weak mutation",
    "strong_score": "Strong mutation",
}


class DegenerateSample(ValueError):
    """Every observation in both samples is identical."""


def midranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties sharing the mean of their positions."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v))
    sv = v[order]
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _subset_sum_counts(weights: list, k: int) -> list:
    """counts[s] = number of k-subsets of ``weights`` summing to s."""
    total = sum(weights)
    table = [[0] * (total + 1) for _ in range(k + 1)]
    table[0][0] = 1
    for w in weights:
        for size in range(min(k, len(weights)), 0, -1):
            prev, cur = table[size - 1], table[size]
            for s in range(total - w, -1, -1):
                if prev[s]:
                    cur[s + w] += prev[s]
    return table[k]


def exact_p(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Two-sided permutation p of the rank sum of ``xs``: P(|W - mu| >= |w - mu|)."""
    n, m = len(xs), len(ys)
    doubled = [int(round(2 * r)) for r in midranks(list(xs) + list(ys))]
    observed = sum(doubled[:n])
    centre = n * (n + m + 1)  # twice the null mean
    counts = _subset_sum_counts(doubled, n)
    dev = abs(observed - centre)
    hits = sum(c for s, c in enumerate(counts) if c and abs(s - centre) >= dev)
    return min(1.0, hits / math.comb(n + m, n))


def normal_p(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Normal approximation with tie and continuity corrections."""
    n, m = len(xs), len(ys)
    big_n = n + m
    ranks = midranks(list(xs) + list(ys))
    w = ranks[:n].sum()
    mu = n * (big_n + 1) / 2.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float(((tie_counts ** 3) - tie_counts).sum())
    var = n * m / 12.0 * ((big_n + 1) - tie_term / (big_n * (big_n - 1)))
    if var <= 0:
        return 1.0
    z = max(0.0, abs(w - mu) - 0.5) / math.sqrt(var)
    return min(1.0, math.erfc(z / math.sqrt(2.0)))


def _cross_ties(xs: Sequence[float], ys: Sequence[float]) -> bool:
    return bool(set(xs) & set(ys))


def wilcoxon_rank_sum(xs: Sequence[float], ys: Sequence[float], strict: bool = False) -> float:
    """Two-sided unpaired rank-sum p-value.

    Small samples without ties between the groups use the exact null
    distribution; otherwise the normal approximation is used. When every
    value is identical the p-value is 1.0, or ``DegenerateSample`` is raised
    with ``strict=True``.
    """
    if len(xs) < 1 or len(ys) < 1:
        raise ValueError("both samples need at least one observation")
    pooled = list(xs) + list(ys)
    if all(v == pooled[0] for v in pooled):
        if strict:
            raise DegenerateSample("all observations are identical")
        return 1.0
    if len(pooled) <= EXACT_MAX_N and not _cross_ties(xs, ys):
        return exact_p(xs, ys)
    return normal_p(xs, ys)


def a12(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Probability that a draw from ``xs`` beats one from ``ys`` (ties count half)."""
    x = np.asarray(xs, dtype=float)[:, None]
    y = np.asarray(ys, dtype=float)[None, :]
    if x.size == 0 or y.size == 0:
        raise ValueError("a12 needs non-empty samples")
    wins = float((x > y).sum()) + 0.5 * float((x == y).sum())
    return wins / (x.size * y.size)


def classify_effect(a: float) -> str:
    d = abs(a - 0.5)
    for name, bound in zip(EFFECT_CLASSES, _THRESHOLDS):
        if d < bound:
            return name
    return "large"


# ------------------------------------------------------------------ reports


@dataclass(frozen=True)
class Comparison:
    subject: str
    metric: str
    median_hmx: float
    median_spx: float
    p_value: float
    a12: float
    effect: str
    outcome: str  # "win" | "lose" | "no-diff"


def compare(subject: str, metric: str, hmx: Sequence[float], spx: Sequence[float]) -> Comparison:
    p = wilcoxon_rank_sum(hmx, spx)
    a = a12(hmx, spx)
    if p <= ALPHA and a > 0.5:
        outcome = "win"
    elif p <= ALPHA and a < 0.5:
        outcome = "lose"
    else:
        outcome = "no-diff"
    return Comparison(subject, metric, statistics.median(hmx), statistics.median(spx),
                      p, a, classify_effect(a), outcome)


@dataclass
class StatReport:
    """Per-subject medians and comparisons plus win/lose/no-diff tallies."""

    medians: dict = field(default_factory=dict)  # (subject, metric) -> {operator: median}
    comparisons: list = field(default_factory=list)

    @property
    def has_comparisons(self) -> bool:
        return bool(self.comparisons)

    def tally(self, metric: str) -> dict:
        out = {("win", e): 0 for e in EFFECT_CLASSES}
        out.update({("lose", e): 0 for e in EFFECT_CLASSES})
        out["no-diff"] = 0
        for c in self.comparisons:
            if c.metric != metric:
                continue
            if c.outcome == "no-diff":
                out["no-diff"] += 1
            else:
                out[(c.outcome, c.effect)] += 1
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        ops = sorted({op for meds in self.medians.values() for op in meds})
        header = ["subject", "metric", *[f"median_{op}" for op in ops]]
        if self.has_comparisons:
            header += ["p_value", "a12", "effect", "outcome"]
        w.writerow(header)
        cmp_by = {(c.subject, c.metric): c for c in self.comparisons}
        for (subject, metric), meds in self.medians.items():
            row = [subject, metric, *[_fmt(meds.get(op)) for op in ops]]
            c = cmp_by.get((subject, metric))
            if self.has_comparisons:
                row += [_fmt(c.p_value), _fmt(c.a12), c.effect, c.outcome] if c else ["", "", "", ""]
            w.writerow(row)
        return buf.getvalue()

    def to_markdown(self) -> str:
        lines = []
        if self.has_comparisons:
            lines += [
                "| Metric | Win Negl. | Win Small | Win Medium | Win Large "
                "| Lose Negl. | Lose Small | Lose Medium | Lose Large | No diff. |",
                "|---|" + "---:|" * 9,
            ]
            for metric in METRICS:
                if not any(c.metric == metric for c in self.comparisons):
                    continue
                t = self.tally(metric)
                cells = [t[("win", e)] for e in EFFECT_CLASSES] + [t[("lose", e)] for e in EFFECT_CLASSES]
                cells.append(t["no-diff"])
                lines.append(f"| {METRIC_LABELS[metric]} | " + " | ".join(map(str, cells)) + " |")
            lines.append("")
        ops = sorted({op for meds in self.medians.values() for op in meds})
        lines.append("| Subject | Metric | " + " | ".join(f"Median {op}" for op in ops) + " |")
        lines.append("|---|---|" + "---:|" * len(ops))
        for (subject, metric), meds in self.medians.items():
            lines.append(f"| {subject} | {METRIC_LABELS.get(metric, metric)} | "
                         + " | ".join(_fmt(meds.get(op)) for op in ops) + " |")
        return "\n".join(lines) + "\n"


def _fmt(v: Optional[float]) -> str:
    if v is None:
        return ""
    return f"{v:.6g}"


def build_report(records: Iterable, metrics: Sequence[str] = METRICS) -> StatReport:
    """Aggregate run records (objects or dicts with subject/operator/metric fields)."""
    samples: dict = {}
    for r in records:
        get = r.get if isinstance(r, dict) else (lambda k, r=r: getattr(r, k))
        for metric in metrics:
            v = get(metric)
            if v is None or v == "":  # metric not measured for this run
                continue
            samples.setdefault((get("subject"), metric), {}).setdefault(get("operator"), []).append(float(v))
    report = StatReport()
    for (subject, metric) in sorted(samples, key=lambda k: (k[0], metrics.index(k[1]))):
        by_op = samples[(subject, metric)]
        report.medians[(subject, metric)] = {op: statistics.median(v) for op, v in sorted(by_op.items())}
        if "hmx" in by_op and "spx" in by_op:
            report.comparisons.append(compare(subject, metric, by_op["hmx"], by_op["spx"]))
    return report
