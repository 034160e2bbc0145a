"""Mutation analysis and operator-comparison statistics."""

from hmxforge.analysis.mutation import Mutant, MutationResult, generate_mutants, score_suite
from hmxforge.analysis.stats import StatReport, a12, build_report, classify_effect, wilcoxon_rank_sum

__all__ = [
    "Mutant",
    "MutationResult",
    "StatReport",
    "a12",
    "build_report",
    "classify_effect",
    "generate_mutants",
    "score_suite",
    "wilcoxon_rank_sum",
]
