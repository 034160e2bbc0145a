"""First-order mutants of a subject and weak/strong scoring of test suites."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

from hmxforge.lang import ast as A
from hmxforge.lang import types as T
from hmxforge.lang.errors import Diagnostic
from hmxforge.lang.printer import expr_text
from hmxforge.lang.unit import TypedSubjectUnit, typecheck
from hmxforge.runtime import CompiledProgram, Probe, SandboxLimits, execute_test

ARITH_OPS = ("+", "-", "*", "/", "%")
REL_OPS = ("==", "!=", "<", "<=", ">", ">=")
KINDS = ("AOR", "ROR", "constant-replace", "negate-conditional")


@dataclass
class Mutant:
    id: str
    operator_kind: str
    line: int
    col: int
    nid: int
    description: str
    mutated_unit: TypedSubjectUnit = field(repr=False, compare=False)
    probe: Probe = field(repr=False, compare=False)

    @property
    def location(self) -> tuple:
        return (self.line, self.col)


@dataclass
class MutationResult:
    weak_killed: set
    strong_killed: set
    n_mutants: int

    @property
    def weak_score(self) -> float:
        return len(self.weak_killed) / self.n_mutants if self.n_mutants else 0.0

    @property
    def strong_score(self) -> float:
        return len(self.strong_killed) / self.n_mutants if self.n_mutants else 0.0


def _constant_values(lit: A.Literal) -> list:
    if lit.kind == T.STRING:
        return [""] if lit.value != "" else []
    if lit.kind not in (T.INT, T.LONG, T.DOUBLE):
        return []
    c = lit.value
    cands = [0, 1, -1, c + 1, c - 1]
    if lit.kind == T.DOUBLE:
        cands = [float(v) for v in cands]
    out = []
    for v in cands:
        if v != c and v not in out:
            out.append(v)
    return out


def _predicates(unit: A.SubjectUnit) -> dict:
    return {s.cond.nid: s for s in A.walk(unit) if isinstance(s, (A.If, A.While))}


def mutation_sites(unit: TypedSubjectUnit) -> list:
    """(kind, nid, replacement, description) for every mutant, in source order."""
    cut = unit.unit
    preds = _predicates(cut)
    sites = []
    for c in sorted(cut.callables, key=lambda c: (c.line, c.col)):
        for node in A.walk(c):
            if isinstance(node, A.Binary) and node.op in ARITH_OPS:
                for op in ARITH_OPS:
                    if op != node.op:
                        sites.append(("AOR", node, op, f"{node.op} -> {op}"))
            elif isinstance(node, A.Binary) and node.op in REL_OPS:
                lt, rt = node.left.ty, node.right.ty
                ordered = (lt.is_numeric and rt.is_numeric) or lt == rt == T.CHAR
                for op in REL_OPS if ordered else ("==", "!="):
                    if op != node.op:
                        sites.append(("ROR", node, op, f"{node.op} -> {op}"))
            elif isinstance(node, A.Literal):
                for v in _constant_values(node):
                    sites.append(("constant-replace", node, v, f"{node.value!r} -> {v!r}"))
            if isinstance(node, A.Expr) and node.nid in preds:
                sites.append(("negate-conditional", node, None, f"!({expr_text(node)})"))
    return sites


def _apply(unit: TypedSubjectUnit, kind: str, nid: int, replacement) -> tuple:
    root = copy.deepcopy(unit.unit)
    fresh = max(n.nid for n in A.walk(root)) + 1
    node = next(n for n in A.walk(root) if n.nid == nid)
    if kind in ("AOR", "ROR"):
        probe = Probe(nid, node.op)
        node.op = replacement
    elif kind == "constant-replace":
        probe = Probe(nid)
        node.value = replacement
    else:
        stmt = _predicates(root)[nid]
        stmt.cond = A.Unary(line=node.line, col=node.col, nid=fresh, op="!", operand=node)
        probe = Probe(fresh)
    others = {k: v for k, v in unit.program.items() if k != unit.name}
    typed = typecheck(root, others)
    typed.source = unit.source
    return typed, probe


def generate_mutants(unit: TypedSubjectUnit) -> list:
    """AOR, ROR, constant replacement and conditional negation mutants.

    Replacements that no longer typecheck (a constant pushed out of its
    type's range, say) are dropped. Ids are ``M0``, ``M1``, ... in source order.
    """
    out = []
    for kind, node, replacement, desc in mutation_sites(unit):
        try:
            typed, probe = _apply(unit, kind, node.nid, replacement)
        except Diagnostic:
            continue
        out.append(Mutant(f"M{len(out)}", kind, node.line, node.col, node.nid, desc, typed, probe))
    return out


def score_suite(suite: list, unit: TypedSubjectUnit, mutants: list,
                limits: SandboxLimits = SandboxLimits(), baseline: Optional[list] = None) -> MutationResult:
    """Weak kill: the mutated expression took a different value at least once.
    Strong kill: some statement observation differs from the original run."""
    if baseline is None:
        baseline = [execute_test(t, unit, limits).observations for t in suite]
    weak, strong = set(), set()
    for m in mutants:
        prog = CompiledProgram(m.mutated_unit, m.probe)
        for test, expected in zip(suite, baseline):
            tr = execute_test(test, m.mutated_unit, limits, prog)
            if tr.infected:
                weak.add(m.id)
            if tr.observations != expected:
                strong.add(m.id)
            if m.id in weak and m.id in strong:
                break
    return MutationResult(weak, strong, len(mutants))
