"""Control dependencies and coverage targets of structured callables."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from hmxforge.lang import ast as A
from hmxforge.lang.typecheck import always_exits

# (branch_id, outcome); None stands for the callable's entry node.
Controller = Optional[tuple]


@dataclass(frozen=True, order=True)
class CoverageTarget:
    """A branch outcome or an executable line of the subject under test."""

    kind: str  # "branch" | "line"
    method: str  # signature key of the enclosing callable
    branch_id: int = -1
    outcome: bool = False
    line: int = 0

    def __str__(self) -> str:
        if self.kind == "branch":
            return f"branch {self.branch_id}{'T' if self.outcome else 'F'} in {self.method}"
        return f"line {self.line} in {self.method}"


@dataclass
class ControlDependencyGraph:
    """Control dependencies of one callable.

    ``parent`` maps each branch id to the branch outcome it depends on;
    ``line_parent`` does the same for each executable line. The entry node
    is represented by ``None``.
    """

    method: str
    parent: dict = field(default_factory=dict)
    line_parent: dict = field(default_factory=dict)
    branch_lines: dict = field(default_factory=dict)

    @property
    def nodes(self) -> list:
        return [None, *self.parent]

    @property
    def edges(self) -> list:
        """(controller, dependent branch id) pairs."""
        return [(c, b) for b, c in self.parent.items()]

    def depth(self, branch_id: int) -> int:
        """Number of branch nodes strictly above ``branch_id``."""
        d = 0
        ctrl = self.parent[branch_id]
        while ctrl is not None:
            d += 1
            ctrl = self.parent[ctrl[0]]
        return d

    def chain(self, ctrl: Controller) -> list:
        """Controllers from ``ctrl`` up to (not including) the entry."""
        out = []
        while ctrl is not None:
            out.append(ctrl)
            ctrl = self.parent[ctrl[0]]
        return out


def _may_exit(stmts: list) -> bool:
    return any(isinstance(n, (A.Return, A.Throw)) for s in stmts for n in A.walk(s))


def build_cdg(c: A.Callable, method_key: str = "") -> ControlDependencyGraph:
    """Control-dependency graph of a checked callable with assigned branch ids.

    A statement depends on the innermost enclosing branch outcome. A statement
    that follows an ``if`` whose one arm always exits depends on the other
    outcome of that ``if``; one that follows a loop whose body may exit depends
    on the loop's false outcome.
    """
    g = ControlDependencyGraph(method_key)

    def walk(stmts: list, ctrl: Controller) -> None:
        for s in stmts:
            g.line_parent.setdefault(s.line, ctrl)
            if isinstance(s, A.If):
                bid = s.branch_id
                g.parent[bid] = ctrl
                g.branch_lines[bid] = s.line
                walk(s.then, (bid, True))
                if s.orelse is not None:
                    walk(s.orelse, (bid, False))
                then_exits = always_exits(s.then)
                else_exits = s.orelse is not None and always_exits(s.orelse)
                if then_exits and not else_exits:
                    ctrl = (bid, False)
                elif else_exits and not then_exits:
                    ctrl = (bid, True)
            elif isinstance(s, A.While):
                bid = s.branch_id
                g.parent[bid] = ctrl
                g.branch_lines[bid] = s.line
                walk(s.body, (bid, True))
                if _may_exit(s.body):
                    ctrl = (bid, False)

    walk(c.body, None)
    return g


def assign_branch_ids(callables: list) -> int:
    """Number ``if``/``while`` predicates in source order; returns the count."""
    n = 0
    for c in callables:
        for node in A.walk(c):
            if isinstance(node, (A.If, A.While)):
                node.branch_id = n
                n += 1
    return n


def targets_of(cdg: ControlDependencyGraph) -> list:
    """Branch targets (true then false per predicate), then line targets."""
    out = []
    for bid in sorted(cdg.parent):
        out.append(CoverageTarget("branch", cdg.method, bid, True))
        out.append(CoverageTarget("branch", cdg.method, bid, False))
    for line in sorted(cdg.line_parent):
        out.append(CoverageTarget("line", cdg.method, line=line))
    return out
