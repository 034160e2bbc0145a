"""Checked subjects, signature keys and subject loading."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

from hmxforge.lang import ast as A
from hmxforge.lang import types as T
from hmxforge.lang.cdg import (
    ControlDependencyGraph,
    CoverageTarget,
    assign_branch_ids,
    build_cdg,
    targets_of,
)
from hmxforge.lang.errors import UnresolvedType
from hmxforge.lang.parser import parse_subject
from hmxforge.lang.typecheck import check_unit


def type_text(ty: T.TypeTag) -> str:
    return "V" if ty == T.VOID else ty.name


def signature_key(callable_: A.Callable, owner: A.SubjectUnit) -> str:
    """``OWNER|NAME(T1, T2, ...)RET``; constructors return the owner, void is ``V``."""
    params = ", ".join(type_text(p.type) for p in callable_.params)
    ret = owner.name if callable_.is_ctor else type_text(callable_.return_type)
    return f"{owner.name}|{callable_.name}({params}){ret}"


@dataclass(frozen=True)
class CallableInfo:
    """A callable of some subject in the program, addressed by its key."""

    key: str
    owner: A.SubjectUnit
    callable: A.Callable
    index: int  # position within the owner's constructors or methods

    @property
    def is_ctor(self) -> bool:
        return self.callable.is_ctor

    @property
    def param_types(self) -> tuple:
        return tuple(p.type for p in self.callable.params)

    @property
    def owner_type(self) -> T.TypeTag:
        return T.ref(self.owner.name)


@dataclass
class TypedSubjectUnit:
    """A checked subject together with every subject it references."""

    unit: A.SubjectUnit
    program: dict
    cdgs: dict = field(default_factory=dict)
    targets: list = field(default_factory=list)
    callables: dict = field(default_factory=dict)
    source: str = ""

    @property
    def name(self) -> str:
        return self.unit.name

    @property
    def branch_targets(self) -> list:
        return [t for t in self.targets if t.kind == "branch"]

    @property
    def line_targets(self) -> list:
        return [t for t in self.targets if t.kind == "line"]

    def info(self, key: str) -> CallableInfo:
        return self.callables[key]

    def ctors_of(self, subject: str) -> list:
        return [c for c in self.callables.values() if c.is_ctor and c.owner.name == subject]

    def methods_of(self, subject: str) -> list:
        return [c for c in self.callables.values() if not c.is_ctor and c.owner.name == subject]

    def source_callables(self) -> list:
        """Callables of the subject under test in source order."""
        return sorted(self.unit.callables, key=lambda c: (c.line, c.col))


def _source_order(unit: A.SubjectUnit) -> list:
    return sorted(unit.callables, key=lambda c: (c.line, c.col))


def _referenced(unit: A.SubjectUnit) -> set:
    names = set()
    for node in A.walk(unit):
        if isinstance(node, A.New):
            names.add(node.subject)
        for attr in ("type", "return_type"):
            ty = getattr(node, attr, None)
            if isinstance(ty, T.TypeTag) and ty.is_ref:
                names.add(ty.name)
        if isinstance(node, A.Callable):
            names.update(p.type.name for p in node.params if p.type.is_ref)
    names.discard(unit.name)
    return names


def typecheck(unit: A.SubjectUnit, corpus: Optional[Mapping[str, A.SubjectUnit]] = None) -> TypedSubjectUnit:
    """Check ``unit`` and the subjects it references (looked up in ``corpus``).

    Raises:
        UnresolvedType: a referenced subject is not available.
        TypeMismatch, MissingReturn, UnreachableCode, UnresolvedName: from checking.
    """
    corpus = dict(corpus or {})
    program = {unit.name: unit}
    pending = [unit]
    while pending:
        u = pending.pop()
        for name in sorted(_referenced(u)):
            if name in program:
                continue
            if name not in corpus:
                raise UnresolvedType(f"unknown subject type {name!r}", u.line, u.col)
            program[name] = corpus[name]
            pending.append(corpus[name])
    for u in program.values():
        check_unit(u, program)

    typed = TypedSubjectUnit(unit=unit, program=program)
    for u in program.values():
        for i, c in enumerate(u.constructors):
            key = signature_key(c, u)
            typed.callables[key] = CallableInfo(key, u, c, i)
        for i, m in enumerate(u.methods):
            key = signature_key(m, u)
            typed.callables[key] = CallableInfo(key, u, m, i)

    ordered = _source_order(unit)
    assign_branch_ids(ordered)
    for c in ordered:
        key = signature_key(c, unit)
        typed.cdgs[key] = build_cdg(c, key)
    typed.targets = enumerate_targets(typed)
    return typed


def enumerate_targets(typed: TypedSubjectUnit) -> list:
    """Two branch targets per predicate and one line target per executable line."""
    out: list[CoverageTarget] = []
    for cdg in typed.cdgs.values():
        out.extend(targets_of(cdg))
    return out


_HEADER_RE = re.compile(r"^\s*subject\s+([A-Za-z_][A-Za-z_0-9]*)", re.MULTILINE)


def load_subject(path: str | Path, search_dirs: Optional[list] = None) -> TypedSubjectUnit:
    """Parse and check ``path``; referenced subjects are taken from ``.subj``
    files in the same directory (and in ``search_dirs``)."""
    path = Path(path)
    source = path.read_text(encoding="utf-8")
    unit = parse_subject(source)
    corpus: dict[str, A.SubjectUnit] = {}
    dirs = [path.parent, *(Path(d) for d in (search_dirs or []))]
    wanted = _referenced(unit)
    seen: set = set()
    while wanted - set(corpus) - seen:
        name = sorted(wanted - set(corpus) - seen)[0]
        seen.add(name)
        for d in dirs:
            hit = None
            for cand in sorted(d.glob("*.subj")):
                m = _HEADER_RE.search(cand.read_text(encoding="utf-8"))
                if m and m.group(1) == name:
                    hit = cand
                    break
            if hit is not None:
                dep = parse_subject(hit.read_text(encoding="utf-8"))
                corpus[name] = dep
                wanted |= _referenced(dep)
                break
    typed = typecheck(unit, corpus)
    typed.source = source
    return typed


def load_source(source: str, corpus: Optional[Mapping[str, A.SubjectUnit]] = None) -> TypedSubjectUnit:
    typed = typecheck(parse_subject(source), corpus)
    typed.source = source
    return typed
