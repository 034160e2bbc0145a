"""Syntax tree of the subject language.

Position fields (``line``, ``col``), node ids and the annotations written by
the type checker are excluded from equality, so two trees compare equal iff
they are structurally identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Union

from hmxforge.lang.types import TypeTag


def _meta(default: Any = None) -> Any:
    return field(default=default, compare=False, repr=False)


@dataclass(eq=True)
class Node:
    line: int = _meta(0)
    col: int = _meta(0)
    nid: int = _meta(-1)


# ---------------------------------------------------------------- expressions


@dataclass(eq=True)
class Expr(Node):
    ty: Optional[TypeTag] = _meta()


@dataclass(eq=True)
class Literal(Expr):
    kind: TypeTag = None  # type: ignore[assignment]
    value: Any = None


@dataclass(eq=True)
class Name(Expr):
    ident: str = ""
    # filled by the checker: ("local", slot) or ("field", slot)
    binding: Optional[tuple] = _meta()


@dataclass(eq=True)
class This(Expr):
    pass


@dataclass(eq=True)
class FieldAccess(Expr):
    obj: Expr = None  # type: ignore[assignment]
    name: str = ""
    slot: Optional[int] = _meta()


@dataclass(eq=True)
class Unary(Expr):
    op: str = ""
    operand: Expr = None  # type: ignore[assignment]


@dataclass(eq=True)
class Binary(Expr):
    op: str = ""
    left: Expr = None  # type: ignore[assignment]
    right: Expr = None  # type: ignore[assignment]


@dataclass(eq=True)
class Call(Expr):
    """Method call (``recv.m(...)``, ``m(...)`` on ``this``) or builtin call."""

    receiver: Optional[Expr] = None
    name: str = ""
    args: list = field(default_factory=list)
    # filled by the checker: ("builtin", name) or ("method", owner, name)
    target: Optional[tuple] = _meta()


@dataclass(eq=True)
class New(Expr):
    subject: str = ""
    args: list = field(default_factory=list)
    ctor_index: Optional[int] = _meta()


# ----------------------------------------------------------------- statements


@dataclass(eq=True)
class Stmt(Node):
    pass


@dataclass(eq=True)
class VarDecl(Stmt):
    type: TypeTag = None  # type: ignore[assignment]
    name: str = ""
    init: Expr = None  # type: ignore[assignment]
    slot: Optional[int] = _meta()


@dataclass(eq=True)
class Assign(Stmt):
    target: Union[Name, FieldAccess] = None  # type: ignore[assignment]
    value: Expr = None  # type: ignore[assignment]


@dataclass(eq=True)
class If(Stmt):
    cond: Expr = None  # type: ignore[assignment]
    then: list = field(default_factory=list)
    orelse: Optional[list] = None
    branch_id: Optional[int] = _meta()


@dataclass(eq=True)
class While(Stmt):
    cond: Expr = None  # type: ignore[assignment]
    body: list = field(default_factory=list)
    branch_id: Optional[int] = _meta()


@dataclass(eq=True)
class Return(Stmt):
    value: Optional[Expr] = None


@dataclass(eq=True)
class Throw(Stmt):
    value: Expr = None  # type: ignore[assignment]


@dataclass(eq=True)
class ExprStmt(Stmt):
    expr: Expr = None  # type: ignore[assignment]


# --------------------------------------------------------------- declarations


@dataclass(eq=True)
class Param:
    name: str
    type: TypeTag


@dataclass(eq=True)
class FieldDecl(Node):
    name: str = ""
    type: TypeTag = None  # type: ignore[assignment]


CTOR_NAME = "<init>"


@dataclass(eq=True)
class Callable(Node):
    name: str = ""
    params: list = field(default_factory=list)
    return_type: TypeTag = None  # type: ignore[assignment]
    body: list = field(default_factory=list)
    # number of local slots, set by the checker (params included)
    n_locals: int = _meta(0)

    @property
    def is_ctor(self) -> bool:
        return self.name == CTOR_NAME


@dataclass(eq=True)
class SubjectUnit(Node):
    name: str = ""
    fields: list = field(default_factory=list)
    constructors: list = field(default_factory=list)
    methods: list = field(default_factory=list)
    source_span: tuple = _meta((0, 0))

    def field_slot(self, name: str) -> Optional[int]:
        for i, f in enumerate(self.fields):
            if f.name == name:
                return i
        return None

    def method(self, name: str) -> Optional[Callable]:
        for m in self.methods:
            if m.name == name:
                return m
        return None

    @property
    def callables(self) -> list:
        return [*self.constructors, *self.methods]


# ------------------------------------------------------------------- walking


def children(node: Any) -> list:
    """Direct child nodes in source order."""
    if isinstance(node, SubjectUnit):
        return [*node.fields, *node.constructors, *node.methods]
    if isinstance(node, Callable):
        return list(node.body)
    if isinstance(node, If):
        return [node.cond, *node.then, *(node.orelse or [])]
    if isinstance(node, While):
        return [node.cond, *node.body]
    if isinstance(node, VarDecl):
        return [node.init]
    if isinstance(node, Assign):
        return [node.target, node.value]
    if isinstance(node, (Return, Throw)):
        return [node.value] if node.value is not None else []
    if isinstance(node, ExprStmt):
        return [node.expr]
    if isinstance(node, FieldAccess):
        return [node.obj]
    if isinstance(node, Unary):
        return [node.operand]
    if isinstance(node, Binary):
        return [node.left, node.right]
    if isinstance(node, Call):
        return ([node.receiver] if node.receiver is not None else []) + list(node.args)
    if isinstance(node, New):
        return list(node.args)
    return []


def walk(node: Any):
    """Pre-order traversal."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(children(n)))


def number_nodes(unit: SubjectUnit) -> None:
    for i, n in enumerate(walk(unit)):
        n.nid = i
