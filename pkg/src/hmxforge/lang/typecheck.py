"""Static checking: name resolution, type annotation and return analysis."""

from __future__ import annotations

from typing import Mapping, Optional

from hmxforge.lang import ast as A
from hmxforge.lang import types as T
from hmxforge.lang.errors import (
    Diagnostic,
    DuplicateName,
    MissingReturn,
    TypeMismatch,
    UnreachableCode,
    UnresolvedName,
    UnresolvedType,
)
from hmxforge.lang.parser import BUILTINS

_BUILTIN_SIGS = {
    "len": ((T.STRING,), T.INT),
    "concat": ((T.STRING, T.STRING), T.STRING),
    "substring": ((T.STRING, T.INT, T.INT), T.STRING),
    "charAt": ((T.STRING, T.INT), T.CHAR),
    "indexOf": ((T.STRING, T.STRING), T.INT),
}
_ARITH_OPS = {"+", "-", "*", "/", "%"}
_ORDER_OPS = {"<", "<=", ">", ">="}
_EQ_OPS = {"==", "!="}
_LOGIC_OPS = {"&&", "||"}


def always_exits(stmts: list) -> bool:
    """True if every path through ``stmts`` ends in ``return`` or ``throw``."""
    for s in stmts:
        if isinstance(s, (A.Return, A.Throw)):
            return True
        if isinstance(s, A.If) and s.orelse is not None:
            if always_exits(s.then) and always_exits(s.orelse):
                return True
    return False


def select_ctor(unit: A.SubjectUnit, arg_types: list) -> Optional[int]:
    """Index of the constructor matching ``arg_types``; exact match preferred."""
    applicable = []
    for i, c in enumerate(unit.constructors):
        ptypes = [p.type for p in c.params]
        if len(ptypes) != len(arg_types):
            continue
        if ptypes == list(arg_types):
            return i
        if all(T.widens_to(a, p) for a, p in zip(arg_types, ptypes)):
            applicable.append(i)
    return applicable[0] if len(applicable) == 1 else None


class _Checker:
    def __init__(self, unit: A.SubjectUnit, program: Mapping[str, A.SubjectUnit]) -> None:
        self.unit = unit
        self.program = program
        self.scopes: list[dict] = []
        self.n_slots = 0
        self.ret: T.TypeTag = T.VOID

    # -- helpers

    def check_type(self, ty: T.TypeTag, node: A.Node) -> None:
        if ty.is_ref and ty.name not in self.program:
            raise UnresolvedType(f"unknown subject type {ty.name!r}", node.line, node.col)

    def mismatch(self, node: A.Node, expected, found) -> TypeMismatch:
        return TypeMismatch(node.line, node.col, str(expected), str(found))

    def expect(self, e: A.Expr, want: T.TypeTag) -> None:
        got = self.expr(e)
        if not T.widens_to(got, want):
            raise self.mismatch(e, want, got)

    def lookup(self, name: str) -> Optional[tuple]:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        return None

    def declare(self, name: str, ty: T.TypeTag, node: A.Node) -> int:
        if self.lookup(name) is not None:
            raise DuplicateName(f"variable {name!r} already defined", node.line, node.col)
        slot = self.n_slots
        self.n_slots += 1
        self.scopes[-1][name] = (slot, ty)
        return slot

    # -- declarations

    def run(self) -> None:
        u = self.unit
        if not u.constructors:
            raise Diagnostic(f"subject {u.name!r} declares no constructor", u.line, u.col)
        for f in u.fields:
            self.check_type(f.type, f)
        for c in u.callables:
            self.callable(c)

    def callable(self, c: A.Callable) -> None:
        self.scopes = [{}]
        self.n_slots = 0
        for p in c.params:
            self.check_type(p.type, c)
            self.declare(p.name, p.type, c)
        self.ret = T.VOID if c.is_ctor else c.return_type
        if self.ret != T.VOID:
            self.check_type(self.ret, c)
        self.block(c.body, new_scope=False)
        if self.ret != T.VOID and not always_exits(c.body):
            raise MissingReturn(f"{c.name!r} may finish without returning a value", c.line, c.col)
        c.n_locals = self.n_slots

    # -- statements

    def block(self, stmts: list, new_scope: bool = True) -> None:
        if new_scope:
            self.scopes.append({})
        for i, s in enumerate(stmts):
            self.stmt(s)
            if i + 1 < len(stmts) and always_exits([s]):
                nxt = stmts[i + 1]
                raise UnreachableCode("statement is unreachable", nxt.line, nxt.col)
        if new_scope:
            self.scopes.pop()

    def stmt(self, s: A.Stmt) -> None:
        if isinstance(s, A.VarDecl):
            self.check_type(s.type, s)
            self.expect(s.init, s.type)
            s.slot = self.declare(s.name, s.type, s)
        elif isinstance(s, A.Assign):
            target_ty = self.expr(s.target)
            self.expect(s.value, target_ty)
        elif isinstance(s, (A.If, A.While)):
            self.expect(s.cond, T.BOOLEAN)
            if isinstance(s, A.If):
                self.block(s.then)
                if s.orelse is not None:
                    self.block(s.orelse)
            else:
                self.block(s.body)
        elif isinstance(s, A.Return):
            if s.value is None:
                if self.ret != T.VOID:
                    raise self.mismatch(s, self.ret, T.VOID)
            else:
                if self.ret == T.VOID:
                    raise self.mismatch(s, T.VOID, self.expr(s.value))
                self.expect(s.value, self.ret)
        elif isinstance(s, A.Throw):
            self.expect(s.value, T.STRING)
        elif isinstance(s, A.ExprStmt):
            if not isinstance(s.expr, (A.Call, A.New)):
                raise TypeMismatch(s.line, s.col, "call statement", "expression")
            self.expr(s.expr)
        else:  # pragma: no cover
            raise TypeError(s)

    # -- expressions

    def expr(self, e: A.Expr) -> T.TypeTag:
        ty = self._expr(e)
        e.ty = ty
        return ty

    def _expr(self, e: A.Expr) -> T.TypeTag:
        if isinstance(e, A.Literal):
            if e.kind == T.INT and not T.INT_MIN <= e.value <= T.INT_MAX:
                raise self.mismatch(e, "int literal", e.value)
            if e.kind == T.LONG and not T.LONG_MIN <= e.value <= T.LONG_MAX:
                raise self.mismatch(e, "long literal", e.value)
            return e.kind
        if isinstance(e, A.This):
            return T.ref(self.unit.name)
        if isinstance(e, A.Name):
            hit = self.lookup(e.ident)
            if hit is not None:
                e.binding = ("local", hit[0])
                return hit[1]
            slot = self.unit.field_slot(e.ident)
            if slot is None:
                raise UnresolvedName(f"unknown name {e.ident!r}", e.line, e.col)
            e.binding = ("field", slot)
            return self.unit.fields[slot].type
        if isinstance(e, A.FieldAccess):
            owner = self.expr(e.obj)
            if not owner.is_ref:
                raise self.mismatch(e, "subject", owner)
            target = self.program[owner.name]
            slot = target.field_slot(e.name)
            if slot is None:
                raise UnresolvedName(f"{owner.name} has no field {e.name!r}", e.line, e.col)
            e.slot = slot
            return target.fields[slot].type
        if isinstance(e, A.Unary):
            t = self.expr(e.operand)
            if e.op == "!":
                if t != T.BOOLEAN:
                    raise self.mismatch(e, T.BOOLEAN, t)
                return T.BOOLEAN
            if not t.is_numeric:
                raise self.mismatch(e, "number", t)
            return t
        if isinstance(e, A.Binary):
            return self.binary(e)
        if isinstance(e, A.Call):
            return self.call(e)
        if isinstance(e, A.New):
            if e.subject not in self.program:
                raise UnresolvedType(f"unknown subject type {e.subject!r}", e.line, e.col)
            arg_types = [self.expr(a) for a in e.args]
            idx = select_ctor(self.program[e.subject], arg_types)
            if idx is None:
                raise self.mismatch(e, f"constructor of {e.subject}",
                                    "(" + ", ".join(map(str, arg_types)) + ")")
            e.ctor_index = idx
            return T.ref(e.subject)
        raise TypeError(e)  # pragma: no cover

    def binary(self, e: A.Binary) -> T.TypeTag:
        lt = self.expr(e.left)
        rt = self.expr(e.right)
        op = e.op
        if op in _LOGIC_OPS:
            for side, t in ((e.left, lt), (e.right, rt)):
                if t != T.BOOLEAN:
                    raise self.mismatch(side, T.BOOLEAN, t)
            return T.BOOLEAN
        if op in _ARITH_OPS:
            if not lt.is_numeric:
                raise self.mismatch(e.left, "number", lt)
            if not rt.is_numeric:
                raise self.mismatch(e.right, "number", rt)
            return T.wider(lt, rt)
        if op in _ORDER_OPS:
            if (lt.is_numeric and rt.is_numeric) or (lt == rt == T.CHAR):
                return T.BOOLEAN
            raise self.mismatch(e, "comparable operands", f"{lt} {op} {rt}")
        # equality
        if (lt.is_numeric and rt.is_numeric) or lt == rt != T.NULL:
            return T.BOOLEAN
        if (lt == T.NULL and (rt.is_ref or rt == T.NULL)) or (rt == T.NULL and lt.is_ref):
            return T.BOOLEAN
        raise self.mismatch(e, "comparable operands", f"{lt} {op} {rt}")

    def call(self, e: A.Call) -> T.TypeTag:
        if e.receiver is None and e.name in BUILTINS:
            params, ret = _BUILTIN_SIGS[e.name]
            if len(e.args) != len(params):
                raise self.mismatch(e, f"{len(params)} arguments", len(e.args))
            for a, p in zip(e.args, params):
                self.expect(a, p)
            e.target = ("builtin", e.name)
            return ret
        if e.receiver is None:
            owner = T.ref(self.unit.name)
        else:
            owner = self.expr(e.receiver)
            if not owner.is_ref:
                raise self.mismatch(e, "subject receiver", owner)
        method = self.program[owner.name].method(e.name)
        if method is None:
            raise UnresolvedName(f"{owner.name} has no method {e.name!r}", e.line, e.col)
        if len(e.args) != len(method.params):
            raise self.mismatch(e, f"{len(method.params)} arguments", len(e.args))
        for a, p in zip(e.args, method.params):
            self.expect(a, p.type)
        e.target = ("method", owner.name, e.name)
        return method.return_type


def check_unit(unit: A.SubjectUnit, program: Mapping[str, A.SubjectUnit]) -> None:
    """Annotate ``unit`` in place; ``program`` maps every visible subject name."""
    _Checker(unit, program).run()
