"""Sandboxed execution of test cases with coverage and branch-distance probes.

Subject callables are compiled once into nested Python closures. Frames are
plain lists laid out as ``[ctx, this, local0, local1, ...]``; statements
return ``None`` on normal completion and a 1-tuple ``(value,)`` on ``return``.
"""

from __future__ import annotations

import json
import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from hmxforge.lang import ast as A
from hmxforge.lang import types as T
from hmxforge.lang.cdg import ControlDependencyGraph, CoverageTarget
from hmxforge.lang.printer import literal_text
from hmxforge.lang.unit import TypedSubjectUnit

K = 1.0
# Distances are clamped so that they stay finite (NaN and overflow included).
MAX_DISTANCE = 1e12
SKIPPED = "<skipped>"


@dataclass(frozen=True)
class SandboxLimits:
    max_interpreted_statements: int = 100_000
    max_string_length: int = 65_536

    def __post_init__(self) -> None:
        if self.max_interpreted_statements <= 0 or self.max_string_length <= 0:
            raise ValueError("sandbox limits must be positive")


class SubjectFault(Exception):
    """A runtime fault raised inside subject code; ``tag`` names it."""

    def __init__(self, tag: str) -> None:
        super().__init__(tag)
        self.tag = tag


class LimitExceeded(Exception):
    def __init__(self, reason: str) -> None:
        super().__init__(reason)
        self.reason = reason


class Obj:
    __slots__ = ("subject", "fields")

    def __init__(self, subject: str, fields: list) -> None:
        self.subject = subject
        self.fields = fields


@dataclass
class ExecutionTrace:
    covered_lines: frozenset = frozenset()
    branch_outcomes: dict = field(default_factory=dict)
    branch_min_distance: dict = field(default_factory=dict)
    observations: list = field(default_factory=list)
    statements_executed: int = 0
    aborted: Optional[str] = None
    entered: frozenset = frozenset()
    infected: bool = False

    def covers(self, target: CoverageTarget) -> bool:
        if target.kind == "line":
            return target.line in self.covered_lines
        return target.outcome in self.branch_outcomes.get(target.branch_id, ())

    def to_jsonl(self, test=None) -> str:
        """One JSON record per statement observation."""
        rows = []
        for i, obs in enumerate(self.observations):
            row: dict[str, Any] = {"index": i, "observation": obs}
            if test is not None:
                st = test.statements[i]
                row["kind"] = type(st).__name__
                row["signature"] = getattr(st, "key", None)
            rows.append(json.dumps(row, sort_keys=True))
        if self.aborted:
            rows.append(json.dumps({"aborted": self.aborted,
                                    "statements_executed": self.statements_executed}))
        return "\n".join(rows) + ("\n" if rows else "")


class _Ctx:
    __slots__ = ("steps", "max_steps", "max_str", "lines", "outcomes", "dist",
                 "entered", "infected")

    def __init__(self, limits: SandboxLimits) -> None:
        self.steps = 0
        self.max_steps = limits.max_interpreted_statements
        self.max_str = limits.max_string_length
        self.lines: set = set()
        self.outcomes: set = set()
        self.dist: dict = {}
        self.entered: set = set()
        self.infected = False


# ------------------------------------------------------------ value semantics


def wrap_int(v: int) -> int:
    return ((v + 0x80000000) & 0xFFFFFFFF) - 0x80000000


def wrap_long(v: int) -> int:
    return ((v + 0x8000000000000000) & 0xFFFFFFFFFFFFFFFF) - 0x8000000000000000


def _idiv(a: int, b: int) -> int:
    if b == 0:
        raise SubjectFault("DivideByZero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _irem(a: int, b: int) -> int:
    if b == 0:
        raise SubjectFault("DivideByZero")
    return a - b * _idiv(a, b)


def _fdiv(a: float, b: float) -> float:
    if b == 0.0:
        if a == 0.0 or a != a:
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    return a / b


def _frem(a: float, b: float) -> float:
    if b == 0.0 or math.isinf(a) or a != a or b != b:
        return math.nan
    return math.fmod(a, b)


def _fmul(a: float, b: float) -> float:
    return a * b


def arith(op: str, ty: T.TypeTag) -> Callable[[Any, Any], Any]:
    """Binary arithmetic kernel for result type ``ty`` (operands already widened)."""
    if ty == T.DOUBLE:
        return {
            "+": lambda a, b: a + b,
            "-": lambda a, b: a - b,
            "*": _fmul,
            "/": _fdiv,
            "%": _frem,
        }[op]
    wrap = wrap_int if ty == T.INT else wrap_long
    return {
        "+": lambda a, b: wrap(a + b),
        "-": lambda a, b: wrap(a - b),
        "*": lambda a, b: wrap(a * b),
        "/": lambda a, b: wrap(_idiv(a, b)),
        "%": lambda a, b: _irem(a, b),
    }[op]


_CMP = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _clamp(d: float) -> float:
    if d != d or d > MAX_DISTANCE:
        return MAX_DISTANCE
    return float(d)


def numeric_distance(op: str, a, b) -> tuple:
    """(holds, distance-to-true, distance-to-false) for a numeric comparison."""
    if op == "==":
        v = a == b
        return v, (0.0 if v else _clamp(abs(a - b))), (K if v else 0.0)
    if op == "!=":
        v = a != b
        return v, (0.0 if v else K), (K if not v else _clamp(abs(a - b)))
    if op == "<":
        v = a < b
        return v, (0.0 if v else _clamp(a - b + K)), (_clamp(b - a + K) if v else 0.0)
    if op == "<=":
        v = a <= b
        return v, (0.0 if v else _clamp(a - b + K)), (_clamp(b - a + K) if v else 0.0)
    if op == ">":
        v = a > b
        return v, (0.0 if v else _clamp(b - a + K)), (_clamp(a - b + K) if v else 0.0)
    v = a >= b
    return v, (0.0 if v else _clamp(b - a + K)), (_clamp(a - b + K) if v else 0.0)


def levenshtein(a: str, b: str) -> int:
    """Edit distance with unit insert, delete and substitute costs."""
    if a == b:
        return 0
    if len(a) + len(b) > 256:
        return _levenshtein(a, b)
    return _levenshtein_cached(a, b)


def _levenshtein(a: str, b: str) -> int:
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    # common prefix/suffix do not change the distance
    i = 0
    while i < len(b) and a[i] == b[i]:
        i += 1
    a, b = a[i:], b[i:]
    while b and a[-1] == b[-1]:
        a, b = a[:-1], b[:-1]
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


_levenshtein_cached = lru_cache(maxsize=1 << 16)(_levenshtein)


def string_distance(op: str, a: str, b: str) -> tuple:
    eq = a == b
    d = 0.0 if eq else float(levenshtein(a, b))
    if op == "==":
        return eq, d, (K if eq else 0.0)
    return not eq, (K if eq else 0.0), d


def equality_distance(op: str, a, b) -> tuple:
    eq = a is b if isinstance(a, Obj) or isinstance(b, Obj) else a == b
    v = eq if op == "==" else not eq
    return v, (0.0 if v else K), (K if v else 0.0)


def branch_distance(predicate: A.Expr, env: dict, want: bool = True) -> float:
    """Distance of a checked boolean expression from evaluating to ``want``.

    ``env`` maps local names to values. Names are resolved in ``env`` first;
    the expression must already carry type annotations (see
    :func:`check_predicate`).
    """
    ev = _PredicateEvaluator(env)
    _, dt, df = ev.dist(predicate)
    return dt if want else df


def check_predicate(source: str, env_types: dict) -> A.Expr:
    """Parse and annotate a standalone boolean expression over typed locals."""
    from hmxforge.lang.parser import Parser
    from hmxforge.lang.typecheck import _Checker

    expr = Parser(source).parse_expr()
    unit = A.SubjectUnit(name="<expr>")
    checker = _Checker(unit, {"<expr>": unit})
    checker.scopes = [{}]
    for name, ty in env_types.items():
        checker.declare(name, ty, unit)
    ty = checker.expr(expr)
    if ty != T.BOOLEAN:
        raise TypeError(f"predicate has type {ty}")
    return expr


class _PredicateEvaluator:
    """Direct AST evaluation of side-effect-free predicates (used for checks)."""

    def __init__(self, env: dict) -> None:
        self.env = env

    def value(self, e: A.Expr):
        if isinstance(e, A.Literal):
            return e.value
        if isinstance(e, A.Name):
            return self.env[e.ident]
        if isinstance(e, A.Unary):
            v = self.value(e.operand)
            return (not v) if e.op == "!" else -v
        if isinstance(e, A.Binary) and e.op in ("&&", "||"):
            return self.dist(e)[0]
        if isinstance(e, A.Binary) and e.op in _CMP:
            return self.dist(e)[0]
        if isinstance(e, A.Binary):
            a, b = self.value(e.left), self.value(e.right)
            if e.ty == T.DOUBLE:
                a, b = float(a), float(b)
            return arith(e.op, e.ty)(a, b)
        if isinstance(e, A.Call) and e.target and e.target[0] == "builtin":
            return _BUILTIN_IMPL[e.name](*[self.value(a) for a in e.args])
        raise TypeError(f"unsupported in standalone predicates: {type(e).__name__}")

    def dist(self, e: A.Expr) -> tuple:
        if isinstance(e, A.Unary) and e.op == "!":
            v, dt, df = self.dist(e.operand)
            return not v, df, dt
        if isinstance(e, A.Binary) and e.op == "&&":
            v1, t1, f1 = self.dist(e.left)
            if not v1:
                return False, t1 + K, 0.0
            v2, t2, f2 = self.dist(e.right)
            return v2, t1 + t2, min(f1, f2)
        if isinstance(e, A.Binary) and e.op == "||":
            v1, t1, f1 = self.dist(e.left)
            if v1:
                return True, 0.0, f1 + K
            v2, t2, f2 = self.dist(e.right)
            return v2, min(t1, t2), f1 + f2
        if isinstance(e, A.Binary) and e.op in _CMP:
            a, b = self.value(e.left), self.value(e.right)
            return _compare_kernel(e.op, e.left.ty, e.right.ty)(a, b)
        v = bool(self.value(e))
        return v, (0.0 if v else K), (K if v else 0.0)


def _int_kernel(op: str) -> Callable:
    # integer operands: distances are exact and always finite
    if op == "==":
        return lambda a, b: (True, 0.0, K) if a == b else (False, float(abs(a - b)), 0.0)
    if op == "!=":
        return lambda a, b: (True, 0.0, float(abs(a - b))) if a != b else (False, K, 0.0)
    if op == "<":
        return lambda a, b: (True, 0.0, b - a + K) if a < b else (False, a - b + K, 0.0)
    if op == "<=":
        return lambda a, b: (True, 0.0, b - a + K) if a <= b else (False, a - b + K, 0.0)
    if op == ">":
        return lambda a, b: (True, 0.0, a - b + K) if a > b else (False, b - a + K, 0.0)
    return lambda a, b: (True, 0.0, a - b + K) if a >= b else (False, b - a + K, 0.0)


def _compare_kernel(op: str, lt: T.TypeTag, rt: T.TypeTag) -> Callable:
    if lt.is_numeric and rt.is_numeric:
        if T.DOUBLE in (lt, rt):
            return lambda a, b: numeric_distance(op, float(a), float(b))
        return _int_kernel(op)
    if lt == rt == T.CHAR:
        return _int_kernel(op)
    if lt == rt == T.STRING:
        return lambda a, b: string_distance(op, a, b)
    return lambda a, b: equality_distance(op, a, b)


def normalize(d: float) -> float:
    """Map a non-negative distance into [0, 1) monotonically: d / (d + 1)."""
    if d < 0 or d != d:
        raise ValueError(f"distance must be non-negative and finite, got {d}")
    return d / (d + 1.0)


# ------------------------------------------------------------------- builtins


def _substring(s: str, i: int, j: int) -> str:
    if i < 0 or j > len(s) or i > j:
        raise SubjectFault("IndexOutOfBounds")
    return s[i:j]


def _char_at(s: str, i: int) -> int:
    if i < 0 or i >= len(s):
        raise SubjectFault("IndexOutOfBounds")
    return ord(s[i])


_BUILTIN_IMPL = {
    "len": len,
    "concat": lambda a, b: a + b,
    "substring": _substring,
    "charAt": _char_at,
    "indexOf": lambda s, t: s.find(t),
}


def default_value(ty: T.TypeTag):
    if ty.is_ref:
        return None
    return {"int": 0, "long": 0, "double": 0.0, "boolean": False, "char": 0, "string": ""}[ty.name]


# ------------------------------------------------------------------- compiler


@dataclass(frozen=True)
class Probe:
    """Weak-mutation hook: the node ``nid`` of the compiled subject is mutated.

    ``original_op`` is set for operator replacements; other mutants infect the
    state whenever the mutated node is evaluated.
    """

    nid: int
    original_op: Optional[str] = None


class CompiledProgram:
    """Closure-compiled callables of a checked program."""

    def __init__(self, typed: TypedSubjectUnit, probe: Optional[Probe] = None) -> None:
        self.typed = typed
        self.cut = typed.unit.name
        self.probe = probe
        self.invokers: dict[str, Callable] = {}
        self._ctor_tables: dict[str, list] = {}
        self._method_tables: dict[str, dict] = {}
        for name, unit in typed.program.items():
            self._ctor_tables[name] = [None] * len(unit.constructors)
            self._method_tables[name] = {}
        for key, info in typed.callables.items():
            fn = self._compile_callable(info.owner, info.callable, key)
            self.invokers[key] = fn
            if info.is_ctor:
                self._ctor_tables[info.owner.name][info.index] = fn
            else:
                self._method_tables[info.owner.name][info.callable.name] = fn

    # -- callables

    def _compile_callable(self, owner: A.SubjectUnit, c: A.Callable, key: str) -> Callable:
        instrument = owner.name == self.cut
        self._instrument = instrument
        self._ret = c.return_type
        body = self._block(c.body)
        n_params = len(c.params)
        pad = [None] * (c.n_locals - n_params)
        if c.is_ctor:
            field_types = [f.type for f in owner.fields]
            subject = owner.name

            def invoke(ctx, _this, args):
                obj = Obj(subject, [default_value(t) for t in field_types])
                if instrument:
                    ctx.entered.add(key)
                body([ctx, obj, *args, *pad])
                return obj
        else:

            def invoke(ctx, this, args):
                if instrument:
                    ctx.entered.add(key)
                r = body([ctx, this, *args, *pad])
                return None if r is None else r[0]

        return invoke

    # -- statements

    def _block(self, stmts: list) -> Callable:
        fns = [self._stmt(s) for s in stmts]
        if len(fns) == 1:
            return fns[0]

        def run(f):
            for s in fns:
                r = s(f)
                if r is not None:
                    return r
            return None

        return run

    def _stmt(self, s: A.Stmt) -> Callable:
        line = s.line
        instrument = self._instrument
        inner = self._stmt_inner(s)

        if not instrument:
            def step(f):
                ctx = f[0]
                ctx.steps += 1
                if ctx.steps > ctx.max_steps:
                    ctx.steps = ctx.max_steps
                    raise LimitExceeded("statement-budget")
                return inner(f)

            return step

        def traced_step(f):
            ctx = f[0]
            ctx.steps += 1
            if ctx.steps > ctx.max_steps:
                ctx.steps = ctx.max_steps
                raise LimitExceeded("statement-budget")
            ctx.lines.add(line)
            return inner(f)

        return traced_step

    def _stmt_inner(self, s: A.Stmt) -> Callable:
        if isinstance(s, A.VarDecl):
            idx = s.slot + 2
            init = self._coerce(self._expr(s.init), s.init.ty, s.type)

            def decl(f):
                f[idx] = init(f)

            return decl
        if isinstance(s, A.Assign):
            value = self._coerce(self._expr(s.value), s.value.ty, s.target.ty)
            t = s.target
            if isinstance(t, A.Name):
                kind, slot = t.binding
                if kind == "local":
                    idx = slot + 2

                    def assign_local(f):
                        f[idx] = value(f)

                    return assign_local

                def assign_field(f):
                    f[1].fields[slot] = value(f)

                return assign_field
            obj = self._expr(t.obj)
            fslot = t.slot

            def assign_obj_field(f):
                o = obj(f)
                if o is None:
                    raise SubjectFault("NullPointer")
                o.fields[fslot] = value(f)

            return assign_obj_field
        if isinstance(s, A.If):
            cond = self._condition(s.cond, s.branch_id)
            then = self._block(s.then)
            orelse = self._block(s.orelse) if s.orelse is not None else None

            def if_(f):
                if cond(f):
                    return then(f)
                if orelse is not None:
                    return orelse(f)
                return None

            return if_
        if isinstance(s, A.While):
            cond = self._condition(s.cond, s.branch_id)
            body = self._block(s.body)

            def while_(f):
                ctx = f[0]
                while cond(f):
                    r = body(f)
                    if r is not None:
                        return r
                    ctx.steps += 1
                    if ctx.steps > ctx.max_steps:
                        ctx.steps = ctx.max_steps
                        raise LimitExceeded("statement-budget")
                return None

            return while_
        if isinstance(s, A.Return):
            if s.value is None:
                return lambda f: (None,)
            value = self._coerce(self._expr(s.value), s.value.ty, self._ret)
            return lambda f: (value(f),)
        if isinstance(s, A.Throw):
            value = self._expr(s.value)

            def throw(f):
                raise SubjectFault(value(f))

            return throw
        if isinstance(s, A.ExprStmt):
            e = self._expr(s.expr)

            def expr_stmt(f):
                e(f)

            return expr_stmt
        raise TypeError(s)  # pragma: no cover

    def _condition(self, cond: A.Expr, bid: int) -> Callable:
        if not self._instrument:
            return self._expr(cond)
        pred = self._dist(cond)

        def record(f):
            v, dt, df = pred(f)
            ctx = f[0]
            d = ctx.dist
            kt = (bid, True)
            kf = (bid, False)
            if dt < d.get(kt, math.inf):
                d[kt] = dt
            if df < d.get(kf, math.inf):
                d[kf] = df
            ctx.outcomes.add((bid, v))
            return v

        return record

    # -- expressions

    @staticmethod
    def _coerce(fn: Callable, src: T.TypeTag, dst: T.TypeTag) -> Callable:
        if dst == T.DOUBLE and src != T.DOUBLE:
            return lambda f: float(fn(f))
        return fn

    def _probe_for(self, e: A.Expr) -> Optional[Probe]:
        p = self.probe
        if p is not None and self._instrument and e.nid == p.nid:
            return p
        return None

    def _expr(self, e: A.Expr) -> Callable:
        fn = self._expr_inner(e)
        p = self._probe_for(e)
        if p is not None and p.original_op is None:
            def infected(f, fn=fn):
                f[0].infected = True
                return fn(f)

            return infected
        return fn

    def _expr_inner(self, e: A.Expr) -> Callable:
        if isinstance(e, A.Literal):
            v = e.value
            return lambda f: v
        if isinstance(e, A.Name):
            kind, slot = e.binding
            if kind == "local":
                idx = slot + 2
                return lambda f: f[idx]
            return lambda f: f[1].fields[slot]
        if isinstance(e, A.This):
            return lambda f: f[1]
        if isinstance(e, A.FieldAccess):
            obj = self._expr(e.obj)
            slot = e.slot

            def get_field(f):
                o = obj(f)
                if o is None:
                    raise SubjectFault("NullPointer")
                return o.fields[slot]

            return get_field
        if isinstance(e, A.Unary):
            x = self._expr(e.operand)
            if e.op == "!":
                return lambda f: not x(f)
            if e.ty == T.INT:
                return lambda f: wrap_int(-x(f))
            if e.ty == T.LONG:
                return lambda f: wrap_long(-x(f))
            return lambda f: -x(f)
        if isinstance(e, A.Binary):
            return self._binary(e)
        if isinstance(e, A.Call):
            return self._call(e)
        if isinstance(e, A.New):
            args = self._args(e.args, self.typed.program[e.subject].constructors[e.ctor_index].params)
            table = self._ctor_tables[e.subject]
            idx = e.ctor_index

            def new(f):
                return table[idx](f[0], None, [a(f) for a in args])

            return new
        raise TypeError(e)  # pragma: no cover

    def _args(self, args: list, params: list) -> list:
        return [self._coerce(self._expr(a), a.ty, p.type) for a, p in zip(args, params)]

    def _call(self, e: A.Call) -> Callable:
        if e.target[0] == "builtin":
            args = [self._expr(a) for a in e.args]
            impl = _BUILTIN_IMPL[e.name]
            if e.name == "concat":
                a0, a1 = args

                def concat(f):
                    r = a0(f) + a1(f)
                    if len(r) > f[0].max_str:
                        raise LimitExceeded("string-length")
                    return r

                return concat
            if len(args) == 1:
                a0 = args[0]
                return lambda f: impl(a0(f))
            if len(args) == 2:
                a0, a1 = args
                return lambda f: impl(a0(f), a1(f))
            return lambda f: impl(*[a(f) for a in args])
        _, owner, name = e.target
        method = self.typed.program[owner].method(name)
        args = self._args(e.args, method.params)
        table = self._method_tables[owner]
        recv = self._expr(e.receiver) if e.receiver is not None else (lambda f: f[1])

        def call(f):
            o = recv(f)
            if o is None:
                raise SubjectFault("NullPointer")
            return table[name](f[0], o, [a(f) for a in args])

        return call

    def _binary(self, e: A.Binary) -> Callable:
        op = e.op
        if op in ("&&", "||"):
            left = self._expr(e.left)
            right = self._expr(e.right)
            if op == "&&":
                return lambda f: left(f) and right(f)
            return lambda f: left(f) or right(f)
        left = self._expr(e.left)
        right = self._expr(e.right)
        lt, rt = e.left.ty, e.right.ty
        if op in _CMP:
            if lt.is_numeric and rt.is_numeric and T.DOUBLE in (lt, rt):
                left = self._coerce(left, lt, T.DOUBLE)
                right = self._coerce(right, rt, T.DOUBLE)
            if (lt.is_ref or rt.is_ref or T.NULL in (lt, rt)) and op in ("==", "!="):
                same = op == "=="
                kernel = (lambda a, b: a is b) if same else (lambda a, b: a is not b)
            else:
                kernel = _CMP[op]
            probe = self._probe_for(e)
            if probe is not None and probe.original_op is not None:
                original = _CMP[probe.original_op]
                mutated = kernel

                def probed_cmp(f):
                    a, b = left(f), right(f)
                    v = mutated(a, b)
                    if v != original(a, b):
                        f[0].infected = True
                    return v

                return probed_cmp
            return lambda f: kernel(left(f), right(f))
        # arithmetic
        ty = e.ty
        if ty == T.DOUBLE:
            left = self._coerce(left, lt, T.DOUBLE)
            right = self._coerce(right, rt, T.DOUBLE)
        kernel = arith(op, ty)
        probe = self._probe_for(e)
        if probe is not None and probe.original_op is not None:
            original = arith(probe.original_op, ty)
            mutated = kernel

            def probed_arith(f):
                a, b = left(f), right(f)
                try:
                    ov = ("v", original(a, b))
                except SubjectFault as exc:
                    ov = ("!", exc.tag)
                try:
                    mv = ("v", mutated(a, b))
                except SubjectFault as exc:
                    mv = ("!", exc.tag)
                if not _same_outcome(ov, mv):
                    f[0].infected = True
                if mv[0] == "!":
                    raise SubjectFault(mv[1])
                return mv[1]

            return probed_arith
        if op == "+":
            if ty == T.INT:
                return lambda f: wrap_int(left(f) + right(f))
            if ty == T.DOUBLE:
                return lambda f: left(f) + right(f)
        return lambda f: kernel(left(f), right(f))

    # -- predicates with distances: fn(frame) -> (value, d_true, d_false)

    def _dist(self, e: A.Expr) -> Callable:
        fn = self._dist_inner(e)
        p = self._probe_for(e)
        if p is not None and p.original_op is None:
            def infected(f, fn=fn):
                f[0].infected = True
                return fn(f)

            return infected
        return fn

    def _dist_inner(self, e: A.Expr) -> Callable:
        if isinstance(e, A.Unary) and e.op == "!":
            x = self._dist(e.operand)

            def not_(f):
                v, dt, df = x(f)
                return not v, df, dt

            return not_
        if isinstance(e, A.Binary) and e.op == "&&":
            left, right = self._dist(e.left), self._dist(e.right)

            def and_(f):
                v1, t1, f1 = left(f)
                if not v1:
                    return False, t1 + K, 0.0
                v2, t2, f2 = right(f)
                return v2, t1 + t2, min(f1, f2)

            return and_
        if isinstance(e, A.Binary) and e.op == "||":
            left, right = self._dist(e.left), self._dist(e.right)

            def or_(f):
                v1, t1, f1 = left(f)
                if v1:
                    return True, 0.0, f1 + K
                v2, t2, f2 = right(f)
                return v2, min(t1, t2), f1 + f2

            return or_
        if isinstance(e, A.Binary) and e.op in _CMP:
            left, right = self._expr(e.left), self._expr(e.right)
            kernel = _compare_kernel(e.op, e.left.ty, e.right.ty)
            probe = self._probe_for(e)
            if probe is not None and probe.original_op is not None:
                original = _compare_kernel(probe.original_op, e.left.ty, e.right.ty)

                def probed(f):
                    a, b = left(f), right(f)
                    r = kernel(a, b)
                    if r[0] != original(a, b)[0]:
                        f[0].infected = True
                    return r

                return probed
            return lambda f: kernel(left(f), right(f))
        x = self._expr(e)

        def boolean(f):
            v = x(f)
            return v, (0.0 if v else K), (K if v else 0.0)

        return boolean


def _same_outcome(a: tuple, b: tuple) -> bool:
    if a[0] != b[0]:
        return False
    x, y = a[1], b[1]
    if isinstance(x, float) and isinstance(y, float) and x != x and y != y:
        return True
    return x == y and (not isinstance(x, float) or math.copysign(1, x) == math.copysign(1, y))


def compiled(typed: TypedSubjectUnit) -> CompiledProgram:
    """The cached unprobed compilation of ``typed``."""
    prog = typed.__dict__.get("_compiled")
    if prog is None:
        prog = CompiledProgram(typed)
        typed.__dict__["_compiled"] = prog
    return prog


# ------------------------------------------------------------ rendering values


def render_value(v, ty: T.TypeTag, depth: int = 2) -> str:
    if ty == T.VOID:
        return "void"
    if ty.is_ref or ty == T.NULL:
        return _render_obj(v, depth, set())
    if ty == T.DOUBLE:
        if v != v:
            return "NaN"
        if math.isinf(v):
            return "Infinity" if v > 0 else "-Infinity"
    return literal_text(ty, v)


def _render_obj(o, depth: int, seen: set) -> str:
    if o is None:
        return "null"
    if id(o) in seen or depth < 0:
        return f"{o.subject}{{...}}"
    seen = seen | {id(o)}
    return o.subject + "{" + ", ".join(_render_field(x, depth - 1, seen) for x in o.fields) + "}"


def _render_field(x, depth: int, seen: set) -> str:
    if isinstance(x, Obj) or x is None:
        return _render_obj(x, depth, seen)
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return render_value(x, T.DOUBLE)
    if isinstance(x, str):
        return literal_text(T.STRING, x)
    return str(x)


# ------------------------------------------------------------------ execution


def execute_test(test, unit: TypedSubjectUnit, limits: SandboxLimits = SandboxLimits(),
                 program: Optional[CompiledProgram] = None) -> ExecutionTrace:
    """Run ``test`` against ``unit`` and record coverage and observations.

    Faults in one statement do not stop the test; statements that need a
    value whose construction failed are recorded as skipped.
    """
    from hmxforge.encoding import ConstructorCall, Literal, MethodCall, PrimitiveDef

    prog = program if program is not None else compiled(unit)
    ctx = _Ctx(limits)
    n = len(test.statements)
    values: list = [None] * n
    ok = [False] * n
    obs: list[str] = []
    aborted = None
    callables = unit.callables
    try:
        for i, st in enumerate(test.statements):
            ctx.steps += 1
            if ctx.steps > ctx.max_steps:
                ctx.steps = ctx.max_steps
                raise LimitExceeded("statement-budget")
            if isinstance(st, PrimitiveDef):
                values[i] = st.value
                ok[i] = True
                obs.append(render_value(st.value, st.type))
                continue
            info = callables[st.key]
            args = []
            skip = False
            for a, pt in zip(st.args, info.param_types):
                if isinstance(a, Literal):
                    v = a.value
                else:
                    if not ok[a.pos]:
                        skip = True
                        break
                    v = values[a.pos]
                if pt == T.DOUBLE and not isinstance(v, float):
                    v = float(v)
                args.append(v)
            receiver = None
            if isinstance(st, MethodCall):
                if not ok[st.receiver]:
                    skip = True
                else:
                    receiver = values[st.receiver]
            if skip:
                obs.append(SKIPPED)
                continue
            fn = prog.invokers[st.key]
            try:
                if isinstance(st, ConstructorCall):
                    values[i] = fn(ctx, None, args)
                    ok[i] = True
                    obs.append(render_value(values[i], info.owner_type))
                else:
                    if receiver is None:
                        raise SubjectFault("NullPointer")
                    r = fn(ctx, receiver, args)
                    obs.append(render_value(r, info.callable.return_type))
            except SubjectFault as exc:
                obs.append(f"!{exc.tag}")
            except RecursionError:
                obs.append("!StackOverflow")
    except LimitExceeded as exc:
        aborted = exc.reason
    outcomes: dict[int, set] = {}
    for bid, v in ctx.outcomes:
        outcomes.setdefault(bid, set()).add(v)
    return ExecutionTrace(
        covered_lines=frozenset(ctx.lines),
        branch_outcomes={b: frozenset(s) for b, s in sorted(outcomes.items())},
        branch_min_distance=dict(sorted(ctx.dist.items())),
        observations=obs,
        statements_executed=ctx.steps,
        aborted=aborted,
        entered=frozenset(ctx.entered),
        infected=ctx.infected,
    )


# -------------------------------------------------------------------- fitness


def _branch_fitness(bid: int, outcome: bool, trace: ExecutionTrace,
                    cdg: ControlDependencyGraph) -> float:
    if outcome in trace.branch_outcomes.get(bid, ()):
        return 0.0
    dist = trace.branch_min_distance
    d = dist.get((bid, outcome))
    if d is not None:
        return normalize(d)
    level = 1
    ctrl = cdg.parent[bid]
    while ctrl is not None:
        d = dist.get(ctrl)
        if d is not None:
            return level + normalize(d)
        level += 1
        ctrl = cdg.parent[ctrl[0]]
    return float(level)


def target_fitness(target: CoverageTarget, trace: ExecutionTrace,
                   cdg: ControlDependencyGraph) -> float:
    """Approach level plus normalized branch distance; 0 iff ``target`` is covered.

    A line that is not covered although its controlling outcome is (the
    callable threw or returned early) scores 0.5; an uncalled callable
    scores its CDG depth plus one.
    """
    if target.kind == "branch":
        return _branch_fitness(target.branch_id, target.outcome, trace, cdg)
    if target.line in trace.covered_lines:
        return 0.0
    ctrl = cdg.line_parent[target.line]
    if ctrl is None:
        return 0.5 if target.method in trace.entered else 1.0
    f = _branch_fitness(ctrl[0], ctrl[1], trace, cdg)
    return f if f > 0.0 else 0.5
