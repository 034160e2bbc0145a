"""Test cases as statement sequences: generation, validity, repair, rendering."""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional, Union

from hmxforge.lang import types as T
from hmxforge.lang.parser import Token, tokenize
from hmxforge.lang.printer import literal_text
from hmxforge.lang.unit import TypedSubjectUnit

MAX_TEST_LENGTH = 40
INT_LITERAL_RANGE = 100
STRING_MEAN_LENGTH = 8


class RepairImpossible(Exception):
    """No constructor chain can produce a value of the requested type."""


# ---------------------------------------------------------------------- model


@dataclass(frozen=True)
class Literal:
    type: T.TypeTag
    value: object


@dataclass(frozen=True)
class Ref:
    pos: int


Arg = Union[Literal, Ref]


@dataclass(frozen=True)
class PrimitiveDef:
    type: T.TypeTag
    value: object


@dataclass(frozen=True)
class ConstructorCall:
    key: str
    args: tuple = ()


@dataclass(frozen=True)
class MethodCall:
    receiver: int
    key: str
    args: tuple = ()


Statement = Union[PrimitiveDef, ConstructorCall, MethodCall]


@dataclass(frozen=True)
class TestCase:
    statements: tuple = ()

    __test__ = False  # not a pytest class

    def __len__(self) -> int:
        return len(self.statements)

    @property
    def n(self) -> int:
        return len(self.statements)


@dataclass(frozen=True)
class KeyInfo:
    owner: str
    name: str
    params: tuple
    ret: str

    @property
    def is_ctor(self) -> bool:
        return self.name == "<init>"


_KEY_RE = re.compile(r"^([^|]+)\|([^(]+)\((.*)\)(.+)$")


def _type_from_text(text: str) -> T.TypeTag:
    return T.PRIMITIVES.get(text) or T.ref(text)


@lru_cache(maxsize=4096)
def parse_key(key: str) -> KeyInfo:
    m = _KEY_RE.match(key)
    if m is None:
        raise ValueError(f"malformed signature key {key!r}")
    owner, name, params, ret = m.groups()
    ptypes = tuple(_type_from_text(p.strip()) for p in params.split(",")) if params.strip() else ()
    return KeyInfo(owner, name, ptypes, ret)


def defined_type(st: Statement) -> Optional[T.TypeTag]:
    """Type of the variable a statement defines (method calls define none)."""
    if isinstance(st, PrimitiveDef):
        return st.type
    if isinstance(st, ConstructorCall):
        return T.ref(parse_key(st.key).owner)
    return None


def refs_of(st: Statement) -> list:
    """(required type, position) for the receiver and every Ref argument."""
    if isinstance(st, PrimitiveDef):
        return []
    info = parse_key(st.key)
    out = []
    if isinstance(st, MethodCall):
        out.append((T.ref(info.owner), st.receiver))
    for a, pt in zip(st.args, info.params):
        if isinstance(a, Ref):
            out.append((pt, a.pos))
    return out


def is_valid(test: TestCase, max_length: Optional[int] = None) -> bool:
    """All refs resolve backwards to compatible types and all arities match."""
    n = len(test.statements)
    if n < 1 or (max_length is not None and n > max_length):
        return False
    types: list = []
    for i, st in enumerate(test.statements):
        if not isinstance(st, PrimitiveDef):
            info = parse_key(st.key)
            if len(st.args) != len(info.params):
                return False
            for a, pt in zip(st.args, info.params):
                if isinstance(a, Literal) and not (a.type.is_primitive and T.widens_to(a.type, pt)):
                    return False
            for pt, pos in refs_of(st):
                if not 0 <= pos < i or types[pos] is None or not T.widens_to(types[pos], pt):
                    return False
        types.append(defined_type(st))
    return True


# ---------------------------------------------------------------- generation


def random_literal(ty: T.TypeTag, rng: random.Random):
    name = ty.name
    if name in ("int", "long"):
        return rng.randint(-INT_LITERAL_RANGE, INT_LITERAL_RANGE)
    if name == "double":
        return rng.uniform(-float(INT_LITERAL_RANGE), float(INT_LITERAL_RANGE))
    if name == "boolean":
        return rng.random() < 0.5
    if name == "char":
        return rng.randint(32, 126)
    if name == "string":
        return random_string(rng)
    raise ValueError(f"no literal for type {ty}")


def random_string(rng: random.Random) -> str:
    # geometric length on {0, 1, ...} with the configured mean
    p = 1.0 / (STRING_MEAN_LENGTH + 1)
    length = 0
    while rng.random() >= p:
        length += 1
    return "".join(chr(rng.randint(32, 126)) for _ in range(length))


def construction_costs(unit: TypedSubjectUnit) -> dict:
    """Minimal number of statements needed to construct each subject."""
    cost = {name: math.inf for name in unit.program}
    changed = True
    while changed:
        changed = False
        for info in unit.callables.values():
            if not info.is_ctor:
                continue
            c = 1 + sum(cost[p.name] for p in info.param_types if p.is_ref)
            if c < cost[info.owner.name]:
                cost[info.owner.name] = c
                changed = True
    return cost


def _costs(unit: TypedSubjectUnit) -> dict:
    c = unit.__dict__.get("_ctor_costs")
    if c is None:
        c = construction_costs(unit)
        unit.__dict__["_ctor_costs"] = c
    return c


def _ctor_cost(unit: TypedSubjectUnit, info) -> float:
    costs = _costs(unit)
    return 1 + sum(costs[p.name] for p in info.param_types if p.is_ref)


class _Builder:
    """Appends statements to a list while tracking variable types."""

    def __init__(self, unit: TypedSubjectUnit, rng: random.Random, stmts: Optional[list] = None) -> None:
        self.unit = unit
        self.rng = rng
        self.stmts: list = stmts if stmts is not None else []

    def vars_of(self, ty: T.TypeTag, before: Optional[int] = None) -> list:
        end = len(self.stmts) if before is None else before
        return [i for i in range(end)
                if (dt := defined_type(self.stmts[i])) is not None and T.widens_to(dt, ty)]

    def construct(self, subject: str, minimal: bool, reuse: bool = True) -> int:
        """Append a constructor call (and its prerequisites); return its position."""
        ctors = self.unit.ctors_of(subject)
        costs = [_ctor_cost(self.unit, c) for c in ctors]
        best = min(costs) if costs else math.inf
        if best == math.inf:
            raise RepairImpossible(f"no finite constructor chain for {subject!r}")
        if minimal:
            candidates = [c for c, k in zip(ctors, costs) if k == best]
        else:
            candidates = [c for c, k in zip(ctors, costs) if k < math.inf]
        info = candidates[0] if len(candidates) == 1 else self.rng.choice(candidates)
        args = self.make_args(info.param_types, minimal, reuse)
        self.stmts.append(ConstructorCall(info.key, tuple(args)))
        return len(self.stmts) - 1

    def make_args(self, ptypes: tuple, minimal: bool, reuse: bool = True) -> list:
        args: list = []
        for pt in ptypes:
            if pt.is_ref:
                existing = self.vars_of(pt) if reuse else []
                pos = self.rng.choice(existing) if existing else self.construct(pt.name, minimal, reuse)
                args.append(Ref(pos))
            else:
                args.append(Literal(pt, random_literal(pt, self.rng)))
        return args

    def length_of_call(self, info) -> int:
        """Statements a fresh call of ``info`` would add (excluding reuse)."""
        n = 1
        for pt in info.param_types:
            if pt.is_ref and not self.vars_of(pt):
                n += _costs(self.unit)[pt.name]
        if not info.is_ctor and not self.vars_of(info.owner_type):
            n += _costs(self.unit)[info.owner.name]
        return n

    def add_call(self, info) -> None:
        if info.is_ctor:
            args = self.make_args(info.param_types, minimal=False)
            self.stmts.append(ConstructorCall(info.key, tuple(args)))
            return
        receivers = self.vars_of(info.owner_type)
        recv = self.rng.choice(receivers) if receivers else self.construct(info.owner.name, minimal=False)
        args = self.make_args(info.param_types, minimal=False)
        self.stmts.append(MethodCall(recv, info.key, tuple(args)))


def cut_callables(unit: TypedSubjectUnit) -> list:
    """Constructors and methods of the subject under test, in declaration order."""
    return [*unit.ctors_of(unit.name), *unit.methods_of(unit.name)]


def random_test(unit: TypedSubjectUnit, rng: random.Random, max_length: int = MAX_TEST_LENGTH) -> TestCase:
    """A random valid test that starts by constructing the subject under test.

    Its target length is uniform on ``[1, max_length]``; the first statements
    build an instance of the subject (with prerequisite constructors for
    object parameters), then random calls are appended while they fit.
    """
    if max_length < 1:
        raise ValueError("max_length must be at least 1")
    target = rng.randint(1, max_length)
    b = _Builder(unit, rng)
    b.construct(unit.name, minimal=False)
    if len(b.stmts) > max_length:
        b.stmts.clear()
        b.construct(unit.name, minimal=True)
        if len(b.stmts) > max_length:
            raise ValueError(f"cannot construct {unit.name} within {max_length} statements")
    options = cut_callables(unit)
    attempts = 0
    while len(b.stmts) < target and attempts < 4 * max_length:
        attempts += 1
        info = rng.choice(options)
        if len(b.stmts) + b.length_of_call(info) > target:
            continue
        b.add_call(info)
    return TestCase(tuple(b.stmts))


def random_statement(unit: TypedSubjectUnit, rng: random.Random, prefix: list) -> list:
    """Statements implementing one random call of the subject after ``prefix``."""
    b = _Builder(unit, rng, list(prefix))
    b.add_call(rng.choice(cut_callables(unit)))
    return b.stmts[len(prefix):]


# -------------------------------------------------------------------- repair


def _shift_refs(st: Statement, mapping) -> Statement:
    if isinstance(st, PrimitiveDef):
        return st
    args = tuple(Ref(mapping(a.pos)) if isinstance(a, Ref) else a for a in st.args)
    if isinstance(st, MethodCall):
        return MethodCall(mapping(st.receiver), st.key, args)
    return ConstructorCall(st.key, args)


def repair(test: TestCase, unit: TypedSubjectUnit, rng: random.Random) -> TestCase:
    """Fix unresolved references by inserting definitions before first use.

    Each broken ``Ref`` (or receiver) of primitive type gets a new
    ``PrimitiveDef`` inserted immediately before the statement; object types
    get a minimal constructor chain. Valid tests come back unchanged.

    Raises:
        RepairImpossible: a needed subject has no finite constructor chain.
    """
    if is_valid(test):
        return test
    out: list = []
    newpos: dict[int, int] = {}
    b = _Builder(unit, rng, out)
    for i, st in enumerate(test.statements):
        if isinstance(st, PrimitiveDef):
            newpos[i] = len(out)
            out.append(st)
            continue
        info = parse_key(st.key)

        def resolve(pos: int, ty: T.TypeTag) -> int:
            if 0 <= pos < i and pos in newpos:
                np_ = newpos[pos]
                dt = defined_type(out[np_])
                if dt is not None and T.widens_to(dt, ty):
                    return np_
            if ty.is_ref:
                return b.construct(ty.name, minimal=True, reuse=False)
            out.append(PrimitiveDef(ty, random_literal(ty, rng)))
            return len(out) - 1

        args = []
        for a, pt in zip(st.args, info.params):
            if isinstance(a, Ref):
                args.append(Ref(resolve(a.pos, pt)))
            elif a.type.is_primitive and T.widens_to(a.type, pt):
                args.append(a)
            else:
                args.append(Literal(pt, random_literal(pt, rng)) if pt.is_primitive
                            else Ref(resolve(-1, pt)))
        if isinstance(st, MethodCall):
            recv = resolve(st.receiver, T.ref(info.owner))
            fixed: Statement = MethodCall(recv, st.key, tuple(args))
        else:
            fixed = ConstructorCall(st.key, tuple(args))
        newpos[i] = len(out)
        out.append(fixed)
    if not out:
        b.construct(unit.name, minimal=True)
    return TestCase(tuple(out))


# -------------------------------------------------------------- compat index


@dataclass
class CompatibilityIndex:
    """Positions of calls per signature key, split into constructors and methods."""

    ctor_map: dict = field(default_factory=dict)
    method_map: dict = field(default_factory=dict)


def build_compat_index(o1: TestCase, o2: TestCase) -> tuple:
    """Index the calls of ``o1`` and ``o2`` whose signatures occur in both."""
    keys2 = {st.key for st in o2.statements if not isinstance(st, PrimitiveDef)}
    keys1 = {st.key for st in o1.statements if not isinstance(st, PrimitiveDef)}

    def index(test: TestCase, other_keys: set) -> CompatibilityIndex:
        idx = CompatibilityIndex()
        for i, st in enumerate(test.statements):
            if isinstance(st, PrimitiveDef) or st.key not in other_keys:
                continue
            target = idx.ctor_map if isinstance(st, ConstructorCall) else idx.method_map
            target.setdefault(st.key, []).append(i)
        return idx

    return index(o1, keys2), index(o2, keys1)


# ------------------------------------------------------------------ rendering


def _literal_source(ty: T.TypeTag, value) -> str:
    if ty == T.DOUBLE and (value != value or math.isinf(value)):
        return "NaN" if value != value else ("Infinity" if value > 0 else "-Infinity")
    return literal_text(ty, value)


def _names(test: TestCase) -> dict:
    names = {}
    for i, st in enumerate(test.statements):
        if not isinstance(st, MethodCall):
            names[i] = f"v{len(names)}"
    return names


def render(test: TestCase) -> str:
    """One statement per line; defined variables are named v0, v1, ..."""
    names = _names(test)

    def arg(a: Arg) -> str:
        return names.get(a.pos, f"<undefined {a.pos}>") if isinstance(a, Ref) else _literal_source(a.type, a.value)

    lines = []
    for i, st in enumerate(test.statements):
        if isinstance(st, PrimitiveDef):
            lines.append(f"{st.type} {names[i]} = {_literal_source(st.type, st.value)};")
            continue
        info = parse_key(st.key)
        args = ", ".join(arg(a) for a in st.args)
        if isinstance(st, ConstructorCall):
            lines.append(f"{info.owner} {names[i]} = new {info.owner}({args});")
        else:
            recv = names.get(st.receiver, f"<undefined {st.receiver}>")
            lines.append(f"{recv}.{info.name}({args});")
    return "\n".join(lines)


class _TestParser:
    def __init__(self, line: str, unit: TypedSubjectUnit, env: dict) -> None:
        self.toks: list[Token] = tokenize(line)
        self.i = 0
        self.unit = unit
        self.env = env  # variable name -> (position, type)

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> None:
        t = self.next()
        if t.text != text:
            raise ValueError(f"expected {text!r}, found {t.text!r}")

    def arg(self) -> tuple:
        t = self.next()
        neg = False
        if t.text == "-":
            neg, t = True, self.next()
        sign = -1 if neg else 1
        if t.kind == "int":
            return Literal(T.INT, sign * int(t.text)), T.INT
        if t.kind == "long":
            return Literal(T.LONG, sign * int(t.text[:-1])), T.LONG
        if t.kind == "double":
            return Literal(T.DOUBLE, sign * float(t.text)), T.DOUBLE
        if t.text in ("NaN", "Infinity"):
            v = math.nan if t.text == "NaN" else sign * math.inf
            return Literal(T.DOUBLE, v), T.DOUBLE
        if t.kind in ("string", "char") or t.text in ("true", "false"):
            from hmxforge.lang.parser import Parser

            lit = Parser(t.text).parse_primary()
            return Literal(lit.kind, lit.value), lit.kind
        if t.kind == "ident" and t.text in self.env:
            pos, ty = self.env[t.text]
            return Ref(pos), ty
        raise ValueError(f"bad argument {t.text!r}")

    def args(self) -> tuple:
        self.expect("(")
        out = []
        if self.toks[self.i].text != ")":
            out.append(self.arg())
            while self.toks[self.i].text == ",":
                self.i += 1
                out.append(self.arg())
        self.expect(")")
        self.expect(";")
        return tuple(a for a, _ in out), tuple(t for _, t in out)


def parse_test(text: str, unit: TypedSubjectUnit) -> TestCase:
    """Inverse of :func:`render` for tests over ``unit``'s program."""
    env: dict = {}
    stmts: list = []
    for raw in text.strip().splitlines():
        line = raw.strip()
        if not line:
            continue
        p = _TestParser(line, unit, env)
        first = p.next()
        second = p.next()
        if second.text == ".":
            recv_pos, recv_ty = env[first.text]
            name = p.next().text
            args, _ = p.args()
            key = next(k for k, info in unit.callables.items()
                       if not info.is_ctor and info.owner.name == recv_ty.name
                       and info.callable.name == name)
            stmts.append(MethodCall(recv_pos, key, args))
            continue
        var = second.text
        p.expect("=")
        if first.text in T.PRIMITIVES and p.toks[p.i].text != "new":
            ty = T.PRIMITIVES[first.text]
            lit, _ = p.arg()
            value = lit.value if lit.type == ty else (float(lit.value) if ty == T.DOUBLE else lit.value)
            stmts.append(PrimitiveDef(ty, value))
        else:
            p.expect("new")
            owner = p.next().text
            args, types = p.args()
            key = next(c.key for c in unit.ctors_of(owner) if c.param_types == types)
            stmts.append(ConstructorCall(key, args))
        env[var] = (len(stmts) - 1, defined_type(stmts[-1]))
    return TestCase(tuple(stmts))


# --------------------------------------------------------------- suite files


def suite_text(suite: list, subject: str, seed: int, **header) -> str:
    """The ``.tests`` format: ``#`` header lines, then one ``@test`` block per test."""
    lines = [f"# subject: {subject}", f"# seed: {seed}"]
    lines += [f"# {k}: {v}" for k, v in header.items()]
    for i, t in enumerate(suite):
        lines.append(f"@test {i}")
        lines.append(render(t))
    return "\n".join(lines) + "\n"


def parse_suite(text: str, unit: TypedSubjectUnit) -> tuple:
    """Returns ``(header dict, list of tests)``."""
    header: dict = {}
    blocks: list[list[str]] = []
    for line in text.splitlines():
        if line.startswith("#"):
            # header fields are "# key: value"; any other comment is ignored
            k, sep, v = line[1:].strip().partition(": ")
            if sep and not blocks and " " not in k:
                header[k] = v
        elif line.startswith("@test"):
            blocks.append([])
        elif line.strip():
            if not blocks:
                raise ValueError(f"statement outside a test block: {line!r}")
            blocks[-1].append(line)
    return header, [parse_test("\n".join(b), unit) for b in blocks]


def write_suite(path: Union[str, Path], suite: list, subject: str, seed: int, **header) -> None:
    Path(path).write_text(suite_text(suite, subject, seed, **header), encoding="utf-8")


def read_suite(path: Union[str, Path], unit: TypedSubjectUnit) -> tuple:
    return parse_suite(Path(path).read_text(encoding="utf-8"), unit)
