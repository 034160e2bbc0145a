"""Genetic operators: single-point crossover, SBX, string splice, HMX and mutation."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Optional

from hmxforge.encoding import (
    ConstructorCall,
    Literal,
    MethodCall,
    PrimitiveDef,
    Ref,
    TestCase,
    build_compat_index,
    defined_type,
    parse_key,
    random_literal,
    random_statement,
    repair,
)
from hmxforge.lang import types as T
from hmxforge.lang.unit import TypedSubjectUnit

ETA_C = 2.5
_SURROGATES = (0xD800, 0xDFFF)


@dataclass(frozen=True)
class OperatorConfig:
    crossover_rate: float = 0.75
    data_crossover_rate: float = 1.0
    eta_c: float = ETA_C
    sbx_literal_mode: bool = False

    def __post_init__(self) -> None:
        for name in ("crossover_rate", "data_crossover_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not self.eta_c > 0:
            raise ValueError(f"eta_c must be positive, got {self.eta_c}")


# ----------------------------------------------------------------------- SBX


def spread_factor(u: float, eta_c: float = ETA_C) -> float:
    if u < 0.5:
        return (2.0 * u) ** (1.0 / (eta_c + 1.0))
    if u == 0.5:
        return 1.0
    return (0.5 / (1.0 - u)) ** (1.0 / (eta_c + 1.0))


@dataclass(frozen=True)
class SbxDraw:
    u: float
    beta: float
    b: bool
    eta_c: float = ETA_C

    def __post_init__(self) -> None:
        if not 0.0 <= self.u < 1.0:
            raise ValueError(f"u must lie in [0, 1), got {self.u}")

    @classmethod
    def from_u(cls, u: float, b: bool = False, eta_c: float = ETA_C) -> "SbxDraw":
        return cls(u, spread_factor(u, eta_c), b, eta_c)

    @classmethod
    def sample(cls, rng: random.Random, eta_c: float = ETA_C) -> "SbxDraw":
        u = rng.random()
        b = rng.random() < 0.5
        return cls.from_u(u, b, eta_c)


def sbx_pair(v1: float, v2: float, draw: SbxDraw, literal: bool = False) -> tuple:
    """Recombine two reals.

    The default form spreads the children symmetrically about the parents'
    mean, so their sum is preserved; ``draw.b`` swaps the two slots. With
    ``literal=True`` each slot gets ``(own - other)/2 -/+ beta*|v1-v2|/2``.
    """
    delta = abs(v1 - v2)
    offset = draw.beta * 0.5 * delta
    if literal:
        sign = -1.0 if draw.b else 1.0
        return (v1 - v2) * 0.5 + sign * offset, (v2 - v1) * 0.5 + sign * offset
    mean = (v1 + v2) * 0.5
    lo, hi = mean - offset, mean + offset
    return (hi, lo) if draw.b else (lo, hi)


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


_INT_RANGE = {"int": (T.INT_MIN, T.INT_MAX), "long": (T.LONG_MIN, T.LONG_MAX)}


def _embed(v, ty: T.TypeTag) -> float:
    if ty == T.BOOLEAN:
        return 1.0 if v else 0.0
    return float(v)


def _project(x: float, own, ty: T.TypeTag):
    name = ty.name
    if name == "double":
        return x
    if name == "boolean":
        if x == 0.5:
            return own
        return x > 0.5
    if not math.isfinite(x):
        x = math.copysign(1e300, x) if not math.isnan(x) else 0.0
    if name in _INT_RANGE:
        lo, hi = _INT_RANGE[name]
        return min(max(round_half_away(x), lo), hi)
    if name == "char":
        c = min(max(round_half_away(x), 0), T.CHAR_MAX)
        if _SURROGATES[0] <= c <= _SURROGATES[1]:
            c = _SURROGATES[1] + 1
        return c
    raise ValueError(f"SBX is undefined for {ty}")


def sbx_typed(a, b, draw: SbxDraw, ty: T.TypeTag, literal: bool = False) -> tuple:
    """SBX on two values of a numeric-family type, projected back to ``ty``."""
    x1, x2 = sbx_pair(_embed(a, ty), _embed(b, ty), draw, literal)
    return _project(x1, a, ty), _project(x2, b, ty)


# -------------------------------------------------------------- string splice


@dataclass(frozen=True)
class SpliceDraw:
    x_i: int
    y_i: int

    @classmethod
    def sample(cls, rng: random.Random, x: str, y: str) -> "SpliceDraw":
        return cls(rng.randrange(len(x)), rng.randrange(len(y)))


def string_splice(x: str, y: str, draw: SpliceDraw) -> tuple:
    """Swap the tails after the (inclusive) cut characters."""
    if not x or not y:
        return x, y
    if not (0 <= draw.x_i < len(x) and 0 <= draw.y_i < len(y)):
        raise ValueError(f"splice indices {draw} out of range for lengths {len(x)}, {len(y)}")
    i, j = draw.x_i + 1, draw.y_i + 1
    return x[:i] + y[j:], y[:j] + x[i:]


# ----------------------------------------------------------------------- SPX


def _remap_suffix(st, cut_src: int, cut_dst: int, prefix_types: list):
    """Re-address refs of a statement moved from after ``cut_src`` to after ``cut_dst``.

    Refs into the moved suffix follow it. Refs into the discarded prefix keep
    their absolute position when the new prefix has a compatible variable
    there; otherwise they dangle (-1) and are left to repair.
    """
    if isinstance(st, PrimitiveDef):
        return st
    info = parse_key(st.key)

    def move(pos: int, ty: T.TypeTag) -> int:
        if pos >= cut_src:
            return pos - cut_src + cut_dst
        if pos < cut_dst and prefix_types[pos] is not None and T.widens_to(prefix_types[pos], ty):
            return pos
        return -1

    args = tuple(Ref(move(a.pos, pt)) if isinstance(a, Ref) else a for a, pt in zip(st.args, info.params))
    if isinstance(st, MethodCall):
        return MethodCall(move(st.receiver, T.ref(info.owner)), st.key, args)
    return ConstructorCall(st.key, args)


def splice(p1: TestCase, p2: TestCase, alpha: int, beta: int) -> tuple:
    """``p1[:alpha] ++ p2[beta:]`` and ``p2[:beta] ++ p1[alpha:]`` before repair."""
    s1, s2 = p1.statements, p2.statements
    t1 = [defined_type(s) for s in s1[:alpha]]
    t2 = [defined_type(s) for s in s2[:beta]]
    o1 = s1[:alpha] + tuple(_remap_suffix(s, beta, alpha, t1) for s in s2[beta:])
    o2 = s2[:beta] + tuple(_remap_suffix(s, alpha, beta, t2) for s in s1[alpha:])
    return TestCase(o1), TestCase(o2)


def spx(p1: TestCase, p2: TestCase, rng: random.Random, unit: TypedSubjectUnit) -> tuple:
    """Single-point crossover at independent uniform cuts, followed by repair."""
    n1, n2 = len(p1), len(p2)
    if n1 < 2 or n2 < 2:
        return p1, p2
    alpha = rng.randint(1, n1 - 1)
    beta = rng.randint(1, n2 - 1)
    o1, o2 = splice(p1, p2, alpha, beta)
    return repair(o1, unit, rng), repair(o2, unit, rng)


# ----------------------------------------------------------------------- HMX


@dataclass(frozen=True)
class CrossoverSite:
    """One matched pair of calls and the argument slots that were recombined."""

    kind: str  # "ctor" | "method"
    key: str
    pos1: int
    pos2: int
    pairs: tuple = ()  # (slot, operator, (a, b), (a', b'))


def _recombinable(a, b) -> bool:
    if not (isinstance(a, Literal) and isinstance(b, Literal)) or a.type != b.type:
        return False
    if a.type == T.STRING:
        return True
    if not a.type.is_number_family:
        return False
    if a.type == T.DOUBLE:
        return math.isfinite(a.value) and math.isfinite(b.value)
    return True


def _cross_args(args1: tuple, args2: tuple, rng: random.Random, cfg: OperatorConfig) -> tuple:
    out1, out2, pairs = list(args1), list(args2), []
    for k, (a, b) in enumerate(zip(args1, args2)):
        if not _recombinable(a, b):
            continue
        if a.type == T.STRING:
            if not a.value or not b.value:
                continue
            x, y = string_splice(a.value, b.value, SpliceDraw.sample(rng, a.value, b.value))
            op = "splice"
        else:
            x, y = sbx_typed(a.value, b.value, SbxDraw.sample(rng, cfg.eta_c), a.type, cfg.sbx_literal_mode)
            op = "sbx"
        out1[k], out2[k] = Literal(a.type, x), Literal(b.type, y)
        pairs.append((k, op, (a.value, b.value), (x, y)))
    return tuple(out1), tuple(out2), tuple(pairs)


def _with_args(st, args: tuple):
    if isinstance(st, ConstructorCall):
        return ConstructorCall(st.key, args)
    return MethodCall(st.receiver, st.key, args)


def data_crossover(o1: TestCase, o2: TestCase, rng: random.Random, cfg: OperatorConfig = OperatorConfig()) -> tuple:
    """Recombine the arguments of one matched call per shared signature.

    Returns ``(o1', o2', sites)``; ``sites`` lists every matched pair that was
    selected for recombination, including those without eligible slots.
    """
    idx1, idx2 = build_compat_index(o1, o2)
    s1, s2 = list(o1.statements), list(o2.statements)
    sites = []
    for kind, m1, m2 in (("ctor", idx1.ctor_map, idx2.ctor_map), ("method", idx1.method_map, idx2.method_map)):
        for key in m1:
            i = rng.choice(m1[key])
            j = rng.choice(m2[key])
            if cfg.data_crossover_rate < 1.0 and not rng.random() < cfg.data_crossover_rate:
                continue
            a1, a2, pairs = _cross_args(s1[i].args, s2[j].args, rng, cfg)
            s1[i], s2[j] = _with_args(s1[i], a1), _with_args(s2[j], a2)
            sites.append(CrossoverSite(kind, key, i, j, pairs))
    return TestCase(tuple(s1)), TestCase(tuple(s2)), sites


def hmx(p1: TestCase, p2: TestCase, rng: random.Random, cfg: OperatorConfig,
        unit: TypedSubjectUnit) -> tuple:
    o1, o2 = spx(p1, p2, rng, unit)
    o1, o2, _ = data_crossover(o1, o2, rng, cfg)
    return o1, o2


def crossover(name: str, p1: TestCase, p2: TestCase, rng: random.Random, cfg: OperatorConfig,
              unit: TypedSubjectUnit) -> tuple:
    if name == "spx":
        return spx(p1, p2, rng, unit)
    if name == "hmx":
        return hmx(p1, p2, rng, cfg, unit)
    raise ValueError(f"unknown crossover operator {name!r}")


# ------------------------------------------------------------------ mutation


def perturb_value(value, ty: T.TypeTag, rng: random.Random):
    if ty == T.STRING:
        return perturb_string(value, rng)
    if ty == T.BOOLEAN:
        return not value
    sigma = max(1.0, abs(float(value)) * 0.1)
    x = float(value) + rng.gauss(0.0, sigma)
    if ty == T.DOUBLE:
        return x
    new = _project(x, value, ty)
    if new == value:  # keep the mutation effective for small sigmas
        new = _project(x + math.copysign(1.0, x - float(value)), value, ty)
    return new


def perturb_string(s: str, rng: random.Random) -> str:
    ops = ["insert"] + (["delete", "replace"] if s else [])
    op = rng.choice(ops)
    ch = chr(rng.randint(32, 126))
    if op == "insert":
        k = rng.randint(0, len(s))
        return s[:k] + ch + s[k:]
    k = rng.randrange(len(s))
    if op == "delete":
        return s[:k] + s[k + 1:]
    return s[:k] + ch + s[k + 1:]


def _literal_slots(st) -> list:
    if isinstance(st, PrimitiveDef):
        return [-1]
    return [k for k, a in enumerate(st.args) if isinstance(a, Literal)]


def _alternatives(st, unit: TypedSubjectUnit) -> list:
    if isinstance(st, PrimitiveDef):
        return []
    info = parse_key(st.key)
    pool = unit.ctors_of(info.owner) if isinstance(st, ConstructorCall) else unit.methods_of(info.owner)
    return [c for c in pool if c.key != st.key and len(c.param_types) == len(info.params)]


def _shift(st, fn):
    if isinstance(st, PrimitiveDef):
        return st
    args = tuple(Ref(fn(a.pos)) if isinstance(a, Ref) else a for a in st.args)
    if isinstance(st, MethodCall):
        return MethodCall(fn(st.receiver), st.key, args)
    return ConstructorCall(st.key, args)


def _delete(stmts: list, i: int) -> list:
    def fn(p: int) -> int:
        return -1 if p == i else (p - 1 if p > i else p)
    return stmts[:i] + [_shift(s, fn) for s in stmts[i + 1:]]


def _insert(stmts: list, i: int, new: list) -> list:
    k = len(new)
    return stmts[:i] + new + [_shift(s, lambda p: p + k if p >= i else p) for s in stmts[i:]]


def _replace_call(st, info, rng: random.Random):
    """Call ``info`` instead, keeping arguments whose slot type is unchanged."""
    old = parse_key(st.key).params
    args = tuple(a if pt == ot else Ref(-1) if pt.is_ref else Literal(pt, random_literal(pt, rng))
                 for a, pt, ot in zip(st.args, info.param_types, old))
    if isinstance(st, MethodCall):
        return MethodCall(st.receiver, info.key, args)
    return ConstructorCall(info.key, args)


@dataclass
class MutationStats:
    mutated: int = 0
    inserted: int = 0
    kinds: list = field(default_factory=list)


def mutate(test: TestCase, unit: TypedSubjectUnit, rng: random.Random,
           stats: Optional[MutationStats] = None) -> TestCase:
    """Mutate each statement with probability 1/n, maybe insert one call, repair.

    A selected statement has a literal perturbed, its call swapped for another
    callable of the same owner and arity, or is deleted.
    """
    stmts = list(test.statements)
    n = len(stmts)
    if n == 0:
        return repair(test, unit, rng)
    p = 1.0 / n
    chosen = [i for i in range(n) if rng.random() < p]
    # walk backwards so deletions do not disturb pending indexes
    for i in reversed(chosen):
        st = stmts[i]
        ops = ["delete"]
        if _literal_slots(st):
            ops.append("perturb")
        alts = _alternatives(st, unit)
        if alts:
            ops.append("replace")
        op = rng.choice(sorted(ops))
        if op == "perturb":
            k = rng.choice(_literal_slots(st))
            if k < 0:
                stmts[i] = PrimitiveDef(st.type, perturb_value(st.value, st.type, rng))
            else:
                a = st.args[k]
                args = list(st.args)
                args[k] = Literal(a.type, perturb_value(a.value, a.type, rng))
                stmts[i] = _with_args(st, tuple(args))
        elif op == "replace":
            stmts[i] = _replace_call(st, rng.choice(alts), rng)
        else:
            stmts = _delete(stmts, i)
        if stats is not None:
            stats.mutated += 1
            stats.kinds.append(op)
    if rng.random() < p:
        pos = rng.randint(0, len(stmts))
        stmts = _insert(stmts, pos, random_statement(unit, rng, stmts[:pos]))
        if stats is not None:
            stats.inserted += 1
    return repair(TestCase(tuple(stmts)), unit, rng)


def truncate(test: TestCase, max_length: int) -> TestCase:
    """The first ``max_length`` statements; refs point backwards so this stays valid."""
    if len(test) <= max_length:
        return test
    return TestCase(test.statements[:max_length])
