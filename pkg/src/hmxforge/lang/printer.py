"""Canonical pretty-printer; ``parse_subject(pretty(u)) == u`` structurally."""

from __future__ import annotations

from hmxforge.lang import ast as A
from hmxforge.lang import types as T

_PREC = {"||": 1, "&&": 2, "==": 3, "!=": 3, "<": 4, "<=": 4, ">": 4, ">=": 4,
         "+": 5, "-": 5, "*": 6, "/": 6, "%": 6}
_UNARY_PREC = 7

_STR_ESC = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t", "\r": "\\r", "\0": "\\0"}


def quote_string(s: str) -> str:
    out = []
    for c in s:
        if c in _STR_ESC:
            out.append(_STR_ESC[c])
        elif ord(c) < 0x20 or 0x7F <= ord(c) <= 0xFFFF and not c.isprintable():
            out.append(f"\\u{ord(c):04x}")
        else:
            out.append(c)
    return '"' + "".join(out) + '"'


def quote_char(code: int) -> str:
    c = chr(code)
    if c == "'":
        return "'\\''"
    if c in _STR_ESC and c != '"':
        return "'" + _STR_ESC[c] + "'"
    if code < 0x20 or (code <= 0xFFFF and not c.isprintable()):
        return f"'\\u{code:04x}'"
    return f"'{c}'"


def format_double(v: float) -> str:
    s = repr(float(v))
    if "e" in s and "." not in s.split("e")[0]:
        mant, exp = s.split("e")
        s = f"{mant}.0e{exp}"
    return s


def literal_text(kind: T.TypeTag, value) -> str:
    if kind == T.STRING:
        return quote_string(value)
    if kind == T.CHAR:
        return quote_char(value)
    if kind == T.BOOLEAN:
        return "true" if value else "false"
    if kind == T.DOUBLE:
        return format_double(value)
    if kind == T.LONG:
        return f"{value}L"
    if kind == T.NULL:
        return "null"
    return str(value)


def expr_text(e: A.Expr, parent_prec: int = 0) -> str:
    if isinstance(e, A.Literal):
        text = literal_text(e.kind, e.value)
        # a negative numeric literal only arises from constant mutation
        return f"({text})" if text.startswith("-") else text
    if isinstance(e, A.Name):
        return e.ident
    if isinstance(e, A.This):
        return "this"
    if isinstance(e, A.FieldAccess):
        return f"{expr_text(e.obj, 99)}.{e.name}"
    if isinstance(e, A.Unary):
        return f"{e.op}{expr_text(e.operand, _UNARY_PREC)}"
    if isinstance(e, A.Binary):
        p = _PREC[e.op]
        # left-associative: the right operand needs parens at equal precedence
        text = f"{expr_text(e.left, p)} {e.op} {expr_text(e.right, p + 1)}"
        return f"({text})" if p < parent_prec else text
    if isinstance(e, A.Call):
        args = ", ".join(expr_text(a) for a in e.args)
        if e.receiver is None:
            return f"{e.name}({args})"
        return f"{expr_text(e.receiver, 99)}.{e.name}({args})"
    if isinstance(e, A.New):
        return f"new {e.subject}({', '.join(expr_text(a) for a in e.args)})"
    raise TypeError(f"not an expression: {e!r}")


def _block(stmts: list, indent: int) -> list[str]:
    lines: list[str] = []
    for s in stmts:
        lines.extend(_stmt(s, indent))
    return lines


def _stmt(s: A.Stmt, indent: int) -> list[str]:
    pad = "  " * indent
    if isinstance(s, A.VarDecl):
        return [f"{pad}{s.type} {s.name} = {expr_text(s.init)};"]
    if isinstance(s, A.Assign):
        return [f"{pad}{expr_text(s.target)} = {expr_text(s.value)};"]
    if isinstance(s, A.Return):
        return [f"{pad}return;" if s.value is None else f"{pad}return {expr_text(s.value)};"]
    if isinstance(s, A.Throw):
        return [f"{pad}throw {expr_text(s.value)};"]
    if isinstance(s, A.ExprStmt):
        return [f"{pad}{expr_text(s.expr)};"]
    if isinstance(s, A.While):
        return [f"{pad}while ({expr_text(s.cond)}) {{", *_block(s.body, indent + 1), f"{pad}}}"]
    if isinstance(s, A.If):
        out = [f"{pad}if ({expr_text(s.cond)}) {{", *_block(s.then, indent + 1)]
        if s.orelse is None:
            out.append(f"{pad}}}")
        else:
            out.append(f"{pad}}} else {{")
            out.extend(_block(s.orelse, indent + 1))
            out.append(f"{pad}}}")
        return out
    raise TypeError(f"not a statement: {s!r}")


def _params(c: A.Callable) -> str:
    return ", ".join(f"{p.type} {p.name}" for p in c.params)


def pretty(unit: A.SubjectUnit) -> str:
    lines = [f"subject {unit.name} {{"]
    for f in unit.fields:
        lines.append(f"  {f.type} {f.name};")
    for c in unit.constructors:
        lines.append(f"  ctor({_params(c)}) {{")
        lines.extend(_block(c.body, 2))
        lines.append("  }")
    for m in unit.methods:
        lines.append(f"  {m.return_type} {m.name}({_params(m)}) {{")
        lines.extend(_block(m.body, 2))
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"
