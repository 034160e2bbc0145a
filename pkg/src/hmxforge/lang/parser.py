"""Lexer and recursive-descent parser for ``.subj`` files."""

from __future__ import annotations

import re
from dataclasses import dataclass

from hmxforge.lang import ast as A
from hmxforge.lang import types as T
from hmxforge.lang.errors import DuplicateName, SubjectSyntaxError

KEYWORDS = {
    "subject", "ctor", "if", "else", "while", "return", "throw", "new",
    "this", "true", "false", "null", "void",
    "int", "long", "double", "boolean", "char", "string",
}
TYPE_WORDS = {"int", "long", "double", "boolean", "char", "string", "void"}
BUILTINS = {"len": 1, "concat": 2, "substring": 3, "charAt": 2, "indexOf": 2}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<double>\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<long>\d+[lL])
  | (?P<int>\d+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<char>'(?:[^'\\\n]|\\.|\\u[0-9a-fA-F]{4})')
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>==|!=|<=|>=|&&|\|\||[-+*/%<>=!(){};,.])
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "0": "\0", "\\": "\\", '"': '"', "'": "'"}


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def _unescape(body: str, line: int, col: int) -> str:
    out = []
    i = 0
    while i < len(body):
        c = body[i]
        if c != "\\":
            out.append(c)
            i += 1
            continue
        nxt = body[i + 1]
        if nxt == "u":
            out.append(chr(int(body[i + 2:i + 6], 16)))
            i += 6
        elif nxt in _ESCAPES:
            out.append(_ESCAPES[nxt])
            i += 2
        else:
            raise SubjectSyntaxError(line, col, "escape sequence", "\\" + nxt)
    return "".join(out)


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            raise SubjectSyntaxError(line, col, "token", source[pos])
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            if kind == "ident" and text in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class Parser:
    def __init__(self, source: str) -> None:
        self.toks = tokenize(source)
        self.i = 0

    # -- token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.text == text and t.kind in ("op", "kw")

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(repr(text))
        return self.advance()

    def expect_ident(self) -> Token:
        if self.tok.kind != "ident":
            raise self.error("identifier")
        return self.advance()

    def error(self, expected: str) -> SubjectSyntaxError:
        t = self.tok
        return SubjectSyntaxError(t.line, t.col, expected, t.text or "<eof>")

    # -- declarations

    def parse_unit(self) -> A.SubjectUnit:
        start = self.expect("subject")
        name = self.expect_ident().text
        self.expect("{")
        unit = A.SubjectUnit(line=start.line, col=start.col, name=name)
        seen_members: set[str] = set()
        ctor_sigs: list[tuple] = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise self.error("'}'")
            if self.at("ctor"):
                t = self.advance()
                params = self.parse_params()
                sig = tuple(p.type for p in params)
                if sig in ctor_sigs:
                    raise DuplicateName(f"duplicate constructor {name}{sig}", t.line, t.col)
                ctor_sigs.append(sig)
                body = self.parse_block()
                unit.constructors.append(
                    A.Callable(line=t.line, col=t.col, name=A.CTOR_NAME, params=params,
                               return_type=T.ref(name), body=body))
                continue
            t = self.tok
            ty = self.parse_type(allow_void=True)
            ident = self.expect_ident()
            if ident.text in seen_members or ident.text in BUILTINS:
                raise DuplicateName(f"duplicate member {ident.text!r}", ident.line, ident.col)
            seen_members.add(ident.text)
            if self.at(";"):
                self.advance()
                if ty == T.VOID:
                    raise SubjectSyntaxError(t.line, t.col, "field type", "void")
                unit.fields.append(A.FieldDecl(line=t.line, col=t.col, name=ident.text, type=ty))
            else:
                params = self.parse_params()
                body = self.parse_block()
                unit.methods.append(
                    A.Callable(line=t.line, col=t.col, name=ident.text, params=params,
                               return_type=ty, body=body))
        end = self.expect("}")
        if self.tok.kind != "eof":
            raise self.error("end of file")
        unit.source_span = (start.line, end.line)
        return unit

    def parse_type(self, allow_void: bool = False) -> T.TypeTag:
        t = self.tok
        if t.kind == "kw" and t.text in TYPE_WORDS:
            if t.text == "void" and not allow_void:
                raise self.error("type")
            self.advance()
            return T.VOID if t.text == "void" else T.PRIMITIVES[t.text]
        if t.kind == "ident":
            self.advance()
            return T.ref(t.text)
        raise self.error("type")

    def parse_params(self) -> list[A.Param]:
        self.expect("(")
        params: list[A.Param] = []
        names: set[str] = set()
        if not self.at(")"):
            while True:
                ty = self.parse_type()
                ident = self.expect_ident()
                if ident.text in names:
                    raise DuplicateName(f"duplicate parameter {ident.text!r}", ident.line, ident.col)
                names.add(ident.text)
                params.append(A.Param(ident.text, ty))
                if self.at(","):
                    self.advance()
                    continue
                break
        self.expect(")")
        return params

    # -- statements

    def parse_block(self) -> list[A.Stmt]:
        self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise self.error("'}'")
            stmts.append(self.parse_stmt())
        self.advance()
        return stmts

    def _is_decl_start(self) -> bool:
        t = self.tok
        if t.kind == "kw" and t.text in TYPE_WORDS and t.text != "void":
            return True
        return t.kind == "ident" and self.peek().kind == "ident"

    def parse_stmt(self) -> A.Stmt:
        t = self.tok
        pos = dict(line=t.line, col=t.col)
        if self.at("if"):
            self.advance()
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            then = self.parse_block()
            orelse = None
            if self.at("else"):
                self.advance()
                orelse = [self.parse_stmt()] if self.at("if") else self.parse_block()
            return A.If(**pos, cond=cond, then=then, orelse=orelse)
        if self.at("while"):
            self.advance()
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            return A.While(**pos, cond=cond, body=self.parse_block())
        if self.at("return"):
            self.advance()
            value = None if self.at(";") else self.parse_expr()
            self.expect(";")
            return A.Return(**pos, value=value)
        if self.at("throw"):
            self.advance()
            value = self.parse_expr()
            self.expect(";")
            return A.Throw(**pos, value=value)
        if self._is_decl_start():
            ty = self.parse_type()
            name = self.expect_ident().text
            self.expect("=")
            init = self.parse_expr()
            self.expect(";")
            return A.VarDecl(**pos, type=ty, name=name, init=init)
        expr = self.parse_expr()
        if self.at("="):
            if not isinstance(expr, (A.Name, A.FieldAccess)):
                raise self.error("';'")
            self.advance()
            value = self.parse_expr()
            self.expect(";")
            return A.Assign(**pos, target=expr, value=value)
        self.expect(";")
        return A.ExprStmt(**pos, expr=expr)

    # -- expressions (precedence climbing)

    _LEVELS = [("||",), ("&&",), ("==", "!="), ("<", "<=", ">", ">="), ("+", "-"), ("*", "/", "%")]

    def parse_expr(self, level: int = 0) -> A.Expr:
        if level == len(self._LEVELS):
            return self.parse_unary()
        left = self.parse_expr(level + 1)
        ops = self._LEVELS[level]
        while self.tok.kind == "op" and self.tok.text in ops:
            t = self.advance()
            right = self.parse_expr(level + 1)
            left = A.Binary(line=t.line, col=t.col, op=t.text, left=left, right=right)
        return left

    def parse_unary(self) -> A.Expr:
        if self.at("-") or self.at("!"):
            t = self.advance()
            return A.Unary(line=t.line, col=t.col, op=t.text, operand=self.parse_unary())
        return self.parse_postfix()

    def parse_args(self) -> list[A.Expr]:
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.parse_expr())
            while self.at(","):
                self.advance()
                args.append(self.parse_expr())
        self.expect(")")
        return args

    def parse_postfix(self) -> A.Expr:
        expr = self.parse_primary()
        while self.at("."):
            self.advance()
            ident = self.expect_ident()
            if self.at("("):
                expr = A.Call(line=ident.line, col=ident.col, receiver=expr, name=ident.text,
                              args=self.parse_args())
            else:
                expr = A.FieldAccess(line=ident.line, col=ident.col, obj=expr, name=ident.text)
        return expr

    def parse_primary(self) -> A.Expr:
        t = self.tok
        pos = dict(line=t.line, col=t.col)
        if t.kind == "int":
            self.advance()
            return A.Literal(**pos, kind=T.INT, value=int(t.text))
        if t.kind == "long":
            self.advance()
            return A.Literal(**pos, kind=T.LONG, value=int(t.text[:-1]))
        if t.kind == "double":
            self.advance()
            return A.Literal(**pos, kind=T.DOUBLE, value=float(t.text))
        if t.kind == "string":
            self.advance()
            return A.Literal(**pos, kind=T.STRING, value=_unescape(t.text[1:-1], t.line, t.col))
        if t.kind == "char":
            self.advance()
            return A.Literal(**pos, kind=T.CHAR, value=ord(_unescape(t.text[1:-1], t.line, t.col)))
        if self.at("true") or self.at("false"):
            self.advance()
            return A.Literal(**pos, kind=T.BOOLEAN, value=t.text == "true")
        if self.at("null"):
            self.advance()
            return A.Literal(**pos, kind=T.NULL, value=None)
        if self.at("this"):
            self.advance()
            return A.This(**pos)
        if self.at("new"):
            self.advance()
            name = self.expect_ident().text
            return A.New(**pos, subject=name, args=self.parse_args())
        if self.at("("):
            self.advance()
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if t.kind == "ident":
            self.advance()
            if self.at("("):
                return A.Call(**pos, receiver=None, name=t.text, args=self.parse_args())
            return A.Name(**pos, ident=t.text)
        raise self.error("expression")


def parse_subject(source: str) -> A.SubjectUnit:
    """Parse one subject definition.

    Raises:
        SubjectSyntaxError: on malformed input, located at the offending token.
        DuplicateName: on repeated members, parameters or constructor signatures.
    """
    unit = Parser(source).parse_unit()
    A.number_nodes(unit)
    return unit
