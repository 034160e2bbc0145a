"""Diagnostics raised while loading subjects."""

from __future__ import annotations


class Diagnostic(Exception):
    """A located error in a subject source."""

    def __init__(self, message: str, line: int = 0, col: int = 0) -> None:
        self.message = message
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: {message}" if line else message)


class SubjectSyntaxError(Diagnostic):
    def __init__(self, line: int, col: int, expected: str, found: str) -> None:
        self.expected = expected
        self.found = found
        super().__init__(f"expected {expected}, found {found!r}", line, col)


class DuplicateName(Diagnostic):
    pass


class UnresolvedType(Diagnostic):
    pass


class UnresolvedName(Diagnostic):
    pass


class TypeMismatch(Diagnostic):
    def __init__(self, line: int, col: int, expected: str, found: str) -> None:
        self.expected = expected
        self.found = found
        super().__init__(f"type mismatch: expected {expected}, found {found}", line, col)


class MissingReturn(Diagnostic):
    pass


class UnreachableCode(Diagnostic):
    pass
