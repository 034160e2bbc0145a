"""Type tags of the subject language."""

from __future__ import annotations

from dataclasses import dataclass

INT_MIN, INT_MAX = -(2**31), 2**31 - 1
LONG_MIN, LONG_MAX = -(2**63), 2**63 - 1
CHAR_MAX = 0x10FFFF


@dataclass(frozen=True)
class TypeTag:
    """A primitive type name or a reference to a subject by name."""

    name: str
    is_ref: bool = False

    def __str__(self) -> str:
        return self.name

    @property
    def is_numeric(self) -> bool:
        """Arithmetic types: int, long and double."""
        return not self.is_ref and self.name in _ARITH

    @property
    def is_number_family(self) -> bool:
        """Types recombined with SBX (arithmetic types plus boolean and char)."""
        return not self.is_ref and self.name in _NUMBER_FAMILY

    @property
    def is_primitive(self) -> bool:
        return not self.is_ref and self.name != "void"


INT = TypeTag("int")
LONG = TypeTag("long")
DOUBLE = TypeTag("double")
BOOLEAN = TypeTag("boolean")
CHAR = TypeTag("char")
STRING = TypeTag("string")
VOID = TypeTag("void")
NULL = TypeTag("null")

_ARITH = ("int", "long", "double")
_NUMBER_FAMILY = ("int", "long", "double", "boolean", "char")
PRIMITIVES = {t.name: t for t in (INT, LONG, DOUBLE, BOOLEAN, CHAR, STRING)}
_RANK = {"int": 0, "long": 1, "double": 2}


def ref(name: str) -> TypeTag:
    return TypeTag(name, is_ref=True)


def widens_to(src: TypeTag, dst: TypeTag) -> bool:
    """True if a value of ``src`` may be used where ``dst`` is expected."""
    if src == dst:
        return True
    if src == NULL:
        return dst.is_ref
    if src.is_numeric and dst.is_numeric:
        return _RANK[src.name] <= _RANK[dst.name]
    return False


def wider(a: TypeTag, b: TypeTag) -> TypeTag:
    return a if _RANK[a.name] >= _RANK[b.name] else b
