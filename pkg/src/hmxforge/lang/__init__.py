"""The bundled subject language: parsing, checking and control dependencies."""

from hmxforge.lang.ast import CTOR_NAME, Callable, SubjectUnit
from hmxforge.lang.cdg import ControlDependencyGraph, CoverageTarget, build_cdg
from hmxforge.lang.errors import (
    Diagnostic,
    DuplicateName,
    MissingReturn,
    SubjectSyntaxError,
    TypeMismatch,
    UnreachableCode,
    UnresolvedName,
    UnresolvedType,
)
from hmxforge.lang.parser import parse_subject
from hmxforge.lang.printer import pretty
from hmxforge.lang.types import TypeTag
from hmxforge.lang.unit import (
    CallableInfo,
    TypedSubjectUnit,
    enumerate_targets,
    load_source,
    load_subject,
    signature_key,
    typecheck,
)

__all__ = [
    "CTOR_NAME", "Callable", "CallableInfo", "ControlDependencyGraph", "CoverageTarget",
    "Diagnostic", "DuplicateName", "MissingReturn", "SubjectSyntaxError", "SubjectUnit",
    "TypeMismatch", "TypeTag", "TypedSubjectUnit", "UnreachableCode", "UnresolvedName",
    "UnresolvedType", "build_cdg", "enumerate_targets", "load_source", "load_subject",
    "parse_subject", "pretty", "signature_key", "typecheck",
]
